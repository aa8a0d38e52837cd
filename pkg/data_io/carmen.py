# -*- coding: utf-8 -*-
"""
data_io/carmen.py - CARMEN 로그 파서
======================================
CARMEN 2D 레이저 로그의 FLASER / ODOM 메시지를 LogRecord 로 변환하고,
연속된 오도메트리 포즈에서 속도 입력(OdometryInput)을 역산합니다.

지원 형식:
    FLASER n r_1 .. r_n x y θ odom_x odom_y odom_θ timestamp host log_timestamp
    ODOM x y θ tv rv accel timestamp host log_timestamp

사용 예시:
    >>> log = parse_carmen("intel.log")
    >>> print(len(log.lasers()), log.skipped)
"""

import math
import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Tuple

import chardet
import numpy as np

from core.geometry import normalize_angle
from models.measurement import Scan
from models.motion import OdometryInput

# ── 로거 설정 ──
logger = logging.getLogger(__name__)

LASER = "laser"
ODOM = "odom"

DEFAULT_FOV = math.pi
DEFAULT_RANGE_MAX = 50.0
DEFAULT_DT_MIN = 1e-3

_FLASER_FIXED_TOKENS = 11
_ODOM_TOKENS = 10


class CarmenParseError(ValueError):
    """CARMEN 로그 형식 오류 (줄 번호 포함)"""


@dataclass(frozen=True, eq=False)
class LogRecord:
    """
    CARMEN 로그 레코드 하나

    Attributes:
        kind (str): LASER 또는 ODOM
        timestamp (float): 시각 [s]
        pose (tuple): (x, y, θ). LASER 는 레이저 포즈, ODOM 은 오도메트리 포즈
        odom_pose (tuple | None): LASER 레코드의 오도메트리 포즈
        ranges (np.ndarray | None): LASER 레코드의 거리 값
        velocities (tuple | None): ODOM 레코드의 (tv, rv, accel)
        host (str): 기록 호스트
        log_timestamp (float): 로깅 시각
    """

    kind: str
    timestamp: float
    pose: Tuple[float, float, float]
    odom_pose: Optional[Tuple[float, float, float]] = None
    ranges: Optional[np.ndarray] = None
    velocities: Optional[Tuple[float, float, float]] = None
    host: str = ""
    log_timestamp: float = 0.0

    def to_scan(self, fov: float = DEFAULT_FOV, range_max: float = DEFAULT_RANGE_MAX) -> Scan:
        """LASER 레코드를 시야각 fov 를 균등 분할한 Scan 으로 변환합니다."""
        if self.kind != LASER:
            raise ValueError(f"LASER 레코드만 스캔으로 변환할 수 있습니다: {self.kind}")
        n = self.ranges.size
        increment = fov / (n - 1) if n > 1 else fov
        return Scan(ranges=self.ranges, angle_min=-0.5 * fov, angle_increment=increment, range_max=range_max)


@dataclass
class CarmenLog:
    """파싱 결과: 시각순 레코드와 건너뛴 메시지 종류별 개수"""

    records: List[LogRecord] = field(default_factory=list)
    skipped: Counter = field(default_factory=Counter)
    encoding: str = "utf-8"

    def lasers(self) -> List[LogRecord]:
        return [r for r in self.records if r.kind == LASER]

    def odoms(self) -> List[LogRecord]:
        return [r for r in self.records if r.kind == ODOM]


# ═══════════════════════════════════════════
# 파싱
# ═══════════════════════════════════════════

def _float(token: str, line_no: int, name: str) -> float:
    try:
        return float(token)
    except ValueError:
        logger.error(f"CARMEN {line_no}번째 줄 숫자 오류: {name}={token!r}")
        raise CarmenParseError(f"{line_no}번째 줄: {name} 값이 숫자가 아닙니다 ({token!r})")


def _parse_flaser(tokens: List[str], line_no: int) -> LogRecord:
    if len(tokens) < 2:
        raise CarmenParseError(f"{line_no}번째 줄: FLASER 빔 개수가 없습니다")
    try:
        n = int(tokens[1])
    except ValueError:
        raise CarmenParseError(f"{line_no}번째 줄: FLASER 빔 개수가 정수가 아닙니다 ({tokens[1]!r})")
    if n < 1:
        raise CarmenParseError(f"{line_no}번째 줄: FLASER 빔 개수는 1 이상이어야 합니다 ({n})")
    if len(tokens) != n + _FLASER_FIXED_TOKENS:
        logger.error(f"CARMEN {line_no}번째 줄 토큰 수 불일치: n={n}, 토큰 {len(tokens)}개")
        raise CarmenParseError(
            f"{line_no}번째 줄: FLASER n={n} 이면 토큰 {n + _FLASER_FIXED_TOKENS}개가 필요합니다 "
            f"(읽은 토큰 {len(tokens)}개)"
        )
    ranges = np.array([_float(t, line_no, f"r_{i + 1}") for i, t in enumerate(tokens[2:2 + n])])
    names = ("x", "y", "theta", "odom_x", "odom_y", "odom_theta", "timestamp")
    values = [_float(t, line_no, name) for t, name in zip(tokens[2 + n:9 + n], names)]
    return LogRecord(
        kind=LASER,
        timestamp=values[6],
        pose=(values[0], values[1], values[2]),
        odom_pose=(values[3], values[4], values[5]),
        ranges=ranges,
        host=tokens[9 + n],
        log_timestamp=_float(tokens[10 + n], line_no, "log_timestamp"),
    )


def _parse_odom(tokens: List[str], line_no: int) -> LogRecord:
    if len(tokens) != _ODOM_TOKENS:
        logger.error(f"CARMEN {line_no}번째 줄 ODOM 토큰 수 오류: {len(tokens)}개")
        raise CarmenParseError(f"{line_no}번째 줄: ODOM 은 토큰 {_ODOM_TOKENS}개가 필요합니다 (읽은 토큰 {len(tokens)}개)")
    names = ("x", "y", "theta", "tv", "rv", "accel", "timestamp")
    values = [_float(t, line_no, name) for t, name in zip(tokens[1:8], names)]
    return LogRecord(
        kind=ODOM,
        timestamp=values[6],
        pose=(values[0], values[1], values[2]),
        velocities=(values[3], values[4], values[5]),
        host=tokens[8],
        log_timestamp=_float(tokens[9], line_no, "log_timestamp"),
    )


def parse_carmen_lines(lines: Iterable[str]) -> CarmenLog:
    """
    CARMEN 텍스트 줄들을 파싱합니다.

    빈 줄과 '#' 주석은 무시하고, 알 수 없는 메시지 종류는 개수만 셉니다.
    레코드는 timestamp 기준 안정 정렬됩니다.

    Raises:
        CarmenParseError: 숫자 형식 오류 또는 토큰 수 불일치
    """
    log = CarmenLog()
    for line_no, line in enumerate(lines, start=1):
        tokens = line.split()
        if not tokens or tokens[0].startswith("#"):
            continue
        kind = tokens[0]
        if kind == "FLASER":
            log.records.append(_parse_flaser(tokens, line_no))
        elif kind == "ODOM":
            log.records.append(_parse_odom(tokens, line_no))
        else:
            log.skipped[kind] += 1
    log.records.sort(key=lambda r: r.timestamp)
    if log.skipped:
        logger.info(f"CARMEN 미지원 메시지 건너뜀: {dict(log.skipped)}")
    return log


def detect_encoding(raw: bytes) -> str:
    """chardet 으로 로그 인코딩을 추정합니다 (실패 시 utf-8)."""
    if not raw:
        return "utf-8"
    guess = chardet.detect(raw[:65536])
    return guess.get("encoding") or "utf-8"


def parse_carmen(path: str) -> CarmenLog:
    """
    CARMEN 로그 파일을 파싱합니다.

    Args:
        path: 로그 파일 경로

    Returns:
        CarmenLog: 시각순 레코드와 건너뛴 메시지 개수

    Raises:
        FileNotFoundError: 파일이 없을 때
        CarmenParseError: 형식 오류
    """
    try:
        with open(path, "rb") as f:
            raw = f.read()
    except FileNotFoundError:
        logger.error(f"CARMEN 로그 파일을 찾을 수 없습니다: {path}")
        raise
    encoding = detect_encoding(raw)
    text = raw.decode(encoding, errors="replace")
    log = parse_carmen_lines(text.splitlines())
    log.encoding = encoding
    logger.info(
        f"CARMEN 로그 로드: {path} (인코딩 {encoding}, 레이저 {len(log.lasers())}개, "
        f"오도메트리 {len(log.odoms())}개)"
    )
    return log


def format_record(record: LogRecord) -> str:
    """LogRecord 를 CARMEN 한 줄로 직렬화합니다 (실수는 repr 로 정확히 보존)."""
    def fmt(values) -> str:
        return " ".join(repr(float(v)) for v in values)

    if record.kind == LASER:
        return (
            f"FLASER {record.ranges.size} {fmt(record.ranges)} {fmt(record.pose)} "
            f"{fmt(record.odom_pose)} {record.timestamp!r} {record.host} {record.log_timestamp!r}"
        )
    if record.kind == ODOM:
        return (
            f"ODOM {fmt(record.pose)} {fmt(record.velocities)} "
            f"{record.timestamp!r} {record.host} {record.log_timestamp!r}"
        )
    raise ValueError(f"알 수 없는 레코드 종류입니다: {record.kind}")


# ═══════════════════════════════════════════
# 속도 역산
# ═══════════════════════════════════════════

def derive_velocities(prev_pose: Tuple[float, float, float], prev_time: float,
                      pose: Tuple[float, float, float], time: float,
                      previous: Optional[OdometryInput] = None,
                      dt_min: float = DEFAULT_DT_MIN) -> OdometryInput:
    """
    연속된 두 오도메트리 포즈에서 (v, ω) 를 역산합니다.

    정확한 원호 적분의 역변환이므로, 결과를 integrate_pose 로 적분하면
    원호 운동으로 생긴 포즈 변화가 그대로 재현됩니다. Δθ 는 (-π, π] 로 감습니다.

    Args:
        prev_pose, prev_time: 이전 포즈 (x, y, θ) 와 시각
        pose, time: 현재 포즈와 시각
        previous: 직전 속도 입력 (Δt < dt_min 일 때 재사용)
        dt_min: 최소 시간 간격 [s]

    Returns:
        OdometryInput: dt 는 실제 Δt (음수면 0)
    """
    dt = time - prev_time
    if dt < dt_min:
        v, omega = (previous.v, previous.omega) if previous is not None else (0.0, 0.0)
        return OdometryInput(v=v, omega=omega, dt=max(dt, 0.0))

    x0, y0, th0 = prev_pose
    x1, y1, th1 = pose
    dtheta = normalize_angle(th1 - th0)
    dx, dy = x1 - x0, y1 - y0
    local_x = math.cos(th0) * dx + math.sin(th0) * dy
    local_y = -math.sin(th0) * dx + math.cos(th0) * dy
    half = 0.5 * dtheta
    # 원호의 현은 진행 방향에서 Δθ/2 만큼 기울어짐; 호 길이 = 현 길이 · h / sin h
    chord = local_x * math.cos(half) + local_y * math.sin(half)
    arc = chord / float(np.sinc(half / math.pi))
    return OdometryInput(v=arc / dt, omega=dtheta / dt, dt=dt)

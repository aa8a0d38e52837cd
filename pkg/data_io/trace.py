# -*- coding: utf-8 -*-
"""
data_io/trace.py - 사이클 트레이스 CSV 및 평가
================================================
CycleReport 스트림을 CSV 로 저장/로드하고, 궤적 오차(ATE, 각도 RMSE),
신뢰도-오차 상관, 회복 지연, 실패 감지 지연, 추정 점프 등 평가 지표와
합격 기준 표를 계산합니다.

CSV 열:
    cycle, time_s, est_x, est_y, est_yaw, gt_x, gt_y, gt_yaw,
    reliability, mae, n_global_samples, n_unknown_beams
    (gt 가 없거나 MAE 가 정의되지 않으면 빈 칸, 실수는 repr 로 기록)

사용 예시:
    >>> write_trace(reports, "output/success.csv")
    >>> rows = read_trace("output/success.csv")
    >>> summary = summarize_trace(rows)
"""

import os
import csv
import json
import math
import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from core.geometry import Pose2D
from localization.state import CYCLE_REPORT_HEADER, CycleReport

# ── 로거 설정 ──
logger = logging.getLogger(__name__)


class TraceFormatError(ValueError):
    """트레이스 CSV 형식 오류"""


@dataclass(frozen=True)
class EvalThresholds:
    """
    평가 임계값

    Attributes:
        recovery_threshold (float): 회복 판정 위치 오차 [m]
        recovery_sustain (int): 회복 유지 사이클 수
        reliability_high (float): 높은 신뢰도 기준
        warmup_cycles (int): 신뢰도 통계에서 제외할 초기 사이클 수
        failure_error (float): 실패 시작 위치 오차 [m]
        failure_reliability (float): 실패 감지로 보는 신뢰도 상한
        failure_window (int): 실패 감지 허용 사이클 수
        max_jump (float): 허용 추정 점프 [m]
        recovery_horizon (int): 회복 허용 사이클 수
        success_error (float): 성공 주행 최대 위치 오차 [m]
        success_fraction (float): 성공 주행 높은 신뢰도 비율
    """

    recovery_threshold: float = 0.3
    recovery_sustain: int = 10
    reliability_high: float = 0.9
    warmup_cycles: int = 20
    failure_error: float = 0.5
    failure_reliability: float = 0.1
    failure_window: int = 30
    max_jump: float = 0.5
    recovery_horizon: int = 60
    success_error: float = 0.3
    success_fraction: float = 0.9


# ═══════════════════════════════════════════
# CSV 입출력
# ═══════════════════════════════════════════

def write_trace(reports: Sequence[CycleReport], path: str) -> str:
    """CycleReport 목록을 CSV 로 저장하고 경로를 반환합니다."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(CYCLE_REPORT_HEADER)
        for report in reports:
            writer.writerow(report.to_row())
    logger.info(f"트레이스 저장: {path} ({len(reports)} 사이클)")
    return path


def _optional_float(text: str, line_no: int, name: str) -> Optional[float]:
    if text == "":
        return None
    try:
        return float(text)
    except ValueError:
        logger.error(f"트레이스 {line_no}번째 줄 숫자 오류: {name}={text!r}")
        raise TraceFormatError(f"{line_no}번째 줄: {name} 값이 숫자가 아닙니다 ({text!r})")


def _required_float(text: str, line_no: int, name: str) -> float:
    value = _optional_float(text, line_no, name)
    if value is None:
        raise TraceFormatError(f"{line_no}번째 줄: {name} 값이 비어 있습니다")
    return value


def read_trace(path: str) -> List[CycleReport]:
    """
    트레이스 CSV 를 CycleReport 목록으로 읽습니다.

    Raises:
        FileNotFoundError: 파일이 없을 때
        TraceFormatError: 빈 파일, 헤더 불일치, 열 수/숫자 오류
    """
    if not os.path.exists(path):
        logger.error(f"트레이스 파일을 찾을 수 없습니다: {path}")
        raise FileNotFoundError(f"트레이스 파일을 찾을 수 없습니다: {path}")
    with open(path, "r", encoding="utf-8", newline="") as f:
        rows = list(csv.reader(f))
    if not rows:
        raise TraceFormatError(f"{path}: 빈 트레이스 파일입니다")
    if rows[0] != CYCLE_REPORT_HEADER:
        logger.error(f"트레이스 헤더 불일치: {rows[0]}")
        raise TraceFormatError(f"{path}: 헤더가 {','.join(CYCLE_REPORT_HEADER)} 이어야 합니다")
    if len(rows) == 1:
        raise TraceFormatError(f"{path}: 사이클 기록이 없습니다")

    reports = []
    for line_no, row in enumerate(rows[1:], start=2):
        if len(row) != len(CYCLE_REPORT_HEADER):
            raise TraceFormatError(
                f"{line_no}번째 줄: 열 {len(CYCLE_REPORT_HEADER)}개가 필요합니다 (읽은 열 {len(row)}개)"
            )
        values = dict(zip(CYCLE_REPORT_HEADER, row))
        try:
            cycle = int(values["cycle"])
            n_global = int(values["n_global_samples"])
            n_unknown = int(values["n_unknown_beams"])
        except ValueError:
            raise TraceFormatError(f"{line_no}번째 줄: 정수 열 형식 오류")
        gt_values = [_optional_float(values[k], line_no, k) for k in ("gt_x", "gt_y", "gt_yaw")]
        gt = None if any(v is None for v in gt_values) else Pose2D(*gt_values)
        reports.append(CycleReport(
            cycle=cycle,
            time_s=_required_float(values["time_s"], line_no, "time_s"),
            estimate=Pose2D(*[_required_float(values[k], line_no, k) for k in ("est_x", "est_y", "est_yaw")]),
            reliability=_required_float(values["reliability"], line_no, "reliability"),
            mae=_optional_float(values["mae"], line_no, "mae"),
            n_global_samples=n_global,
            n_unknown_beams=n_unknown,
            gt=gt,
        ))
    return reports


# ═══════════════════════════════════════════
# 평가 지표
# ═══════════════════════════════════════════

def position_errors(reports: Sequence[CycleReport]) -> np.ndarray:
    """사이클별 위치 오차 (gt 가 없으면 NaN)"""
    return np.array([
        np.nan if r.gt is None else r.position_error() for r in reports
    ], dtype=float)


def angle_errors(reports: Sequence[CycleReport]) -> np.ndarray:
    return np.array([
        np.nan if r.gt is None else r.angle_error() for r in reports
    ], dtype=float)


def _rmse(values: np.ndarray) -> Optional[float]:
    values = values[np.isfinite(values)]
    if values.size == 0:
        return None
    return float(np.sqrt(np.mean(values ** 2)))


def absolute_trajectory_error(reports: Sequence[CycleReport]) -> Optional[float]:
    """위치 오차의 RMSE (gt 가 있는 사이클만)"""
    return _rmse(position_errors(reports))


def angular_rmse(reports: Sequence[CycleReport]) -> Optional[float]:
    return _rmse(angle_errors(reports))


def reliability_error_correlation(reports: Sequence[CycleReport]) -> Optional[float]:
    """신뢰도와 위치 오차의 피어슨 상관계수 (분산이 0 이거나 표본이 2개 미만이면 None)"""
    errors = position_errors(reports)
    rel = np.array([r.reliability for r in reports], dtype=float)
    ok = np.isfinite(errors) & np.isfinite(rel)
    if np.count_nonzero(ok) < 2:
        return None
    errors, rel = errors[ok], rel[ok]
    if np.std(errors) == 0 or np.std(rel) == 0:
        return None
    return float(np.corrcoef(rel, errors)[0, 1])


def recovery_cycle(reports: Sequence[CycleReport], threshold: float = 0.3, sustain: int = 10) -> Optional[int]:
    """
    위치 오차가 threshold 미만으로 sustain 사이클 연속 유지되기 시작한 첫 사이클 번호.
    없으면 None.
    """
    below = position_errors(reports) < threshold
    run = 0
    for i, ok in enumerate(below):
        run = run + 1 if ok else 0
        if run >= sustain:
            return reports[i - sustain + 1].cycle
    return None


def fraction_reliable(reports: Sequence[CycleReport], high: float = 0.9, warmup: int = 20) -> Optional[float]:
    """warmup 이후 사이클 중 신뢰도가 high 를 넘는 비율 (신뢰도 NaN 인 기저 모드는 None)"""
    rel = np.array([r.reliability for r in reports if r.cycle >= warmup], dtype=float)
    if rel.size == 0 or not np.isfinite(rel).any():
        return None
    return float(np.mean(rel > high))


def failure_detection(reports: Sequence[CycleReport], failure_error: float = 0.5,
                      failure_reliability: float = 0.1) -> tuple:
    """
    (실패 시작 사이클, 감지 지연 사이클 수).
    실패 시작은 위치 오차가 failure_error 를 처음 넘은 사이클, 감지는 그 이후
    신뢰도가 failure_reliability 미만이 된 첫 사이클. 해당 없으면 None.
    """
    errors = position_errors(reports)
    onset = next((i for i, e in enumerate(errors) if e > failure_error), None)
    if onset is None:
        return None, None
    for i in range(onset, len(reports)):
        if reports[i].reliability < failure_reliability:
            return reports[onset].cycle, i - onset
    return reports[onset].cycle, None


def estimate_jumps(reports: Sequence[CycleReport]) -> np.ndarray:
    """연속 사이클 사이 추정 위치 변위"""
    if len(reports) < 2:
        return np.zeros(0)
    xy = np.array([[r.estimate.x, r.estimate.y] for r in reports])
    return np.hypot(*np.diff(xy, axis=0).T)


def mae_exceedances_while_reliable(reports: Sequence[CycleReport], d_th: float, min_reliability: float = 0.5) -> int:
    """MAE 가 d_th 를 넘었지만 신뢰도가 min_reliability 를 넘게 유지된 사이클 수"""
    return sum(
        1 for r in reports
        if r.mae is not None and r.mae > d_th and r.reliability > min_reliability
    )


def summarize_trace(reports: Sequence[CycleReport], thresholds: EvalThresholds = EvalThresholds(),
                    d_th: Optional[float] = None) -> dict:
    """트레이스 평가 요약 (JSON 직렬화 가능한 dict)"""
    if not reports:
        raise TraceFormatError("빈 트레이스는 평가할 수 없습니다")
    errors = position_errors(reports)
    angles = angle_errors(reports)
    jumps = estimate_jumps(reports)
    onset, latency = failure_detection(reports, thresholds.failure_error, thresholds.failure_reliability)
    finite = errors[np.isfinite(errors)]
    summary = {
        "cycles": len(reports),
        "final_position_error": None if not np.isfinite(errors[-1]) else float(errors[-1]),
        "final_angle_error": None if not np.isfinite(angles[-1]) else float(angles[-1]),
        "max_position_error": float(finite.max()) if finite.size else None,
        "ate": absolute_trajectory_error(reports),
        "angular_rmse": angular_rmse(reports),
        "reliability_error_correlation": reliability_error_correlation(reports),
        "fraction_reliable": fraction_reliable(reports, thresholds.reliability_high, thresholds.warmup_cycles),
        "recovery_cycle": recovery_cycle(reports, thresholds.recovery_threshold, thresholds.recovery_sustain),
        "failure_onset_cycle": onset,
        "failure_detection_latency": latency,
        "max_estimate_jump": float(jumps.max()) if jumps.size else 0.0,
        "d_th": d_th,
        "mae_exceed_while_reliable": None if d_th is None else mae_exceedances_while_reliable(reports, d_th),
    }
    summary["acceptance"] = acceptance_table(summary, thresholds)
    return summary


def acceptance_table(summary: dict, thresholds: EvalThresholds = EvalThresholds()) -> dict:
    """
    요약에서 합격 기준별 통과 여부를 계산합니다. 판정할 수 없는 기준은 None.

    Returns:
        dict: {"tracking_reliability", "failure_detection", "relocalization", "jump_suppression"}
    """
    frac = summary.get("fraction_reliable")
    max_err = summary.get("max_position_error")
    tracking = None
    if frac is not None and max_err is not None:
        tracking = bool(max_err < thresholds.success_error and frac >= thresholds.success_fraction)

    detection = None
    if summary.get("failure_onset_cycle") is not None and frac is not None:
        latency = summary.get("failure_detection_latency")
        detection = latency is not None and latency <= thresholds.failure_window

    relocalization = None
    if max_err is not None:
        recovered = summary.get("recovery_cycle")
        relocalization = recovered is not None and recovered <= thresholds.recovery_horizon

    return {
        "tracking_reliability": tracking,
        "failure_detection": detection,
        "relocalization": relocalization,
        "jump_suppression": bool(summary.get("max_estimate_jump", 0.0) < thresholds.max_jump),
    }


def _json_safe(value):
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, dict):
        return {k: _json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_safe(v) for v in value]
    return value


def write_summary(summary: dict, path: str) -> str:
    """요약을 JSON 으로 저장합니다 (NaN/inf 는 null)."""
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(_json_safe(summary), f, ensure_ascii=False, indent=2, sort_keys=True)
        f.write("\n")
    logger.info(f"요약 저장: {path}")
    return path


def dumps_summary(summary: dict) -> str:
    return json.dumps(_json_safe(summary), ensure_ascii=False, indent=2, sort_keys=True)

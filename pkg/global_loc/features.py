# -*- coding: utf-8 -*-
"""
global_loc/features.py - 자유 공간 특징 (키포인트 + 기술자)
=============================================================
가우시안으로 평활화한 거리장에서 극대/극소/안장점을 검출하고,
회전 불변 기술자(주방향, 평균 거리장 값, 17빈 상대 기울기 히스토그램)를 만들어
지도 간 매칭에 사용합니다.

단위 규칙:
    - 기울기 크기는 셀당 미터 [m/cell] 로 grad_eps 와 비교
    - Hessian 고유값은 [1/m] 로 hess_eps 와 비교 (능선 위의 퇴화점 제거)

사용 예시:
    >>> keypoints = build_keypoints(df, FeatureConfig())
    >>> matches = match_features(local_keypoints, keypoints, FeatureConfig())
"""

import os
import hashlib
import math
import logging
from dataclasses import dataclass
from typing import List, Optional

import numpy as np
from scipy import ndimage

from core.grid_map import DistanceField, FREE

# ── 로거 설정 ──
logger = logging.getLogger(__name__)

MAXIMA = "maxima"
MINIMA = "minima"
SADDLE = "saddle"
KEYPOINT_KINDS = (MAXIMA, MINIMA, SADDLE)

ORIENTATION_BINS = 36
RELATIVE_BINS = 16
DESCRIPTOR_SIZE = RELATIVE_BINS + 1


@dataclass(frozen=True)
class FeatureConfig:
    """
    Attributes:
        sigma_smooth (float): 거리장 평활화 표준편차 [m]
        window (float): 기술자 원형 창 지름 [m]
        grad_eps (float): 저기울기 판정 임계값 [m/cell]
        hess_eps (float): Hessian 고유값 최소 크기 [1/m]
        avg_df_threshold (float): 매칭 시 평균 거리장 값 차이 상한 [m]
        ratio_const (float): 비율 검사 상수 (ratio·최소 < 차순위 이면 채택)
    """

    sigma_smooth: float = 0.5
    window: float = 2.0
    grad_eps: float = 0.01
    hess_eps: float = 0.05
    avg_df_threshold: float = 0.3
    ratio_const: float = 1.25

    def __post_init__(self):
        for name in ("sigma_smooth", "window", "grad_eps"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} 는 0보다 커야 합니다: {getattr(self, name)}")
        if self.hess_eps < 0 or self.avg_df_threshold < 0:
            raise ValueError("hess_eps, avg_df_threshold 는 0 이상이어야 합니다")
        if self.ratio_const < 1.0:
            raise ValueError(f"ratio_const 는 1 이상이어야 합니다: {self.ratio_const}")


@dataclass(frozen=True, eq=False)
class Keypoint:
    """
    자유 공간 키포인트

    Attributes:
        x, y (float): 월드 좌표 [m]
        kind (str): maxima / minima / saddle
        orientation (float): 주방향 [rad]
        avg_df (float): 창 내부 평균 거리장 값 [m]
        descriptor (np.ndarray): (17,) 정규화 히스토그램
    """

    x: float
    y: float
    kind: str
    orientation: float = 0.0
    avg_df: float = 0.0
    descriptor: Optional[np.ndarray] = None


@dataclass(frozen=True, eq=False)
class FeatureMatch:
    global_kp: Keypoint
    local_kp: Keypoint
    score: float


class FeatureField:
    """
    평활화된 거리장과 그 미분을 한 번 계산해 두고 검출/기술에 재사용합니다.

    Args:
        df: 거리장
        sigma_smooth: 평활화 표준편차 [m]
    """

    def __init__(self, df: DistanceField, sigma_smooth: float):
        if not sigma_smooth > 0:
            raise ValueError(f"sigma_smooth 는 0보다 커야 합니다: {sigma_smooth}")
        self.df = df
        self.grid = df.grid
        res = self.grid.resolution
        self.smoothed = ndimage.gaussian_filter(
            np.asarray(df.dist, dtype=float), sigma=sigma_smooth / res, mode="nearest",
        )
        # axis 0 = row(+y), axis 1 = col(+x), 단위 m/cell
        self.grad_y, self.grad_x = np.gradient(self.smoothed)
        hyy, hyx = np.gradient(self.grad_y)
        hxy, hxx = np.gradient(self.grad_x)
        scale = 1.0 / (res * res)
        self.hxx = hxx * scale
        self.hyy = hyy * scale
        self.hxy = 0.5 * (hxy + hyx) * scale
        self.grad_mag = np.hypot(self.grad_x, self.grad_y)
        self.grad_angle = np.arctan2(self.grad_y, self.grad_x) + self.grid.origin.theta
        self.free = self.grid.cells == FREE

    # ═══════════════════════════════════════════
    # 검출
    # ═══════════════════════════════════════════

    def classify_cells(self, cfg: FeatureConfig) -> dict:
        """종류별 후보 셀 마스크"""
        det = self.hxx * self.hyy - self.hxy ** 2
        half_trace = 0.5 * (self.hxx + self.hyy)
        root = np.sqrt(np.maximum(half_trace ** 2 - det, 0.0))
        lam_hi = half_trace + root
        lam_lo = half_trace - root

        flat = self.free & (self.grad_mag < cfg.grad_eps)
        strong = (np.abs(lam_hi) > cfg.hess_eps) & (np.abs(lam_lo) > cfg.hess_eps)
        base = flat & strong
        return {
            MAXIMA: base & (lam_hi < 0),
            MINIMA: base & (lam_lo > 0),
            SADDLE: base & (lam_lo < 0) & (lam_hi > 0),
            "_det": det,
        }

    def detect(self, cfg: FeatureConfig) -> List[Keypoint]:
        masks = self.classify_cells(cfg)
        responses = {
            MAXIMA: self.smoothed,
            MINIMA: -self.smoothed,
            SADDLE: np.abs(masks["_det"]),
        }
        keypoints = []
        for kind in KEYPOINT_KINDS:
            mask = masks[kind]
            if not mask.any():
                continue
            response = np.where(mask, responses[kind], -np.inf)
            local_max = ndimage.maximum_filter(response, size=3, mode="constant", cval=-np.inf)
            survivors = mask & (response >= local_max)
            rows, cols = np.nonzero(survivors)
            # 동률 평탄부 처리: 응답 내림차순으로 8-이웃 중복 제거
            order = np.argsort(-response[rows, cols], kind="stable")
            taken = np.zeros(mask.shape, dtype=bool)
            for r, c in zip(rows[order], cols[order]):
                if taken[max(r - 1, 0):r + 2, max(c - 1, 0):c + 2].any():
                    continue
                taken[r, c] = True
                center = self.grid.cell_to_world(np.array([r]), np.array([c]))[0]
                keypoints.append(Keypoint(x=float(center[0]), y=float(center[1]), kind=kind))
        logger.debug(f"키포인트 검출: {len(keypoints)}개")
        return keypoints

    # ═══════════════════════════════════════════
    # 기술자
    # ═══════════════════════════════════════════

    def describe(self, x: float, y: float, window: float, grad_eps: float) -> Optional[tuple]:
        """
        (x, y) 중심 원형 창의 기술자.

        Returns:
            tuple | None: (orientation, avg_df, descriptor). 창에 자유 셀이 없으면 None
        """
        grid = self.grid
        rows, cols = grid.world_to_cell(np.array([[x, y]]))
        r0, c0 = int(rows[0]), int(cols[0])
        radius = 0.5 * window / grid.resolution
        span = int(math.ceil(radius))
        r_lo, r_hi = max(r0 - span, 0), min(r0 + span + 1, grid.height)
        c_lo, c_hi = max(c0 - span, 0), min(c0 + span + 1, grid.width)
        if r_lo >= r_hi or c_lo >= c_hi:
            return None

        rr, cc = np.mgrid[r_lo:r_hi, c_lo:c_hi]
        in_circle = (rr - r0) ** 2 + (cc - c0) ** 2 <= radius * radius
        cells = in_circle & self.free[r_lo:r_hi, c_lo:c_hi]
        if not cells.any():
            return None

        mag = self.grad_mag[r_lo:r_hi, c_lo:c_hi][cells]
        ang = np.mod(self.grad_angle[r_lo:r_hi, c_lo:c_hi][cells], 2 * math.pi)
        avg_df = float(self.df.dist[r_lo:r_hi, c_lo:c_hi][cells].mean())
        strong = mag >= grad_eps

        orientation = 0.0
        if strong.any():
            orientation = dominant_orientation(ang[strong], mag[strong])

        descriptor = np.zeros(DESCRIPTOR_SIZE)
        rel = np.mod(ang[strong] - orientation, 2 * math.pi)
        idx = np.minimum((rel / (2 * math.pi / RELATIVE_BINS)).astype(np.int64), RELATIVE_BINS - 1)
        np.add.at(descriptor, idx, 1.0)
        descriptor[RELATIVE_BINS] = float(np.count_nonzero(~strong))
        descriptor /= descriptor.sum()
        return orientation, avg_df, descriptor


def dominant_orientation(angles: np.ndarray, magnitudes: np.ndarray) -> float:
    """
    36빈 기울기 방향 히스토그램(크기 가중, 인접 빈 선형 보간)의 최빈 빈 중심 [rad].
    """
    width = 2 * math.pi / ORIENTATION_BINS
    position = np.mod(angles, 2 * math.pi) / width - 0.5
    lower = np.floor(position)
    frac = position - lower
    lower = np.mod(lower.astype(np.int64), ORIENTATION_BINS)
    upper = np.mod(lower + 1, ORIENTATION_BINS)
    hist = np.zeros(ORIENTATION_BINS)
    np.add.at(hist, lower, magnitudes * (1.0 - frac))
    np.add.at(hist, upper, magnitudes * frac)
    best = int(np.argmax(hist))
    angle = (best + 0.5) * width
    return angle - 2 * math.pi if angle > math.pi else angle


def detect_keypoints(df: DistanceField, sigma_smooth: float,
                     cfg: FeatureConfig = FeatureConfig()) -> List[Keypoint]:
    """
    거리장에서 키포인트 위치와 종류를 검출합니다. (기술자 미포함)

    Args:
        df: 거리장
        sigma_smooth: 평활화 표준편차 [m]
        cfg: 검출 임계값

    Returns:
        list[Keypoint]: 자유 셀 위의 키포인트 (없으면 빈 리스트)
    """
    return FeatureField(df, sigma_smooth).detect(cfg)


def compute_descriptor(df: DistanceField, position, window: float,
                       cfg: FeatureConfig = FeatureConfig(),
                       field: Optional[FeatureField] = None) -> Optional[tuple]:
    """
    단일 위치의 (orientation, avg_df, descriptor). 창에 자유 셀이 없으면 None.
    반복 호출 시에는 미리 만든 FeatureField 를 넘기면 평활화를 다시 하지 않습니다.
    """
    if not window > 0:
        raise ValueError(f"window 는 0보다 커야 합니다: {window}")
    field = field or FeatureField(df, cfg.sigma_smooth)
    return field.describe(float(position[0]), float(position[1]), window, cfg.grad_eps)


def build_keypoints(df: DistanceField, cfg: FeatureConfig = FeatureConfig()) -> List[Keypoint]:
    """검출 + 기술자 계산. 기술자를 만들 수 없는 키포인트는 제외합니다."""
    field = FeatureField(df, cfg.sigma_smooth)
    described = []
    dropped = 0
    for kp in field.detect(cfg):
        result = field.describe(kp.x, kp.y, cfg.window, cfg.grad_eps)
        if result is None:
            dropped += 1
            continue
        orientation, avg_df, descriptor = result
        described.append(Keypoint(kp.x, kp.y, kp.kind, orientation, avg_df, descriptor))
    if dropped:
        logger.debug(f"기술자 계산 불가로 제외된 키포인트: {dropped}개")
    if not described:
        logger.debug("키포인트가 하나도 없습니다")
    return described


def match_features(local: List[Keypoint], global_: List[Keypoint],
                   cfg: FeatureConfig = FeatureConfig()) -> List[FeatureMatch]:
    """
    로컬 키포인트마다 전역 키포인트 대응을 찾습니다.

    후보 조건은 종류 일치와 |Δavg_df| ≤ avg_df_threshold 입니다.
    후보가 하나면 바로 채택하고, 여럿이면 기술자 차이(L1) 최소값에 ratio_const 를
    곱한 값이 차순위보다 작을 때만 채택합니다.
    """
    if not local or not global_:
        return []
    g_kinds = np.array([kp.kind for kp in global_])
    g_avg = np.array([kp.avg_df for kp in global_])
    g_desc = np.stack([kp.descriptor for kp in global_])

    matches = []
    for lkp in local:
        candidates = np.nonzero((g_kinds == lkp.kind) & (np.abs(g_avg - lkp.avg_df) <= cfg.avg_df_threshold))[0]
        if candidates.size == 0:
            continue
        scores = np.abs(g_desc[candidates] - lkp.descriptor[None, :]).sum(axis=1)
        order = np.argsort(scores, kind="stable")
        best = order[0]
        if candidates.size > 1 and not cfg.ratio_const * scores[best] < scores[order[1]]:
            continue
        matches.append(FeatureMatch(global_[candidates[best]], lkp, float(scores[best])))
    return matches


# ═══════════════════════════════════════════
# 키포인트 캐시
# ═══════════════════════════════════════════

def save_keypoints(keypoints: List[Keypoint], path: str, checksum: str):
    """`# checksum <hex>` 헤더 뒤에 키포인트당 한 줄씩 저장합니다."""
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        f.write(f"# checksum {checksum}\n")
        for kp in keypoints:
            bins = " ".join(repr(float(b)) for b in kp.descriptor)
            f.write(f"{kp.x!r} {kp.y!r} {kp.kind} {kp.orientation!r} {kp.avg_df!r} {bins}\n")
    logger.info(f"키포인트 캐시 저장: {path} ({len(keypoints)}개)")


def load_keypoints(path: str) -> tuple:
    """
    Returns:
        tuple: (checksum 또는 None, list[Keypoint])

    Raises:
        ValueError: 줄 형식 오류
    """
    checksum = None
    keypoints = []
    with open(path, "r", encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                tokens = line[1:].split()
                if len(tokens) == 2 and tokens[0] == "checksum":
                    checksum = tokens[1]
                continue
            tokens = line.split()
            if len(tokens) != 5 + DESCRIPTOR_SIZE or tokens[2] not in KEYPOINT_KINDS:
                logger.error(f"키포인트 캐시 형식 오류 ({path}:{line_no})")
                raise ValueError(f"line {line_no}: 키포인트 줄 형식이 잘못되었습니다")
            values = [float(t) for t in tokens[:2] + tokens[3:]]
            keypoints.append(Keypoint(
                x=values[0], y=values[1], kind=tokens[2],
                orientation=values[2], avg_df=values[3],
                descriptor=np.array(values[4:]),
            ))
    return checksum, keypoints


def keypoint_cache_key(df: DistanceField, cfg: FeatureConfig) -> str:
    """지도 체크섬에 거리장 clamp 와 특징 설정을 더한 캐시 키"""
    hasher = hashlib.sha256()
    hasher.update(f"{df.grid.checksum()}|{df.clamp!r}|{cfg!r}".encode("utf-8"))
    return hasher.hexdigest()


def load_or_build_keypoints(df: DistanceField, cfg: FeatureConfig,
                            cache_path: Optional[str] = None) -> List[Keypoint]:
    """캐시 키가 지도/설정과 같으면 재사용하고, 아니면 새로 계산해 저장합니다."""
    checksum = keypoint_cache_key(df, cfg)
    if cache_path and os.path.exists(cache_path):
        try:
            cached_checksum, keypoints = load_keypoints(cache_path)
        except ValueError:
            logger.warning(f"키포인트 캐시를 읽을 수 없어 다시 계산합니다: {cache_path}")
        else:
            if cached_checksum == checksum:
                logger.info(f"키포인트 캐시 사용: {cache_path} ({len(keypoints)}개)")
                return keypoints
            logger.info("지도 또는 특징 설정이 바뀌어 키포인트를 다시 계산합니다")

    keypoints = build_keypoints(df, cfg)
    if cache_path:
        save_keypoints(keypoints, cache_path, checksum)
    return keypoints

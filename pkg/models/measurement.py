# -*- coding: utf-8 -*-
"""
models/measurement.py - 클래스 조건부 측정 모델 (CCMM)
========================================================
각 빔을 '지도에 있는 장애물(known)'과 '지도에 없는 장애물(unknown)' 두 클래스의
혼합으로 모델링합니다.

    p(z|known)   = z_hit·N(e; 0, σ_hit²) + z_max·1[z ≥ r_max]/δ_max + z_rand/r_max
    p(z|unknown) = λ·exp(−λz) / (1 − exp(−λ·r_max))

e 는 빔 끝점의 거리장 값입니다. 전체 로그 우도는 클래스 사전확률로 주변화한
빔별 확률의 로그 합입니다. 순수 likelihood field(LFM) 점수도 함께 제공합니다.

사용 예시:
    >>> total, per_beam = class_conditional_likelihood(scan, pose, df, MeasurementConfig())
"""

import math
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from core.geometry import Pose2D
from core.grid_map import DistanceField

# ── 로거 설정 ──
logger = logging.getLogger(__name__)

_SQRT_2PI = math.sqrt(2.0 * math.pi)


class NoValidBeamsError(ValueError):
    """보폭(stride) 적용 후 유효한 빔이 하나도 없음"""


@dataclass(frozen=True, eq=False)
class Scan:
    """
    2D LiDAR 스캔

    Attributes:
        ranges (np.ndarray): (K,) 거리 [m]. 비유한값 또는 범위 밖 값은 무효 빔
        angle_min (float): 첫 빔 각도 [rad] (센서 좌표계)
        angle_increment (float): 빔 간격 [rad]
        range_max (float): 최대 측정 거리 r_max [m]
        range_min (float): 최소 측정 거리 [m]
        sensor_offset (Pose2D): 로봇 좌표계에서의 센서 포즈
    """

    ranges: np.ndarray
    angle_min: float
    angle_increment: float
    range_max: float
    range_min: float = 0.0
    sensor_offset: Pose2D = Pose2D()

    def __post_init__(self):
        ranges = np.array(self.ranges, dtype=float, copy=True).ravel()
        if ranges.size < 1:
            logger.error("빈 스캔이 전달되었습니다")
            raise ValueError("스캔에는 최소 1개의 빔이 필요합니다")
        if not self.range_max > 0:
            raise ValueError(f"range_max 는 0보다 커야 합니다: {self.range_max}")
        if self.range_min < 0 or self.range_min > self.range_max:
            raise ValueError(f"range_min 범위 오류: {self.range_min}")
        ranges.setflags(write=False)
        object.__setattr__(self, "ranges", ranges)

    @property
    def num_beams(self) -> int:
        return int(self.ranges.size)

    @property
    def angles(self) -> np.ndarray:
        return self.angle_min + self.angle_increment * np.arange(self.ranges.size)

    def valid_mask(self) -> np.ndarray:
        r = self.ranges
        with np.errstate(invalid="ignore"):
            return np.isfinite(r) & (r >= self.range_min) & (r <= self.range_max)

    def beams(self, stride: int = 1) -> tuple:
        """
        보폭 적용 후 유효 빔의 (angles, ranges) 를 반환합니다.

        Args:
            stride: n번째 빔마다 사용 (≥ 1)
        """
        idx = np.arange(0, self.ranges.size, max(int(stride), 1))
        idx = idx[self.valid_mask()[idx]]
        return self.angles[idx], self.ranges[idx]


@dataclass(frozen=True)
class MeasurementConfig:
    """
    CCMM 설정

    z_hit + z_max + z_rand = 1, σ_hit > 0, λ > 0 이어야 합니다.
    """

    z_hit: float = 0.9
    z_max: float = 0.05
    z_rand: float = 0.05
    sigma_hit: float = 0.1
    lam: float = 0.1
    class_prior_known: float = 0.5
    beam_stride: int = 4
    delta_max: float = 0.01

    def __post_init__(self):
        total = self.z_hit + self.z_max + self.z_rand
        if abs(total - 1.0) > 1e-9:
            logger.error(f"혼합 가중치 합 오류: {total}")
            raise ValueError(f"z_hit + z_max + z_rand 는 1 이어야 합니다: {total!r}")
        for name in ("z_hit", "z_max", "z_rand"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} 는 0 이상이어야 합니다")
        if not self.sigma_hit > 0:
            raise ValueError(f"sigma_hit 는 0보다 커야 합니다: {self.sigma_hit}")
        if not self.lam > 0:
            raise ValueError(f"lam 은 0보다 커야 합니다: {self.lam}")
        if not 0.0 < self.class_prior_known < 1.0:
            raise ValueError(f"class_prior_known 은 (0, 1) 범위여야 합니다: {self.class_prior_known}")
        if int(self.beam_stride) != self.beam_stride or self.beam_stride < 1:
            raise ValueError(f"beam_stride 는 1 이상의 정수여야 합니다: {self.beam_stride}")
        if not self.delta_max > 0:
            raise ValueError(f"delta_max 는 0보다 커야 합니다: {self.delta_max}")


# ═══════════════════════════════════════════
# 빔 단위 밀도
# ═══════════════════════════════════════════

def beam_endpoints(poses: np.ndarray, angles: np.ndarray, ranges: np.ndarray,
                   sensor_offset: Pose2D = Pose2D()) -> np.ndarray:
    """
    포즈 (N, 3) 와 빔 (K,) 로부터 빔 끝점 월드 좌표 (N, K, 2) 를 계산합니다.
    """
    poses = np.asarray(poses, dtype=float).reshape(-1, 3)
    x, y, th = poses[:, 0], poses[:, 1], poses[:, 2]
    c, s = np.cos(th), np.sin(th)
    sx = x + c * sensor_offset.x - s * sensor_offset.y
    sy = y + s * sensor_offset.x + c * sensor_offset.y
    beam_th = (th + sensor_offset.theta)[:, None] + np.asarray(angles, dtype=float)[None, :]
    r = np.asarray(ranges, dtype=float)[None, :]
    out = np.empty(beam_th.shape + (2,), dtype=float)
    out[..., 0] = sx[:, None] + r * np.cos(beam_th)
    out[..., 1] = sy[:, None] + r * np.sin(beam_th)
    return out


def endpoint_residuals(poses: np.ndarray, angles: np.ndarray, ranges: np.ndarray,
                       df: DistanceField, sensor_offset: Pose2D = Pose2D()) -> np.ndarray:
    """끝점의 거리장 값 e (N, K)"""
    ends = beam_endpoints(poses, angles, ranges, sensor_offset)
    n, k = ends.shape[:2]
    return df.lookup(ends.reshape(-1, 2)).reshape(n, k)


def known_density(ranges, residuals, range_max: float, cfg: MeasurementConfig) -> np.ndarray:
    """p(z|known): likelihood field 혼합 밀도"""
    residuals = np.asarray(residuals, dtype=float)
    ranges = np.asarray(ranges, dtype=float)
    p_hit = np.exp(-0.5 * (residuals / cfg.sigma_hit) ** 2) / (_SQRT_2PI * cfg.sigma_hit)
    p_max = (ranges >= range_max).astype(float) / cfg.delta_max
    return cfg.z_hit * p_hit + cfg.z_max * p_max + cfg.z_rand / range_max


def unknown_density(ranges, range_max: float, cfg: MeasurementConfig) -> np.ndarray:
    """p(z|unknown): [0, r_max] 에서 절단된 지수분포 밀도"""
    ranges = np.asarray(ranges, dtype=float)
    norm = -math.expm1(-cfg.lam * range_max)
    return cfg.lam * np.exp(-cfg.lam * ranges) / norm


def known_likelihood(range_m: float, beam_angle: float, pose: Pose2D, df: DistanceField,
                     cfg: MeasurementConfig, range_max: float,
                     sensor_offset: Pose2D = Pose2D()) -> float:
    """
    단일 빔의 p(z|known).

    Args:
        range_m: 측정 거리 (range_min ≤ range ≤ r_max 인 유효 빔)
        beam_angle: 센서 좌표계 빔 각도 [rad]
        pose: 로봇 포즈
        df: 거리장
        cfg: 측정 모델 설정
        range_max: r_max
        sensor_offset: 센서 장착 포즈
    """
    e = endpoint_residuals(pose.as_array(), [beam_angle], [range_m], df, sensor_offset)[0, 0]
    return float(known_density(range_m, e, range_max, cfg))


def unknown_likelihood(range_m: float, cfg: MeasurementConfig, range_max: float) -> float:
    """단일 빔의 p(z|unknown). 0 < range ≤ r_max 에서 거리가 멀수록 감소합니다."""
    return float(unknown_density(range_m, range_max, cfg))


# ═══════════════════════════════════════════
# 스캔 단위 우도
# ═══════════════════════════════════════════

def _strided_beams(scan: Scan, cfg: MeasurementConfig) -> tuple:
    angles, ranges = scan.beams(cfg.beam_stride)
    if ranges.size == 0:
        raise NoValidBeamsError(
            f"유효 빔이 없습니다 (빔 {scan.num_beams}개, stride={cfg.beam_stride})"
        )
    return angles, ranges


def class_terms_batch(scan: Scan, poses: np.ndarray, df: DistanceField,
                      cfg: MeasurementConfig) -> tuple:
    """
    입자별·빔별 클래스 항 p(z|known)·p(known), p(z|unknown)·p(unknown).

    Returns:
        tuple: (known_terms (N, K), unknown_terms (K,))

    Raises:
        NoValidBeamsError: 유효 빔 없음
    """
    angles, ranges = _strided_beams(scan, cfg)
    residuals = endpoint_residuals(poses, angles, ranges, df, scan.sensor_offset)
    known = known_density(ranges[None, :], residuals, scan.range_max, cfg) * cfg.class_prior_known
    unknown = unknown_density(ranges, scan.range_max, cfg) * (1.0 - cfg.class_prior_known)
    return known, unknown


def ccmm_log_likelihood_batch(scan: Scan, poses: np.ndarray, df: DistanceField,
                              cfg: MeasurementConfig) -> np.ndarray:
    """포즈 (N, 3) 각각의 CCMM 로그 우도 (N,)"""
    known, unknown = class_terms_batch(scan, poses, df, cfg)
    return np.log(known + unknown[None, :]).sum(axis=1)


def lfm_log_likelihood_batch(scan: Scan, poses: np.ndarray, df: DistanceField,
                             cfg: MeasurementConfig) -> np.ndarray:
    """포즈 (N, 3) 각각의 순수 likelihood field 로그 우도 (N,)"""
    angles, ranges = _strided_beams(scan, cfg)
    residuals = endpoint_residuals(poses, angles, ranges, df, scan.sensor_offset)
    return np.log(known_density(ranges[None, :], residuals, scan.range_max, cfg)).sum(axis=1)


def class_conditional_likelihood(scan: Scan, pose: Pose2D, df: DistanceField,
                                 cfg: MeasurementConfig) -> tuple:
    """
    단일 포즈의 CCMM 로그 우도와 빔별 클래스 항.

    Returns:
        tuple: (total, per_beam (K, 2) = [p(z|known)·p(known), p(z|unknown)·p(unknown)])

    Raises:
        NoValidBeamsError: 유효 빔 없음 (호출자는 이전 가중치 유지)
    """
    known, unknown = class_terms_batch(scan, pose.as_array(), df, cfg)
    per_beam = np.stack([known[0], unknown], axis=1)
    total = float(np.log(per_beam.sum(axis=1)).sum())
    return total, per_beam


def unknown_posteriors(per_beam: np.ndarray) -> np.ndarray:
    """빔별 p(unknown|z) = unknown 항 / (known 항 + unknown 항)"""
    per_beam = np.asarray(per_beam, dtype=float)
    return per_beam[:, 1] / per_beam.sum(axis=1)


# ═══════════════════════════════════════════
# MAE (평균 절대 잔차)
# ═══════════════════════════════════════════

def compute_mae_batch(scan: Scan, poses: np.ndarray, df: DistanceField, e_max: float,
                      beam_stride: int = 1) -> np.ndarray:
    """
    포즈별 MAE (N,). 거리 < r_max 인 유효 빔 중 잔차 ≤ e_max 인 빔의 평균입니다.
    해당 빔이 없으면 NaN (정의되지 않음).
    """
    poses = np.asarray(poses, dtype=float).reshape(-1, 3)
    angles, ranges = scan.beams(beam_stride)
    keep = ranges < scan.range_max
    angles, ranges = angles[keep], ranges[keep]
    if ranges.size == 0:
        return np.full(poses.shape[0], np.nan)
    residuals = endpoint_residuals(poses, angles, ranges, df, scan.sensor_offset)
    inside = residuals <= e_max
    counts = inside.sum(axis=1)
    sums = np.where(inside, residuals, 0.0).sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(counts > 0, sums / np.maximum(counts, 1), np.nan)


def compute_mae(scan: Scan, pose: Pose2D, df: DistanceField, e_max: float,
                beam_stride: int = 1) -> Optional[float]:
    """단일 포즈 MAE [m]. 정의되지 않으면 None."""
    value = compute_mae_batch(scan, pose.as_array(), df, e_max, beam_stride)[0]
    return None if np.isnan(value) else float(value)


def mae_from_residuals(residuals, e_max: float) -> Optional[float]:
    """잔차 벡터로부터 직접 MAE 를 계산합니다. (판정 모델 학습/검증용)"""
    residuals = np.asarray(residuals, dtype=float)
    inside = residuals[residuals <= e_max]
    if inside.size == 0:
        return None
    return float(inside.sum() / inside.size)


def evaluate_poses(scan: Scan, poses: np.ndarray, df: DistanceField, cfg: MeasurementConfig,
                   e_max: float, use_ccmm: bool = True) -> tuple:
    """
    필터 가중치 계산용: 끝점 잔차를 한 번만 구해 로그 우도와 MAE 를 함께 반환합니다.

    Args:
        use_ccmm: False 이면 LFM 로그 우도

    Returns:
        tuple: (log_likelihood (N,), mae (N,), NaN = 정의되지 않음)

    Raises:
        NoValidBeamsError: 유효 빔 없음
    """
    angles, ranges = _strided_beams(scan, cfg)
    residuals = endpoint_residuals(poses, angles, ranges, df, scan.sensor_offset)
    known = known_density(ranges[None, :], residuals, scan.range_max, cfg)
    if use_ccmm:
        unknown = unknown_density(ranges, scan.range_max, cfg) * (1.0 - cfg.class_prior_known)
        log_lik = np.log(known * cfg.class_prior_known + unknown[None, :]).sum(axis=1)
    else:
        log_lik = np.log(known).sum(axis=1)

    inside = (ranges < scan.range_max)[None, :] & (residuals <= e_max)
    counts = inside.sum(axis=1)
    sums = np.where(inside, residuals, 0.0).sum(axis=1)
    mae = np.where(counts > 0, sums / np.maximum(counts, 1), np.nan)
    return log_lik, mae

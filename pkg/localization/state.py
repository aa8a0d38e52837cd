# -*- coding: utf-8 -*-
"""
localization/state.py - 필터 상태 및 설정
===========================================
추적 입자 집합(^P, 크기 고정)과 전역 샘플 집합(^G, 가변 크기)의 포즈/가중치,
신뢰도, 최대 우도 입자 인덱스, 추정 포즈를 보관합니다.
사이클 결과(CycleReport)는 CSV 한 줄로 직렬화됩니다.
"""

import math
import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from core.geometry import Pose2D

# ── 로거 설정 ──
logger = logging.getLogger(__name__)

CYCLE_REPORT_HEADER = [
    "cycle", "time_s", "est_x", "est_y", "est_yaw", "gt_x", "gt_y", "gt_yaw",
    "reliability", "mae", "n_global_samples", "n_unknown_beams",
]


@dataclass(frozen=True)
class FilterConfig:
    """
    Attributes:
        num_particles (int): 추적 입자 수 ^PM
        init_sigma_x, init_sigma_y (float): 초기 분포 표준편차 [m]
        init_sigma_theta (float): 초기 분포 표준편차 [rad]
        use_ccmm (bool): False 이면 LFM 만으로 가중
    """

    num_particles: int = 500
    init_sigma_x: float = 0.3
    init_sigma_y: float = 0.3
    init_sigma_theta: float = math.radians(10.0)
    use_ccmm: bool = True

    def __post_init__(self):
        if int(self.num_particles) != self.num_particles or self.num_particles < 1:
            logger.error(f"입자 수 오류: {self.num_particles}")
            raise ValueError(f"num_particles 는 1 이상의 정수여야 합니다: {self.num_particles}")
        if min(self.init_sigma_x, self.init_sigma_y, self.init_sigma_theta) < 0:
            raise ValueError("초기 분포 표준편차는 0 이상이어야 합니다")

    @property
    def spread(self) -> tuple:
        return self.init_sigma_x, self.init_sigma_y, self.init_sigma_theta


@dataclass(frozen=True)
class FusionConfig:
    """
    Attributes:
        beta (float): GMM 혼합 가중치 β ∈ [0, 1]
        sigma_x, sigma_y (float): GMM 커널 표준편차 [m]
        sigma_theta (float): GMM 커널 표준편차 [rad]
        unif_value (float | None): 균등 밀도. None 이면 1/(자유 면적·2π)
        chi (float): 미지 장애물 판정 사후확률 임계값
        resample_ess_ratio (float): ESS 재샘플링 비율
        predictive_weighting (bool): False 이면 예측 분포 대신 상수 1 사용
    """

    beta: float = 0.9
    sigma_x: float = 0.3
    sigma_y: float = 0.3
    sigma_theta: float = math.radians(10.0)
    unif_value: Optional[float] = None
    chi: float = 0.9
    resample_ess_ratio: float = 0.5
    predictive_weighting: bool = True

    def __post_init__(self):
        if not 0.0 <= self.beta <= 1.0:
            logger.error(f"beta 범위 오류: {self.beta}")
            raise ValueError(f"beta 는 [0, 1] 범위여야 합니다: {self.beta}")
        if min(self.sigma_x, self.sigma_y, self.sigma_theta) <= 0:
            raise ValueError("GMM 커널 표준편차는 0보다 커야 합니다")
        if self.unif_value is not None and not self.unif_value > 0:
            raise ValueError(f"unif_value 는 0보다 커야 합니다: {self.unif_value}")
        if not 0.0 < self.chi < 1.0:
            raise ValueError(f"chi 는 (0, 1) 범위여야 합니다: {self.chi}")
        if not 0.0 < self.resample_ess_ratio <= 1.0:
            raise ValueError(f"resample_ess_ratio 는 (0, 1] 범위여야 합니다: {self.resample_ess_ratio}")


@dataclass(frozen=True)
class Particle:
    pose: Pose2D
    weight: float
    last_mae: Optional[float] = None


@dataclass
class FilterState:
    """
    사이클 사이에 유지되는 필터 상태.

    tracking_* 배열 길이는 항상 ^PM 으로 고정이며, global_* 는 사이클 안에서만 채워집니다.
    가중치 정규화 후에는 두 집합의 가중치 합이 1 입니다.
    """

    tracking_poses: np.ndarray
    tracking_weights: np.ndarray
    reliability: float
    global_poses: np.ndarray = field(default_factory=lambda: np.empty((0, 3)))
    global_weights: np.ndarray = field(default_factory=lambda: np.empty(0))
    tracking_mae: Optional[np.ndarray] = None
    global_mae: np.ndarray = field(default_factory=lambda: np.empty(0))
    r_hat: Optional[float] = None
    ml_index: int = 0
    estimate: Pose2D = Pose2D()
    delta_d: float = 0.0
    delta_theta: float = 0.0
    tracking_log_norm: float = 0.0
    unknown_posteriors: np.ndarray = field(default_factory=lambda: np.empty(0))
    unknown_flags: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=bool))
    cycle: int = 0

    def __post_init__(self):
        if self.tracking_mae is None:
            self.tracking_mae = np.full(self.num_particles, np.nan)
        if self.r_hat is None:
            self.r_hat = self.reliability

    @property
    def num_particles(self) -> int:
        return int(self.tracking_poses.shape[0])

    @property
    def num_global(self) -> int:
        return int(self.global_poses.shape[0])

    def joint_poses(self) -> np.ndarray:
        return np.concatenate([self.tracking_poses, self.global_poses], axis=0)

    def joint_weights(self) -> np.ndarray:
        return np.concatenate([self.tracking_weights, self.global_weights])

    def joint_mae(self) -> np.ndarray:
        return np.concatenate([self.tracking_mae, self.global_mae])

    def particle(self, index: int) -> Particle:
        mae = self.tracking_mae[index]
        return Particle(
            Pose2D.from_array(self.tracking_poses[index]),
            float(self.tracking_weights[index]),
            None if np.isnan(mae) else float(mae),
        )

    def clear_global(self):
        self.global_poses = np.empty((0, 3))
        self.global_weights = np.empty(0)
        self.global_mae = np.empty(0)


@dataclass(frozen=True, eq=False)
class CycleReport:
    """한 사이클 처리 결과"""

    cycle: int
    time_s: float
    estimate: Pose2D
    reliability: float
    mae: Optional[float]
    n_global_samples: int
    n_unknown_beams: int
    gt: Optional[Pose2D] = None
    unknown_flags: Optional[np.ndarray] = None

    def to_row(self) -> list:
        """CSV 한 줄 (gt 가 없으면 빈 칸, MAE 가 없으면 빈 칸)"""
        gt = self.gt
        return [
            str(self.cycle),
            repr(float(self.time_s)),
            repr(self.estimate.x), repr(self.estimate.y), repr(self.estimate.theta),
            repr(gt.x) if gt else "", repr(gt.y) if gt else "", repr(gt.theta) if gt else "",
            repr(float(self.reliability)),
            "" if self.mae is None else repr(float(self.mae)),
            str(self.n_global_samples),
            str(self.n_unknown_beams),
        ]

    def position_error(self) -> Optional[float]:
        return None if self.gt is None else self.estimate.distance_to(self.gt)

    def angle_error(self) -> Optional[float]:
        return None if self.gt is None else self.estimate.angle_error_to(self.gt)

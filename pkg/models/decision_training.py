# -*- coding: utf-8 -*-
"""
models/decision_training.py - 판정 모델 학습
==============================================
시뮬레이터로 판정 모델 히스토그램을 학습합니다.

절차:
    1. 벽에서 충분히 떨어진 자유 공간에서 실제 포즈를 샘플링
    2. 실제 포즈에서 스캔을 시뮬레이션 (정적 지도)
    3. 실제 포즈에 잡음을 더한 포즈에서 MAE 계산
    4. 위치 오차 ≤ pos_th 이고 각도 오차 ≤ ang_th 이면 성공, 둘 중 하나라도 넘으면 실패
    5. 학습/검증 분할 후 두 히스토그램을 정규화하고 d_th 선택

사용 예시:
    >>> dm = train_decision_model(df, ScanGeometry(), np.random.default_rng(0))
    >>> dm.d_th, dm.heldout_accuracy
"""

import math
import logging
import dataclasses
from dataclasses import dataclass

import numpy as np

from core.geometry import Pose2D
from core.grid_map import DistanceField, FREE
from models.decision import DecisionModel, build_decision_model, classification_accuracy, DEFAULT_FLOOR_DENSITY
from models.measurement import compute_mae
from sim.raycast import ScanGeometry, simulate_scan

# ── 로거 설정 ──
logger = logging.getLogger(__name__)


class TrainingError(ValueError):
    """학습 표본 부족 (클래스별 최소 개수 미달 등)"""


@dataclass(frozen=True)
class TrainingConfig:
    """
    판정 모델 학습 설정

    Attributes:
        n_samples (int): 전체 표본 수
        pos_th (float): 성공 판정 위치 임계값 [m]
        ang_th (float): 성공 판정 각도 임계값 [rad]
        noise_xy_max (float): 위치 섭동 최대 표준편차 [m]
        noise_theta_max (float): 각도 섭동 최대 표준편차 [rad]
        min_per_class (int): 클래스별 최소 학습 표본 수
        heldout_ratio (float): 검증 세트 비율
        clearance (float): 실제 포즈의 최소 장애물 거리 [m]
        bin_width, e_hist_max, e_max, floor_density: 히스토그램 설정
        beam_stride (int): MAE 계산에 쓰는 빔 보폭
    """

    n_samples: int = 3000
    pos_th: float = 0.02
    ang_th: float = math.radians(2.0)
    noise_xy_max: float = 0.3
    noise_theta_max: float = math.radians(10.0)
    min_per_class: int = 10
    heldout_ratio: float = 0.2
    clearance: float = 0.3
    bin_width: float = 0.025
    e_hist_max: float = 1.0
    e_max: float = 1.0
    floor_density: float = DEFAULT_FLOOR_DENSITY
    beam_stride: int = 4

    def __post_init__(self):
        if self.n_samples < 0:
            raise ValueError(f"n_samples 는 0 이상이어야 합니다: {self.n_samples}")
        if self.pos_th < 0 or self.ang_th < 0:
            raise ValueError("pos_th, ang_th 는 0 이상이어야 합니다")
        if self.noise_xy_max < 0 or self.noise_theta_max < 0:
            raise ValueError("섭동 표준편차는 0 이상이어야 합니다")
        if not 0.0 <= self.heldout_ratio < 1.0:
            raise ValueError(f"heldout_ratio 는 [0, 1) 범위여야 합니다: {self.heldout_ratio}")
        if self.min_per_class < 1:
            raise ValueError(f"min_per_class 는 1 이상이어야 합니다: {self.min_per_class}")
        if self.beam_stride < 1:
            raise ValueError(f"beam_stride 는 1 이상이어야 합니다: {self.beam_stride}")


def _sample_free_poses(df: DistanceField, n: int, clearance: float,
                       rng: np.random.Generator) -> np.ndarray:
    grid = df.grid
    mask = (grid.cells == FREE) & (df.dist >= clearance)
    rows, cols = np.nonzero(mask)
    if rows.size == 0:
        logger.error(f"clearance {clearance} m 이상인 자유 셀이 없습니다")
        raise TrainingError(f"clearance: {clearance} m 이상 떨어진 자유 공간이 없습니다")
    pick = rng.integers(0, rows.size, size=n)
    jitter = rng.random((n, 2)) - 0.5
    centers = grid.cell_to_world(rows[pick] + jitter[:, 1], cols[pick] + jitter[:, 0])
    headings = rng.uniform(-math.pi, math.pi, size=n)
    return np.column_stack([centers, headings])


def collect_training_samples(df: DistanceField, geometry: ScanGeometry,
                             rng: np.random.Generator, cfg: TrainingConfig) -> tuple:
    """
    (mae (NaN=정의되지 않음), success 라벨) 표본 배열을 생성합니다.
    """
    n = int(cfg.n_samples)
    truths = _sample_free_poses(df, n, cfg.clearance, rng)
    scales = rng.random(n) ** 2
    offsets = rng.standard_normal((n, 3))
    offsets[:, :2] *= (scales * cfg.noise_xy_max)[:, None]
    offsets[:, 2] *= scales * cfg.noise_theta_max

    # MAE 에 사용하는 빔만 시뮬레이션
    strided = dataclasses.replace(geometry, angle_increment=geometry.angle_increment * cfg.beam_stride)

    maes = np.empty(n)
    labels = np.empty(n, dtype=bool)
    for i in range(n):
        truth = Pose2D.from_array(truths[i])
        perturbed = Pose2D(truth.x + offsets[i, 0], truth.y + offsets[i, 1], truth.theta + offsets[i, 2])
        scan = simulate_scan(df, truth, strided, rng)
        mae = compute_mae(scan, perturbed, df, cfg.e_max)
        maes[i] = np.nan if mae is None else mae
        labels[i] = (
            truth.distance_to(perturbed) <= cfg.pos_th
            and truth.angle_error_to(perturbed) <= cfg.ang_th
        )
        if (i + 1) % 1000 == 0:
            logger.debug(f"학습 표본 {i + 1}/{n} 생성")
    return maes, labels


def train_decision_model(df: DistanceField, geometry: ScanGeometry, rng: np.random.Generator,
                         cfg: TrainingConfig = TrainingConfig()) -> DecisionModel:
    """
    시뮬레이션 표본으로 판정 모델을 학습합니다.

    Args:
        df: 학습 장면의 거리장
        geometry: LiDAR 기하
        rng: numpy Generator
        cfg: 학습 설정

    Returns:
        DecisionModel: heldout_accuracy 가 채워진 모델

    Raises:
        TrainingError: 표본 0개, 또는 한 클래스의 학습 표본이 min_per_class 미만
    """
    if cfg.n_samples <= 0:
        logger.error("학습 표본 수가 0입니다")
        raise TrainingError("n_samples: 학습 표본 수는 1 이상이어야 합니다")

    logger.info(
        f"판정 모델 학습 시작: 표본 {cfg.n_samples}개, "
        f"임계값 ({cfg.pos_th} m, {math.degrees(cfg.ang_th):.1f}°)"
    )
    maes, labels = collect_training_samples(df, geometry, rng, cfg)

    order = rng.permutation(maes.size)
    n_heldout = int(round(maes.size * cfg.heldout_ratio))
    train_idx = order[: maes.size - n_heldout]
    heldout_idx = order[maes.size - n_heldout:]

    train_success = maes[train_idx][labels[train_idx]]
    train_failure = maes[train_idx][~labels[train_idx]]
    for name, values in (("success", train_success), ("failure", train_failure)):
        if values.size < cfg.min_per_class:
            logger.error(f"{name} 클래스 표본 부족: {values.size}개 < {cfg.min_per_class}개")
            raise TrainingError(
                f"{name}: 학습 표본 {values.size}개로 최소 {cfg.min_per_class}개에 못 미칩니다"
            )

    dm = build_decision_model(
        train_success, train_failure,
        bin_width=cfg.bin_width, e_hist_max=cfg.e_hist_max, e_max=cfg.e_max,
        floor_density=cfg.floor_density,
        heldout_mae=maes[heldout_idx], heldout_labels=labels[heldout_idx],
    )

    accuracy = None
    if heldout_idx.size:
        accuracy = classification_accuracy(maes[heldout_idx], labels[heldout_idx], dm.d_th)
    dm = dataclasses.replace(dm, heldout_accuracy=accuracy)

    logger.info(
        f"판정 모델 학습 완료: 성공 {train_success.size}개, 실패 {train_failure.size}개, "
        f"d_th={dm.d_th:.4f} m, 검증 정확도={accuracy}"
    )
    return dm

# -*- coding: utf-8 -*-
"""
localization/baseline.py - 비교용 augmented MCL
=================================================
LFM 가중치와 단기/장기 평균 우도(w_fast/w_slow) 비율에 따른 무작위 입자 주입으로
위치 추정 실패에서 회복을 시도하는 기준 필터입니다. 신뢰도는 추정하지 않으므로
CycleReport 의 reliability 는 NaN 입니다.
"""

import math
import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.special import logsumexp

from core.geometry import Pose2D
from core.grid_map import DistanceField, FREE
from models.decision import DecisionModel
from models.measurement import NoValidBeamsError, Scan, evaluate_poses
from models.motion import OdometryInput
from localization.state import CycleReport, FilterState
from localization.particle_filter import (
    FilterConfigs, init_filter, multinomial_indices, predict, weighted_mean_pose,
)

# ── 로거 설정 ──
logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class BaselineConfig:
    """
    Attributes:
        alpha_slow (float): 장기 평균 우도 갱신율
        alpha_fast (float): 단기 평균 우도 갱신율 (alpha_slow 보다 커야 함)
    """

    alpha_slow: float = 0.001
    alpha_fast: float = 0.1

    def __post_init__(self):
        if not 0.0 < self.alpha_slow < self.alpha_fast <= 1.0:
            logger.error(f"baseline 갱신율 오류: ({self.alpha_slow}, {self.alpha_fast})")
            raise ValueError(
                f"0 < alpha_slow < alpha_fast ≤ 1 이어야 합니다: ({self.alpha_slow}, {self.alpha_fast})"
            )


class AugmentedMCL:
    """
    LocalizationEngine 과 같은 initialize/step 인터페이스를 제공하는 기준 필터.

    Args:
        df: 지도 거리장
        dm: 판정 모델 (MAE 의 e_max 만 사용)
        configs: 모듈 설정 묶음 (motion, measurement, filter 사용)
        baseline_cfg: 주입 설정
    """

    name = "baseline"

    def __init__(self, df: DistanceField, dm: DecisionModel, configs: FilterConfigs = FilterConfigs(),
                 baseline_cfg: BaselineConfig = BaselineConfig()):
        self.df = df
        self.dm = dm
        self.configs = configs
        self.baseline_cfg = baseline_cfg
        self.w_slow = 0.0
        self.w_fast = 0.0
        self.state: Optional[FilterState] = None
        rows, cols = np.nonzero(df.grid.cells == FREE)
        self._free_rows = rows
        self._free_cols = cols

    def initialize(self, initial_pose: Pose2D, rng: np.random.Generator) -> FilterState:
        cfg = self.configs.filter
        self.state = init_filter(initial_pose, cfg.spread, cfg.num_particles, rng)
        self.w_slow = 0.0
        self.w_fast = 0.0
        return self.state

    def injection_probability(self) -> float:
        if self.w_slow <= 0:
            return 0.0
        return max(0.0, 1.0 - self.w_fast / self.w_slow)

    def random_free_poses(self, count: int, rng: np.random.Generator) -> np.ndarray:
        """자유 셀에서 균등하게 뽑은 포즈 (count, 3)"""
        if count == 0 or self._free_rows.size == 0:
            return np.empty((0, 3))
        pick = rng.integers(0, self._free_rows.size, size=count)
        jitter = rng.random((count, 2)) - 0.5
        xy = self.df.grid.cell_to_world(self._free_rows[pick] + jitter[:, 1], self._free_cols[pick] + jitter[:, 0])
        theta = rng.uniform(-math.pi, math.pi, size=count)
        return np.column_stack([xy, theta])

    def step(self, u: OdometryInput, scan: Scan, gl_samples: Sequence = (),
             rng: Optional[np.random.Generator] = None, time_s: float = 0.0,
             gt: Optional[Pose2D] = None) -> CycleReport:
        """한 사이클 처리. 전역 샘플은 사용하지 않습니다."""
        if self.state is None:
            raise RuntimeError("initialize() 를 먼저 호출해야 합니다")
        state = self.state
        predict(state, u, self.configs.motion, rng)
        state.delta_d = state.delta_theta = 0.0

        mae_value = None
        try:
            log_lik, mae = evaluate_poses(
                scan, state.tracking_poses, self.df, self.configs.measurement, self.dm.e_max, use_ccmm=False,
            )
        except NoValidBeamsError:
            log_lik = None

        if log_lik is not None:
            n_beams = scan.beams(self.configs.measurement.beam_stride)[1].size
            # 빔당 기하평균 우도로 평균 우도를 계산 (언더플로 방지)
            w_avg = float(np.mean(np.exp(log_lik / n_beams)))
            self.w_slow += self.baseline_cfg.alpha_slow * (w_avg - self.w_slow)
            self.w_fast += self.baseline_cfg.alpha_fast * (w_avg - self.w_fast)

            log_w = np.log(state.tracking_weights) + log_lik
            state.tracking_weights = np.exp(log_w - logsumexp(log_w))
            state.tracking_mae = mae
            state.ml_index = int(np.argmax(log_w))
            ml_mae = mae[state.ml_index]
            mae_value = None if np.isnan(ml_mae) else float(ml_mae)

        state.estimate = weighted_mean_pose(state.tracking_poses, state.tracking_weights)
        report = CycleReport(
            cycle=state.cycle, time_s=time_s, estimate=state.estimate,
            reliability=float("nan"), mae=mae_value, n_global_samples=0, n_unknown_beams=0, gt=gt,
        )

        if log_lik is not None:
            self._resample_with_injection(rng)
        state.cycle += 1
        return report

    def _resample_with_injection(self, rng: np.random.Generator):
        state = self.state
        num = state.num_particles
        p_inject = self.injection_probability()
        inject = rng.random(num) < p_inject
        n_inject = int(np.count_nonzero(inject))
        idx = multinomial_indices(state.tracking_weights, num, rng)
        poses = state.tracking_poses[idx]
        if n_inject and self._free_rows.size:
            poses[inject] = self.random_free_poses(n_inject, rng)
            logger.debug(f"무작위 입자 주입: {n_inject}개 (p={p_inject:.3f})")
        state.tracking_poses = poses
        state.tracking_mae = np.full(num, np.nan)
        state.tracking_weights = np.full(num, 1.0 / num)

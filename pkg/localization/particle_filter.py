# -*- coding: utf-8 -*-
"""
localization/particle_filter.py - 신뢰도 추정과 전역 위치 추정을 결합한 MCL
===============================================================================
한 사이클의 처리 순서:
    predict → transit_reliability → weight_tracking → weight_global
    → estimate_pose → estimate_classes → estimate_reliability → resample

추적 입자 가중치:
    log ω_i = log ω_prev_i + log p(z|x_i) + log(p(d_i|S)·r̂ + p(d_i|F)·(1−r̂))
전역 샘플 가중치 (상태 사전확률 균등, 예측 분포로 가중):
    log ω_j = log p(z|x_j) + log(0.5·p(d_j|S) + 0.5·p(d_j|F)) + log pred(x_j)
두 집합은 로그 공간에서 함께 정규화합니다.

사용 예시:
    >>> engine = LocalizationEngine(df, dm, FilterConfigs())
    >>> engine.initialize(Pose2D(1.0, 2.0, 0.0), rng)
    >>> report = engine.step(u, scan, samples, rng)
"""

import math
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
from scipy.special import logsumexp

from core.geometry import Pose2D, normalize_angles
from core.grid_map import DistanceField
from models.decision import DecisionModel
from models.measurement import (
    MeasurementConfig, NoValidBeamsError, Scan, class_terms_batch, evaluate_poses, unknown_posteriors,
)
from models.motion import MotionConfig, OdometryInput, sample_motion_batch
from models.reliability import ReliabilityConfig, bayes_reliability, transit_reliability
from global_loc.pose_sampler import GlobalSample
from localization.state import CycleReport, FilterConfig, FilterState, FusionConfig

# ── 로거 설정 ──
logger = logging.getLogger(__name__)

_LOG_2PI_3_2 = 1.5 * math.log(2.0 * math.pi)


@dataclass(frozen=True)
class FilterConfigs:
    """필터 한 대가 쓰는 모듈 설정 묶음"""

    motion: MotionConfig = field(default_factory=MotionConfig)
    measurement: MeasurementConfig = field(default_factory=MeasurementConfig)
    reliability: ReliabilityConfig = field(default_factory=ReliabilityConfig)
    fusion: FusionConfig = field(default_factory=FusionConfig)
    filter: FilterConfig = field(default_factory=FilterConfig)


# ═══════════════════════════════════════════
# 초기화 / 예측
# ═══════════════════════════════════════════

def init_filter(initial_pose: Pose2D, spread: tuple, num_particles: int,
                rng: np.random.Generator, r_init: float = 0.5) -> FilterState:
    """
    초기 포즈 주변에 정규분포로 추적 입자를 뿌립니다. 가중치 1/^PM, 신뢰도 r_init.

    Raises:
        ValueError: num_particles < 1
    """
    if num_particles < 1:
        logger.error(f"입자 수 오류: {num_particles}")
        raise ValueError(f"num_particles 는 1 이상이어야 합니다: {num_particles}")
    sigma = np.asarray(spread, dtype=float)
    poses = initial_pose.as_array()[None, :] + rng.standard_normal((num_particles, 3)) * sigma[None, :]
    poses[:, 2] = normalize_angles(poses[:, 2])
    state = FilterState(
        tracking_poses=poses,
        tracking_weights=np.full(num_particles, 1.0 / num_particles),
        reliability=r_init,
        estimate=initial_pose,
    )
    logger.debug(f"필터 초기화: 입자 {num_particles}개, 초기 포즈 {initial_pose}")
    return state


def predict(state: FilterState, u: OdometryInput, cfg: MotionConfig,
            rng: np.random.Generator) -> FilterState:
    """모든 추적 입자를 운동 모델로 전파하고 변위(Δd, Δθ)를 누적합니다. 가중치는 유지."""
    state.tracking_poses = sample_motion_batch(state.tracking_poses, u, cfg, rng)
    delta_d, delta_theta = u.displacement()
    state.delta_d += delta_d
    state.delta_theta += delta_theta
    return state


def transit(state: FilterState, cfg: ReliabilityConfig) -> FilterState:
    """누적 변위로 신뢰도를 전이(r̂)하고 누적값을 초기화합니다."""
    state.r_hat = transit_reliability(state.reliability, state.delta_d, state.delta_theta, cfg)
    state.delta_d = 0.0
    state.delta_theta = 0.0
    return state


# ═══════════════════════════════════════════
# 가중치
# ═══════════════════════════════════════════

def _decision_log_factor(mae: np.ndarray, dm: DecisionModel, r: float) -> np.ndarray:
    p_success, p_failure = dm.densities(mae)
    return np.log(p_success * r + p_failure * (1.0 - r))


def weight_tracking(state: FilterState, scan: Scan, df: DistanceField, meas_cfg: MeasurementConfig,
                    dm: DecisionModel, use_ccmm: bool = True) -> FilterState:
    """
    추적 입자 가중치를 계산해 정규화하고 ml_index 를 갱신합니다.
    유효 빔이 없으면 가중치를 그대로 둡니다.
    """
    try:
        log_lik, mae = evaluate_poses(scan, state.tracking_poses, df, meas_cfg, dm.e_max, use_ccmm)
    except NoValidBeamsError:
        logger.debug("유효 빔이 없어 추적 가중치를 유지합니다")
        state.tracking_log_norm = 0.0
        return state

    with np.errstate(divide="ignore"):
        log_w = np.log(state.tracking_weights) + log_lik + _decision_log_factor(mae, dm, state.r_hat)
    log_norm = float(logsumexp(log_w))
    state.tracking_weights = np.exp(log_w - log_norm)
    state.tracking_log_norm = log_norm
    state.tracking_mae = mae
    state.ml_index = int(np.argmax(log_w))
    return state


def predictive_log_density(state: FilterState, query_poses: np.ndarray, fusion_cfg: FusionConfig,
                           unif_value: float) -> np.ndarray:
    """
    예측 분포의 로그 밀도 (Q,):
        β·(1/^PM)·Σ_i N(q; x_i, ^PΣ) + (1−β)·unif
    각도 잔차는 (−π, π] 로 감싸서 계산합니다.
    """
    query = np.asarray(query_poses, dtype=float).reshape(-1, 3)
    particles = state.tracking_poses
    sigma = np.array([fusion_cfg.sigma_x, fusion_cfg.sigma_y, fusion_cfg.sigma_theta])

    diff = query[:, None, :] - particles[None, :, :]
    diff[..., 2] = normalize_angles(diff[..., 2])
    mahal = ((diff / sigma) ** 2).sum(axis=2)
    log_kernel = -0.5 * mahal - _LOG_2PI_3_2 - np.log(sigma).sum()
    log_gmm = logsumexp(log_kernel, axis=1) - math.log(particles.shape[0])

    terms = []
    if fusion_cfg.beta > 0:
        terms.append(math.log(fusion_cfg.beta) + log_gmm)
    if fusion_cfg.beta < 1:
        terms.append(np.full(query.shape[0], math.log(1.0 - fusion_cfg.beta) + math.log(unif_value)))
    return logsumexp(np.stack(terms), axis=0)


def predictive_density(state: FilterState, query: Pose2D, fusion_cfg: FusionConfig,
                       unif_value: float) -> float:
    """단일 포즈의 예측 분포 밀도 [1/(m²·rad)]"""
    return float(np.exp(predictive_log_density(state, query.as_array(), fusion_cfg, unif_value)[0]))


def weight_global(state: FilterState, gl_samples: Sequence[GlobalSample], scan: Scan,
                  df: DistanceField, meas_cfg: MeasurementConfig, dm: DecisionModel,
                  fusion_cfg: FusionConfig, unif_value: float, use_ccmm: bool = True) -> FilterState:
    """
    전역 샘플 가중치를 계산하고 추적 입자와 함께 정규화합니다. 샘플이 없으면 아무것도 하지 않습니다.

    추적 입자는 직전 가중치 (재샘플링 직후 1/PM) 를 그대로 곱한 채 합쳐지므로
    추적 집합 전체가 같은 우도의 전역 샘플 하나와 같은 질량을 가집니다.
    전역 샘플 쪽에는 이 사전 가중치가 없습니다.
    """
    state.clear_global()
    if not gl_samples:
        return state
    poses = np.array([s.pose.as_array() for s in gl_samples])
    try:
        log_lik, mae = evaluate_poses(scan, poses, df, meas_cfg, dm.e_max, use_ccmm)
    except NoValidBeamsError:
        logger.debug("유효 빔이 없어 전역 샘플을 버립니다")
        return state

    log_w = log_lik + _decision_log_factor(mae, dm, 0.5)
    if fusion_cfg.predictive_weighting:
        log_w = log_w + predictive_log_density(state, poses, fusion_cfg, unif_value)

    with np.errstate(divide="ignore"):
        log_tracking = np.log(state.tracking_weights) + state.tracking_log_norm
    log_norm = float(logsumexp(np.concatenate([log_tracking, log_w])))
    state.tracking_weights = np.exp(log_tracking - log_norm)
    state.global_poses = poses
    state.global_weights = np.exp(log_w - log_norm)
    state.global_mae = mae
    return state


# ═══════════════════════════════════════════
# 추정
# ═══════════════════════════════════════════

def weighted_mean_pose(poses: np.ndarray, weights: np.ndarray) -> Pose2D:
    """가중 평균 포즈. 각도는 단위벡터 합의 atan2."""
    poses = np.asarray(poses, dtype=float).reshape(-1, 3)
    weights = np.asarray(weights, dtype=float)
    total = weights.sum()
    x = float((weights * poses[:, 0]).sum() / total)
    y = float((weights * poses[:, 1]).sum() / total)
    theta = math.atan2(float((weights * np.sin(poses[:, 2])).sum()), float((weights * np.cos(poses[:, 2])).sum()))
    return Pose2D(x, y, theta)


def estimate_pose(state: FilterState) -> Pose2D:
    state.estimate = weighted_mean_pose(state.joint_poses(), state.joint_weights())
    return state.estimate


def estimate_classes(state: FilterState, scan: Scan, df: DistanceField, meas_cfg: MeasurementConfig,
                     chi: float) -> tuple:
    """
    최대 우도 추적 입자에서 빔별 p(unknown|z) 와 미지 장애물 플래그를 계산합니다.

    Returns:
        tuple: (posteriors (K,), flags (K,) bool). 유효 빔이 없으면 빈 배열
    """
    try:
        known, unknown = class_terms_batch(scan, state.tracking_poses[state.ml_index], df, meas_cfg)
    except NoValidBeamsError:
        state.unknown_posteriors = np.empty(0)
        state.unknown_flags = np.empty(0, dtype=bool)
        return state.unknown_posteriors, state.unknown_flags
    posteriors = unknown_posteriors(np.stack([known[0], unknown], axis=1))
    state.unknown_posteriors = posteriors
    state.unknown_flags = posteriors > chi
    return posteriors, state.unknown_flags


def estimate_reliability(state: FilterState, dm: DecisionModel, cfg: ReliabilityConfig,
                         evidence: bool = True) -> float:
    """
    최대 우도 입자의 MAE 로 r̂ 을 베이즈 갱신해 신뢰도로 저장합니다.
    evidence=False (유효 빔 없음) 이면 r̂ 을 그대로 사용합니다.
    """
    if not evidence:
        state.reliability = cfg.clamp(state.r_hat)
        return state.reliability
    mae = state.tracking_mae[state.ml_index]
    p_success, p_failure = dm.densities(mae)
    state.reliability = bayes_reliability(state.r_hat, float(p_success), float(p_failure), cfg)
    return state.reliability


# ═══════════════════════════════════════════
# 재샘플링
# ═══════════════════════════════════════════

def effective_sample_size(weights: np.ndarray) -> float:
    weights = np.asarray(weights, dtype=float)
    return float(1.0 / np.sum(weights ** 2))


def multinomial_indices(weights: np.ndarray, count: int, rng: np.random.Generator) -> np.ndarray:
    """누적합 역변환으로 count 개의 인덱스를 뽑습니다."""
    cumulative = np.cumsum(np.asarray(weights, dtype=float))
    cumulative /= cumulative[-1]
    cumulative[-1] = 1.0
    draws = rng.random(count)
    return np.searchsorted(cumulative, draws, side="right")


def resample(state: FilterState, rng: np.random.Generator, ess_ratio: float = 0.5) -> bool:
    """
    ESS < ess_ratio·(^PM + ^GM) 이거나 전역 샘플이 있으면 결합 집합에서 ^PM 개를 뽑아
    다음 추적 집합으로 삼고 가중치를 균등으로 되돌립니다.

    Returns:
        bool: 재샘플링 수행 여부
    """
    weights = state.joint_weights()
    pool = weights.size
    if state.num_global == 0 and effective_sample_size(weights) >= ess_ratio * pool:
        return False

    num = state.num_particles
    idx = multinomial_indices(weights, num, rng)
    ml_hits = np.nonzero(idx == state.ml_index)[0]
    state.tracking_poses = state.joint_poses()[idx]
    state.tracking_mae = state.joint_mae()[idx]
    state.tracking_weights = np.full(num, 1.0 / num)
    state.ml_index = int(ml_hits[0]) if ml_hits.size else 0
    state.clear_global()
    return True


# ═══════════════════════════════════════════
# 사이클
# ═══════════════════════════════════════════

def step(state: FilterState, u: OdometryInput, scan: Scan, gl_samples: Sequence[GlobalSample],
         configs: FilterConfigs, df: DistanceField, dm: DecisionModel, rng: np.random.Generator,
         unif_value: Optional[float] = None, time_s: float = 0.0,
         gt: Optional[Pose2D] = None) -> tuple:
    """
    한 사이클을 처리합니다.

    Returns:
        tuple: (state, CycleReport)
    """
    if unif_value is None:
        unif_value = default_unif_value(df, configs.fusion)
    use_ccmm = configs.filter.use_ccmm

    predict(state, u, configs.motion, rng)
    transit(state, configs.reliability)
    evidence = bool(scan.beams(configs.measurement.beam_stride)[1].size)
    weight_tracking(state, scan, df, configs.measurement, dm, use_ccmm)
    weight_global(state, gl_samples, scan, df, configs.measurement, dm, configs.fusion, unif_value, use_ccmm)
    n_global = state.num_global
    estimate_pose(state)
    _, flags = estimate_classes(state, scan, df, configs.measurement, configs.fusion.chi)
    estimate_reliability(state, dm, configs.reliability, evidence)

    ml_mae = state.tracking_mae[state.ml_index]
    report = CycleReport(
        cycle=state.cycle,
        time_s=time_s,
        estimate=state.estimate,
        reliability=state.reliability,
        mae=None if np.isnan(ml_mae) else float(ml_mae),
        n_global_samples=n_global,
        n_unknown_beams=int(np.count_nonzero(flags)),
        gt=gt,
        unknown_flags=flags,
    )
    resample(state, rng, configs.fusion.resample_ess_ratio)
    state.cycle += 1
    return state, report


def default_unif_value(df: DistanceField, fusion_cfg: FusionConfig) -> float:
    """설정값이 없으면 1/(자유 면적·2π)"""
    if fusion_cfg.unif_value is not None:
        return fusion_cfg.unif_value
    area = df.grid.free_area
    if area <= 0:
        area = df.grid.width * df.grid.height * df.grid.resolution ** 2
    return 1.0 / (area * 2.0 * math.pi)


class LocalizationEngine:
    """
    거리장, 판정 모델, 설정, 필터 상태를 묶어 사이클 단위로 실행합니다.

    Args:
        df: 지도 거리장
        dm: 판정 모델
        configs: 모듈 설정 묶음
    """

    name = "mcl"

    def __init__(self, df: DistanceField, dm: DecisionModel, configs: FilterConfigs = FilterConfigs()):
        self.df = df
        self.dm = dm
        self.configs = configs
        self.unif_value = default_unif_value(df, configs.fusion)
        self.state: Optional[FilterState] = None

    def initialize(self, initial_pose: Pose2D, rng: np.random.Generator) -> FilterState:
        cfg = self.configs.filter
        self.state = init_filter(
            initial_pose, cfg.spread, cfg.num_particles, rng, self.configs.reliability.r_init,
        )
        return self.state

    def step(self, u: OdometryInput, scan: Scan, gl_samples: Sequence[GlobalSample],
             rng: np.random.Generator, time_s: float = 0.0, gt: Optional[Pose2D] = None) -> CycleReport:
        if self.state is None:
            logger.error("초기화되지 않은 필터에서 step 이 호출되었습니다")
            raise RuntimeError("initialize() 를 먼저 호출해야 합니다")
        _, report = step(
            self.state, u, scan, gl_samples, self.configs, self.df, self.dm, rng,
            unif_value=self.unif_value, time_s=time_s, gt=gt,
        )
        return report

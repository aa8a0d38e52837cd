# -*- coding: utf-8 -*-
"""
models/reliability.py - 신뢰도 전이 및 갱신
=============================================
신뢰도 r = p(s = success) 를 이동량에 따라 감소시키고(전이),
판정 모델의 증거 p(d|s) 로 베이즈 갱신합니다. 결과는 항상 [r_floor, r_ceil] 로 제한합니다.
"""

import logging
from dataclasses import dataclass
from typing import Optional

from models.decision import DecisionModel, decision_likelihood, SUCCESS, FAILURE

# ── 로거 설정 ──
logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ReliabilityConfig:
    """
    Attributes:
        alpha_d (float): 병진 변위 감쇠 계수 [1/m²]
        alpha_theta (float): 회전 변위 감쇠 계수 [1/rad²]
        r_floor (float): 하한
        r_ceil (float): 상한
        r_init (float): 초기 신뢰도
    """

    alpha_d: float = 0.0
    alpha_theta: float = 0.0
    r_floor: float = 0.01
    r_ceil: float = 0.99
    r_init: float = 0.5

    def __post_init__(self):
        if self.alpha_d < 0 or self.alpha_theta < 0:
            raise ValueError(f"alpha 계수는 0 이상이어야 합니다: ({self.alpha_d}, {self.alpha_theta})")
        if not 0.0 < self.r_floor < self.r_ceil < 1.0:
            logger.error(f"신뢰도 범위 오류: [{self.r_floor}, {self.r_ceil}]")
            raise ValueError(f"0 < r_floor < r_ceil < 1 이어야 합니다: [{self.r_floor}, {self.r_ceil}]")
        if not self.r_floor <= self.r_init <= self.r_ceil:
            raise ValueError(f"r_init 은 [r_floor, r_ceil] 안에 있어야 합니다: {self.r_init}")

    def clamp(self, r: float) -> float:
        return min(max(r, self.r_floor), self.r_ceil)


def transit_reliability(r_prev: float, delta_d: float, delta_theta: float,
                        cfg: ReliabilityConfig) -> float:
    """
    r̂ = r_prev·(1 − α_d·Δd² − α_θ·Δθ²) 를 [r_floor, r_ceil] 로 제한합니다.

    Raises:
        ValueError: r_prev 가 [0, 1] 밖일 때
    """
    if not 0.0 <= r_prev <= 1.0:
        logger.error(f"이전 신뢰도 범위 오류: {r_prev}")
        raise ValueError(f"r_prev 는 [0, 1] 범위여야 합니다: {r_prev}")
    decay = 1.0 - cfg.alpha_d * delta_d ** 2 - cfg.alpha_theta * delta_theta ** 2
    return cfg.clamp(r_prev * decay)


def bayes_reliability(r_hat: float, p_success: float, p_failure: float,
                      cfg: ReliabilityConfig) -> float:
    """증거 밀도 쌍으로 베이즈 갱신 후 제한"""
    numerator = p_success * r_hat
    denominator = numerator + p_failure * (1.0 - r_hat)
    if denominator <= 0:
        return cfg.clamp(r_hat)
    return cfg.clamp(numerator / denominator)


def update_reliability(r_hat: float, d: Optional[float], dm: DecisionModel,
                       cfg: ReliabilityConfig) -> float:
    """
    판정 모델로 신뢰도를 갱신합니다. d 가 None 이면 두 히스토그램의 마지막 빈을 사용합니다.

    Args:
        r_hat: 전이된 신뢰도
        d: MAE [m] 또는 None
        dm: 판정 모델
        cfg: 신뢰도 설정

    Returns:
        float: 갱신된 신뢰도
    """
    p_success = decision_likelihood(d, SUCCESS, dm)
    p_failure = decision_likelihood(d, FAILURE, dm)
    return bayes_reliability(r_hat, p_success, p_failure, cfg)

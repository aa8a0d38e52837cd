# -*- coding: utf-8 -*-
"""
models/motion.py - 운동 모델
==============================
속도 명령 u = (v, ω[, v_y]) 에 가우시안 잡음을 더해 포즈를 정확한 원호 적분으로
전파합니다. 차동 구동(differential)과 전방향(omni) 구동을 지원합니다.

잡음 분산 (대각):
    v   : a1·v² + a2·ω²
    ω   : a3·v² + a4·ω²
    v_y : a5·v_y² + a6·ω²   (omni 전용)

사용 예시:
    >>> rng = np.random.default_rng(0)
    >>> sample_motion(Pose2D(), OdometryInput(v=1.0, omega=0.0, dt=1.0), MotionConfig(), rng)
"""

import math
import logging
from dataclasses import dataclass

import numpy as np

from core.geometry import Pose2D, normalize_angles

# ── 로거 설정 ──
logger = logging.getLogger(__name__)

DIFFERENTIAL = "differential"
OMNI = "omni"
DRIVE_TYPES = (DIFFERENTIAL, OMNI)

# |ω·dt| 가 이 값보다 작으면 직선 운동으로 적분
STRAIGHT_EPS = 1e-6


@dataclass(frozen=True)
class OdometryInput:
    """
    오도메트리 속도 입력

    Attributes:
        v (float): 전진 속도 [m/s]
        omega (float): 각속도 [rad/s]
        dt (float): 적분 시간 [s], ≥ 0
        vy (float): 횡방향 속도 [m/s] (omni 전용)
    """

    v: float = 0.0
    omega: float = 0.0
    dt: float = 0.0
    vy: float = 0.0

    def __post_init__(self):
        if not self.dt >= 0:
            logger.error(f"오도메트리 dt 오류: {self.dt}")
            raise ValueError(f"dt 는 0 이상이어야 합니다: {self.dt}")

    def scaled(self, scale_v: float, scale_omega: float) -> "OdometryInput":
        return OdometryInput(
            v=self.v * scale_v, omega=self.omega * scale_omega,
            dt=self.dt, vy=self.vy * scale_v,
        )

    def displacement(self) -> tuple:
        """(Δd, Δθ) 병진/회전 변위 크기"""
        return math.hypot(self.v, self.vy) * self.dt, abs(self.omega) * self.dt


@dataclass(frozen=True)
class MotionConfig:
    """운동 잡음 설정. 모든 계수는 0 이상."""

    drive: str = DIFFERENTIAL
    a1: float = 0.05
    a2: float = 0.01
    a3: float = 0.01
    a4: float = 0.05
    a5: float = 0.05
    a6: float = 0.01

    def __post_init__(self):
        if self.drive not in DRIVE_TYPES:
            raise ValueError(f"drive 는 {DRIVE_TYPES} 중 하나여야 합니다: {self.drive!r}")
        for name in ("a1", "a2", "a3", "a4", "a5", "a6"):
            if getattr(self, name) < 0:
                logger.error(f"운동 잡음 계수 오류: {name}={getattr(self, name)}")
                raise ValueError(f"{name} 는 0 이상이어야 합니다: {getattr(self, name)}")


def integrate_poses(poses: np.ndarray, v, omega, dt: float, vy=0.0) -> np.ndarray:
    """
    포즈 배열을 속도 입력으로 정확히 적분합니다. (잡음 없음)

    Args:
        poses: (N, 3) [x, y, θ]
        v, omega, vy: 스칼라 또는 (N,) 속도
        dt: 시간 [s]

    Returns:
        np.ndarray: (N, 3) 새 포즈 (θ 정규화)
    """
    poses = np.asarray(poses, dtype=float).reshape(-1, 3)
    n = poses.shape[0]
    v = np.broadcast_to(np.asarray(v, dtype=float), (n,))
    vy = np.broadcast_to(np.asarray(vy, dtype=float), (n,))
    omega = np.broadcast_to(np.asarray(omega, dtype=float), (n,))
    theta = poses[:, 2]
    dtheta = omega * dt

    straight = np.abs(dtheta) < STRAIGHT_EPS
    out = poses.copy()

    # 직선 구간
    c, s = np.cos(theta), np.sin(theta)
    sx = (v * c - vy * s) * dt
    sy = (v * s + vy * c) * dt

    # 원호 구간: ω=0 나눗셈을 피하기 위해 직선 셀은 1로 대체
    safe_omega = np.where(straight, 1.0, omega)
    sin_term = np.sin(theta + dtheta) - s
    cos_term = c - np.cos(theta + dtheta)
    ax = (v * sin_term - vy * cos_term) / safe_omega
    ay = (v * cos_term + vy * sin_term) / safe_omega

    out[:, 0] += np.where(straight, sx, ax)
    out[:, 1] += np.where(straight, sy, ay)
    out[:, 2] = normalize_angles(theta + dtheta)
    return out


def integrate_pose(pose: Pose2D, u: OdometryInput) -> Pose2D:
    """단일 포즈의 잡음 없는 정확 적분"""
    result = integrate_poses(pose.as_array()[None, :], u.v, u.omega, u.dt, u.vy)
    return Pose2D.from_array(result[0])


def motion_std(u: OdometryInput, cfg: MotionConfig) -> tuple:
    """(σ_v, σ_ω, σ_vy) 잡음 표준편차"""
    v2, w2, vy2 = u.v ** 2, u.omega ** 2, u.vy ** 2
    sigma_v = math.sqrt(cfg.a1 * v2 + cfg.a2 * w2)
    sigma_w = math.sqrt(cfg.a3 * v2 + cfg.a4 * w2)
    sigma_vy = math.sqrt(cfg.a5 * vy2 + cfg.a6 * w2) if cfg.drive == OMNI else 0.0
    return sigma_v, sigma_w, sigma_vy


def sample_motion_batch(poses: np.ndarray, u: OdometryInput, cfg: MotionConfig,
                        rng: np.random.Generator) -> np.ndarray:
    """
    입자 포즈 배열 전체에 잡음 섞인 속도를 샘플링해 전파합니다.
    난수는 입자 순서대로 채널(v, ω[, v_y])마다 한 번씩 뽑으므로 시드가 같으면 결과가 같습니다.

    Args:
        poses: (N, 3)
        u: 오도메트리 입력
        cfg: 운동 잡음 설정
        rng: numpy Generator

    Returns:
        np.ndarray: (N, 3)
    """
    poses = np.asarray(poses, dtype=float).reshape(-1, 3)
    n = poses.shape[0]
    sigma_v, sigma_w, sigma_vy = motion_std(u, cfg)

    v = u.v + sigma_v * rng.standard_normal(n)
    omega = u.omega + sigma_w * rng.standard_normal(n)
    if cfg.drive == OMNI:
        vy = u.vy + sigma_vy * rng.standard_normal(n)
    else:
        vy = np.zeros(n)
    return integrate_poses(poses, v, omega, u.dt, vy)


def sample_motion(pose: Pose2D, u: OdometryInput, cfg: MotionConfig,
                  rng: np.random.Generator) -> Pose2D:
    """단일 포즈 버전의 sample_motion_batch"""
    return Pose2D.from_array(sample_motion_batch(pose.as_array()[None, :], u, cfg, rng)[0])

# -*- coding: utf-8 -*-
"""
global_loc/pose_sampler.py - 후보 포즈 샘플링
===============================================
특징 매칭 결과로부터 현재 로봇의 후보 포즈를 계산하고, 주변에 가우시안 샘플
(및 반대 방향 샘플)을 뿌린 뒤 현재 스캔과의 매칭률이 낮은 샘플을 버립니다.

후보 포즈 (G: 전역 키포인트, L: 로컬 키포인트, O: 오도메트리 포즈):
    Δθ = G.θ − L.θ
    C.xy = G.xy + R(Δθ)·(O.xy − L.xy)
    C.θ  = O.θ + Δθ

사용 예시:
    >>> localizer = GlobalLocalizer(df, FeatureConfig(), SamplerConfig())
    >>> localizer.add_observation(scan, odom_pose)
    >>> samples = localizer.localize(scan, rng)
"""

import math
import logging
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from core.geometry import Pose2D, normalize_angles
from core.grid_map import DistanceField, FREE, build_distance_field
from models.measurement import Scan, endpoint_residuals
from global_loc.features import (
    FeatureConfig, FeatureMatch, Keypoint, build_keypoints, load_or_build_keypoints, match_features,
)
from global_loc.local_map import LocalMapBuilder

# ── 로거 설정 ──
logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SamplerConfig:
    """
    Attributes:
        sigma_xy (float): 후보 주변 위치 잡음 [m]
        sigma_theta (float): 후보 주변 각도 잡음 [rad]
        n_per_match (int): 매칭당 (정방향, 반대방향 각각) 샘플 수
        rate_min (float): 매칭률 하한
        match_residual (float): 매칭으로 보는 빔 잔차 상한 [m]
        max_samples (int): 사이클당 최대 샘플 수 (매칭률 높은 순)
        beam_stride (int): 매칭률 계산 빔 보폭
        interval (int): 전역 위치 추정 실행 주기 [cycle]
        n_acc (int): 로컬 지도 누적 스캔 수
        local_range (float): 로컬 지도에 쓰는 최대 빔 길이 [m]
    """

    sigma_xy: float = 0.5
    sigma_theta: float = math.radians(15.0)
    n_per_match: int = 10
    rate_min: float = 0.6
    match_residual: float = 0.2
    max_samples: int = 100
    beam_stride: int = 4
    interval: int = 3
    n_acc: int = 10
    local_range: float = 10.0

    def __post_init__(self):
        if self.sigma_xy < 0 or self.sigma_theta < 0:
            raise ValueError("sigma_xy, sigma_theta 는 0 이상이어야 합니다")
        if self.n_per_match < 1 or self.max_samples < 1 or self.interval < 1 or self.n_acc < 1:
            raise ValueError("n_per_match, max_samples, interval, n_acc 는 1 이상이어야 합니다")
        if not 0.0 <= self.rate_min <= 1.0:
            raise ValueError(f"rate_min 은 [0, 1] 범위여야 합니다: {self.rate_min}")
        if not self.match_residual > 0 or not self.local_range > 0:
            raise ValueError("match_residual, local_range 는 0보다 커야 합니다")
        if self.beam_stride < 1:
            raise ValueError(f"beam_stride 는 1 이상이어야 합니다: {self.beam_stride}")


@dataclass(frozen=True)
class GlobalSample:
    pose: Pose2D
    matching_rate: float


def candidate_pose(global_kp: Keypoint, local_kp: Keypoint, odom_pose: Pose2D) -> Pose2D:
    """매칭 한 쌍과 현재 오도메트리 포즈로부터 전역 좌표계 후보 포즈를 계산합니다."""
    dtheta = global_kp.orientation - local_kp.orientation
    dx = odom_pose.x - local_kp.x
    dy = odom_pose.y - local_kp.y
    c, s = math.cos(dtheta), math.sin(dtheta)
    return Pose2D(
        global_kp.x + c * dx - s * dy,
        global_kp.y + s * dx + c * dy,
        odom_pose.theta + dtheta,
    )


def matching_rates(scan: Scan, poses: np.ndarray, df: DistanceField,
                   match_residual: float, beam_stride: int = 1) -> np.ndarray:
    """포즈별로 (r < r_max 유효 빔 중) 잔차 ≤ match_residual 인 빔 비율 (N,)"""
    poses = np.asarray(poses, dtype=float).reshape(-1, 3)
    angles, ranges = scan.beams(beam_stride)
    keep = ranges < scan.range_max
    if not keep.any():
        return np.zeros(poses.shape[0])
    residuals = endpoint_residuals(poses, angles[keep], ranges[keep], df, scan.sensor_offset)
    return (residuals <= match_residual).mean(axis=1)


def sample_candidate_poses(matches: List[FeatureMatch], odom_pose: Pose2D, scan: Scan,
                           df: DistanceField, rng: np.random.Generator,
                           cfg: SamplerConfig = SamplerConfig()) -> List[GlobalSample]:
    """
    매칭별 후보 포즈 주변과 그 반대 방향(θ+π) 주변에 각각 n_per_match 개를 샘플링하고,
    자유 셀이 아니거나 매칭률이 rate_min 미만인 샘플을 버립니다.

    Returns:
        list[GlobalSample]: 매칭률 내림차순, 최대 max_samples 개
    """
    if not matches:
        return []
    centers = []
    for match in matches:
        c = candidate_pose(match.global_kp, match.local_kp, odom_pose)
        centers.append((c.x, c.y, c.theta))
        centers.append((c.x, c.y, c.theta + math.pi))
    centers = np.repeat(np.array(centers), cfg.n_per_match, axis=0)

    noise = rng.standard_normal(centers.shape)
    poses = centers.copy()
    poses[:, :2] += noise[:, :2] * cfg.sigma_xy
    poses[:, 2] = normalize_angles(poses[:, 2] + noise[:, 2] * cfg.sigma_theta)

    free = df.grid.state_at(poses[:, :2]) == FREE
    poses = poses[free]
    if poses.shape[0] == 0:
        return []
    rates = matching_rates(scan, poses, df, cfg.match_residual, cfg.beam_stride)
    accepted = rates >= cfg.rate_min
    poses, rates = poses[accepted], rates[accepted]

    order = np.argsort(-rates, kind="stable")[: cfg.max_samples]
    return [GlobalSample(Pose2D.from_array(poses[i]), float(rates[i])) for i in order]


class GlobalLocalizer:
    """
    전역 키포인트와 로컬 지도 누적기를 보관하고 주기적으로 후보 포즈를 만듭니다.

    Args:
        df: 전역 지도 거리장
        feature_cfg: 특징 설정
        sampler_cfg: 샘플링 설정
        keypoints: 미리 계산한 전역 키포인트 (없으면 계산)
        cache_path: 키포인트 캐시 파일 경로
    """

    def __init__(self, df: DistanceField, feature_cfg: FeatureConfig = FeatureConfig(),
                 sampler_cfg: SamplerConfig = SamplerConfig(),
                 keypoints: Optional[List[Keypoint]] = None, cache_path: Optional[str] = None):
        self.df = df
        self.feature_cfg = feature_cfg
        self.sampler_cfg = sampler_cfg
        if keypoints is None:
            keypoints = load_or_build_keypoints(df, feature_cfg, cache_path)
        self.keypoints = keypoints
        if not keypoints:
            logger.warning("전역 지도에서 키포인트를 찾지 못했습니다. 전역 샘플이 생성되지 않습니다")
        self.builder = LocalMapBuilder(
            resolution=df.grid.resolution, n_acc=sampler_cfg.n_acc,
            local_range=sampler_cfg.local_range,
        )
        logger.info(f"전역 위치 추정기 준비: 전역 키포인트 {len(keypoints)}개")

    def add_observation(self, scan: Scan, odom_pose: Pose2D):
        self.builder.add(scan, odom_pose)

    def should_run(self, cycle: int) -> bool:
        return len(self.builder) > 0 and cycle % self.sampler_cfg.interval == 0

    def local_keypoints(self) -> tuple:
        """(로컬 키포인트, 현재 오도메트리 포즈)"""
        grid, odom_pose = self.builder.build()
        local_df = build_distance_field(grid, clamp=self.df.clamp)
        return build_keypoints(local_df, self.feature_cfg), odom_pose

    def localize(self, scan: Scan, rng: np.random.Generator) -> List[GlobalSample]:
        """현재 누적된 로컬 지도로 후보 포즈를 생성합니다. 실패 시 빈 리스트."""
        if len(self.builder) == 0:
            return []
        local_kps, odom_pose = self.local_keypoints()
        if not local_kps:
            logger.debug("로컬 키포인트가 없어 전역 샘플을 만들지 않습니다")
            return []
        matches = match_features(local_kps, self.keypoints, self.feature_cfg)
        samples = sample_candidate_poses(matches, odom_pose, scan, self.df, rng, self.sampler_cfg)
        logger.debug(
            f"전역 위치 추정: 로컬 키포인트 {len(local_kps)}개, 매칭 {len(matches)}개, 샘플 {len(samples)}개"
        )
        return samples

# -*- coding: utf-8 -*-
"""
sim/raycast.py - LiDAR 레이캐스팅
===================================
정적 지도에 대해서는 거리장을 이용한 가변 보폭 레이 마칭으로,
이동 장애물(원판/선분)에 대해서는 해석적 교차 계산으로 빔 거리를 구합니다.

사용 예시:
    >>> geometry = ScanGeometry()
    >>> ranges = cast_rays(df, origin_xy=(1.0, 1.0), angles=geometry.angles + 0.3,
    ...                    range_max=geometry.range_max)
"""

import math
import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from core.geometry import Pose2D
from core.grid_map import DistanceField, OCCUPIED
from models.measurement import Scan

# ── 로거 설정 ──
logger = logging.getLogger(__name__)

# 경계 정밀화용 이분법 반복 횟수
_REFINE_ITERATIONS = 8


@dataclass(frozen=True)
class ScanGeometry:
    """
    시뮬레이션 LiDAR 기하

    Attributes:
        fov (float): 시야각 [rad]
        angle_increment (float): 빔 간격 [rad]
        range_max (float): 최대 거리 [m]
        range_min (float): 최소 거리 [m]
        sigma_r (float): 거리 잡음 표준편차 [m]
        sensor_offset (Pose2D): 로봇 좌표계 센서 포즈
    """

    fov: float = math.radians(270.0)
    angle_increment: float = math.radians(0.25)
    range_max: float = 30.0
    range_min: float = 0.05
    sigma_r: float = 0.01
    sensor_offset: Pose2D = Pose2D()

    def __post_init__(self):
        if not 0 < self.fov <= 2 * math.pi:
            raise ValueError(f"fov 는 (0, 2π] 범위여야 합니다: {self.fov}")
        if not self.angle_increment > 0:
            raise ValueError(f"angle_increment 는 0보다 커야 합니다: {self.angle_increment}")
        if not self.range_max > self.range_min >= 0:
            raise ValueError(f"0 ≤ range_min < range_max 이어야 합니다: ({self.range_min}, {self.range_max})")
        if self.sigma_r < 0:
            raise ValueError(f"sigma_r 는 0 이상이어야 합니다: {self.sigma_r}")

    @property
    def num_beams(self) -> int:
        return int(round(self.fov / self.angle_increment)) + 1

    @property
    def angle_min(self) -> float:
        return -0.5 * self.fov

    @property
    def angles(self) -> np.ndarray:
        return self.angle_min + self.angle_increment * np.arange(self.num_beams)

    def make_scan(self, ranges: np.ndarray) -> Scan:
        return Scan(
            ranges=ranges, angle_min=self.angle_min, angle_increment=self.angle_increment,
            range_max=self.range_max, range_min=self.range_min, sensor_offset=self.sensor_offset,
        )


@dataclass(frozen=True)
class Circle:
    cx: float
    cy: float
    radius: float


@dataclass(frozen=True)
class Segment:
    x1: float
    y1: float
    x2: float
    y2: float


def _occupied_at(df: DistanceField, points: np.ndarray) -> tuple:
    """(inside, occupied) 마스크"""
    grid = df.grid
    rows, cols = grid.world_to_cell(points)
    inside = grid.contains(rows, cols)
    occupied = np.zeros(rows.shape, dtype=bool)
    occupied[inside] = grid.cells[rows[inside], cols[inside]] == OCCUPIED
    return inside, occupied


def march_static(df: DistanceField, origin_xy, angles: np.ndarray, range_max: float) -> np.ndarray:
    """
    정적 지도에 대한 레이 마칭. 거리장 값만큼 안전하게 건너뛰며,
    점유 셀 진입 후에는 이분법으로 경계를 정밀화합니다.

    Args:
        df: 거리장 (격자 포함)
        origin_xy: 광선 원점 (x, y)
        angles: (K,) 월드 좌표 빔 방향 [rad]
        range_max: 최대 거리

    Returns:
        np.ndarray: (K,) 첫 점유 셀 충돌 거리. 충돌 없음 또는 격자 이탈은 inf
    """
    angles = np.asarray(angles, dtype=float)
    ox, oy = float(origin_xy[0]), float(origin_xy[1])
    dx, dy = np.cos(angles), np.sin(angles)
    res = df.grid.resolution
    min_step = 0.25 * res

    t = np.zeros(angles.size)
    t_prev = np.zeros(angles.size)
    hit = np.full(angles.size, np.inf)
    active = np.ones(angles.size, dtype=bool)

    while active.any():
        idx = np.nonzero(active)[0]
        pts = np.stack([ox + t[idx] * dx[idx], oy + t[idx] * dy[idx]], axis=1)
        inside, occupied = _occupied_at(df, pts)

        done_hit = occupied
        done_miss = ~inside | (t[idx] > range_max)
        hit[idx[done_hit]] = t[idx[done_hit]]
        active[idx[done_hit | done_miss]] = False

        go = idx[~(done_hit | done_miss)]
        if go.size == 0:
            break
        clearance = df.lookup(pts[~(done_hit | done_miss)])
        t_prev[go] = t[go]
        t[go] = t[go] + np.maximum(clearance - 1.5 * res, min_step)

    # 충돌 구간 [t_prev, t] 를 이분법으로 좁혀 경계 진입점을 구함
    refine = np.nonzero(np.isfinite(hit) & (hit > 0))[0]
    if refine.size:
        lo = t_prev[refine].copy()
        hi = hit[refine].copy()
        for _ in range(_REFINE_ITERATIONS):
            mid = 0.5 * (lo + hi)
            pts = np.stack([ox + mid * dx[refine], oy + mid * dy[refine]], axis=1)
            _, occupied = _occupied_at(df, pts)
            hi = np.where(occupied, mid, hi)
            lo = np.where(occupied, lo, mid)
        hit[refine] = hi
    return hit


def ray_circle_distances(origin_xy, angles: np.ndarray, circle: Circle) -> np.ndarray:
    """광선과 원의 첫 교차 거리 (K,). 교차 없음 또는 원 내부 원점은 inf."""
    angles = np.asarray(angles, dtype=float)
    dx, dy = np.cos(angles), np.sin(angles)
    fx = float(origin_xy[0]) - circle.cx
    fy = float(origin_xy[1]) - circle.cy
    b = fx * dx + fy * dy
    c = fx * fx + fy * fy - circle.radius ** 2
    disc = b * b - c
    out = np.full(angles.size, np.inf)
    if c <= 0:
        return out
    ok = disc >= 0
    t1 = -b[ok] - np.sqrt(disc[ok])
    out[ok] = np.where(t1 >= 0, t1, np.inf)
    return out


def ray_segment_distances(origin_xy, angles: np.ndarray, segment: Segment) -> np.ndarray:
    """광선과 선분의 교차 거리 (K,). 평행하거나 교차 없으면 inf."""
    angles = np.asarray(angles, dtype=float)
    dx, dy = np.cos(angles), np.sin(angles)
    ox, oy = float(origin_xy[0]), float(origin_xy[1])
    ex, ey = segment.x2 - segment.x1, segment.y2 - segment.y1
    denom = dx * ey - dy * ex
    wx, wy = segment.x1 - ox, segment.y1 - oy
    out = np.full(angles.size, np.inf)
    ok = np.abs(denom) > 1e-12
    safe = np.where(ok, denom, 1.0)
    t = (wx * ey - wy * ex) / safe
    s = (wx * dy - wy * dx) / safe
    valid = ok & (t >= 0) & (s >= 0) & (s <= 1)
    out[valid] = t[valid]
    return out


def cast_rays(df: DistanceField, origin_xy, angles: np.ndarray, range_max: float,
              shapes: Sequence = ()) -> np.ndarray:
    """
    정적 지도와 동적 도형을 모두 고려한 잡음 없는 빔 거리 (K,). 충돌 없음은 range_max.
    """
    ranges = march_static(df, origin_xy, angles, range_max)
    for shape in shapes:
        if isinstance(shape, Circle):
            ranges = np.minimum(ranges, ray_circle_distances(origin_xy, angles, shape))
        elif isinstance(shape, Segment):
            ranges = np.minimum(ranges, ray_segment_distances(origin_xy, angles, shape))
        else:
            raise TypeError(f"지원하지 않는 도형입니다: {type(shape).__name__}")
    return np.where(ranges < range_max, ranges, range_max)


def simulate_scan(df: DistanceField, pose: Pose2D, geometry: ScanGeometry,
                  rng: np.random.Generator, shapes: Sequence = ()) -> Scan:
    """
    포즈에서 본 스캔을 생성합니다. 충돌한 빔에만 N(0, σ_r²) 잡음을 더하고,
    충돌하지 않은 빔은 정확히 r_max 입니다. 잡음 난수는 빔 수만큼 항상 소비합니다.
    """
    sensor = pose.compose(geometry.sensor_offset)
    world_angles = sensor.theta + geometry.angles
    clean = cast_rays(df, (sensor.x, sensor.y), world_angles, geometry.range_max, shapes)
    noise = rng.standard_normal(clean.size) * geometry.sigma_r
    hit = clean < geometry.range_max
    noisy = np.where(hit, clean + noise, geometry.range_max)
    noisy = np.where(hit, np.clip(noisy, geometry.range_min, geometry.range_max), noisy)
    return geometry.make_scan(noisy)

# -*- coding: utf-8 -*-
"""
sim/world.py - 월드 상태, 이동 장애물, 오도메트리 오염
========================================================
실제 포즈를 정확한 운동학으로 전진시키고(벽을 뚫지 않음), 오도메트리 보고값에
잡음 스케일과 가우시안 섭동을 적용하며, 이동 장애물을 포함한 스캔을 만듭니다.
"""

import math
import logging
import dataclasses
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from core.geometry import Pose2D
from core.grid_map import DistanceField, FREE
from models.measurement import Scan
from models.motion import OdometryInput, integrate_pose
from sim.raycast import Circle, ScanGeometry, Segment, cast_rays, simulate_scan

# ── 로거 설정 ──
logger = logging.getLogger(__name__)

DISC = "disc"
SEGMENT = "segment"


@dataclass(frozen=True)
class MovingObstacle:
    """
    등속 이동 장애물. [t_start, t_end] 동안만 존재합니다.

    Attributes:
        shape (str): disc 또는 segment
        x, y (float): t_start 시점 위치 (disc 중심 / segment 시작점) [m]
        size (float): disc 반지름 또는 segment 길이 [m]
        heading (float): segment 방향 [rad] (disc 는 무시)
        vx, vy (float): 속도 [m/s]
        t_start, t_end (float): 활성 구간 [s]
    """

    shape: str
    x: float
    y: float
    size: float
    vx: float = 0.0
    vy: float = 0.0
    t_start: float = 0.0
    t_end: float = math.inf
    heading: float = 0.0

    def __post_init__(self):
        if self.shape not in (DISC, SEGMENT):
            raise ValueError(f"shape 는 {DISC}/{SEGMENT} 중 하나여야 합니다: {self.shape!r}")
        if not self.size > 0:
            raise ValueError(f"size 는 0보다 커야 합니다: {self.size}")
        if self.t_end < self.t_start:
            raise ValueError(f"t_end 는 t_start 이상이어야 합니다: ({self.t_start}, {self.t_end})")

    def shape_at(self, t: float):
        """시각 t 의 Circle/Segment. 비활성 구간이면 None."""
        if t < self.t_start or t > self.t_end:
            return None
        elapsed = t - self.t_start
        px = self.x + self.vx * elapsed
        py = self.y + self.vy * elapsed
        if self.shape == DISC:
            return Circle(px, py, self.size)
        return Segment(
            px, py,
            px + self.size * math.cos(self.heading), py + self.size * math.sin(self.heading),
        )


@dataclass(frozen=True)
class NoisePhase:
    """t_start 이후 오도메트리 보고값에 곱하는 스케일"""

    t_start: float
    scale_v: float = 1.0
    scale_omega: float = 1.0


def noise_scale_at(schedule: Sequence[NoisePhase], t: float) -> Tuple[float, float]:
    """시각 t 에 적용되는 (scale_v, scale_ω). 해당 구간이 없으면 (1, 1)."""
    scale = (1.0, 1.0)
    for phase in sorted(schedule, key=lambda p: p.t_start):
        if phase.t_start <= t:
            scale = (phase.scale_v, phase.scale_omega)
    return scale


@dataclass(frozen=True, eq=False)
class WorldState:
    """
    시뮬레이터 월드

    Attributes:
        gt_pose (Pose2D): 실제 포즈 (항상 자유 셀 위)
        df (DistanceField): 정적 지도 거리장 (격자 포함)
        obstacles (tuple): MovingObstacle 목록
        time (float): 현재 시각 [s]
        noise_schedule (tuple): NoisePhase 목록
        odom_sigma_v (float): 보고 전진속도 섭동 표준편차 [m/s]
        odom_sigma_omega (float): 보고 각속도 섭동 표준편차 [rad/s]
        robot_radius (float): 충돌 판정 반지름 [m]
    """

    gt_pose: Pose2D
    df: DistanceField
    obstacles: tuple = ()
    time: float = 0.0
    noise_schedule: tuple = ()
    odom_sigma_v: float = 0.0
    odom_sigma_omega: float = 0.0
    robot_radius: float = 0.0

    def __post_init__(self):
        if not self.is_pose_free(self.gt_pose):
            logger.error(f"실제 포즈가 자유 공간이 아닙니다: {self.gt_pose}")
            raise ValueError(f"gt_pose 가 자유 공간에 있지 않습니다: {self.gt_pose}")

    @property
    def grid(self):
        return self.df.grid

    def is_pose_free(self, pose: Pose2D) -> bool:
        point = np.array([[pose.x, pose.y]])
        if self.df.grid.state_at(point)[0] != FREE:
            return False
        return self.robot_radius <= 0 or self.df.lookup(point)[0] >= self.robot_radius

    def shapes_at(self, t: Optional[float] = None) -> List:
        t = self.time if t is None else t
        shapes = [ob.shape_at(t) for ob in self.obstacles]
        return [s for s in shapes if s is not None]


def advance_pose(world: WorldState, u: OdometryInput) -> Pose2D:
    """
    명령 u 로 실제 포즈를 정확히 적분하되, 반 셀 이하 간격의 부분 구간마다 충돌을 검사해
    점유/미지 셀에 닿기 직전 포즈에서 멈춥니다.
    """
    distance = math.hypot(u.v, u.vy) * u.dt
    substeps = max(1, int(math.ceil(distance / (0.5 * world.grid.resolution))))
    sub_u = OdometryInput(v=u.v, omega=u.omega, dt=u.dt / substeps, vy=u.vy)
    pose = world.gt_pose
    for _ in range(substeps):
        candidate = integrate_pose(pose, sub_u)
        if not world.is_pose_free(candidate):
            logger.debug(f"충돌로 정지: t={world.time:.2f}s, pose={pose}")
            return pose
        pose = candidate
    return pose


def step_world(world: WorldState, u: OdometryInput, dt: float,
               rng: Optional[np.random.Generator] = None) -> tuple:
    """
    월드를 dt 만큼 진행합니다.

    Args:
        world: 현재 월드
        u: 명령 속도 (u.dt 는 무시하고 dt 사용)
        dt: 시간 간격 [s] (> 0)
        rng: 오도메트리 섭동 난수 (None 이면 섭동 없음)

    Returns:
        tuple: (새 WorldState, 보고 OdometryInput)
    """
    if not dt > 0:
        logger.error(f"dt 오류: {dt}")
        raise ValueError(f"dt 는 0보다 커야 합니다: {dt}")
    command = OdometryInput(v=u.v, omega=u.omega, dt=dt, vy=u.vy)
    new_pose = advance_pose(world, command)

    scale_v, scale_omega = noise_scale_at(world.noise_schedule, world.time)
    reported = command.scaled(scale_v, scale_omega)
    if rng is not None:
        dv, dw = rng.standard_normal(2)
        reported = OdometryInput(
            v=reported.v + world.odom_sigma_v * dv,
            omega=reported.omega + world.odom_sigma_omega * dw,
            dt=dt, vy=reported.vy,
        )
    new_world = dataclasses.replace(world, gt_pose=new_pose, time=world.time + dt)
    return new_world, reported


def cast_scan(world: WorldState, geometry: ScanGeometry, rng: np.random.Generator) -> Scan:
    """현재 실제 포즈에서 정적 지도와 이동 장애물을 반영한 스캔을 생성합니다."""
    return simulate_scan(world.df, world.gt_pose, geometry, rng, world.shapes_at())


def contaminated_scan(df: DistanceField, pose: Pose2D, geometry: ScanGeometry, rng: np.random.Generator,
                      fraction: float = 0.3, disc_radius: float = 0.3, max_discs: int = 60) -> tuple:
    """
    지도에 없는 원판 장애물을 빔 경로 위에 무작위로 놓아, 빔의 약 fraction 이
    미지 장애물에 맞는 스캔을 만듭니다.

    Returns:
        tuple: (Scan, 원판 목록, 실제 오염 비율)
    """
    sensor = pose.compose(geometry.sensor_offset)
    origin = (sensor.x, sensor.y)
    world_angles = sensor.theta + geometry.angles
    static = cast_rays(df, origin, world_angles, geometry.range_max)
    discs: List[Circle] = []
    contaminated = 0.0
    for _ in range(max_discs):
        if contaminated >= fraction:
            break
        k = int(rng.integers(static.size))
        far = min(static[k] - disc_radius - 0.2, 4.0)
        near = 1.0 + disc_radius
        if far <= near:
            continue
        d = float(rng.uniform(near, far))
        discs.append(Circle(origin[0] + d * math.cos(world_angles[k]), origin[1] + d * math.sin(world_angles[k]), disc_radius))
        ranges = cast_rays(df, origin, world_angles, geometry.range_max, discs)
        contaminated = float(np.mean(ranges < static - 0.05))
    scan = simulate_scan(df, pose, geometry, rng, discs)
    return scan, discs, contaminated


@dataclass
class WaypointFollower:
    """
    경유점을 순서대로 따라가는 단순 조향기.

    Attributes:
        waypoints (list): [(x, y), ...]
        speed_profile (list): [(t_start, v), ...]
        omega_max (float): 최대 각속도 [rad/s]
        tolerance (float): 경유점 도달 반경 [m]
        loop (bool): 마지막 경유점 이후 처음으로 되돌아감
        gain (float): 헤딩 오차 비례 이득
    """

    waypoints: list
    speed_profile: list = field(default_factory=lambda: [(0.0, 0.5)])
    omega_max: float = 1.0
    tolerance: float = 0.3
    loop: bool = True
    gain: float = 2.0
    index: int = 0

    def speed_at(self, t: float) -> float:
        speed = 0.0
        for t_start, v in sorted(self.speed_profile):
            if t_start <= t:
                speed = v
        return speed

    def command(self, pose: Pose2D, t: float, dt: float) -> OdometryInput:
        """현재 포즈/시각에 대한 속도 명령. 모든 경유점을 지나면 정지합니다."""
        if self.index >= len(self.waypoints):
            return OdometryInput(0.0, 0.0, dt)
        tx, ty = self.waypoints[self.index]
        if math.hypot(tx - pose.x, ty - pose.y) < self.tolerance:
            self.index += 1
            if self.index >= len(self.waypoints):
                if not self.loop:
                    return OdometryInput(0.0, 0.0, dt)
                self.index = 0
            tx, ty = self.waypoints[self.index]

        error = math.atan2(ty - pose.y, tx - pose.x) - pose.theta
        error = math.atan2(math.sin(error), math.cos(error))
        omega = max(-self.omega_max, min(self.omega_max, self.gain * error))
        v = self.speed_at(t) * max(0.0, math.cos(error))
        return OdometryInput(v=v, omega=omega, dt=dt)

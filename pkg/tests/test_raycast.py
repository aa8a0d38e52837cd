# -*- coding: utf-8 -*-
"""
tests/test_raycast.py - 레이캐스팅 / 월드 시뮬레이터 단위 테스트
==================================================================
벽/원판/선분 해석해 대비 빔 거리, 충돌 정지, 오도메트리 오염,
이동 장애물, 미지 장애물 오염 스캔, 경유점 조향을 검증합니다.

실행 방법:
    python -m pytest tests/test_raycast.py -v
"""

import os
import sys
import math

import numpy as np
import pytest

# 프로젝트 루트를 sys.path에 추가
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from core.geometry import Pose2D
from core.grid_map import FREE, OCCUPIED, OccupancyGrid, build_distance_field
from models.motion import OdometryInput
from sim.raycast import (
    Circle, ScanGeometry, Segment, cast_rays, march_static,
    ray_circle_distances, ray_segment_distances, simulate_scan,
)
from sim.world import (
    DISC, SEGMENT, MovingObstacle, NoisePhase, WaypointFollower, WorldState,
    advance_pose, cast_scan, contaminated_scan, noise_scale_at, step_world,
)


# 4 m × 4 m 방, 벽 안쪽 경계는 x, y = 0.05 / 3.95
@pytest.fixture(scope="module")
def room_df():
    cells = np.full((80, 80), FREE, dtype=np.int8)
    cells[0, :] = cells[-1, :] = OCCUPIED
    cells[:, 0] = cells[:, -1] = OCCUPIED
    return build_distance_field(OccupancyGrid(cells=cells, resolution=0.05))


@pytest.fixture(scope="module")
def open_df():
    return build_distance_field(OccupancyGrid(cells=np.full((40, 40), FREE, dtype=np.int8), resolution=0.05))


CLEAN = ScanGeometry(fov=math.radians(270), angle_increment=math.radians(1.0), range_max=10.0, sigma_r=0.0)
FORWARD = 135  # 0° 빔 인덱스


# ═══════════════════════════════════════════
# 스캔 기하
# ═══════════════════════════════════════════

class TestScanGeometry:
    """빔 수와 각도"""

    def test_beam_layout(self):
        assert CLEAN.num_beams == 271
        assert CLEAN.angles[0] == pytest.approx(math.radians(-135))
        assert CLEAN.angles[FORWARD] == pytest.approx(0.0, abs=1e-12)
        assert CLEAN.angles[-1] == pytest.approx(math.radians(135))

    @pytest.mark.parametrize("kwargs", [
        {"fov": 0.0},
        {"angle_increment": 0.0},
        {"range_min": 5.0, "range_max": 1.0},
        {"sigma_r": -0.1},
    ])
    def test_invalid(self, kwargs):
        with pytest.raises(ValueError):
            ScanGeometry(**kwargs)


# ═══════════════════════════════════════════
# 광선 교차
# ═══════════════════════════════════════════

class TestRays:
    """정적 지도 마칭과 해석적 교차"""

    def test_walls(self, room_df):
        angles = np.array([0.0, math.pi / 2, math.pi, -math.pi / 2])
        hits = march_static(room_df, (2.0, 2.0), angles, 10.0)
        np.testing.assert_allclose(hits, 1.95, atol=2e-3)

    def test_diagonal_wall(self, room_df):
        hit = march_static(room_df, (1.0, 2.0), np.array([math.pi / 4]), 10.0)[0]
        assert hit == pytest.approx(1.95 * math.sqrt(2), abs=5e-3)

    def test_leaving_grid_is_miss(self, open_df):
        hits = march_static(open_df, (1.0, 1.0), np.array([0.0, 2.0]), 10.0)
        assert np.isinf(hits).all()
        ranges = cast_rays(open_df, (1.0, 1.0), np.array([0.0, 2.0]), 10.0)
        assert (ranges == 10.0).all()

    def test_circle(self):
        circle = Circle(2.0, 0.0, 0.5)
        out = ray_circle_distances((0.0, 0.0), np.array([0.0, math.pi]), circle)
        assert out[0] == pytest.approx(1.5)
        assert math.isinf(out[1])

    def test_circle_tangent_and_inside(self):
        circle = Circle(2.0, 1.0, 1.0)
        assert ray_circle_distances((0.0, 0.0), np.array([0.0]), circle)[0] == pytest.approx(2.0)
        assert math.isinf(ray_circle_distances((2.0, 1.0), np.array([0.0]), circle)[0])

    def test_segment(self):
        segment = Segment(1.0, -1.0, 1.0, 1.0)
        out = ray_segment_distances((0.0, 0.0), np.array([0.0, math.pi, math.atan2(0.5, 1.0)]), segment)
        assert out[0] == pytest.approx(1.0)
        assert math.isinf(out[1])
        assert out[2] == pytest.approx(math.sqrt(1.25))

    def test_parallel_segment(self):
        segment = Segment(1.0, 1.0, 3.0, 1.0)
        assert math.isinf(ray_segment_distances((0.0, 0.0), np.array([0.0]), segment)[0])

    def test_shapes_take_minimum(self, room_df):
        ranges = cast_rays(room_df, (2.0, 2.0), np.array([0.0, math.pi]), 10.0, [Circle(3.0, 2.0, 0.2)])
        assert ranges[0] == pytest.approx(0.8)
        assert ranges[1] == pytest.approx(1.95, abs=2e-3)

    def test_unknown_shape(self, room_df):
        with pytest.raises(TypeError):
            cast_rays(room_df, (2.0, 2.0), np.array([0.0]), 10.0, ["wall"])


# ═══════════════════════════════════════════
# 스캔 생성
# ═══════════════════════════════════════════

class TestSimulateScan:
    """잡음, 최대 거리, 센서 오프셋"""

    def test_clean_scan(self, room_df):
        scan = simulate_scan(room_df, Pose2D(2.0, 2.0, 0.0), CLEAN, np.random.default_rng(0))
        assert scan.num_beams == CLEAN.num_beams
        assert scan.ranges[FORWARD] == pytest.approx(1.95, abs=2e-3)
        assert (scan.ranges < CLEAN.range_max).all()

    def test_no_hit_is_exact_range_max(self, room_df):
        geometry = ScanGeometry(fov=math.radians(270), angle_increment=math.radians(1.0), range_max=1.0, sigma_r=0.05)
        scan = simulate_scan(room_df, Pose2D(2.0, 2.0, 0.0), geometry, np.random.default_rng(0))
        assert (scan.ranges == 1.0).all()

    def test_noise_scale(self, room_df):
        noisy_geometry = ScanGeometry(fov=math.radians(270), angle_increment=math.radians(1.0),
                                      range_max=10.0, sigma_r=0.01)
        pose = Pose2D(2.0, 2.0, 0.3)
        clean = simulate_scan(room_df, pose, CLEAN, np.random.default_rng(0)).ranges
        noisy = simulate_scan(room_df, pose, noisy_geometry, np.random.default_rng(0)).ranges
        diff = noisy - clean
        assert abs(diff.mean()) < 0.003
        assert 0.007 < diff.std() < 0.013

    def test_seeded_repeat(self, room_df):
        geometry = ScanGeometry(sigma_r=0.02, angle_increment=math.radians(1.0))
        a = simulate_scan(room_df, Pose2D(2.0, 2.0, 0.3), geometry, np.random.default_rng(5))
        b = simulate_scan(room_df, Pose2D(2.0, 2.0, 0.3), geometry, np.random.default_rng(5))
        np.testing.assert_array_equal(a.ranges, b.ranges)

    def test_sensor_offset(self, room_df):
        geometry = ScanGeometry(fov=math.radians(270), angle_increment=math.radians(1.0), range_max=10.0,
                                sigma_r=0.0, sensor_offset=Pose2D(0.5, 0.0, 0.0))
        scan = simulate_scan(room_df, Pose2D(2.0, 2.0, 0.0), geometry, np.random.default_rng(0))
        assert scan.ranges[FORWARD] == pytest.approx(1.45, abs=2e-3)
        assert scan.sensor_offset == Pose2D(0.5, 0.0, 0.0)


# ═══════════════════════════════════════════
# 월드
# ═══════════════════════════════════════════

class TestMovingObstacle:
    """활성 구간과 등속 이동"""

    def test_disc_moves(self):
        ob = MovingObstacle(DISC, 1.0, 1.0, 0.3, vx=0.5, vy=-0.25, t_start=2.0, t_end=6.0)
        assert ob.shape_at(1.0) is None
        assert ob.shape_at(6.5) is None
        assert ob.shape_at(4.0) == Circle(2.0, 0.5, 0.3)

    def test_segment_heading(self):
        ob = MovingObstacle(SEGMENT, 1.0, 1.0, 2.0, heading=math.pi / 2)
        shape = ob.shape_at(0.0)
        assert isinstance(shape, Segment)
        assert (shape.x2, shape.y2) == pytest.approx((1.0, 3.0))

    @pytest.mark.parametrize("args", [
        ("triangle", 0.0, 0.0, 1.0),
        (DISC, 0.0, 0.0, 0.0),
    ])
    def test_invalid(self, args):
        with pytest.raises(ValueError):
            MovingObstacle(*args)

    def test_invalid_interval(self):
        with pytest.raises(ValueError, match="t_end"):
            MovingObstacle(DISC, 0.0, 0.0, 1.0, t_start=5.0, t_end=1.0)


class TestNoiseSchedule:
    """오도메트리 스케일 구간"""

    def test_phases(self):
        schedule = [NoisePhase(5.0, 2.0, 3.0), NoisePhase(0.0, 1.0, 1.0)]
        assert noise_scale_at(schedule, 1.0) == (1.0, 1.0)
        assert noise_scale_at(schedule, 6.0) == (2.0, 3.0)
        assert noise_scale_at([], 6.0) == (1.0, 1.0)


class TestWorldStep:
    """실제 포즈 전진과 보고값 오염"""

    def test_gt_must_be_free(self, room_df):
        with pytest.raises(ValueError, match="gt_pose"):
            WorldState(gt_pose=Pose2D(0.01, 0.01, 0.0), df=room_df)

    def test_stops_before_wall(self, room_df):
        world = WorldState(gt_pose=Pose2D(3.5, 2.0, 0.0), df=room_df)
        pose = advance_pose(world, OdometryInput(1.0, 0.0, 1.0))
        assert 3.85 < pose.x < 3.96
        assert world.is_pose_free(pose)

    def test_robot_radius(self, room_df):
        world = WorldState(gt_pose=Pose2D(2.0, 2.0, 0.0), df=room_df, robot_radius=0.3)
        pose = advance_pose(world, OdometryInput(5.0, 0.0, 1.0))
        assert room_df.lookup_point(pose.x, pose.y) >= 0.3
        assert pose.x < 3.75

    def test_step_scales_report_not_truth(self, room_df):
        world = WorldState(gt_pose=Pose2D(1.0, 2.0, 0.0), df=room_df,
                           noise_schedule=(NoisePhase(0.0, 2.0, 1.0),))
        new_world, reported = step_world(world, OdometryInput(0.5, 0.0, 99.0), 1.0)
        assert new_world.gt_pose.x == pytest.approx(1.5)
        assert new_world.time == pytest.approx(1.0)
        assert reported.v == pytest.approx(1.0)
        assert reported.dt == 1.0
        assert world.gt_pose.x == 1.0

    def test_step_perturbation(self, room_df):
        world = WorldState(gt_pose=Pose2D(1.0, 2.0, 0.0), df=room_df, odom_sigma_v=0.1, odom_sigma_omega=0.1)
        reports = []
        rng = np.random.default_rng(0)
        for _ in range(200):
            _, reported = step_world(world, OdometryInput(0.5, 0.0, 0.1), 0.1, rng)
            reports.append(reported.v)
        assert np.mean(reports) == pytest.approx(0.5, abs=0.03)
        assert 0.07 < np.std(reports) < 0.13

    def test_invalid_dt(self, room_df):
        world = WorldState(gt_pose=Pose2D(1.0, 2.0, 0.0), df=room_df)
        with pytest.raises(ValueError, match="dt"):
            step_world(world, OdometryInput(0.5, 0.0, 0.1), 0.0)

    def test_cast_scan_sees_obstacles(self, room_df):
        world = WorldState(gt_pose=Pose2D(2.0, 2.0, 0.0), df=room_df,
                           obstacles=(MovingObstacle(DISC, 3.0, 2.0, 0.2, t_start=0.0, t_end=1.0),))
        scan = cast_scan(world, CLEAN, np.random.default_rng(0))
        assert scan.ranges[FORWARD] == pytest.approx(0.8)
        later = WorldState(gt_pose=world.gt_pose, df=room_df, obstacles=world.obstacles, time=2.0)
        assert cast_scan(later, CLEAN, np.random.default_rng(0)).ranges[FORWARD] == pytest.approx(1.95, abs=2e-3)


class TestContaminatedScan:
    """미지 원판으로 빔 일부를 가린 스캔"""

    def test_reaches_fraction(self, room_df):
        pose = Pose2D(2.0, 2.0, 0.0)
        scan, discs, fraction = contaminated_scan(room_df, pose, CLEAN, np.random.default_rng(0), fraction=0.3)
        assert fraction >= 0.3
        assert 0 < len(discs) <= 60
        for disc in discs:
            assert math.hypot(disc.cx - pose.x, disc.cy - pose.y) >= 1.0 + disc.radius - 1e-9
        clean = simulate_scan(room_df, pose, CLEAN, np.random.default_rng(0)).ranges
        assert np.mean(scan.ranges < clean - 0.05) == pytest.approx(fraction)

    def test_zero_fraction(self, room_df):
        scan, discs, fraction = contaminated_scan(room_df, Pose2D(2.0, 2.0, 0.0), CLEAN,
                                                  np.random.default_rng(0), fraction=0.0)
        assert discs == []
        assert fraction == 0.0


# ═══════════════════════════════════════════
# 경유점 조향
# ═══════════════════════════════════════════

class TestWaypointFollower:
    """속도 프로파일과 경유점 전환"""

    def test_speed_profile(self):
        follower = WaypointFollower(waypoints=[(1.0, 0.0)], speed_profile=[(0.0, 0.5), (10.0, 1.0)])
        assert follower.speed_at(5.0) == 0.5
        assert follower.speed_at(12.0) == 1.0

    def test_heads_to_target(self):
        follower = WaypointFollower(waypoints=[(1.0, 0.0), (2.0, 0.0)])
        u = follower.command(Pose2D(0.0, 0.0, 0.0), 0.0, 0.1)
        assert u.v == pytest.approx(0.5)
        assert u.omega == pytest.approx(0.0)

    def test_advances_within_tolerance(self):
        follower = WaypointFollower(waypoints=[(1.0, 0.0), (2.0, 0.0)])
        follower.command(Pose2D(0.9, 0.0, 0.0), 0.0, 0.1)
        assert follower.index == 1

    def test_stops_at_end_without_loop(self):
        follower = WaypointFollower(waypoints=[(1.0, 0.0)], loop=False)
        u = follower.command(Pose2D(0.95, 0.0, 0.0), 0.0, 0.1)
        assert (u.v, u.omega) == (0.0, 0.0)

    def test_loop_turns_in_place(self):
        follower = WaypointFollower(waypoints=[(1.0, 0.0), (3.0, 0.0)], index=1)
        u = follower.command(Pose2D(3.0, 0.0, 0.0), 0.0, 0.1)
        assert follower.index == 0
        assert u.v == pytest.approx(0.0)
        assert abs(u.omega) == pytest.approx(follower.omega_max)


# ── 직접 실행 시 pytest 호출 ──
if __name__ == "__main__":
    pytest.main([__file__, "-v", "--tb=short"])

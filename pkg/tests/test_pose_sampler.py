# -*- coding: utf-8 -*-
"""
tests/test_pose_sampler.py - 후보 포즈 샘플링 단위 테스트
===========================================================
매칭 쌍으로부터의 후보 포즈 계산, 매칭률, 자유 공간/매칭률 거부,
전역 지도 일부를 로컬 지도로 쓴 자기 위치 재발견을 검증합니다.

실행 방법:
    python -m pytest tests/test_pose_sampler.py -v
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
from global_loc.features import DESCRIPTOR_SIZE, MAXIMA, FeatureConfig, FeatureMatch, Keypoint, build_keypoints, match_features
from global_loc.pose_sampler import (
    GlobalLocalizer, SamplerConfig, candidate_pose, matching_rates, sample_candidate_poses,
)
from sim.maps import build_map
from sim.raycast import ScanGeometry, simulate_scan


GEOMETRY = ScanGeometry(fov=math.radians(270), angle_increment=math.radians(1.0), range_max=10.0, sigma_r=0.0)


def _kp(x, y, orientation):
    return Keypoint(x=x, y=y, kind=MAXIMA, orientation=orientation, avg_df=1.0,
                    descriptor=np.full(DESCRIPTOR_SIZE, 1.0 / DESCRIPTOR_SIZE))


@pytest.fixture(scope="module")
def office_df():
    cells = np.full((80, 100), FREE, dtype=np.int8)
    cells[0, :] = cells[-1, :] = OCCUPIED
    cells[:, 0] = cells[:, -1] = OCCUPIED
    cells[10:25, 15:22] = OCCUPIED
    cells[50:56, 60:90] = OCCUPIED
    return build_distance_field(OccupancyGrid(cells=cells, resolution=0.05))


# ═══════════════════════════════════════════
# 후보 포즈
# ═══════════════════════════════════════════

class TestCandidatePose:
    """매칭 한 쌍 + 오도메트리 포즈 → 전역 후보 포즈"""

    def test_hand_built_case(self):
        candidate = candidate_pose(_kp(10.0, 10.0, math.pi / 2), _kp(1.0, 0.0, 0.0), Pose2D(0.0, 0.0, 0.0))
        assert candidate.x == pytest.approx(10.0)
        assert candidate.y == pytest.approx(9.0)
        assert candidate.theta == pytest.approx(math.pi / 2)

    def test_identical_frames(self):
        kp = _kp(3.0, 4.0, 0.5)
        candidate = candidate_pose(kp, kp, Pose2D(3.0, 4.0, 0.2))
        assert candidate.distance_to(Pose2D(3.0, 4.0, 0.2)) == pytest.approx(0.0, abs=1e-12)
        assert candidate.theta == pytest.approx(0.2)

    def test_recovers_rigid_transform(self):
        """오도메트리 → 월드 변환 T 를 알면 후보 = T ⊕ 오도메트리 포즈"""
        transform = Pose2D(3.0, 1.0, 0.7)
        local = _kp(1.0, 2.0, 0.3)
        gx, gy = transform.transform_points(np.array([[local.x, local.y]]))[0]
        global_ = _kp(gx, gy, local.orientation + transform.theta)
        odom = Pose2D(0.5, -0.4, 0.1)
        expected = transform.compose(odom)

        candidate = candidate_pose(global_, local, odom)
        assert candidate.distance_to(expected) == pytest.approx(0.0, abs=1e-9)
        assert candidate.angle_error_to(expected) == pytest.approx(0.0, abs=1e-9)


# ═══════════════════════════════════════════
# 매칭률 / 샘플링
# ═══════════════════════════════════════════

class TestSampling:
    """후보 주변 샘플링과 거부"""

    TRUTH = Pose2D(2.5, 2.0, 0.4)

    def _scan(self, df):
        return simulate_scan(df, self.TRUTH, GEOMETRY, np.random.default_rng(0))

    def _match_to(self, pose: Pose2D) -> FeatureMatch:
        """후보 포즈가 정확히 pose 가 되는 매칭 (로컬 = 오도메트리 원점)"""
        return FeatureMatch(global_kp=_kp(pose.x, pose.y, pose.theta), local_kp=_kp(0.0, 0.0, 0.0), score=0.0)

    def test_matching_rate_at_truth(self, office_df):
        scan = self._scan(office_df)
        poses = np.array([self.TRUTH.as_array(), [3.5, 2.0, 0.4]])
        rates = matching_rates(scan, poses, office_df, match_residual=0.2)
        assert rates[0] >= 0.99
        assert rates[1] < rates[0]

    def test_samples_near_truth(self, office_df):
        cfg = SamplerConfig(sigma_xy=0.02, sigma_theta=math.radians(1.0), n_per_match=10)
        samples = sample_candidate_poses(
            [self._match_to(self.TRUTH)], Pose2D(), self._scan(office_df), office_df,
            np.random.default_rng(1), cfg,
        )
        assert samples
        rates = [s.matching_rate for s in samples]
        assert rates == sorted(rates, reverse=True)
        assert all(r >= cfg.rate_min for r in rates)
        assert len(samples) <= 2 * cfg.n_per_match
        best = samples[0].pose
        assert best.distance_to(self.TRUTH) < 0.1
        assert best.angle_error_to(self.TRUTH) < math.radians(5.0)
        points = np.array([[s.pose.x, s.pose.y] for s in samples])
        assert (office_df.grid.state_at(points) == FREE).all()

    def test_candidate_inside_wall_rejected(self, office_df):
        cfg = SamplerConfig(sigma_xy=0.0, sigma_theta=0.0)
        samples = sample_candidate_poses(
            [self._match_to(Pose2D(0.9, 0.85, 0.0))], Pose2D(), self._scan(office_df), office_df,
            np.random.default_rng(0), cfg,
        )
        assert samples == []

    def test_max_samples(self, office_df):
        cfg = SamplerConfig(sigma_xy=0.02, sigma_theta=math.radians(1.0), n_per_match=20, max_samples=3)
        samples = sample_candidate_poses(
            [self._match_to(self.TRUTH)], Pose2D(), self._scan(office_df), office_df,
            np.random.default_rng(2), cfg,
        )
        assert 0 < len(samples) <= 3

    def test_no_matches(self, office_df):
        assert sample_candidate_poses([], Pose2D(), self._scan(office_df), office_df, np.random.default_rng(0)) == []

    def test_invalid_config(self):
        with pytest.raises(ValueError, match="rate_min"):
            SamplerConfig(rate_min=1.5)


# ═══════════════════════════════════════════
# 전역 위치 추정기
# ═══════════════════════════════════════════

class TestGlobalLocalizer:
    """주기 실행과 로컬 지도 누적"""

    def test_should_run(self, office_df):
        localizer = GlobalLocalizer(office_df, sampler_cfg=SamplerConfig(interval=3), keypoints=[])
        assert not localizer.should_run(0)
        pose = Pose2D(2.5, 2.0, 0.0)
        localizer.add_observation(simulate_scan(office_df, pose, GEOMETRY, np.random.default_rng(0)), pose)
        assert localizer.should_run(3)
        assert not localizer.should_run(4)

    def test_empty_history_returns_nothing(self, office_df):
        localizer = GlobalLocalizer(office_df, keypoints=[])
        scan = simulate_scan(office_df, Pose2D(2.5, 2.0, 0.0), GEOMETRY, np.random.default_rng(0))
        assert localizer.localize(scan, np.random.default_rng(0)) == []

    def test_no_global_keypoints(self, office_df):
        localizer = GlobalLocalizer(office_df, keypoints=[])
        pose = Pose2D(2.5, 2.0, 0.0)
        scan = simulate_scan(office_df, pose, GEOMETRY, np.random.default_rng(0))
        localizer.add_observation(scan, pose)
        assert localizer.localize(scan, np.random.default_rng(0)) == []


@pytest.mark.slow
class TestSelfLocalization:
    """전역 지도의 창을 로컬 지도로 쓰면 알려진 포즈 근처 샘플이 나와야 함"""

    POSES = [
        Pose2D(12.5, 11.5, 0.3),
        Pose2D(22.0, 3.5, -1.2),
        Pose2D(4.0, 11.0, 2.0),
        Pose2D(13.0, 7.2, 0.0),
        Pose2D(27.5, 11.0, -2.5),
    ]

    def test_window_recovers_pose(self):
        grid = build_map("rooms_off_corridor")
        df = build_distance_field(grid)
        feature_cfg = FeatureConfig()
        global_kps = build_keypoints(df, feature_cfg)
        sampler_cfg = SamplerConfig(sigma_xy=0.1, sigma_theta=math.radians(3.0))
        geometry = ScanGeometry(fov=math.radians(270), angle_increment=math.radians(1.0), range_max=30.0)
        res = grid.resolution

        found = 0
        for i, pose in enumerate(self.POSES):
            assert grid.state_at(np.array([[pose.x, pose.y]]))[0] == FREE
            r, c = int(pose.y / res), int(pose.x / res)
            half = int(6.0 / res)
            r0, c0 = max(r - half, 0), max(c - half, 0)
            window = OccupancyGrid(
                cells=grid.cells[r0:r + half, c0:c + half].copy(), resolution=res,
                origin=Pose2D(c0 * res, r0 * res, 0.0),
            )
            local_kps = build_keypoints(build_distance_field(window, clamp=df.clamp), feature_cfg)
            matches = match_features(local_kps, global_kps, feature_cfg)
            rng = np.random.default_rng(i)
            scan = simulate_scan(df, pose, geometry, rng)
            samples = sample_candidate_poses(matches, pose, scan, df, rng, sampler_cfg)
            if any(s.pose.distance_to(pose) <= 0.5 and s.pose.angle_error_to(pose) <= math.radians(20.0)
                   for s in samples):
                found += 1
        assert found >= 3


# ── 직접 실행 시 pytest 호출 ──
if __name__ == "__main__":
    pytest.main([__file__, "-v", "--tb=short"])

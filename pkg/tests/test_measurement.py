# -*- coding: utf-8 -*-
"""
tests/test_measurement.py - 측정 모델 단위 테스트
===================================================
likelihood field / 절단 지수분포 밀도, CCMM 로그 우도, 미지 장애물 사후확률,
MAE 계산을 합성 장면으로 검증합니다.

실행 방법:
    python -m pytest tests/test_measurement.py -v
"""

import os
import sys
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

# 프로젝트 루트를 sys.path에 추가
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from core.geometry import Pose2D
from core.grid_map import FREE, OCCUPIED, OccupancyGrid, build_distance_field
from models.measurement import (
    MeasurementConfig, NoValidBeamsError, Scan, ccmm_log_likelihood_batch, class_conditional_likelihood,
    compute_mae, compute_mae_batch, evaluate_poses, known_likelihood, lfm_log_likelihood_batch,
    mae_from_residuals, unknown_density, unknown_likelihood, unknown_posteriors,
)
from sim.raycast import Circle, ScanGeometry, simulate_scan


def room_grid(size_m: float = 4.0, res: float = 0.05) -> OccupancyGrid:
    n = int(round(size_m / res))
    cells = np.full((n, n), FREE, dtype=np.int8)
    cells[0, :] = cells[-1, :] = OCCUPIED
    cells[:, 0] = cells[:, -1] = OCCUPIED
    return OccupancyGrid(cells=cells, resolution=res)


@pytest.fixture(scope="module")
def room_df():
    return build_distance_field(room_grid())


@pytest.fixture(scope="module")
def geometry():
    return ScanGeometry(fov=math.radians(270), angle_increment=math.radians(1.0), range_max=10.0, sigma_r=0.0)


# ═══════════════════════════════════════════
# 설정 / 빔 단위 밀도
# ═══════════════════════════════════════════

class TestMeasurementConfig:
    """설정 검증"""

    def test_weights_must_sum_to_one(self):
        with pytest.raises(ValueError, match="z_hit"):
            MeasurementConfig(z_hit=0.8, z_max=0.05, z_rand=0.05)

    def test_invalid_lambda(self):
        with pytest.raises(ValueError, match="lam"):
            MeasurementConfig(lam=0.0)

    def test_invalid_prior(self):
        with pytest.raises(ValueError, match="class_prior_known"):
            MeasurementConfig(class_prior_known=1.0)


class TestBeamDensities:
    """빔 단위 밀도"""

    def test_unknown_density_integrates_to_one(self):
        """절단 지수분포를 [0, r_max] 에서 적분하면 1"""
        cfg = MeasurementConfig(lam=0.3)
        value, _ = integrate.quad(lambda r: unknown_likelihood(r, cfg, 30.0), 0.0, 30.0)
        assert value == pytest.approx(1.0, abs=1e-4)

    def test_unknown_density_decreasing(self):
        """가까운 거리가 더 높은 밀도"""
        cfg = MeasurementConfig()
        dens = unknown_density(np.array([0.5, 1.0, 5.0]), 30.0, cfg)
        assert dens[0] > dens[1] > dens[2]

    def test_known_likelihood_peak_on_wall(self, room_df):
        """벽에 정확히 닿는 빔이 벽 앞에서 끝나는 빔보다 우도가 높음"""
        cfg = MeasurementConfig()
        pose = Pose2D(2.0, 2.0, 0.0)
        on_wall = known_likelihood(1.925, 0.0, pose, room_df, cfg, 10.0)
        short = known_likelihood(1.5, 0.0, pose, room_df, cfg, 10.0)
        assert on_wall > short

    def test_known_likelihood_floor(self, room_df):
        """잔차가 커도 z_rand/r_max 이상"""
        cfg = MeasurementConfig()
        value = known_likelihood(0.5, 0.0, Pose2D(2.0, 2.0, 0.0), room_df, cfg, 10.0)
        assert value >= cfg.z_rand / 10.0


# ═══════════════════════════════════════════
# 스캔 단위 우도
# ═══════════════════════════════════════════

class TestScanLikelihood:
    """CCMM / LFM 로그 우도"""

    def test_true_pose_scores_higher(self, room_df, geometry):
        """실제 포즈가 어긋난 포즈보다 우도가 높음"""
        truth = Pose2D(1.7, 2.2, 0.4)
        scan = simulate_scan(room_df, truth, geometry, np.random.default_rng(0))
        poses = np.array([[1.7, 2.2, 0.4], [1.9, 2.0, 0.6]])
        cfg = MeasurementConfig(beam_stride=1)
        ccmm = ccmm_log_likelihood_batch(scan, poses, room_df, cfg)
        lfm = lfm_log_likelihood_batch(scan, poses, room_df, cfg)
        assert ccmm[0] > ccmm[1]
        assert lfm[0] > lfm[1]

    def test_single_pose_matches_batch(self, room_df, geometry):
        """단일 포즈 합계가 배치 결과와 같음"""
        pose = Pose2D(2.0, 1.5, -0.2)
        scan = simulate_scan(room_df, pose, geometry, np.random.default_rng(1))
        cfg = MeasurementConfig()
        total, per_beam = class_conditional_likelihood(scan, pose, room_df, cfg)
        batch = ccmm_log_likelihood_batch(scan, pose.as_array()[None, :], room_df, cfg)
        assert total == pytest.approx(float(batch[0]))
        assert per_beam.shape[1] == 2

    def test_unknown_obstacle_posterior(self, room_df, geometry):
        """지도에 없는 원판에 맞은 빔은 p(unknown|z) 가 높음"""
        pose = Pose2D(2.0, 2.0, 0.0)
        disc = Circle(2.8, 2.0, 0.2)
        scan = simulate_scan(room_df, pose, geometry, np.random.default_rng(2), [disc])
        cfg = MeasurementConfig(beam_stride=1)
        _, per_beam = class_conditional_likelihood(scan, pose, room_df, cfg)
        post = unknown_posteriors(per_beam)
        angles, _ = scan.beams(1)
        forward = np.abs(angles) < math.radians(2)
        side = np.abs(np.abs(angles) - math.pi / 2) < math.radians(2)
        assert np.all(post[forward] > 0.9)
        assert np.all(post[side] < 0.5)
        assert np.all((post >= 0) & (post <= 1))

    def test_no_valid_beams(self, room_df):
        """유효 빔이 없으면 NoValidBeamsError"""
        scan = Scan(ranges=[np.nan, np.inf], angle_min=0.0, angle_increment=0.1, range_max=10.0)
        with pytest.raises(NoValidBeamsError):
            ccmm_log_likelihood_batch(scan, np.zeros((1, 3)), room_df, MeasurementConfig())

    def test_evaluate_poses_consistent(self, room_df, geometry):
        """evaluate_poses 결과가 개별 함수와 같음"""
        scan = simulate_scan(room_df, Pose2D(1.5, 2.5, 1.0), geometry, np.random.default_rng(4))
        poses = np.array([[1.5, 2.5, 1.0], [1.6, 2.4, 0.9], [2.5, 1.0, -2.0]])
        cfg = MeasurementConfig()
        log_lik, mae = evaluate_poses(scan, poses, room_df, cfg, e_max=1.0)
        np.testing.assert_allclose(log_lik, ccmm_log_likelihood_batch(scan, poses, room_df, cfg))
        np.testing.assert_allclose(mae, compute_mae_batch(scan, poses, room_df, 1.0, cfg.beam_stride))
        lfm, _ = evaluate_poses(scan, poses, room_df, cfg, e_max=1.0, use_ccmm=False)
        np.testing.assert_allclose(lfm, lfm_log_likelihood_batch(scan, poses, room_df, cfg))


# ═══════════════════════════════════════════
# MAE
# ═══════════════════════════════════════════

class TestMAE:
    """평균 절대 잔차"""

    def test_true_pose_small_mae(self, room_df, geometry):
        """잡음 없는 실제 포즈의 MAE 는 한 셀 이하"""
        pose = Pose2D(2.1, 1.9, 0.3)
        scan = simulate_scan(room_df, pose, geometry, np.random.default_rng(5))
        assert compute_mae(scan, pose, room_df, e_max=1.0) < 0.05

    def test_max_range_beams_excluded(self, room_df):
        """r_max 빔만 있으면 MAE 는 정의되지 않음"""
        scan = Scan(ranges=[10.0, 10.0], angle_min=0.0, angle_increment=0.1, range_max=10.0)
        assert compute_mae(scan, Pose2D(2, 2, 0), room_df, e_max=1.0) is None

    def test_hand_example(self):
        """잔차 (0.1, 0.3, 2.0), e_max=1 → (0.1+0.3)/2"""
        assert mae_from_residuals([0.1, 0.3, 2.0], 1.0) == pytest.approx(0.2)

    def test_all_above_e_max(self):
        assert mae_from_residuals([1.5, 2.0], 1.0) is None

    @settings(max_examples=1000, deadline=None)
    @given(
        residuals=st.lists(st.floats(min_value=0.0, max_value=3.0), min_size=1, max_size=40),
        e_max=st.floats(min_value=0.01, max_value=2.0),
    )
    def test_matches_hand_oracle(self, residuals, e_max):
        """e_max 이하 잔차의 산술 평균과 같고 항상 [0, e_max]"""
        kept = [r for r in residuals if r <= e_max]
        value = mae_from_residuals(residuals, e_max)
        if not kept:
            assert value is None
        else:
            assert value == pytest.approx(sum(kept) / len(kept), rel=1e-12, abs=1e-15)
            assert 0.0 <= value <= e_max + 1e-12


# ── 직접 실행 시 pytest 호출 ──
if __name__ == "__main__":
    pytest.main([__file__, "-v", "--tb=short"])

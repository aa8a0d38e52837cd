# -*- coding: utf-8 -*-
"""
tests/test_runner.py - 실행기 단위 테스트
===========================================

실행 방법:
    python -m pytest tests/test_runner.py -v
"""

import os
import sys
import math
import shutil
import importlib
import tempfile

import numpy as np
import pytest

# 프로젝트 루트를 sys.path에 추가
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from config import RunConfig
from core.geometry import Pose2D
from core.grid_map import build_distance_field
from data_io.carmen import parse_carmen_lines
from localization.baseline import AugmentedMCL
from localization.particle_filter import LocalizationEngine
from models.decision import save_decision_model, uninformative_decision_model
from sim.maps import build_map
from sim.runner import (
    RunStreams, adversarial_samples, build_engine, prepare_decision_model, replay_log, run_scenario,
)
from sim.scenario import parse_scenario_text


@pytest.fixture(scope="module")
def rooms_df():
    return build_distance_field(build_map("two_rooms"))


def _fast_config(*extra) -> RunConfig:
    return RunConfig.load(None, overrides=[
        "filter.num_particles=40", "sensor.angle_increment_deg=3", "global_loc.enabled=false", *extra,
    ])


class TestImportSideEffects:
    """패키지 모듈은 import 시 sys.path 를 건드리지 않음"""

    @pytest.mark.parametrize("module_name", ["sim.runner", "sim.scenario"])
    def test_reload_keeps_sys_path(self, module_name):
        module = importlib.import_module(module_name)
        before = list(sys.path)
        namespace = dict(module.__dict__)
        try:
            importlib.reload(module)
            assert sys.path == before
        finally:
            # reload 로 바뀐 클래스 객체가 다른 테스트 모듈을 오염시키지 않도록 복원
            module.__dict__.clear()
            module.__dict__.update(namespace)


class TestStreams:
    """역할별 난수 스트림"""

    def test_same_seed_same_streams(self):
        a, b = RunStreams.from_seed(4), RunStreams.from_seed(4)
        assert a.filter.random() == b.filter.random()
        assert a.world.random() == b.world.random()

    def test_streams_are_independent(self):
        streams = RunStreams.from_seed(4)
        assert streams.filter.random() != streams.world.random()


class TestAdversarialSamples:
    """실제 포즈 + 월드 좌표 오프셋"""

    def test_offsets(self):
        gt = Pose2D(6.0, 6.0, 0.3)
        samples = adversarial_samples(gt, (3.0, 0.0), 200, np.random.default_rng(0))
        assert len(samples) == 200
        xs = np.array([s.pose.x for s in samples])
        ys = np.array([s.pose.y for s in samples])
        assert xs.mean() == pytest.approx(9.0, abs=0.02)
        assert ys.mean() == pytest.approx(6.0, abs=0.02)
        assert all(s.matching_rate == 1.0 for s in samples)


class TestEngineSetup:
    """엔진/판정 모델 준비"""

    def setup_method(self):
        self.tmpdir = tempfile.mkdtemp()

    def teardown_method(self):
        shutil.rmtree(self.tmpdir, ignore_errors=True)

    def test_build_engine_modes(self, rooms_df):
        dm = uninformative_decision_model()
        run_cfg = _fast_config()
        assert isinstance(build_engine(rooms_df, dm, run_cfg), LocalizationEngine)
        assert isinstance(build_engine(rooms_df, dm, run_cfg, baseline=True), AugmentedMCL)
        engine = build_engine(rooms_df, dm, run_cfg, use_ccmm=False)
        assert engine.configs.filter.use_ccmm is False

    def test_model_file_is_loaded(self, rooms_df):
        path = os.path.join(self.tmpdir, "dm.txt")
        save_decision_model(uninformative_decision_model(), path)
        run_cfg = _fast_config(f"decision.model_path={path}")
        dm = prepare_decision_model(run_cfg, rooms_df, run_cfg.scan_geometry(), np.random.default_rng(0))
        assert dm.d_th == uninformative_decision_model().d_th


class TestRuns:
    """짧은 폐루프 실행과 로그 재생"""

    def setup_method(self):
        self.tmpdir = tempfile.mkdtemp()

    def teardown_method(self):
        shutil.rmtree(self.tmpdir, ignore_errors=True)

    def test_short_scenario(self):
        scenario = parse_scenario_text(
            "[map]\nbuiltin = two_rooms\n[waypoints]\n2.0 3.0\n4.0 3.0\n"
            "[run]\nduration = 1.0\nseed = 2\nadversarial_offset = 1.0 0.0\nadversarial_count = 5\n"
        )
        path = os.path.join(self.tmpdir, "trace.csv")
        result = run_scenario(scenario, _fast_config(), dm=uninformative_decision_model(), out_path=path)
        assert result.seed == 2
        assert len(result.reports) == 10
        assert result.trace_path == path and os.path.exists(path)
        assert [r.cycle for r in result.reports] == list(range(10))
        assert all(r.gt is not None for r in result.reports)
        assert result.reports[0].n_global_samples == 5
        assert result.reports[-1].time_s == pytest.approx(1.0)

    def test_replay_log(self, rooms_df):
        ranges = " ".join(["2.0"] * 10)
        lines = [
            f"FLASER 10 {ranges} 0 0 0 {2.0 + 0.05 * k} 3.0 {0.01 * k} {1.0 + 0.1 * k} host 0"
            for k in range(4)
        ]
        log = parse_carmen_lines(lines)
        result = replay_log(log, rooms_df, uninformative_decision_model(), _fast_config(),
                            Pose2D(2.0, 3.0, 0.0), seed=1)
        assert len(result.reports) == 4
        assert all(r.gt is None for r in result.reports)
        assert result.reports[2].time_s == pytest.approx(1.2)
        assert math.isfinite(result.reports[-1].estimate.x)


# ── 직접 실행 시 pytest 호출 ──
if __name__ == "__main__":
    pytest.main([__file__, "-v", "--tb=short"])

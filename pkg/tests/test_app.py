# -*- coding: utf-8 -*-
"""
tests/test_app.py - 명령행 도구 단위 테스트
=============================================
하위 명령별 종료 코드(0 / 2 / 3)와 출력 파일을 검증합니다.
필터가 도는 명령은 균등 판정 모델 파일과 작은 입자 수로 빠르게 실행합니다.

실행 방법:
    python -m pytest tests/test_app.py -v
"""

import os
import sys
import csv
import json
import shutil
import tempfile

import pytest

# 프로젝트 루트를 sys.path에 추가
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from app import EXIT_DATA, EXIT_OK, EXIT_USAGE, main
from data_io.trace import write_trace
from localization.state import CYCLE_REPORT_HEADER, CycleReport
from core.geometry import Pose2D
from models.decision import save_decision_model, uninformative_decision_model


def _stdout_json(capsys) -> dict:
    return json.loads(capsys.readouterr().out)


class TestApp:
    """하위 명령 종료 코드와 결과물"""

    def setup_method(self):
        self.tmpdir = tempfile.mkdtemp()
        self.dm_path = os.path.join(self.tmpdir, "dm.txt")
        save_decision_model(uninformative_decision_model(), self.dm_path)
        self.fast = [
            "--out", self.tmpdir,
            "--set", f"decision.model_path={self.dm_path}",
            "--set", "filter.num_particles=50",
            "--set", "sensor.angle_increment_deg=2",
        ]

    def teardown_method(self):
        shutil.rmtree(self.tmpdir, ignore_errors=True)

    def _path(self, name):
        return os.path.join(self.tmpdir, name)

    # ── map-info ──

    def test_map_info(self, capsys):
        assert main(["map-info", "two_rooms", "--no-keypoints"]) == EXIT_OK
        info = _stdout_json(capsys)
        assert (info["width"], info["height"]) == (200, 120)
        assert "keypoints" not in info

    def test_map_info_keypoints(self, capsys):
        assert main(["map-info", "two_rooms"]) == EXIT_OK
        keypoints = _stdout_json(capsys)["keypoints"]
        assert keypoints["total"] == keypoints["maxima"] + keypoints["minima"] + keypoints["saddle"]
        assert keypoints["saddle"] >= 1

    def test_map_info_unknown_map(self):
        assert main(["map-info", "castle"]) == EXIT_USAGE

    # ── eval ──

    def test_eval_empty_file(self):
        path = self._path("empty.csv")
        open(path, "w").close()
        assert main(["eval", path]) == EXIT_USAGE

    def test_eval_trace(self, capsys):
        reports = [
            CycleReport(cycle=i, time_s=0.1 * i, estimate=Pose2D(0.1 * i, 0.0, 0.0), reliability=0.95,
                        mae=0.02, n_global_samples=0, n_unknown_beams=0, gt=Pose2D(0.1 * i, 0.01, 0.0))
            for i in range(30)
        ]
        path = write_trace(reports, self._path("trace.csv"))
        assert main(["eval", path, "--d-th", "0.1"]) == EXIT_OK
        summary = _stdout_json(capsys)["traces"][0]
        assert summary["cycles"] == 30
        assert summary["acceptance"]["tracking_reliability"] is True
        assert summary["trace"] == path

    def test_eval_missing_file(self):
        assert main(["eval", self._path("nope.csv")]) == EXIT_USAGE

    # ── 설정 오류 ──

    def test_unknown_config_key(self):
        assert main(["map-info", "two_rooms", "--no-keypoints", "--set", "fusion.gamma=1"]) == EXIT_USAGE

    def test_argparse_usage_error(self):
        with pytest.raises(SystemExit) as exc:
            main(["sim-run"])
        assert exc.value.code == 2

    # ── train-decision ──

    def test_train_without_samples_is_data_error(self):
        assert main(["train-decision", "--map", "two_rooms", "--n", "0", "--out", self.tmpdir]) == EXIT_DATA

    def test_train_requires_scene(self):
        assert main(["train-decision", "--out", self.tmpdir]) == EXIT_USAGE

    # ── likelihood-map ──

    def test_likelihood_map_requires_pose(self):
        assert main(["likelihood-map", "--map", "two_rooms", "--out", self.tmpdir]) == EXIT_USAGE

    def test_likelihood_map(self, capsys):
        code = main([
            "likelihood-map", "--map", "two_rooms", "--pose", "2.0", "3.0", "0.0", "--mode", "lfm",
            "--set", "likelihood_map.resolution=0.1", "--seed", "3", "--out", self.tmpdir,
        ])
        assert code == EXIT_OK
        result = _stdout_json(capsys)
        assert set(result["modes"]) == {"lfm"}
        assert os.path.exists(result["modes"]["lfm"]["pgm"])
        assert os.path.exists(self._path("likelihood_lfm_seed3.csv"))

    # ── replay-carmen ──

    def test_replay_requires_map(self):
        log = self._path("log.txt")
        with open(log, "w", encoding="utf-8") as f:
            f.write("ODOM 1.0 2.0 0.5 0.3 0.1 0.0 100.0 host 100.0\n")
        assert main(["replay-carmen", log, "--out", self.tmpdir]) == EXIT_USAGE

    def test_replay_without_lasers(self):
        log = self._path("log.txt")
        with open(log, "w", encoding="utf-8") as f:
            f.write("ODOM 1.0 2.0 0.5 0.3 0.1 0.0 100.0 host 100.0\n")
        assert main(["replay-carmen", log, "--map", "two_rooms", "--out", self.tmpdir]) == EXIT_USAGE

    def test_replay_malformed_log(self):
        log = self._path("log.txt")
        with open(log, "w", encoding="utf-8") as f:
            f.write("FLASER 3 1.0 2.0\n")
        assert main(["replay-carmen", log, "--map", "two_rooms", "--out", self.tmpdir]) == EXIT_USAGE

    def test_replay(self, capsys):
        log = self._path("corridor.log")
        ranges = " ".join(["2.0"] * 19)
        with open(log, "w", encoding="utf-8") as f:
            f.write("PARAM robot_width 0.5\n")
            for k in range(5):
                x = 2.0 + 0.05 * k
                t = 10.0 + 0.1 * k
                f.write(f"FLASER 19 {ranges} {x} 3.0 0.0 {x} 3.0 0.0 {t} host {t}\n")
        code = main(["replay-carmen", log, "--map", "two_rooms", "--initial-pose", "2.0", "3.0", "0.0",
                     "--seed", "1", "--no-global"] + self.fast)
        assert code == EXIT_OK
        result = _stdout_json(capsys)
        assert result["cycles"] == 5
        assert result["skipped"] == {"PARAM": 1}
        with open(result["trace"], encoding="utf-8", newline="") as f:
            rows = list(csv.reader(f))
        assert rows[0] == CYCLE_REPORT_HEADER
        assert len(rows) == 6
        # gt 없는 재생은 gt 열이 비어 있음
        assert rows[1][5:8] == ["", "", ""]

    # ── sim-run ──

    def test_sim_run(self, capsys):
        scenario = self._path("short.txt")
        with open(scenario, "w", encoding="utf-8") as f:
            f.write(
                "[map]\nbuiltin = two_rooms\n"
                "[waypoints]\n2.0 3.0\n4.0 3.0\n"
                "[run]\nduration = 1.0\ndt = 0.1\nseed = 5\n"
                "[config]\nglobal_loc.enabled = false\n"
            )
        assert main(["sim-run", scenario] + self.fast) == EXIT_OK
        summary = _stdout_json(capsys)
        assert summary["cycles"] == 10
        assert summary["seed"] == 5
        assert os.path.exists(self._path("short_mcl_seed5.csv"))
        assert os.path.exists(self._path("short_mcl_seed5_summary.json"))

    def test_sim_run_seeded_output_is_identical(self):
        scenario = self._path("short.txt")
        with open(scenario, "w", encoding="utf-8") as f:
            f.write(
                "[map]\nbuiltin = two_rooms\n"
                "[waypoints]\n2.0 3.0\n4.0 3.0\n"
                "[run]\nduration = 0.5\n"
                "[config]\nglobal_loc.enabled = false\n"
            )
        first_dir, second_dir = self._path("a"), self._path("b")
        for out in (first_dir, second_dir):
            args = ["sim-run", scenario, "--seed", "9"] + self.fast[2:] + ["--out", out]
            assert main(args) == EXIT_OK
        with open(os.path.join(first_dir, "short_mcl_seed9.csv"), "rb") as a, \
                open(os.path.join(second_dir, "short_mcl_seed9.csv"), "rb") as b:
            assert a.read() == b.read()

    def test_sim_run_baseline(self, capsys):
        scenario = self._path("short.txt")
        with open(scenario, "w", encoding="utf-8") as f:
            f.write("[map]\nbuiltin = two_rooms\n[waypoints]\n2.0 3.0\n4.0 3.0\n[run]\nduration = 0.5\n")
        assert main(["sim-run", scenario, "--baseline", "--seed", "2"] + self.fast) == EXIT_OK
        summary = _stdout_json(capsys)
        assert summary["mode"] == "baseline"
        assert summary["fraction_reliable"] is None

    def test_sim_run_bad_waypoint(self):
        scenario = self._path("bad.txt")
        with open(scenario, "w", encoding="utf-8") as f:
            f.write("[map]\nbuiltin = two_rooms\n[waypoints]\n5.0 1.0\n")
        assert main(["sim-run", scenario] + self.fast) == EXIT_USAGE


# ── 직접 실행 시 pytest 호출 ──
if __name__ == "__main__":
    pytest.main([__file__, "-v", "--tb=short"])

# -*- coding: utf-8 -*-
"""
tests/test_scenario.py - 절차적 지도 / 시나리오 파일 단위 테스트
==================================================================

실행 방법:
    python -m pytest tests/test_scenario.py -v
"""

import os
import sys
import math
import shutil
import tempfile

import numpy as np
import pytest

# 프로젝트 루트를 sys.path에 추가
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from core.grid_map import FREE, OCCUPIED, save_map
from sim.maps import MAP_BUILDERS, build_map
from sim.scenario import (
    ScenarioError, builtin_scenarios, load_scenario, parse_scenario, parse_scenario_text,
)
from sim.world import DISC, SEGMENT


MINIMAL = """
[map]
builtin = two_rooms

[waypoints]
1.0 3.0
4.0 3.0
"""


# ═══════════════════════════════════════════
# 절차적 지도
# ═══════════════════════════════════════════

class TestMaps:
    """내장 지도 생성"""

    @pytest.mark.parametrize("name", sorted(MAP_BUILDERS))
    def test_builds_with_free_space(self, name):
        grid = build_map(name)
        assert grid.resolution == 0.05
        assert (grid.cells == FREE).any()
        # 가장자리는 모두 벽
        assert (grid.cells[0, :] == OCCUPIED).all()
        assert (grid.cells[:, -1] == OCCUPIED).all()

    def test_unknown_name(self):
        with pytest.raises(ValueError, match="map"):
            build_map("castle")

    def test_resolution(self):
        grid = build_map("two_rooms", resolution=0.1)
        assert (grid.height, grid.width) == (60, 100)

    def test_pillar_centers(self):
        grid = build_map("pillar_hall")
        points = np.array([[1.5, 1.5], [4.5, 7.5], [3.0, 3.0], [1.5, 2.0]])
        assert grid.state_at(points).tolist() == [OCCUPIED, OCCUPIED, FREE, FREE]

    def test_two_rooms_door(self):
        grid = build_map("two_rooms")
        points = np.array([[5.0, 3.0], [5.0, 1.0], [5.0, 5.0]])
        assert grid.state_at(points).tolist() == [FREE, OCCUPIED, OCCUPIED]


# ═══════════════════════════════════════════
# 시나리오 해석
# ═══════════════════════════════════════════

class TestParseScenario:
    """섹션별 해석과 오류 위치"""

    def test_minimal_defaults(self):
        scenario = parse_scenario_text(MINIMAL)
        assert scenario.map_builtin == "two_rooms"
        assert scenario.waypoints == [(1.0, 3.0), (4.0, 3.0)]
        assert scenario.speed_profile == [(0.0, 0.5)]
        assert scenario.num_cycles == 600
        assert scenario.adversarial_offset is None

    def test_full_sections(self):
        text = MINIMAL + """
[speed]
0.0 0.3     # 출발
4.0 0.6
omega_max = 0.5
loop = false

[obstacles]
disc 2.0 2.0 0.3 0.1 0.0 1.0 5.0
segment 3.0 1.0 1.5 1.57 0.0 0.2 0.0 9.0

[noise]
3.0 2.0 1.5

[run]
duration = 12.5
dt = 0.05
seed = 7
initial_offset = 0.5 -0.5 0.1
adversarial_offset = 3.0 0.0
adversarial_count = 5
range_max = 8.0

[config]
filter.num_particles = 100
"""
        scenario = parse_scenario_text(text, name="full")
        assert scenario.name == "full"
        assert scenario.speed_profile == [(0.0, 0.3), (4.0, 0.6)]
        assert scenario.omega_max == 0.5
        assert scenario.loop is False
        assert [ob.shape for ob in scenario.obstacles] == [DISC, SEGMENT]
        assert scenario.obstacles[1].heading == pytest.approx(1.57)
        assert scenario.noise_schedule[0].scale_v == 2.0
        assert scenario.num_cycles == 250
        assert scenario.seed == 7
        assert scenario.initial_offset == (0.5, -0.5, 0.1)
        assert scenario.adversarial_offset == (3.0, 0.0)
        assert scenario.adversarial_count == 5
        assert scenario.range_max == 8.0
        assert scenario.config_overrides == {"filter.num_particles": "100"}

    def test_start_pose_faces_second_waypoint(self):
        scenario = parse_scenario_text(MINIMAL)
        start = scenario.start_pose()
        assert (start.x, start.y, start.theta) == (1.0, 3.0, 0.0)

        scenario.start_heading = 1.0
        assert scenario.start_pose().theta == 1.0

    def test_initial_estimate_offset(self):
        scenario = parse_scenario_text(MINIMAL + "[run]\ninitial_offset = 0.5 0.0 3.141592653589793\n")
        estimate = scenario.initial_estimate()
        assert estimate.x == pytest.approx(1.5)
        assert abs(estimate.theta) == pytest.approx(math.pi)

    @pytest.mark.parametrize("text, match", [
        ("[castle]\n", "line 1"),
        ("builtin = two_rooms\n", "line 1"),
        ("[map]\nbuiltin = castle\n", "line 2"),
        ("[map]\nbuiltin = two_rooms\n[waypoints]\n1.0\n", "line 4"),
        ("[map]\nbuiltin = two_rooms\n[waypoints]\n1.0 abc\n", "line 4"),
        ("[map]\nbuiltin = two_rooms\n[waypoints]\n1 3\n[run]\ndt = 0\n", "line 6"),
        ("[map]\nbuiltin = two_rooms\n[waypoints]\n1 3\n[run]\nspeed = 3\n", "line 6"),
        ("[map]\nbuiltin = two_rooms\n[waypoints]\n1 3\n[obstacles]\ncube 1 2 3\n", "line 6"),
        ("[map]\nbuiltin = two_rooms\n[waypoints]\n1 3\n[obstacles]\ndisc 1 2 0 0 0 0 1\n", "line 6"),
        ("[map]\nbuiltin = two_rooms\n[waypoints]\n1 3\n[config]\nnum_particles = 3\n", "line 6"),
        ("[map]\nbuiltin = two_rooms\n[run]\nduration = 1\n", "waypoints"),
        ("[waypoints]\n1 3\n", "map"),
    ])
    def test_errors(self, text, match):
        with pytest.raises(ScenarioError, match=match):
            parse_scenario_text(text)

    def test_validate_waypoints_on_free_space(self):
        scenario = parse_scenario_text(MINIMAL)
        grid = scenario.load_grid()
        scenario.validate(grid)
        scenario.waypoints.append((5.0, 1.0))
        with pytest.raises(ScenarioError, match="waypoints"):
            scenario.validate(grid)


class TestScenarioFiles:
    """파일/내장 시나리오 로드"""

    def setup_method(self):
        self.tmpdir = tempfile.mkdtemp()

    def teardown_method(self):
        shutil.rmtree(self.tmpdir, ignore_errors=True)

    def test_builtins_present(self):
        assert {"success", "failure", "recovery", "jump"} <= set(builtin_scenarios())

    @pytest.mark.parametrize("name", ["success", "failure", "recovery", "jump"])
    def test_builtin_waypoints_valid(self, name):
        scenario = load_scenario(name)
        assert scenario.name == name
        scenario.validate(scenario.load_grid())

    def test_relative_map_paths(self):
        save_map(build_map("two_rooms"), os.path.join(self.tmpdir, "rooms.pgm"),
                 os.path.join(self.tmpdir, "rooms.yaml"))
        path = os.path.join(self.tmpdir, "custom.txt")
        with open(path, "w", encoding="utf-8") as f:
            f.write("[map]\nimage = rooms.pgm\nmeta = rooms.yaml\n[waypoints]\n1.0 3.0\n")
        scenario = parse_scenario(path)
        assert scenario.name == "custom"
        grid = scenario.load_grid()
        assert (grid.height, grid.width) == (120, 200)

    def test_missing_file(self):
        with pytest.raises(FileNotFoundError):
            load_scenario(os.path.join(self.tmpdir, "nope.txt"))
        with pytest.raises(FileNotFoundError):
            load_scenario("no_such_builtin")


# ── 직접 실행 시 pytest 호출 ──
if __name__ == "__main__":
    pytest.main([__file__, "-v", "--tb=short"])

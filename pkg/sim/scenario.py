# -*- coding: utf-8 -*-
"""
sim/scenario.py - 시나리오 파일 해석
======================================
섹션별 평문 시나리오 파일을 Scenario 로 읽습니다.

형식:
    [map]        builtin = rooms_off_corridor | image = a.pgm, meta = a.yaml, resolution = 0.05
    [waypoints]  x y                        (한 줄에 하나)
    [speed]      t_start v                  / omega_max = 0.8, tolerance = 0.3, loop = true
    [obstacles]  disc x y radius vx vy t_start t_end
                 segment x y length heading vx vy t_start t_end
    [noise]      t_start scale_v scale_omega
    [run]        duration, dt, seed, initial_offset (dx dy dθ), start_heading,
                 odom_sigma_v, odom_sigma_omega, range_max,
                 adversarial_offset (dx dy), adversarial_count
    [config]     section.key = value        (실행 설정 덮어쓰기)

'#' 이후는 주석입니다. 이름만 주면 scenarios/ 디렉토리의 내장 시나리오를 찾습니다.

사용 예시:
    >>> scenario = load_scenario("success")
    >>> grid = scenario.load_grid()
"""

import os
import math
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

import config
from core.geometry import Pose2D
from core.grid_map import OccupancyGrid, load_map
from sim.maps import MAP_BUILDERS, build_map
from sim.world import DISC, SEGMENT, MovingObstacle, NoisePhase

# ── 로거 설정 ──
logger = logging.getLogger(__name__)

SECTIONS = ("map", "waypoints", "speed", "obstacles", "noise", "run", "config")


class ScenarioError(ValueError):
    """시나리오 파일 형식/내용 오류"""


@dataclass
class Scenario:
    """
    시뮬레이션 시나리오

    Attributes:
        name (str): 이름
        map_builtin (str | None): 절차적 지도 이름
        map_image, map_meta (str | None): 지도 파일 경로 (builtin 이 없을 때)
        resolution (float): 절차적 지도 해상도 [m/cell]
        waypoints (list): [(x, y), ...]
        speed_profile (list): [(t_start, v), ...]
        omega_max, tolerance (float): 조향 설정
        loop (bool): 경유점 반복 여부
        obstacles (list): MovingObstacle 목록
        noise_schedule (list): NoisePhase 목록
        duration, dt (float): 실행 시간과 주기 [s]
        seed (int | None): 시나리오 기본 시드
        initial_offset (tuple): 필터 초기 포즈 오차 (dx, dy, dθ)
        start_heading (float | None): 실제 시작 헤딩 (없으면 두 번째 경유점 방향)
        odom_sigma_v, odom_sigma_omega (float): 오도메트리 섭동 표준편차
        range_max (float | None): LiDAR 최대 거리 덮어쓰기
        adversarial_offset (tuple | None): 매 사이클 실제 포즈에서 이만큼 떨어진 전역 샘플 주입
        adversarial_count (int): 주입 샘플 수
        config_overrides (dict): {"section.key": "value"}
    """

    name: str = "custom"
    map_builtin: Optional[str] = None
    map_image: Optional[str] = None
    map_meta: Optional[str] = None
    resolution: float = 0.05
    waypoints: List[Tuple[float, float]] = field(default_factory=list)
    speed_profile: List[Tuple[float, float]] = field(default_factory=lambda: [(0.0, 0.5)])
    omega_max: float = 1.0
    tolerance: float = 0.3
    loop: bool = True
    obstacles: List[MovingObstacle] = field(default_factory=list)
    noise_schedule: List[NoisePhase] = field(default_factory=list)
    duration: float = 60.0
    dt: float = 0.1
    seed: Optional[int] = None
    initial_offset: Tuple[float, float, float] = (0.0, 0.0, 0.0)
    start_heading: Optional[float] = None
    odom_sigma_v: float = 0.01
    odom_sigma_omega: float = 0.01
    range_max: Optional[float] = None
    adversarial_offset: Optional[Tuple[float, float]] = None
    adversarial_count: int = 20
    config_overrides: Dict[str, str] = field(default_factory=dict)

    @property
    def num_cycles(self) -> int:
        return int(round(self.duration / self.dt))

    def load_grid(self) -> OccupancyGrid:
        if self.map_builtin:
            return build_map(self.map_builtin, self.resolution)
        return load_map(self.map_image, self.map_meta)

    def start_pose(self) -> Pose2D:
        x, y = self.waypoints[0]
        if self.start_heading is not None:
            heading = self.start_heading
        elif len(self.waypoints) > 1:
            nx, ny = self.waypoints[1]
            heading = math.atan2(ny - y, nx - x)
        else:
            heading = 0.0
        return Pose2D(x, y, heading)

    def initial_estimate(self) -> Pose2D:
        start = self.start_pose()
        dx, dy, dtheta = self.initial_offset
        return Pose2D(start.x + dx, start.y + dy, start.theta + dtheta)

    def validate(self, grid: OccupancyGrid):
        """
        Raises:
            ScenarioError: 경유점이 없거나 자유 공간 밖일 때
        """
        if not self.waypoints:
            raise ScenarioError("waypoints: 경유점이 하나 이상 필요합니다")
        points = np.array(self.waypoints, dtype=float)
        free = grid.is_free(points)
        if not free.all():
            bad = [tuple(p) for p in points[~free]]
            logger.error(f"자유 공간 밖 경유점: {bad}")
            raise ScenarioError(f"waypoints: 자유 공간 밖 경유점이 있습니다 {bad}")


def _floats(tokens: List[str], count: int, where: str) -> List[float]:
    if len(tokens) != count:
        raise ScenarioError(f"{where}: 값 {count}개가 필요합니다 (읽은 값 {len(tokens)}개)")
    try:
        return [float(t) for t in tokens]
    except ValueError:
        raise ScenarioError(f"{where}: 숫자가 아닌 값이 있습니다 ({' '.join(tokens)})")


def _bool(value: str, where: str) -> bool:
    lowered = value.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ScenarioError(f"{where}: 불리언 값이 아닙니다 ({value!r})")


def parse_scenario_text(text: str, name: str = "custom", base_dir: str = ".") -> Scenario:
    """
    시나리오 본문을 해석합니다.

    Raises:
        ScenarioError: 알 수 없는 섹션/키, 숫자 형식 오류 (줄 번호 포함)
    """
    scenario = Scenario(name=name)
    speed_rows = []
    section = None

    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        where = f"line {line_no}"
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip().lower()
            if section not in SECTIONS:
                raise ScenarioError(f"{where}: 알 수 없는 섹션 [{section}]")
            continue
        if section is None:
            raise ScenarioError(f"{where}: 섹션 헤더 이전에 내용이 있습니다")

        if "=" in line:
            key, value = (part.strip() for part in line.split("=", 1))
            _apply_key(scenario, section, key, value, where, base_dir)
            continue

        tokens = line.split()
        if section == "waypoints":
            x, y = _floats(tokens, 2, where)
            scenario.waypoints.append((x, y))
        elif section == "speed":
            t_start, v = _floats(tokens, 2, where)
            speed_rows.append((t_start, v))
        elif section == "noise":
            t_start, scale_v, scale_omega = _floats(tokens, 3, where)
            scenario.noise_schedule.append(NoisePhase(t_start, scale_v, scale_omega))
        elif section == "obstacles":
            scenario.obstacles.append(_parse_obstacle(tokens, where))
        else:
            raise ScenarioError(f"{where}: [{section}] 섹션은 key = value 형식이어야 합니다")

    if speed_rows:
        scenario.speed_profile = speed_rows
    if not scenario.map_builtin and not (scenario.map_image and scenario.map_meta):
        raise ScenarioError("map: builtin 또는 image/meta 가 필요합니다")
    if not scenario.waypoints:
        raise ScenarioError("waypoints: 경유점이 하나 이상 필요합니다")
    return scenario


def _parse_obstacle(tokens: List[str], where: str) -> MovingObstacle:
    shape = tokens[0].lower() if tokens else ""
    try:
        if shape == DISC:
            x, y, radius, vx, vy, t0, t1 = _floats(tokens[1:], 7, where)
            return MovingObstacle(DISC, x, y, radius, vx, vy, t0, t1)
        if shape == SEGMENT:
            x, y, length, heading, vx, vy, t0, t1 = _floats(tokens[1:], 8, where)
            return MovingObstacle(SEGMENT, x, y, length, vx, vy, t0, t1, heading)
    except ValueError as e:
        if isinstance(e, ScenarioError):
            raise
        raise ScenarioError(f"{where}: {e}")
    raise ScenarioError(f"{where}: 장애물 형태는 {DISC}/{SEGMENT} 중 하나여야 합니다 ({shape!r})")


def _apply_key(scenario: Scenario, section: str, key: str, value: str, where: str, base_dir: str):
    if section == "config":
        if "." not in key:
            raise ScenarioError(f"{where}: [config] 키는 section.key 형식이어야 합니다 ({key})")
        scenario.config_overrides[key] = value
        return

    handlers = {
        ("map", "builtin"): lambda v: setattr(scenario, "map_builtin", v),
        ("map", "image"): lambda v: setattr(scenario, "map_image", os.path.join(base_dir, v)),
        ("map", "meta"): lambda v: setattr(scenario, "map_meta", os.path.join(base_dir, v)),
        ("map", "resolution"): lambda v: setattr(scenario, "resolution", _floats([v], 1, where)[0]),
        ("speed", "omega_max"): lambda v: setattr(scenario, "omega_max", _floats([v], 1, where)[0]),
        ("speed", "tolerance"): lambda v: setattr(scenario, "tolerance", _floats([v], 1, where)[0]),
        ("speed", "loop"): lambda v: setattr(scenario, "loop", _bool(v, where)),
        ("run", "duration"): lambda v: setattr(scenario, "duration", _floats([v], 1, where)[0]),
        ("run", "dt"): lambda v: setattr(scenario, "dt", _floats([v], 1, where)[0]),
        ("run", "seed"): lambda v: setattr(scenario, "seed", int(_floats([v], 1, where)[0])),
        ("run", "initial_offset"): lambda v: setattr(scenario, "initial_offset", tuple(_floats(v.split(), 3, where))),
        ("run", "start_heading"): lambda v: setattr(scenario, "start_heading", _floats([v], 1, where)[0]),
        ("run", "odom_sigma_v"): lambda v: setattr(scenario, "odom_sigma_v", _floats([v], 1, where)[0]),
        ("run", "odom_sigma_omega"): lambda v: setattr(scenario, "odom_sigma_omega", _floats([v], 1, where)[0]),
        ("run", "range_max"): lambda v: setattr(scenario, "range_max", _floats([v], 1, where)[0]),
        ("run", "adversarial_offset"): lambda v: setattr(scenario, "adversarial_offset", tuple(_floats(v.split(), 2, where))),
        ("run", "adversarial_count"): lambda v: setattr(scenario, "adversarial_count", int(_floats([v], 1, where)[0])),
    }
    handler = handlers.get((section, key))
    if handler is None:
        raise ScenarioError(f"{where}: [{section}] 섹션에 알 수 없는 키입니다 ({key})")
    handler(value)
    if section == "map" and key == "builtin" and value not in MAP_BUILDERS:
        raise ScenarioError(f"{where}: 알 수 없는 내장 지도입니다 ({value})")
    if section == "run" and key in ("duration", "dt") and not getattr(scenario, key) > 0:
        raise ScenarioError(f"{where}: {key} 는 0보다 커야 합니다")


def parse_scenario(path: str) -> Scenario:
    """
    시나리오 파일을 읽습니다.

    Raises:
        FileNotFoundError: 파일 없음
        ScenarioError: 형식 오류
    """
    if not os.path.exists(path):
        logger.error(f"시나리오 파일을 찾을 수 없습니다: {path}")
        raise FileNotFoundError(f"시나리오 파일을 찾을 수 없습니다: {path}")
    with open(path, "r", encoding="utf-8") as f:
        text = f.read()
    name = os.path.splitext(os.path.basename(path))[0]
    scenario = parse_scenario_text(text, name=name, base_dir=os.path.dirname(os.path.abspath(path)))
    logger.info(f"시나리오 로드: {name} (경유점 {len(scenario.waypoints)}개, {scenario.num_cycles} 사이클)")
    return scenario


def builtin_scenarios() -> List[str]:
    if not os.path.isdir(config.SCENARIO_DIR):
        return []
    return sorted(
        os.path.splitext(f)[0] for f in os.listdir(config.SCENARIO_DIR) if f.endswith(".txt")
    )


def load_scenario(name_or_path: str) -> Scenario:
    """파일 경로 또는 내장 시나리오 이름(scenarios/<name>.txt)으로 시나리오를 읽습니다."""
    if os.path.exists(name_or_path):
        return parse_scenario(name_or_path)
    builtin_path = os.path.join(config.SCENARIO_DIR, f"{name_or_path}.txt")
    if os.path.exists(builtin_path):
        return parse_scenario(builtin_path)
    logger.error(f"시나리오를 찾을 수 없습니다: {name_or_path}")
    raise FileNotFoundError(
        f"시나리오를 찾을 수 없습니다: {name_or_path} (내장: {', '.join(builtin_scenarios())})"
    )

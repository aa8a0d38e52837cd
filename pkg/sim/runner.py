# -*- coding: utf-8 -*-
"""
sim/runner.py - 시나리오 / 로그 재생 실행기
=============================================
시뮬레이터 폐루프 (step_world → cast_scan → 전역 위치 추정 → 필터 사이클) 와
CARMEN 로그 재생을 실행하고 사이클별 CycleReport 를 모아 CSV 로 저장합니다.

난수는 SeedSequence(seed) 에서 월드/필터/전역 위치 추정/판정 모델 학습용
독립 스트림으로 분기하므로 같은 시드는 같은 바이트의 CSV 를 만듭니다.

사용 예시:
    >>> scenario = load_scenario("success")
    >>> run_cfg = RunConfig.load(scenario_overrides=scenario.config_overrides)
    >>> result = run_scenario(scenario, run_cfg, seed=1, out_path="output/success.csv")
    >>> print(result.summary()["ate"])
"""

import math
import logging
import dataclasses
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

import config
from core.geometry import Pose2D
from core.grid_map import DistanceField, build_distance_field
from data_io.carmen import CarmenLog, LASER, derive_velocities
from data_io.trace import EvalThresholds, summarize_trace, write_trace
from global_loc.pose_sampler import GlobalLocalizer, GlobalSample
from localization.baseline import AugmentedMCL
from localization.particle_filter import LocalizationEngine
from localization.state import CycleReport
from models.decision import DecisionModel, load_decision_model
from models.decision_training import train_decision_model
from models.motion import OdometryInput, integrate_pose
from sim.raycast import ScanGeometry
from sim.scenario import Scenario
from sim.world import WaypointFollower, WorldState, cast_scan, step_world

# ── 로거 설정 ──
logger = logging.getLogger(__name__)

# 적대적 전역 샘플의 위치/각도 잡음 표준편차
ADVERSARIAL_SIGMA_XY = 0.05
ADVERSARIAL_SIGMA_THETA = 0.02


@dataclass
class RunStreams:
    """역할별 독립 난수 스트림"""

    world: np.random.Generator
    filter: np.random.Generator
    global_loc: np.random.Generator
    training: np.random.Generator

    @classmethod
    def from_seed(cls, seed: int) -> "RunStreams":
        children = np.random.SeedSequence(seed).spawn(4)
        return cls(*[np.random.default_rng(child) for child in children])


@dataclass
class RunResult:
    """
    실행 결과

    Attributes:
        name (str): 시나리오/로그 이름
        mode (str): mcl / baseline
        seed (int): 시드
        reports (list): CycleReport 목록
        d_th (float): 사용한 판정 임계값
        trace_path (str | None): 저장한 CSV 경로
    """

    name: str
    mode: str
    seed: int
    reports: List[CycleReport] = field(default_factory=list)
    d_th: float = float("nan")
    trace_path: Optional[str] = None

    def summary(self, thresholds: EvalThresholds = EvalThresholds()) -> dict:
        summary = summarize_trace(self.reports, thresholds, d_th=self.d_th)
        summary.update({"name": self.name, "mode": self.mode, "seed": self.seed})
        return summary


def prepare_decision_model(run_cfg: "config.RunConfig", df: DistanceField, geometry: ScanGeometry,
                           rng: np.random.Generator) -> DecisionModel:
    """
    decision.model_path 가 있으면 로드하고, 없으면 현재 지도에서
    decision.quick_samples 개 표본으로 빠르게 학습합니다.

    Raises:
        TrainingError: 빠른 학습에서 클래스 표본 부족
    """
    path = run_cfg.get("decision", "model_path")
    if path:
        return load_decision_model(path)
    training_cfg = dataclasses.replace(
        run_cfg.training_config(), n_samples=run_cfg.get("decision", "quick_samples"),
    )
    return train_decision_model(df, geometry, rng, training_cfg)


def build_engine(df: DistanceField, dm: DecisionModel, run_cfg: "config.RunConfig",
                 baseline: bool = False, use_ccmm: Optional[bool] = None):
    """제안 필터 또는 기저 필터(AugmentedMCL) 를 생성합니다."""
    configs = run_cfg.filter_configs()
    if use_ccmm is not None:
        configs = dataclasses.replace(configs, filter=dataclasses.replace(configs.filter, use_ccmm=use_ccmm))
    if baseline:
        return AugmentedMCL(df, dm, configs, run_cfg.baseline_config())
    return LocalizationEngine(df, dm, configs)


def build_global_localizer(df: DistanceField, run_cfg: "config.RunConfig") -> GlobalLocalizer:
    cache_path = run_cfg.get("global_loc", "cache_path") or None
    return GlobalLocalizer(
        df, run_cfg.feature_config(), run_cfg.sampler_config(), cache_path=cache_path,
    )


def adversarial_samples(gt: Pose2D, offset: tuple, count: int, rng: np.random.Generator) -> List[GlobalSample]:
    """실제 포즈에서 offset (월드 좌표) 만큼 떨어진 가짜 전역 샘플 (매칭률 1)"""
    noise = rng.standard_normal((count, 3))
    return [
        GlobalSample(
            Pose2D(
                gt.x + offset[0] + ADVERSARIAL_SIGMA_XY * n[0],
                gt.y + offset[1] + ADVERSARIAL_SIGMA_XY * n[1],
                gt.theta + ADVERSARIAL_SIGMA_THETA * n[2],
            ),
            1.0,
        )
        for n in noise
    ]


# ═══════════════════════════════════════════
# 시뮬레이션 폐루프
# ═══════════════════════════════════════════

def run_scenario(scenario: Scenario, run_cfg: "config.RunConfig", seed: Optional[int] = None,
                 dm: Optional[DecisionModel] = None, baseline: bool = False,
                 use_global: Optional[bool] = None, use_ccmm: Optional[bool] = None,
                 out_path: Optional[str] = None) -> RunResult:
    """
    시나리오를 폐루프로 실행합니다.

    Args:
        scenario: 시나리오
        run_cfg: 실행 설정 (시나리오 [config] 덮어쓰기가 반영된 것)
        seed: 시드 (None 이면 시나리오 seed, 그것도 없으면 0)
        dm: 판정 모델 (None 이면 prepare_decision_model)
        baseline: AugmentedMCL 기저 필터 사용
        use_global: 전역 위치 추정 결합 (None 이면 global_loc.enabled, 기저 모드에서는 항상 끔)
        use_ccmm: CCMM 사용 여부 덮어쓰기
        out_path: 트레이스 CSV 경로 (None 이면 저장 안 함)

    Returns:
        RunResult

    Raises:
        ScenarioError: 경유점이 자유 공간 밖일 때
        TrainingError: 판정 모델 빠른 학습 실패
    """
    if seed is None:
        seed = scenario.seed if scenario.seed is not None else 0
    streams = RunStreams.from_seed(seed)

    grid = scenario.load_grid()
    scenario.validate(grid)
    df = build_distance_field(grid, run_cfg.get("map", "clamp"))
    geometry = run_cfg.scan_geometry(scenario.range_max)
    if dm is None:
        dm = prepare_decision_model(run_cfg, df, geometry, streams.training)

    world = WorldState(
        gt_pose=scenario.start_pose(), df=df, obstacles=tuple(scenario.obstacles),
        noise_schedule=tuple(scenario.noise_schedule),
        odom_sigma_v=scenario.odom_sigma_v, odom_sigma_omega=scenario.odom_sigma_omega,
    )
    follower = WaypointFollower(
        waypoints=list(scenario.waypoints), speed_profile=list(scenario.speed_profile),
        omega_max=scenario.omega_max, tolerance=scenario.tolerance, loop=scenario.loop,
    )
    engine = build_engine(df, dm, run_cfg, baseline, use_ccmm)
    engine.initialize(scenario.initial_estimate(), streams.filter)

    if use_global is None:
        use_global = run_cfg.get("global_loc", "enabled")
    localizer = build_global_localizer(df, run_cfg) if use_global and not baseline else None

    logger.info(
        f"시나리오 시작: {scenario.name} (모드 {engine.name}, 시드 {seed}, "
        f"{scenario.num_cycles} 사이클, 전역 위치 추정 {'사용' if localizer else '끔'})"
    )
    odom_pose = Pose2D()
    reports = []
    for cycle in range(scenario.num_cycles):
        command = follower.command(world.gt_pose, world.time, scenario.dt)
        world, reported = step_world(world, command, scenario.dt, streams.world)
        scan = cast_scan(world, geometry, streams.world)
        odom_pose = integrate_pose(odom_pose, reported)

        gl_samples: List[GlobalSample] = []
        if localizer is not None:
            localizer.add_observation(scan, odom_pose)
            if localizer.should_run(cycle):
                gl_samples = localizer.localize(scan, streams.global_loc)
        if scenario.adversarial_offset is not None:
            gl_samples = gl_samples + adversarial_samples(
                world.gt_pose, scenario.adversarial_offset, scenario.adversarial_count, streams.global_loc,
            )

        report = engine.step(reported, scan, gl_samples, streams.filter, time_s=world.time, gt=world.gt_pose)
        reports.append(report)
        logger.debug(
            f"사이클 {cycle}: 오차 {report.position_error():.3f} m, 신뢰도 {report.reliability:.3f}, "
            f"전역 샘플 {report.n_global_samples}개"
        )

    result = RunResult(name=scenario.name, mode=engine.name, seed=seed, reports=reports, d_th=dm.d_th)
    if out_path is not None:
        result.trace_path = write_trace(reports, out_path)
    logger.info(f"시나리오 완료: {scenario.name}, 최종 위치 오차 {reports[-1].position_error():.3f} m" if reports
                else f"시나리오 완료: {scenario.name} (사이클 없음)")
    return result


# ═══════════════════════════════════════════
# CARMEN 로그 재생
# ═══════════════════════════════════════════

def replay_log(log: CarmenLog, df: DistanceField, dm: DecisionModel, run_cfg: "config.RunConfig",
               initial_pose: Pose2D, seed: int = 0, name: str = "carmen", baseline: bool = False,
               use_global: Optional[bool] = None, use_ccmm: Optional[bool] = None,
               out_path: Optional[str] = None) -> RunResult:
    """
    CARMEN 로그의 FLASER 레코드를 순서대로 필터에 넣습니다.
    오도메트리 입력은 연속된 FLASER 오도메트리 포즈에서 역산합니다 (gt 없음).
    """
    streams = RunStreams.from_seed(seed)
    fov = math.radians(run_cfg.get("carmen", "fov_deg"))
    range_max = run_cfg.get("carmen", "range_max")
    dt_min = run_cfg.get("carmen", "dt_min")

    lasers = [r for r in log.records if r.kind == LASER]
    if not lasers:
        logger.warning("재생할 FLASER 레코드가 없습니다")
    engine = build_engine(df, dm, run_cfg, baseline, use_ccmm)
    engine.initialize(initial_pose, streams.filter)
    if not df.grid.is_free(np.array([[initial_pose.x, initial_pose.y]]))[0]:
        logger.warning(f"초기 포즈가 지도의 자유 공간 밖입니다. 지도와 로그가 맞는지 확인하세요: {initial_pose}")

    if use_global is None:
        use_global = run_cfg.get("global_loc", "enabled")
    localizer = build_global_localizer(df, run_cfg) if use_global and not baseline else None

    logger.info(f"로그 재생 시작: {name} (레이저 {len(lasers)}개, 모드 {engine.name})")
    reports = []
    previous: Optional[OdometryInput] = None
    prev_record = None
    for cycle, record in enumerate(lasers):
        if prev_record is None:
            u = OdometryInput(0.0, 0.0, 0.0)
        else:
            u = derive_velocities(
                prev_record.odom_pose, prev_record.timestamp, record.odom_pose, record.timestamp,
                previous, dt_min,
            )
        previous, prev_record = u, record
        scan = record.to_scan(fov, range_max)

        gl_samples: List[GlobalSample] = []
        if localizer is not None:
            localizer.add_observation(scan, Pose2D(*record.odom_pose))
            if localizer.should_run(cycle):
                gl_samples = localizer.localize(scan, streams.global_loc)
        reports.append(engine.step(u, scan, gl_samples, streams.filter, time_s=record.timestamp))

    result = RunResult(name=name, mode=engine.name, seed=seed, reports=reports, d_th=dm.d_th)
    if out_path is not None:
        result.trace_path = write_trace(reports, out_path)
    logger.info(f"로그 재생 완료: {name}, {len(reports)} 사이클")
    return result

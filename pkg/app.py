# -*- coding: utf-8 -*-
"""
app.py - 신뢰도 기반 2D LiDAR MCL 명령행 도구
================================================
시뮬레이션 실험, CARMEN 로그 재생, 판정 모델 학습, 우도 지도 출력,
트레이스 평가, 지도 정보 확인을 하위 명령으로 제공합니다.

종료 코드: 0 성공, 2 사용법/설정/데이터 형식 오류, 3 데이터 부족(학습 실패)

실행:
    python app.py sim-run success --seed 1 --out output/
    python app.py sim-run recovery --baseline
    python app.py replay-carmen intel.log --map intel.yaml --initial-pose 5 -19 3.14159
    python app.py train-decision --scenario success --n 3000 --model-out output/dm.txt
    python app.py likelihood-map --scenario success --mode both
    python app.py eval output/success_mcl_seed1.csv
    python app.py map-info rooms_off_corridor
"""

import os
import sys
import math
import argparse
import logging
from typing import List, Optional

# 프로젝트 루트를 path에 추가
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import config
from config import ConfigError, RunConfig, describe_schema
from core.geometry import Pose2D
from core.grid_map import MapLoadError, build_distance_field, describe_grid, load_map_from_metadata
from data_io.carmen import CarmenParseError, parse_carmen
from data_io.likelihood_grid import MODE_CCMM, MODE_LFM, emit_likelihood_grid
from data_io.trace import TraceFormatError, dumps_summary, read_trace, summarize_trace, write_summary
from global_loc.features import MAXIMA, MINIMA, SADDLE, load_or_build_keypoints
from models.decision import describe_decision_model, save_decision_model
from models.decision_training import TrainingError, train_decision_model
from sim.maps import MAP_BUILDERS, build_map
from sim.raycast import ScanGeometry
from sim.runner import RunStreams, prepare_decision_model, replay_log, run_scenario
from sim.scenario import ScenarioError, load_scenario
from sim.world import contaminated_scan

# ── 로거 설정 ──
logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3

LOG_FORMAT = "[%(asctime)s] %(levelname)s - %(name)s - %(message)s"


class UsageError(ValueError):
    """명령행 인자 조합 오류"""


# ═══════════════════════════════════════════
# 공통 헬퍼
# ═══════════════════════════════════════════

def resolve_map(name_or_path: str, resolution: float = 0.05):
    """절차적 지도 이름 또는 메타데이터 파일 경로로 점유 격자를 만듭니다."""
    if name_or_path in MAP_BUILDERS:
        return build_map(name_or_path, resolution)
    if os.path.exists(name_or_path):
        return load_map_from_metadata(name_or_path)
    logger.error(f"지도를 찾을 수 없습니다: {name_or_path}")
    raise FileNotFoundError(f"지도를 찾을 수 없습니다: {name_or_path} (내장: {', '.join(MAP_BUILDERS)})")


def load_run_config(args, scenario_overrides: Optional[dict] = None) -> RunConfig:
    overrides = list(args.set or [])
    if getattr(args, "no_ccmm", False):
        overrides.append("filter.use_ccmm=false")
    if getattr(args, "no_global", False):
        overrides.append("global_loc.enabled=false")
    return RunConfig.load(args.config, overrides, scenario_overrides)


def output_path(args, filename: str) -> str:
    out_dir = args.out or config.OUTPUT_DIR
    os.makedirs(out_dir, exist_ok=True)
    return os.path.join(out_dir, filename)


# ═══════════════════════════════════════════
# 하위 명령
# ═══════════════════════════════════════════

def cmd_sim_run(args) -> int:
    """시나리오를 실행하고 트레이스 CSV 와 요약 JSON 을 저장합니다."""
    scenario = load_scenario(args.scenario)
    run_cfg = load_run_config(args, scenario.config_overrides)
    seed = args.seed if args.seed is not None else (scenario.seed if scenario.seed is not None else 0)
    stem = f"{scenario.name}_{'baseline' if args.baseline else 'mcl'}_seed{seed}"
    result = run_scenario(
        scenario, run_cfg, seed=seed, baseline=args.baseline, out_path=output_path(args, f"{stem}.csv"),
    )
    summary = result.summary(run_cfg.eval_thresholds())
    summary["trace"] = result.trace_path
    write_summary(summary, output_path(args, f"{stem}_summary.json"))
    print(dumps_summary(summary))
    return EXIT_OK


def cmd_replay_carmen(args) -> int:
    """CARMEN 로그를 지정한 (틀릴 수 있는) 초기 포즈에서 재생합니다."""
    if not args.map:
        raise UsageError("--map: 재생할 지도가 필요합니다")
    run_cfg = load_run_config(args)
    log = parse_carmen(args.log)
    lasers = log.lasers()
    if not lasers:
        raise CarmenParseError(f"{args.log}: FLASER 레코드가 없습니다")

    grid = resolve_map(args.map, args.resolution)
    df = build_distance_field(grid, run_cfg.get("map", "clamp"))
    if args.initial_pose is not None:
        initial = Pose2D(*args.initial_pose)
    else:
        initial = Pose2D(*lasers[0].pose)

    seed = args.seed if args.seed is not None else 0
    streams = RunStreams.from_seed(seed)
    fov = math.radians(run_cfg.get("carmen", "fov_deg"))
    n = lasers[0].ranges.size
    geometry = ScanGeometry(
        fov=fov, angle_increment=fov / (n - 1) if n > 1 else fov,
        range_max=run_cfg.get("carmen", "range_max"), range_min=0.0,
    )
    dm = prepare_decision_model(run_cfg, df, geometry, streams.training)

    name = os.path.splitext(os.path.basename(args.log))[0]
    mode = "baseline" if args.baseline else "mcl"
    result = replay_log(
        log, df, dm, run_cfg, initial, seed=seed, name=name, baseline=args.baseline,
        out_path=output_path(args, f"{name}_{mode}_seed{seed}.csv"),
    )
    print(dumps_summary({
        "name": name, "mode": result.mode, "cycles": len(result.reports),
        "skipped": dict(log.skipped), "trace": result.trace_path,
    }))
    return EXIT_OK


def cmd_train_decision(args) -> int:
    """판정 모델을 학습해 파일로 저장하고 d_th 와 검증 정확도를 출력합니다."""
    scenario = load_scenario(args.scenario) if args.scenario else None
    overrides = dict(scenario.config_overrides) if scenario else {}
    run_cfg = load_run_config(args, overrides)
    extra = []
    if args.n is not None:
        extra.append(f"decision.n_samples={args.n}")
    if args.pos_th is not None:
        extra.append(f"decision.pos_th={args.pos_th}")
    if args.ang_th_deg is not None:
        extra.append(f"decision.ang_th_deg={args.ang_th_deg}")
    for item in extra:
        run_cfg.apply_override(item)
    run_cfg.validate()

    if scenario is not None:
        grid = scenario.load_grid()
        range_max = scenario.range_max
    elif args.map:
        grid = resolve_map(args.map, args.resolution)
        range_max = None
    else:
        raise UsageError("--scenario 또는 --map 중 하나가 필요합니다")
    df = build_distance_field(grid, run_cfg.get("map", "clamp"))
    geometry = run_cfg.scan_geometry(range_max)

    seed = args.seed if args.seed is not None else 0
    rng = RunStreams.from_seed(seed).training
    dm = train_decision_model(df, geometry, rng, run_cfg.training_config())
    path = args.model_out or output_path(args, "decision_model.txt")
    save_decision_model(dm, path)
    info = describe_decision_model(dm)
    info["path"] = path
    print(dumps_summary(info))
    return EXIT_OK


def cmd_likelihood_map(args) -> int:
    """오염된 장면에서 CCMM / LFM 우도 지도를 출력합니다."""
    scenario = load_scenario(args.scenario) if args.scenario else None
    run_cfg = load_run_config(args, scenario.config_overrides if scenario else None)
    if scenario is not None:
        grid = scenario.load_grid()
        pose = scenario.start_pose()
        range_max = scenario.range_max
    elif args.map:
        grid = resolve_map(args.map, args.resolution)
        pose = None
        range_max = None
    else:
        raise UsageError("--scenario 또는 --map 중 하나가 필요합니다")
    if args.pose is not None:
        pose = Pose2D(*args.pose)
    if pose is None:
        raise UsageError("--pose: 지도만 지정한 경우 중심 포즈가 필요합니다")

    df = build_distance_field(grid, run_cfg.get("map", "clamp"))
    geometry = run_cfg.scan_geometry(range_max)
    seed = args.seed if args.seed is not None else 0
    rng = RunStreams.from_seed(seed).world
    scan, discs, fraction = contaminated_scan(
        df, pose, geometry, rng, fraction=run_cfg.get("likelihood_map", "contamination"),
    )
    logger.info(f"오염 장면 생성: 원판 {len(discs)}개, 오염 빔 비율 {fraction:.2f}")

    modes = [MODE_CCMM, MODE_LFM] if args.mode == "both" else [args.mode]
    results = {}
    for mode in modes:
        grid_result = emit_likelihood_grid(
            scan, df, run_cfg.measurement_config(), pose,
            extent=run_cfg.get("likelihood_map", "extent"),
            resolution=run_cfg.get("likelihood_map", "resolution"),
            mode=mode, out_prefix=output_path(args, f"likelihood_{mode}_seed{seed}"),
        )
        dx, dy = grid_result.argmax_offset()
        results[mode] = {
            "argmax_dx": dx, "argmax_dy": dy, "argmax_error": grid_result.argmax_error(),
            "elapsed_ms": grid_result.elapsed_s * 1000.0,
            "pgm": grid_result.pgm_path, "csv": grid_result.csv_path,
        }
    print(dumps_summary({"contamination": fraction, "modes": results}))
    return EXIT_OK


def cmd_eval(args) -> int:
    """트레이스 CSV 들을 평가하고 합격 기준 표를 출력합니다."""
    run_cfg = load_run_config(args)
    thresholds = run_cfg.eval_thresholds()
    summaries = []
    for path in args.traces:
        summary = summarize_trace(read_trace(path), thresholds, d_th=args.d_th)
        summary["trace"] = path
        summaries.append(summary)
    print(dumps_summary({"traces": summaries}))
    return EXIT_OK


def cmd_map_info(args) -> int:
    """지도 크기, 자유 면적, 체크섬과 키포인트 종류별 개수를 출력합니다."""
    run_cfg = load_run_config(args)
    grid = resolve_map(args.map, args.resolution)
    info = describe_grid(grid)
    if not args.no_keypoints:
        df = build_distance_field(grid, run_cfg.get("map", "clamp"))
        keypoints = load_or_build_keypoints(
            df, run_cfg.feature_config(), run_cfg.get("global_loc", "cache_path") or None,
        )
        info["keypoints"] = {
            "total": len(keypoints),
            "maxima": sum(1 for kp in keypoints if kp.kind == MAXIMA),
            "minima": sum(1 for kp in keypoints if kp.kind == MINIMA),
            "saddle": sum(1 for kp in keypoints if kp.kind == SADDLE),
        }
    print(dumps_summary(info))
    return EXIT_OK


# ═══════════════════════════════════════════
# 인자 파서
# ═══════════════════════════════════════════

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=None, help="설정 파일 (section/key = value)")
    common.add_argument("--seed", type=int, default=None, help="난수 시드")
    common.add_argument("--out", default=None, help=f"결과 디렉토리 (기본 {config.OUTPUT_DIR})")
    common.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE", help="설정 덮어쓰기 (반복 가능)")
    common.add_argument("--verbose", action="store_true", help="DEBUG 로그 출력")

    filter_flags = argparse.ArgumentParser(add_help=False)
    filter_flags.add_argument("--baseline", action="store_true", help="LFM + 무작위 주입 기저 필터로 실행")
    filter_flags.add_argument("--no-global", action="store_true", help="전역 위치 추정 결합 끄기")
    filter_flags.add_argument("--no-ccmm", action="store_true", help="CCMM 대신 LFM 가중치 사용")

    map_flags = argparse.ArgumentParser(add_help=False)
    map_flags.add_argument("--resolution", type=float, default=0.05, help="절차적 지도 해상도 [m/cell]")

    schema = describe_schema()
    formatter = argparse.RawDescriptionHelpFormatter
    parser = argparse.ArgumentParser(
        prog="app.py", description="신뢰도 기반 2D LiDAR 몬테카를로 위치 추정", epilog=schema,
        formatter_class=formatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sim-run", parents=[common, filter_flags], epilog=schema, formatter_class=formatter,
                       help="시나리오 시뮬레이션 실행")
    p.add_argument("scenario", help="시나리오 파일 또는 내장 이름 (success/failure/recovery/jump)")
    p.set_defaults(func=cmd_sim_run)

    p = sub.add_parser("replay-carmen", parents=[common, filter_flags, map_flags], epilog=schema,
                       formatter_class=formatter, help="CARMEN 로그 재생")
    p.add_argument("log", help="CARMEN 로그 파일")
    p.add_argument("--map", default=None, help="지도 메타데이터 파일 또는 절차적 지도 이름")
    p.add_argument("--initial-pose", type=float, nargs=3, metavar=("X", "Y", "THETA"),
                   help="초기 포즈 (없으면 첫 FLASER 레이저 포즈)")
    p.set_defaults(func=cmd_replay_carmen)

    p = sub.add_parser("train-decision", parents=[common, map_flags], epilog=schema, formatter_class=formatter,
                       help="판정 모델 학습")
    p.add_argument("--scenario", default=None, help="학습 장면으로 쓸 시나리오")
    p.add_argument("--map", default=None, help="학습 장면으로 쓸 지도")
    p.add_argument("--n", type=int, default=None, help="표본 수 (decision.n_samples)")
    p.add_argument("--pos-th", type=float, default=None, help="성공 위치 임계값 [m]")
    p.add_argument("--ang-th-deg", type=float, default=None, help="성공 각도 임계값 [deg]")
    p.add_argument("--model-out", default=None, help="모델 파일 경로")
    p.set_defaults(func=cmd_train_decision)

    p = sub.add_parser("likelihood-map", parents=[common, map_flags], epilog=schema, formatter_class=formatter,
                       help="CCMM / LFM 우도 지도 출력")
    p.add_argument("--scenario", default=None, help="장면 시나리오 (지도와 시작 포즈)")
    p.add_argument("--map", default=None, help="지도 (시나리오 대신)")
    p.add_argument("--pose", type=float, nargs=3, metavar=("X", "Y", "THETA"), help="중심 포즈")
    p.add_argument("--mode", choices=[MODE_CCMM, MODE_LFM, "both"], default="both")
    p.set_defaults(func=cmd_likelihood_map)

    p = sub.add_parser("eval", parents=[common], epilog=schema, formatter_class=formatter,
                       help="트레이스 CSV 평가")
    p.add_argument("traces", nargs="+", help="트레이스 CSV 파일")
    p.add_argument("--d-th", type=float, default=None, help="판정 임계값 (MAE 초과 통계용)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("map-info", parents=[common, map_flags], epilog=schema, formatter_class=formatter,
                       help="지도 정보")
    p.add_argument("map", help="지도 메타데이터 파일 또는 절차적 지도 이름")
    p.add_argument("--no-keypoints", action="store_true", help="키포인트 계산 생략")
    p.set_defaults(func=cmd_map_info)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format=LOG_FORMAT)
    try:
        return args.func(args)
    except TrainingError as e:
        logger.error(f"학습 데이터 부족: {e}")
        print(f"오류: {e}", file=sys.stderr)
        return EXIT_DATA
    except (ConfigError, ScenarioError, CarmenParseError, TraceFormatError, MapLoadError,
            UsageError, FileNotFoundError, ValueError) as e:
        logger.error(f"{type(e).__name__}: {e}")
        print(f"오류: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

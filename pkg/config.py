# -*- coding: utf-8 -*-
"""
config.py - 전역 설정 파일
===========================
프로젝트 전체에서 사용되는 경로와 모듈별 기본 상수(CONFIG_SCHEMA)를 관리하고,
섹션별 설정 파일 + 명령행 덮어쓰기를 합친 실행 설정(RunConfig)을 제공합니다.

우선순위: --set 플래그 > 시나리오 [config] > 설정 파일 > 기본값

사용 예시:
    >>> run_cfg = RunConfig.load("mcl.ini", overrides=["fusion.beta=0.8"])
    >>> run_cfg.fusion_config().beta
    0.8
"""

import os
import math
import logging
import configparser
from typing import Dict, Iterable, Optional

from dotenv import load_dotenv

# ── 로거 설정 ──
logger = logging.getLogger(__name__)

# ── 프로젝트 루트 경로 ──
# 이 파일이 위치한 디렉토리를 기준으로 프로젝트 루트를 자동 설정
BASE_DIR = os.path.dirname(os.path.abspath(__file__))

# ── .env 파일 로드 ──
# 프로젝트 루트의 .env 파일에서 출력 경로 등 환경 변수를 자동으로 로드
load_dotenv(os.path.join(BASE_DIR, ".env"))

# ── 결과 저장 경로 ──
# 트레이스 CSV, 요약 JSON, 우도 지도, 판정 모델 파일이 저장되는 기본 디렉토리
OUTPUT_DIR = os.environ.get("MCL_OUTPUT_DIR", os.path.join(BASE_DIR, "output"))

# ── 기본 설정 파일 ──
# 존재할 때만 읽음 (--config 로 지정하면 그 파일이 우선)
DEFAULT_CONFIG_PATH = os.environ.get("MCL_CONFIG", os.path.join(BASE_DIR, "mcl.ini"))

# ── 내장 시나리오 디렉토리 ──
SCENARIO_DIR = os.path.join(BASE_DIR, "scenarios")

# ── 모듈별 설정 스키마 ──
# section → key → (기본값, 단위, 설명). 값의 타입은 기본값의 타입을 따름
CONFIG_SCHEMA = {
    "map": {
        "clamp": (10.0, "m", "거리장 최대 저장 거리"),
    },
    "motion": {
        "drive": ("differential", "-", "구동 방식 (differential / omni)"),
        "a1": (0.05, "-", "v 분산 계수 (v²)"),
        "a2": (0.01, "-", "v 분산 계수 (ω²)"),
        "a3": (0.01, "-", "ω 분산 계수 (v²)"),
        "a4": (0.05, "-", "ω 분산 계수 (ω²)"),
        "a5": (0.05, "-", "v_y 분산 계수 (v_y², omni)"),
        "a6": (0.01, "-", "v_y 분산 계수 (ω², omni)"),
    },
    "measurement": {
        "z_hit": (0.9, "-", "likelihood field 가중치"),
        "z_max": (0.05, "-", "최대 거리 가중치"),
        "z_rand": (0.05, "-", "무작위 측정 가중치"),
        "sigma_hit": (0.1, "m", "p_hit 표준편차"),
        "lam": (0.1, "1/m", "미지 장애물 지수분포 λ"),
        "class_prior_known": (0.5, "-", "known 클래스 사전확률"),
        "beam_stride": (4, "beams", "n번째 빔마다 사용"),
        "delta_max": (0.01, "m", "최대 거리 스파이크 폭 δ_max"),
    },
    "decision": {
        "model_path": ("", "path", "판정 모델 파일 (비우면 시나리오 지도에서 빠른 학습)"),
        "n_samples": (3000, "samples", "train-decision 표본 수"),
        "quick_samples": (1500, "samples", "모델 파일이 없을 때 빠른 학습 표본 수"),
        "pos_th": (0.02, "m", "성공 판정 위치 임계값"),
        "ang_th_deg": (2.0, "deg", "성공 판정 각도 임계값"),
        "noise_xy_max": (0.3, "m", "학습 섭동 최대 위치 표준편차"),
        "noise_theta_max_deg": (10.0, "deg", "학습 섭동 최대 각도 표준편차"),
        "min_per_class": (10, "samples", "클래스별 최소 표본 수"),
        "heldout_ratio": (0.2, "-", "검증 세트 비율"),
        "clearance": (0.3, "m", "학습 포즈 최소 장애물 거리"),
        "bin_width": (0.025, "m", "히스토그램 빈 폭"),
        "e_hist_max": (1.0, "m", "히스토그램 상한"),
        "e_max": (1.0, "m", "MAE 잔차 상한"),
        "floor_density": (0.001, "1/m", "히스토그램 최소 밀도"),
    },
    "reliability": {
        "alpha_d": (0.0, "1/m²", "병진 변위 감쇠 계수"),
        "alpha_theta": (0.0, "1/rad²", "회전 변위 감쇠 계수"),
        "r_floor": (0.01, "-", "신뢰도 하한"),
        "r_ceil": (0.99, "-", "신뢰도 상한"),
        "r_init": (0.5, "-", "초기 신뢰도"),
    },
    "global_loc": {
        "enabled": (True, "-", "전역 위치 추정 결합 사용"),
        "sigma_smooth": (0.5, "m", "거리장 평활화 표준편차"),
        "window": (2.0, "m", "기술자 창 지름"),
        "grad_eps": (0.01, "m/cell", "저기울기 임계값"),
        "hess_eps": (0.05, "1/m", "Hessian 고유값 최소 크기"),
        "avg_df_threshold": (0.3, "m", "평균 거리장 값 차이 상한"),
        "ratio_const": (1.25, "-", "매칭 비율 검사 상수"),
        "sigma_xy": (0.5, "m", "후보 주변 위치 잡음"),
        "sigma_theta_deg": (15.0, "deg", "후보 주변 각도 잡음"),
        "n_per_match": (10, "samples", "매칭당 샘플 수 (정/역방향 각각)"),
        "rate_min": (0.6, "-", "매칭률 하한"),
        "match_residual": (0.2, "m", "매칭 빔 잔차 상한"),
        "max_samples": (100, "samples", "사이클당 최대 전역 샘플 수"),
        "beam_stride": (4, "beams", "매칭률 계산 빔 보폭"),
        "interval": (3, "cycles", "실행 주기"),
        "n_acc": (10, "scans", "로컬 지도 누적 스캔 수"),
        "local_range": (10.0, "m", "로컬 지도 최대 빔 길이"),
        "cache_path": ("", "path", "전역 키포인트 캐시 파일"),
    },
    "filter": {
        "num_particles": (500, "particles", "추적 입자 수"),
        "init_sigma_x": (0.3, "m", "초기 분포 x 표준편차"),
        "init_sigma_y": (0.3, "m", "초기 분포 y 표준편차"),
        "init_sigma_theta_deg": (10.0, "deg", "초기 분포 θ 표준편차"),
        "use_ccmm": (True, "-", "CCMM 사용 (false 이면 LFM)"),
    },
    "fusion": {
        "beta": (0.9, "-", "예측 분포 GMM 혼합 가중치"),
        "sigma_x": (0.3, "m", "GMM 커널 x 표준편차"),
        "sigma_y": (0.3, "m", "GMM 커널 y 표준편차"),
        "sigma_theta_deg": (10.0, "deg", "GMM 커널 θ 표준편차"),
        "unif_value": (0.0, "1/(m²·rad)", "균등 밀도 (0 이면 1/(자유 면적·2π))"),
        "chi": (0.9, "-", "미지 장애물 사후확률 임계값"),
        "resample_ess_ratio": (0.5, "-", "ESS 재샘플링 비율"),
        "predictive_weighting": (True, "-", "전역 샘플에 예측 분포 가중 적용"),
    },
    "baseline": {
        "alpha_slow": (0.001, "-", "장기 평균 우도 갱신율"),
        "alpha_fast": (0.1, "-", "단기 평균 우도 갱신율"),
    },
    "sensor": {
        "fov_deg": (270.0, "deg", "시뮬레이션 LiDAR 시야각"),
        "angle_increment_deg": (0.25, "deg", "빔 간격"),
        "range_max": (30.0, "m", "최대 거리"),
        "range_min": (0.05, "m", "최소 거리"),
        "sigma_r": (0.01, "m", "거리 잡음 표준편차"),
    },
    "carmen": {
        "fov_deg": (180.0, "deg", "FLASER 시야각"),
        "range_max": (50.0, "m", "FLASER 최대 거리"),
        "dt_min": (0.001, "s", "속도 계산 최소 시간 간격"),
    },
    "likelihood_map": {
        "extent": (0.5, "m", "격자 반폭 (±extent)"),
        "resolution": (0.025, "m", "격자 간격"),
        "contamination": (0.3, "-", "시뮬레이션 장면의 미지 장애물 빔 비율 목표"),
    },
    "eval": {
        "recovery_threshold": (0.3, "m", "회복 판정 위치 오차"),
        "recovery_sustain": (10, "cycles", "회복 유지 사이클 수"),
        "reliability_high": (0.9, "-", "높은 신뢰도 기준"),
        "warmup_cycles": (20, "cycles", "신뢰도 통계 제외 초기 사이클"),
        "failure_error": (0.5, "m", "실패 시작 위치 오차"),
        "failure_reliability": (0.1, "-", "실패 감지 신뢰도"),
        "failure_window": (30, "cycles", "실패 감지 허용 사이클"),
        "max_jump": (0.5, "m", "허용 추정 점프"),
        "recovery_horizon": (60, "cycles", "회복 허용 사이클"),
        "success_error": (0.3, "m", "성공 주행 최대 위치 오차"),
        "success_fraction": (0.9, "-", "성공 주행 높은 신뢰도 비율"),
    },
}


class ConfigError(ValueError):
    """설정 파일/덮어쓰기 값 오류 (section.key 포함)"""


def _coerce(section: str, key: str, raw):
    """스키마 기본값 타입으로 변환합니다."""
    default = CONFIG_SCHEMA[section][key][0]
    if not isinstance(raw, str):
        return raw
    text = raw.strip()
    try:
        if isinstance(default, bool):
            lowered = text.lower()
            if lowered in ("1", "true", "yes", "on"):
                return True
            if lowered in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if isinstance(default, int):
            return int(text)
        if isinstance(default, float):
            return float(text)
    except ValueError:
        logger.error(f"설정 값 형식 오류: {section}.{key}={text!r}")
        raise ConfigError(f"{section}.{key}: {type(default).__name__} 값이 필요합니다 (읽은 값 {text!r})")
    return text


class RunConfig:
    """
    모든 모듈 설정을 모은 실행 설정.

    Args:
        values: {section: {key: value}} (누락된 키는 기본값)
    """

    def __init__(self, values: Optional[Dict[str, Dict[str, object]]] = None):
        self.values = {
            section: {key: entry[0] for key, entry in keys.items()}
            for section, keys in CONFIG_SCHEMA.items()
        }
        for section, keys in (values or {}).items():
            for key, value in keys.items():
                self._set(section, key, value)

    # ═══════════════════════════════════════════
    # 로드 / 덮어쓰기
    # ═══════════════════════════════════════════

    def _set(self, section: str, key: str, value):
        if section not in CONFIG_SCHEMA:
            raise ConfigError(f"{section}.{key}: 알 수 없는 섹션입니다")
        if key not in CONFIG_SCHEMA[section]:
            raise ConfigError(f"{section}.{key}: 알 수 없는 키입니다")
        self.values[section][key] = _coerce(section, key, value)

    def get(self, section: str, key: str):
        return self.values[section][key]

    @classmethod
    def load(cls, path: Optional[str] = None, overrides: Iterable[str] = (),
             scenario_overrides: Optional[Dict[str, str]] = None) -> "RunConfig":
        """
        기본값 → 설정 파일 → 시나리오 덮어쓰기 → --set 순서로 합치고 검증합니다.

        Args:
            path: 설정 파일 (None 이면 DEFAULT_CONFIG_PATH 가 있을 때만 사용)
            overrides: "section.key=value" 목록
            scenario_overrides: {"section.key": "value"}

        Raises:
            FileNotFoundError: 지정한 설정 파일이 없을 때
            ConfigError: 알 수 없는 키, 타입/범위 오류
        """
        run_cfg = cls()
        if path is None and os.path.exists(DEFAULT_CONFIG_PATH):
            path = DEFAULT_CONFIG_PATH
        if path is not None:
            run_cfg.apply_file(path)
        for dotted, value in (scenario_overrides or {}).items():
            run_cfg.apply_override(f"{dotted}={value}")
        for item in overrides:
            run_cfg.apply_override(item)
        run_cfg.validate()
        return run_cfg

    def apply_file(self, path: str):
        if not os.path.exists(path):
            logger.error(f"설정 파일을 찾을 수 없습니다: {path}")
            raise FileNotFoundError(f"설정 파일을 찾을 수 없습니다: {path}")
        parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
        try:
            parser.read(path, encoding="utf-8")
        except configparser.Error as e:
            raise ConfigError(f"config: 설정 파일 형식 오류 ({e})")
        for section in parser.sections():
            for key, value in parser.items(section):
                self._set(section, key, value)
        logger.info(f"설정 파일 로드: {path}")

    def apply_override(self, item: str):
        """'section.key=value' 한 개를 적용합니다."""
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise ConfigError(f"{item}: section.key=value 형식이어야 합니다")
        dotted, value = item.split("=", 1)
        section, key = dotted.strip().split(".", 1)
        self._set(section, key, value)

    def validate(self):
        """모든 모듈 설정을 생성해 범위를 검증합니다."""
        builders = {
            "motion": self.motion_config, "measurement": self.measurement_config,
            "decision": self.training_config, "reliability": self.reliability_config,
            "global_loc": self.feature_config, "filter": self.filter_config,
            "fusion": self.fusion_config, "baseline": self.baseline_config,
            "sensor": self.scan_geometry,
        }
        for section, builder in builders.items():
            try:
                builder()
            except ConfigError:
                raise
            except ValueError as e:
                logger.error(f"설정 검증 실패 [{section}]: {e}")
                raise ConfigError(f"{section}.{_field_from_message(section, str(e))}: {e}")
        try:
            self.sampler_config()
        except ValueError as e:
            raise ConfigError(f"global_loc.{_field_from_message('global_loc', str(e))}: {e}")
        for key in ("clamp",):
            if not self.get("map", key) > 0:
                raise ConfigError(f"map.{key}: 0보다 커야 합니다")
        for key in ("extent", "resolution"):
            if not self.get("likelihood_map", key) > 0:
                raise ConfigError(f"likelihood_map.{key}: 0보다 커야 합니다")
        for key in ("range_max", "dt_min", "fov_deg"):
            if not self.get("carmen", key) > 0:
                raise ConfigError(f"carmen.{key}: 0보다 커야 합니다")

    # ═══════════════════════════════════════════
    # 모듈 설정 생성
    # ═══════════════════════════════════════════

    def motion_config(self):
        from models.motion import MotionConfig
        return MotionConfig(**self.values["motion"])

    def measurement_config(self):
        from models.measurement import MeasurementConfig
        return MeasurementConfig(**self.values["measurement"])

    def reliability_config(self):
        from models.reliability import ReliabilityConfig
        return ReliabilityConfig(**self.values["reliability"])

    def training_config(self):
        from models.decision_training import TrainingConfig
        v = self.values["decision"]
        return TrainingConfig(
            n_samples=v["n_samples"], pos_th=v["pos_th"], ang_th=math.radians(v["ang_th_deg"]),
            noise_xy_max=v["noise_xy_max"], noise_theta_max=math.radians(v["noise_theta_max_deg"]),
            min_per_class=v["min_per_class"], heldout_ratio=v["heldout_ratio"], clearance=v["clearance"],
            bin_width=v["bin_width"], e_hist_max=v["e_hist_max"], e_max=v["e_max"],
            floor_density=v["floor_density"], beam_stride=self.values["measurement"]["beam_stride"],
        )

    def feature_config(self):
        from global_loc.features import FeatureConfig
        v = self.values["global_loc"]
        return FeatureConfig(
            sigma_smooth=v["sigma_smooth"], window=v["window"], grad_eps=v["grad_eps"],
            hess_eps=v["hess_eps"], avg_df_threshold=v["avg_df_threshold"], ratio_const=v["ratio_const"],
        )

    def sampler_config(self):
        from global_loc.pose_sampler import SamplerConfig
        v = self.values["global_loc"]
        return SamplerConfig(
            sigma_xy=v["sigma_xy"], sigma_theta=math.radians(v["sigma_theta_deg"]),
            n_per_match=v["n_per_match"], rate_min=v["rate_min"], match_residual=v["match_residual"],
            max_samples=v["max_samples"], beam_stride=v["beam_stride"], interval=v["interval"],
            n_acc=v["n_acc"], local_range=v["local_range"],
        )

    def filter_config(self):
        from localization.state import FilterConfig
        v = self.values["filter"]
        return FilterConfig(
            num_particles=v["num_particles"], init_sigma_x=v["init_sigma_x"], init_sigma_y=v["init_sigma_y"],
            init_sigma_theta=math.radians(v["init_sigma_theta_deg"]), use_ccmm=v["use_ccmm"],
        )

    def fusion_config(self):
        from localization.state import FusionConfig
        v = self.values["fusion"]
        return FusionConfig(
            beta=v["beta"], sigma_x=v["sigma_x"], sigma_y=v["sigma_y"],
            sigma_theta=math.radians(v["sigma_theta_deg"]),
            unif_value=v["unif_value"] if v["unif_value"] > 0 else None,
            chi=v["chi"], resample_ess_ratio=v["resample_ess_ratio"],
            predictive_weighting=v["predictive_weighting"],
        )

    def baseline_config(self):
        from localization.baseline import BaselineConfig
        return BaselineConfig(**self.values["baseline"])

    def scan_geometry(self, range_max: Optional[float] = None):
        from sim.raycast import ScanGeometry
        v = self.values["sensor"]
        return ScanGeometry(
            fov=math.radians(v["fov_deg"]), angle_increment=math.radians(v["angle_increment_deg"]),
            range_max=range_max if range_max is not None else v["range_max"],
            range_min=v["range_min"], sigma_r=v["sigma_r"],
        )

    def filter_configs(self):
        from localization.particle_filter import FilterConfigs
        return FilterConfigs(
            motion=self.motion_config(), measurement=self.measurement_config(),
            reliability=self.reliability_config(), fusion=self.fusion_config(),
            filter=self.filter_config(),
        )

    def eval_thresholds(self):
        from data_io.trace import EvalThresholds
        return EvalThresholds(**self.values["eval"])

    def as_dict(self) -> dict:
        return {section: dict(keys) for section, keys in self.values.items()}


def _field_from_message(section: str, message: str) -> str:
    """검증 메시지에 등장하는 첫 스키마 키 이름 (없으면 '*')"""
    for key in CONFIG_SCHEMA[section]:
        if key in message:
            return key
    return "*"


def describe_schema() -> str:
    """--help 에 붙이는 설정 키 목록 (기본값, 단위, 설명)"""
    lines = ["설정 키 (section.key = 기본값 [단위] 설명):"]
    for section, keys in CONFIG_SCHEMA.items():
        for key, (default, unit, description) in keys.items():
            lines.append(f"  {section}.{key} = {default!r} [{unit}] {description}")
    return "\n".join(lines)


# ── 디렉토리 자동 생성 ──
# 결과 디렉토리가 없으면 자동으로 생성
for _dir in [OUTPUT_DIR]:
    os.makedirs(_dir, exist_ok=True)

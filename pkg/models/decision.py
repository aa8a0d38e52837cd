# -*- coding: utf-8 -*-
"""
models/decision.py - MAE 판정 모델
====================================
위치 추정 성공/실패 조건에서의 MAE 분포 p(d|success), p(d|failure) 를
히스토그램 밀도로 보관하고, 임계값 d_th 와 함께 파일로 저장/복원합니다.

히스토그램 규칙:
    - 모든 빈 밀도는 floor_density 이상 (꼬리에서도 우도가 0이 되지 않음)
    - Σ 밀도·bin_width = 1
    - d ≥ e_hist_max 이거나 MAE 가 정의되지 않으면 마지막 빈을 사용

사용 예시:
    >>> dm = load_decision_model("output/decision_model.txt")
    >>> decision_likelihood(0.05, SUCCESS, dm)
"""

import os
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

# ── 로거 설정 ──
logger = logging.getLogger(__name__)

SUCCESS = "success"
FAILURE = "failure"

FORMAT_HEADER = "decision_model v1"
DEFAULT_FLOOR_DENSITY = 1e-3
NORMALIZATION_TOL = 1e-6


def histogram_bin_count(bin_width: float, e_hist_max: float) -> int:
    return max(int(round(e_hist_max / bin_width)), 1)


@dataclass(frozen=True, eq=False)
class DecisionModel:
    """
    MAE 조건부 히스토그램 쌍과 판정 임계값

    Attributes:
        bin_width (float): 빈 폭 [m]
        e_hist_max (float): 히스토그램 상한 [m]
        hist_success (np.ndarray): 성공 조건 밀도 [1/m]
        hist_failure (np.ndarray): 실패 조건 밀도 [1/m]
        d_th (float): MAE 임계값 [m]
        e_max (float): MAE 계산 시 잔차 상한 [m]
        floor_density (float): 최소 밀도
        heldout_accuracy (float | None): 검증 세트 정확도 (학습 시에만)
    """

    bin_width: float
    e_hist_max: float
    hist_success: np.ndarray
    hist_failure: np.ndarray
    d_th: float
    e_max: float
    floor_density: float = DEFAULT_FLOOR_DENSITY
    heldout_accuracy: Optional[float] = None

    def __post_init__(self):
        if not self.bin_width > 0 or not self.e_hist_max > 0:
            raise ValueError("bin_width, e_hist_max 는 0보다 커야 합니다")
        n_bins = histogram_bin_count(self.bin_width, self.e_hist_max)
        for name in ("hist_success", "hist_failure"):
            hist = np.array(getattr(self, name), dtype=float, copy=True).ravel()
            if hist.size != n_bins:
                logger.error(f"{name} 빈 개수 불일치: {hist.size} != {n_bins}")
                raise ValueError(f"{name}: 빈 개수 {hist.size} 가 기대값 {n_bins} 와 다릅니다")
            # 저장 정밀도 수준의 오차는 허용
            if (hist < self.floor_density * (1.0 - 1e-9)).any():
                raise ValueError(f"{name}: floor_density({self.floor_density}) 미만 밀도가 있습니다")
            integral = float(hist.sum() * self.bin_width)
            if abs(integral - 1.0) > NORMALIZATION_TOL:
                raise ValueError(f"{name}: 적분값이 1이 아닙니다 ({integral!r})")
            hist.setflags(write=False)
            object.__setattr__(self, name, hist)
        if not self.e_max > 0:
            raise ValueError(f"e_max 는 0보다 커야 합니다: {self.e_max}")

    @property
    def num_bins(self) -> int:
        return int(self.hist_success.size)

    def bin_indices(self, d) -> np.ndarray:
        """MAE 값(NaN=정의되지 않음)들의 빈 인덱스"""
        d = np.asarray(d, dtype=float)
        last = self.num_bins - 1
        with np.errstate(invalid="ignore"):
            idx = np.floor(np.where(np.isfinite(d), d, self.e_hist_max) / self.bin_width)
        idx = np.where(np.isfinite(d) & (d < self.e_hist_max), idx, last)
        return np.clip(idx, 0, last).astype(np.int64)

    def densities(self, d) -> tuple:
        """(p(d|success), p(d|failure)) 배열"""
        idx = self.bin_indices(d)
        return self.hist_success[idx], self.hist_failure[idx]

    def classify(self, d) -> np.ndarray:
        """d < d_th 이면 성공(True). 정의되지 않은 MAE 는 실패."""
        d = np.asarray(d, dtype=float)
        with np.errstate(invalid="ignore"):
            return np.isfinite(d) & (d < self.d_th)


def decision_likelihood(d: Optional[float], state: str, dm: DecisionModel) -> float:
    """
    판정 모델의 조건부 밀도 p(d|s).

    Args:
        d: MAE [m] (None = 정의되지 않음 → 마지막 빈)
        state: SUCCESS 또는 FAILURE
        dm: 판정 모델

    Returns:
        float: 밀도 (≥ floor_density)
    """
    if state not in (SUCCESS, FAILURE):
        raise ValueError(f"state 는 {SUCCESS}/{FAILURE} 중 하나여야 합니다: {state!r}")
    value = np.nan if d is None else d
    p_success, p_failure = dm.densities(value)
    return float(p_success if state == SUCCESS else p_failure)


# ═══════════════════════════════════════════
# 히스토그램 구성
# ═══════════════════════════════════════════

def floor_and_normalize(density: np.ndarray, bin_width: float,
                        floor_density: float = DEFAULT_FLOOR_DENSITY) -> np.ndarray:
    """
    밀도를 floor_density 이상으로 올리면서 적분이 1이 되도록 재분배합니다.
    floor 미만 빈은 floor 로 고정하고 남은 질량을 나머지 빈에 비례 배분하는 과정을
    더 이상 고정할 빈이 없을 때까지 반복합니다.
    """
    density = np.asarray(density, dtype=float)
    n = density.size
    if n * floor_density * bin_width >= 1.0:
        raise ValueError("floor_density 가 너무 커서 정규화할 수 없습니다")

    weights = np.clip(density, 0.0, None)
    if weights.sum() <= 0:
        return np.full(n, 1.0 / (n * bin_width))

    fixed = np.zeros(n, dtype=bool)
    result = np.empty(n)
    while True:
        free_mass = 1.0 - fixed.sum() * floor_density * bin_width
        free_weights = np.where(fixed, 0.0, weights)
        total = free_weights.sum()
        if total <= 0:
            # 남은 빈이 전부 0 이면 균등 분배
            free_weights = np.where(fixed, 0.0, 1.0)
            total = free_weights.sum()
        result = np.where(fixed, floor_density, free_weights / total * free_mass / bin_width)
        newly = (~fixed) & (result < floor_density)
        if not newly.any():
            return result
        fixed |= newly


def histogram_density(values: np.ndarray, bin_width: float, e_hist_max: float) -> np.ndarray:
    """MAE 표본(NaN 포함)의 원시 히스토그램 밀도. 상한 초과와 NaN 은 마지막 빈."""
    n_bins = histogram_bin_count(bin_width, e_hist_max)
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return np.zeros(n_bins)
    with np.errstate(invalid="ignore"):
        idx = np.floor(np.where(np.isfinite(values), values, e_hist_max) / bin_width)
        idx = np.where(np.isfinite(values) & (values < e_hist_max), idx, n_bins - 1)
    idx = np.clip(idx, 0, n_bins - 1).astype(np.int64)
    counts = np.bincount(idx, minlength=n_bins).astype(float)
    return counts / (values.size * bin_width)


def histogram_mean(density: np.ndarray, bin_width: float) -> float:
    centers = (np.arange(density.size) + 0.5) * bin_width
    return float((centers * density).sum() * bin_width)


def classification_accuracy(maes: np.ndarray, labels: np.ndarray, d_th: float) -> float:
    """라벨 정확도. d < d_th 이면 성공으로 예측하고, 정의되지 않은 MAE 는 실패로 예측합니다."""
    maes = np.asarray(maes, dtype=float)
    labels = np.asarray(labels, dtype=bool)
    if maes.size == 0:
        return float("nan")
    with np.errstate(invalid="ignore"):
        predicted = np.isfinite(maes) & (maes < d_th)
    return float(np.mean(predicted == labels))


def select_threshold(heldout_mae: np.ndarray, heldout_labels: np.ndarray,
                     hist_success: np.ndarray, hist_failure: np.ndarray,
                     bin_width: float) -> float:
    """
    검증 표본의 라벨 정확도가 가장 높은 빈 경계를 d_th 로 고릅니다.

    동점이면 두 히스토그램 평균 사이(개구간)의 경계를 우선하고, 남은 후보 중 가운데 값을 씁니다.
    검증 표본이 비어 있거나 후보 경계가 없으면 두 평균의 중점을 사용합니다.

    Args:
        heldout_mae: 검증 MAE (NaN = 정의되지 않음)
        heldout_labels: 검증 라벨 (True = 성공)
        hist_success, hist_failure: 정규화된 히스토그램 밀도
        bin_width: 빈 폭 [m]
    """
    heldout_mae = np.asarray(heldout_mae, dtype=float)
    heldout_labels = np.asarray(heldout_labels, dtype=bool)
    if heldout_mae.shape != heldout_labels.shape:
        logger.error(f"검증 MAE/라벨 길이 불일치: {heldout_mae.shape} != {heldout_labels.shape}")
        raise ValueError("heldout_mae 와 heldout_labels 의 길이가 같아야 합니다")

    mean_s = histogram_mean(hist_success, bin_width)
    mean_f = histogram_mean(hist_failure, bin_width)
    midpoint = 0.5 * (mean_s + mean_f)
    edges = np.arange(1, hist_success.size) * bin_width
    if heldout_mae.size == 0 or edges.size == 0:
        logger.warning(f"검증 표본이나 빈 경계가 없어 평균의 중점을 사용합니다: {midpoint:.4f} m")
        return midpoint

    scores = np.array([classification_accuracy(heldout_mae, heldout_labels, float(e)) for e in edges])
    best = edges[scores >= scores.max() - 1e-12]
    lo, hi = min(mean_s, mean_f), max(mean_s, mean_f)
    between = best[(best > lo) & (best < hi)]
    pool = between if between.size else best
    return float(pool[pool.size // 2])


def build_decision_model(success_mae: np.ndarray, failure_mae: np.ndarray,
                         bin_width: float, e_hist_max: float, e_max: float,
                         floor_density: float = DEFAULT_FLOOR_DENSITY,
                         d_th: Optional[float] = None,
                         heldout_mae: Optional[np.ndarray] = None,
                         heldout_labels: Optional[np.ndarray] = None) -> DecisionModel:
    """
    성공/실패 MAE 표본으로 판정 모델을 만듭니다.

    d_th 가 없으면 select_threshold 로 고릅니다. 검증 표본이 주어지지 않으면(None)
    학습 표본 자체를 라벨 표본으로 사용합니다.
    """
    raw_s = histogram_density(success_mae, bin_width, e_hist_max)
    raw_f = histogram_density(failure_mae, bin_width, e_hist_max)
    hist_s = floor_and_normalize(raw_s, bin_width, floor_density)
    hist_f = floor_and_normalize(raw_f, bin_width, floor_density)
    if d_th is None:
        if heldout_mae is None:
            heldout_mae = np.concatenate([np.asarray(success_mae, dtype=float), np.asarray(failure_mae, dtype=float)])
            heldout_labels = np.concatenate([
                np.ones(np.size(success_mae), dtype=bool), np.zeros(np.size(failure_mae), dtype=bool),
            ])
        d_th = select_threshold(heldout_mae, heldout_labels, hist_s, hist_f, bin_width)
    return DecisionModel(
        bin_width=bin_width, e_hist_max=e_hist_max,
        hist_success=hist_s, hist_failure=hist_f,
        d_th=float(d_th), e_max=e_max, floor_density=floor_density,
    )


def uninformative_decision_model(bin_width: float = 0.025, e_hist_max: float = 1.0,
                                 e_max: float = 1.0) -> DecisionModel:
    """두 히스토그램이 동일한 판정 모델 (신뢰도를 바꾸지 않음)"""
    n_bins = histogram_bin_count(bin_width, e_hist_max)
    flat = np.full(n_bins, 1.0 / (n_bins * bin_width))
    return DecisionModel(
        bin_width=bin_width, e_hist_max=e_hist_max,
        hist_success=flat, hist_failure=flat.copy(),
        d_th=0.5 * e_hist_max, e_max=e_max,
    )


# ═══════════════════════════════════════════
# 파일 입출력
# ═══════════════════════════════════════════

def save_decision_model(dm: DecisionModel, path: str):
    """`decision_model v1` 텍스트 형식으로 저장합니다. 실수는 17자리 유효숫자."""
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)
    lines = [
        FORMAT_HEADER,
        f"bin_width {dm.bin_width:.17g}",
        f"e_hist_max {dm.e_hist_max:.17g}",
        f"d_th {dm.d_th:.17g}",
        f"e_max {dm.e_max:.17g}",
    ]
    for i, (ps, pf) in enumerate(zip(dm.hist_success, dm.hist_failure)):
        lines.append(f"{i} {ps:.17g} {pf:.17g}")
    with open(path, "w", encoding="utf-8") as f:
        f.write("\n".join(lines) + "\n")
    logger.info(f"판정 모델 저장: {path} (d_th={dm.d_th:.4f} m)")


def load_decision_model(path: str) -> DecisionModel:
    """
    저장된 판정 모델을 읽습니다.

    Raises:
        FileNotFoundError: 파일 없음
        ValueError: 형식 오류 (필드 이름 포함)
    """
    if not os.path.exists(path):
        logger.error(f"판정 모델 파일을 찾을 수 없습니다: {path}")
        raise FileNotFoundError(f"판정 모델 파일을 찾을 수 없습니다: {path}")

    with open(path, "r", encoding="utf-8") as f:
        lines = [line.strip() for line in f if line.strip()]
    if not lines or lines[0] != FORMAT_HEADER:
        raise ValueError(f"header: '{FORMAT_HEADER}' 로 시작해야 합니다 ({path})")

    fields = {}
    bins = []
    for line in lines[1:]:
        tokens = line.split()
        try:
            if tokens[0] in ("bin_width", "e_hist_max", "d_th", "e_max"):
                fields[tokens[0]] = float(tokens[1])
            else:
                bins.append((int(tokens[0]), float(tokens[1]), float(tokens[2])))
        except (ValueError, IndexError):
            logger.error(f"판정 모델 줄 파싱 실패: {line!r}")
            raise ValueError(f"{tokens[0] if tokens else 'line'}: 잘못된 줄입니다 ({line!r})")

    for key in ("bin_width", "e_hist_max", "d_th", "e_max"):
        if key not in fields:
            raise ValueError(f"{key}: 판정 모델 파일에 없습니다 ({path})")
    bins.sort(key=lambda b: b[0])
    if [b[0] for b in bins] != list(range(len(bins))):
        raise ValueError("bins: 빈 인덱스가 0부터 연속이어야 합니다")

    hist_s = np.array([b[1] for b in bins])
    hist_f = np.array([b[2] for b in bins])
    floor = min(DEFAULT_FLOOR_DENSITY, float(hist_s.min()), float(hist_f.min())) if bins else DEFAULT_FLOOR_DENSITY
    dm = DecisionModel(
        bin_width=fields["bin_width"], e_hist_max=fields["e_hist_max"],
        hist_success=hist_s, hist_failure=hist_f,
        d_th=fields["d_th"], e_max=fields["e_max"], floor_density=floor,
    )
    logger.info(f"판정 모델 로드: {path} (빈 {dm.num_bins}개, d_th={dm.d_th:.4f} m)")
    return dm


def describe_decision_model(dm: DecisionModel) -> dict:
    return {
        "d_th": dm.d_th,
        "e_max": dm.e_max,
        "bin_width": dm.bin_width,
        "e_hist_max": dm.e_hist_max,
        "mean_success": histogram_mean(dm.hist_success, dm.bin_width),
        "mean_failure": histogram_mean(dm.hist_failure, dm.bin_width),
        "heldout_accuracy": dm.heldout_accuracy,
        "integral_success": float(dm.hist_success.sum() * dm.bin_width),
        "integral_failure": float(dm.hist_failure.sum() * dm.bin_width),
    }

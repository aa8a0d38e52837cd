# -*- coding: utf-8 -*-
"""
data_io/likelihood_grid.py - 우도 지도 출력
=============================================
중심 포즈 주변 (Δx, Δy) 격자에서 같은 헤딩으로 CCMM 또는 LFM 로그 우도를 계산해
16-bit PGM(격자 내 정규화) 과 원시 값 CSV 로 저장합니다.

사용 예시:
    >>> grid = emit_likelihood_grid(scan, df, MeasurementConfig(), gt_pose,
    ...                             extent=0.5, resolution=0.025, mode="ccmm",
    ...                             out_prefix="output/fig_ccmm")
    >>> print(grid.argmax_offset())
"""

import os
import csv
import math
import time
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from core.geometry import Pose2D
from core.grid_map import DistanceField, write_pgm
from models.measurement import (
    MeasurementConfig, Scan, ccmm_log_likelihood_batch, lfm_log_likelihood_batch,
)

# ── 로거 설정 ──
logger = logging.getLogger(__name__)

MODE_CCMM = "ccmm"
MODE_LFM = "lfm"
MODES = (MODE_CCMM, MODE_LFM)

PGM_MAXVAL = 65535


@dataclass(frozen=True, eq=False)
class LikelihoodGrid:
    """
    우도 지도 결과

    Attributes:
        mode (str): ccmm / lfm
        center (Pose2D): 중심 포즈
        offsets (np.ndarray): (M,) 축 오프셋 [m] (Δx, Δy 공통)
        log_likelihood (np.ndarray): (M, M) [row=Δy, col=Δx]
        elapsed_s (float): 일괄 평가 소요 시간 [s]
        pgm_path, csv_path (str | None): 저장 경로
    """

    mode: str
    center: Pose2D
    offsets: np.ndarray
    log_likelihood: np.ndarray
    elapsed_s: float
    pgm_path: Optional[str] = None
    csv_path: Optional[str] = None

    def argmax_offset(self) -> tuple:
        """최대 우도 셀의 (Δx, Δy). 동률이면 행 우선 첫 셀."""
        row, col = np.unravel_index(int(np.argmax(self.log_likelihood)), self.log_likelihood.shape)
        return float(self.offsets[col]), float(self.offsets[row])

    def argmax_error(self) -> float:
        dx, dy = self.argmax_offset()
        return math.hypot(dx, dy)


def grid_offsets(extent: float, resolution: float) -> np.ndarray:
    """[-n·res, ..., n·res], n = floor(extent/resolution). resolution > extent 이면 [0]."""
    n_half = int(math.floor(extent / resolution + 1e-9))
    return resolution * np.arange(-n_half, n_half + 1)


def to_pgm_pixels(values: np.ndarray) -> np.ndarray:
    """로그 우도를 격자 내 최소/최대로 정규화한 16-bit 값. 상단 행이 최대 Δy."""
    finite = np.where(np.isfinite(values), values, np.nan)
    lo, hi = np.nanmin(finite), np.nanmax(finite)
    if not np.isfinite(lo) or hi <= lo:
        scaled = np.full(values.shape, PGM_MAXVAL, dtype=np.int64)
    else:
        norm = np.nan_to_num((finite - lo) / (hi - lo), nan=0.0)
        scaled = np.rint(norm * PGM_MAXVAL).astype(np.int64)
    return scaled[::-1]


def emit_likelihood_grid(scan: Scan, df: DistanceField, meas_cfg: MeasurementConfig, center: Pose2D,
                         extent: float, resolution: float, mode: str = MODE_CCMM,
                         out_prefix: Optional[str] = None) -> LikelihoodGrid:
    """
    중심 포즈 주변 격자의 로그 우도를 계산하고 (선택) 파일로 저장합니다.

    Args:
        scan: 스캔
        df: 거리장
        meas_cfg: 측정 모델 설정
        center: 중심 포즈 (θ 고정)
        extent: 격자 반폭 [m] (> 0)
        resolution: 격자 간격 [m] (> 0)
        mode: "ccmm" 또는 "lfm"
        out_prefix: 저장 경로 접두사 (".pgm", ".csv" 가 붙음). None 이면 저장 안 함

    Raises:
        ValueError: extent/resolution ≤ 0 또는 알 수 없는 mode
    """
    if not extent > 0:
        logger.error(f"우도 지도 extent 오류: {extent}")
        raise ValueError(f"extent 는 0보다 커야 합니다: {extent}")
    if not resolution > 0:
        logger.error(f"우도 지도 resolution 오류: {resolution}")
        raise ValueError(f"resolution 은 0보다 커야 합니다: {resolution}")
    if mode not in MODES:
        raise ValueError(f"mode 는 {MODES} 중 하나여야 합니다: {mode}")

    offsets = grid_offsets(extent, resolution)
    dx, dy = np.meshgrid(offsets, offsets)
    poses = np.column_stack([
        center.x + dx.ravel(), center.y + dy.ravel(), np.full(dx.size, center.theta),
    ])
    scorer = ccmm_log_likelihood_batch if mode == MODE_CCMM else lfm_log_likelihood_batch
    started = time.perf_counter()
    values = scorer(scan, poses, df, meas_cfg).reshape(dx.shape)
    elapsed = time.perf_counter() - started
    logger.debug(f"우도 지도 [{mode}] {values.size}개 포즈 평가: {elapsed * 1000:.1f} ms")

    pgm_path = csv_path = None
    if out_prefix is not None:
        pgm_path, csv_path = f"{out_prefix}.pgm", f"{out_prefix}.csv"
        write_pgm(pgm_path, to_pgm_pixels(values), maxval=PGM_MAXVAL)
        os.makedirs(os.path.dirname(os.path.abspath(csv_path)), exist_ok=True)
        with open(csv_path, "w", encoding="utf-8", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(["dx", "dy", "log_likelihood"])
            for i, oy in enumerate(offsets):
                for j, ox in enumerate(offsets):
                    writer.writerow([repr(float(ox)), repr(float(oy)), repr(float(values[i, j]))])
        logger.info(f"우도 지도 저장 [{mode}]: {pgm_path}, {csv_path}")

    return LikelihoodGrid(
        mode=mode, center=center, offsets=offsets, log_likelihood=values,
        elapsed_s=elapsed, pgm_path=pgm_path, csv_path=csv_path,
    )

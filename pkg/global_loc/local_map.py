# -*- coding: utf-8 -*-
"""
global_loc/local_map.py - 로컬 지도 누적
==========================================
최근 N_acc 개 스캔을 오도메트리 포즈로 이어 붙여 오도메트리 좌표계의
점유 격자를 만듭니다. 먼저 모든 빔 경로를 자유 공간으로 지운 뒤
끝점(r < r_max)을 점유로 표시하며, 나머지는 미지 상태로 둡니다.
"""

import math
import logging
from collections import deque
from typing import Sequence

import numpy as np

from core.geometry import Pose2D
from core.grid_map import OccupancyGrid, FREE, OCCUPIED, UNKNOWN
from models.measurement import Scan

# ── 로거 설정 ──
logger = logging.getLogger(__name__)


def _scan_rays(scan: Scan, pose: Pose2D, local_range: float, beam_stride: int) -> tuple:
    """(원점 xy, 월드 빔 각도, 지울 길이, 끝점 여부)"""
    sensor = pose.compose(scan.sensor_offset)
    angles, ranges = scan.beams(beam_stride)
    lengths = np.minimum(ranges, local_range)
    is_hit = (ranges < scan.range_max) & (ranges <= local_range)
    return (sensor.x, sensor.y), sensor.theta + angles, lengths, is_hit


def build_local_map(scans: Sequence[Scan], odom_poses: Sequence[Pose2D], resolution: float,
                    local_range: float = 10.0, beam_stride: int = 1) -> tuple:
    """
    스캔 이력으로 로컬 점유 격자를 만듭니다.

    Args:
        scans: 스캔 목록 (오래된 것부터)
        odom_poses: 각 스캔 시점의 오도메트리 좌표계 포즈
        resolution: 격자 해상도 [m/cell]
        local_range: 사용할 최대 빔 길이 [m]
        beam_stride: 빔 보폭

    Returns:
        tuple: (OccupancyGrid, 현재 오도메트리 포즈)
    """
    if len(scans) == 0 or len(scans) != len(odom_poses):
        logger.error(f"스캔/포즈 개수 오류: {len(scans)} / {len(odom_poses)}")
        raise ValueError("스캔이 1개 이상 있어야 하며 포즈 개수와 같아야 합니다")
    if not resolution > 0 or not local_range > 0:
        raise ValueError("resolution, local_range 는 0보다 커야 합니다")

    xs = np.array([p.x for p in odom_poses])
    ys = np.array([p.y for p in odom_poses])
    x0 = math.floor((xs.min() - local_range) / resolution) * resolution
    y0 = math.floor((ys.min() - local_range) / resolution) * resolution
    width = int(math.ceil((xs.max() + local_range - x0) / resolution)) + 1
    height = int(math.ceil((ys.max() + local_range - y0) / resolution)) + 1
    origin = Pose2D(x0, y0, 0.0)

    cells = np.full((height, width), UNKNOWN, dtype=np.int8)
    step = 0.5 * resolution
    hits = []

    for scan, pose in zip(scans, odom_poses):
        (ox, oy), angles, lengths, is_hit = _scan_rays(scan, pose, local_range, beam_stride)
        if lengths.size == 0:
            continue
        t = np.arange(0.0, float(lengths.max()), step)
        # 끝점 셀 직전까지만 지움
        carve = t[None, :] < (lengths[:, None] - step)
        px = ox + t[None, :] * np.cos(angles)[:, None]
        py = oy + t[None, :] * np.sin(angles)[:, None]
        cols = np.floor((px[carve] - x0) / resolution).astype(np.int64)
        rows = np.floor((py[carve] - y0) / resolution).astype(np.int64)
        inside = (rows >= 0) & (rows < height) & (cols >= 0) & (cols < width)
        cells[rows[inside], cols[inside]] = FREE

        ex = ox + lengths[is_hit] * np.cos(angles[is_hit])
        ey = oy + lengths[is_hit] * np.sin(angles[is_hit])
        hits.append(np.column_stack([ex, ey]))

    if hits:
        pts = np.concatenate(hits)
        cols = np.floor((pts[:, 0] - x0) / resolution).astype(np.int64)
        rows = np.floor((pts[:, 1] - y0) / resolution).astype(np.int64)
        inside = (rows >= 0) & (rows < height) & (cols >= 0) & (cols < width)
        cells[rows[inside], cols[inside]] = OCCUPIED

    return OccupancyGrid(cells=cells, resolution=resolution, origin=origin), odom_poses[-1]


class LocalMapBuilder:
    """
    최근 n_acc 개의 (스캔, 오도메트리 포즈) 를 보관하는 누적기.

    사용 예시:
        >>> builder = LocalMapBuilder(resolution=0.05, n_acc=10)
        >>> builder.add(scan, odom_pose)
        >>> grid, pose = builder.build()
    """

    def __init__(self, resolution: float, n_acc: int = 10, local_range: float = 10.0,
                 beam_stride: int = 2):
        if n_acc < 1:
            raise ValueError(f"n_acc 는 1 이상이어야 합니다: {n_acc}")
        self.resolution = resolution
        self.local_range = local_range
        self.beam_stride = beam_stride
        self.history = deque(maxlen=n_acc)

    def __len__(self) -> int:
        return len(self.history)

    def add(self, scan: Scan, odom_pose: Pose2D):
        self.history.append((scan, odom_pose))

    def clear(self):
        self.history.clear()

    def build(self) -> tuple:
        scans = [item[0] for item in self.history]
        poses = [item[1] for item in self.history]
        return build_local_map(scans, poses, self.resolution, self.local_range, self.beam_stride)

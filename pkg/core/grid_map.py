# -*- coding: utf-8 -*-
"""
core/grid_map.py - 점유 격자 지도 및 거리장
=============================================
PGM + 메타데이터 파일로부터 점유 격자 지도(OccupancyGrid)를 읽고,
가장 가까운 장애물까지의 유클리드 거리장(DistanceField)을 생성합니다.

셀 상태는 int8 코드로 저장합니다:
    FREE = 0, OCCUPIED = 1, UNKNOWN = -1

격자 배열은 (height, width) 형태이며 row 0 이 월드 최소 y 쪽입니다.
PGM 이미지는 row 0 이 최대 y 쪽이므로 읽고 쓸 때 상하 반전합니다.

사용 예시:
    >>> from core.grid_map import load_map_from_metadata, build_distance_field
    >>> grid = load_map_from_metadata("maps/office.yaml")
    >>> df = build_distance_field(grid, clamp=10.0)
    >>> df.lookup_point(1.0, 2.0)
"""

import os
import hashlib
import logging
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from core.geometry import Pose2D

# ── 로거 설정 ──
logger = logging.getLogger(__name__)

FREE = 0
OCCUPIED = 1
UNKNOWN = -1

DEFAULT_CLAMP = 10.0


class MapLoadError(ValueError):
    """지도 이미지/메타데이터 파일 형식 오류"""


@dataclass(frozen=True, eq=False)
class OccupancyGrid:
    """
    3상태(점유/자유/미지) 점유 격자 지도

    Attributes:
        cells (np.ndarray): (height, width) int8 셀 상태 배열 (읽기 전용)
        resolution (float): 셀 크기 [m/cell]
        origin (Pose2D): 셀 (0, 0) 좌하단 모서리의 월드 포즈
    """

    cells: np.ndarray
    resolution: float
    origin: Pose2D = Pose2D()

    def __post_init__(self):
        cells = np.array(self.cells, dtype=np.int8, copy=True)
        if cells.ndim != 2 or cells.size == 0:
            logger.error(f"격자 형태 오류: shape={cells.shape}")
            raise ValueError(f"cells 는 비어있지 않은 2차원 배열이어야 합니다: shape={cells.shape}")
        if not np.isin(cells, (FREE, OCCUPIED, UNKNOWN)).all():
            raise ValueError("cells 에 알 수 없는 상태 코드가 포함되어 있습니다")
        if not self.resolution > 0:
            logger.error(f"해상도 오류: resolution={self.resolution}")
            raise ValueError(f"resolution 은 0보다 커야 합니다: {self.resolution}")
        cells.setflags(write=False)
        object.__setattr__(self, "cells", cells)
        object.__setattr__(self, "resolution", float(self.resolution))

    # ═══════════════════════════════════════════
    # 기하 정보
    # ═══════════════════════════════════════════

    @property
    def height(self) -> int:
        return int(self.cells.shape[0])

    @property
    def width(self) -> int:
        return int(self.cells.shape[1])

    @property
    def free_area(self) -> float:
        """자유 공간 면적 [m²]"""
        return float(np.count_nonzero(self.cells == FREE)) * self.resolution ** 2

    def world_to_cell(self, points) -> tuple:
        """
        월드 좌표 점들을 (row, col) 정수 인덱스로 변환합니다.
        격자 범위 밖 인덱스도 그대로 반환하므로 contains() 로 확인해야 합니다.

        Args:
            points: (N, 2) 또는 (2,) 월드 좌표 [m]

        Returns:
            tuple: (rows, cols) int64 배열
        """
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        dx = pts[:, 0] - self.origin.x
        dy = pts[:, 1] - self.origin.y
        if self.origin.theta != 0.0:
            c, s = np.cos(self.origin.theta), np.sin(self.origin.theta)
            dx, dy = c * dx + s * dy, -s * dx + c * dy
        cols = np.floor(dx / self.resolution).astype(np.int64)
        rows = np.floor(dy / self.resolution).astype(np.int64)
        return rows, cols

    def cell_to_world(self, rows, cols) -> np.ndarray:
        """셀 인덱스를 셀 중심의 월드 좌표 (N, 2) 로 변환합니다."""
        lx = (np.asarray(cols, dtype=float) + 0.5) * self.resolution
        ly = (np.asarray(rows, dtype=float) + 0.5) * self.resolution
        c, s = np.cos(self.origin.theta), np.sin(self.origin.theta)
        out = np.empty((lx.size, 2), dtype=float)
        out[:, 0] = self.origin.x + c * lx.ravel() - s * ly.ravel()
        out[:, 1] = self.origin.y + s * lx.ravel() + c * ly.ravel()
        return out

    def contains(self, rows, cols) -> np.ndarray:
        rows = np.asarray(rows)
        cols = np.asarray(cols)
        return (rows >= 0) & (rows < self.height) & (cols >= 0) & (cols < self.width)

    def state_at(self, points) -> np.ndarray:
        """점들의 셀 상태. 격자 밖은 UNKNOWN."""
        rows, cols = self.world_to_cell(points)
        inside = self.contains(rows, cols)
        states = np.full(rows.shape, UNKNOWN, dtype=np.int8)
        states[inside] = self.cells[rows[inside], cols[inside]]
        return states

    def is_free(self, points) -> np.ndarray:
        """점들이 자유 공간 셀 위에 있는지 여부 (미지/격자 밖은 False)"""
        return self.state_at(points) == FREE

    def free_cell_centers(self) -> np.ndarray:
        rows, cols = np.nonzero(self.cells == FREE)
        return self.cell_to_world(rows, cols)

    def bounds(self) -> tuple:
        """격자 네 모서리를 감싸는 월드 좌표 경계 (x_min, y_min, x_max, y_max)"""
        corners = self.cell_to_world(
            np.array([0, 0, self.height, self.height]) - 0.5,
            np.array([0, self.width, 0, self.width]) - 0.5,
        )
        return (
            float(corners[:, 0].min()), float(corners[:, 1].min()),
            float(corners[:, 0].max()), float(corners[:, 1].max()),
        )

    def checksum(self) -> str:
        """
        격자 기하와 셀 상태에 대한 SHA-256 해시.
        키포인트 캐시의 유효성 확인에 사용합니다.
        """
        hasher = hashlib.sha256()
        header = (
            f"{self.width}x{self.height}|{self.resolution!r}|"
            f"{self.origin.x!r},{self.origin.y!r},{self.origin.theta!r}"
        )
        hasher.update(header.encode("utf-8"))
        hasher.update(np.ascontiguousarray(self.cells).tobytes())
        return hasher.hexdigest()


@dataclass(frozen=True, eq=False)
class DistanceField:
    """
    최근접 점유 셀까지의 거리장

    Attributes:
        grid (OccupancyGrid): 원본 격자 (동일 기하 공유)
        dist (np.ndarray): (height, width) 거리 [m], 0 ≤ dist ≤ clamp
        clamp (float): 저장 최대 거리 [m]
    """

    grid: OccupancyGrid
    dist: np.ndarray
    clamp: float

    def lookup(self, points) -> np.ndarray:
        """
        점들이 속한 셀의 거리값. 격자 밖 점은 clamp 를 반환합니다.

        Args:
            points: (N, 2) 월드 좌표

        Returns:
            np.ndarray: (N,) 거리 [m]
        """
        rows, cols = self.grid.world_to_cell(points)
        inside = self.grid.contains(rows, cols)
        values = np.full(rows.shape, self.clamp, dtype=float)
        values[inside] = self.dist[rows[inside], cols[inside]]
        return values

    def lookup_point(self, x: float, y: float) -> float:
        return float(self.lookup(np.array([[x, y]]))[0])


def build_distance_field(grid: OccupancyGrid, clamp: float = DEFAULT_CLAMP) -> DistanceField:
    """
    격자로부터 유클리드 거리장을 생성합니다.
    미지 셀은 장애물이 아닌 것으로 취급합니다.

    Args:
        grid: 점유 격자 지도
        clamp: 최대 저장 거리 [m]

    Returns:
        DistanceField: 읽기 전용 거리장

    Raises:
        ValueError: clamp ≤ 0
    """
    if not clamp > 0:
        logger.error(f"거리장 clamp 오류: {clamp}")
        raise ValueError(f"clamp 는 0보다 커야 합니다: {clamp}")

    occupied = grid.cells == OCCUPIED
    if not occupied.any():
        dist = np.full(grid.cells.shape, float(clamp), dtype=float)
    else:
        # 정확한 EDT: 점유 셀까지의 셀 중심 간 거리
        dist = ndimage.distance_transform_edt(
            ~occupied, sampling=(grid.resolution, grid.resolution)
        )
        dist = np.minimum(dist, float(clamp))
    dist.setflags(write=False)
    return DistanceField(grid=grid, dist=dist, clamp=float(clamp))


def df_lookup(df: DistanceField, point) -> float:
    """단일 월드 좌표점의 거리장 값 [m]"""
    return df.lookup_point(float(point[0]), float(point[1]))


# ═══════════════════════════════════════════
# PGM 입출력
# ═══════════════════════════════════════════

def read_pgm(path: str) -> tuple:
    """
    바이너리 PGM(P5) 파일을 읽습니다.

    Args:
        path: 이미지 경로

    Returns:
        tuple: (pixels (H, W) ndarray, maxval)

    Raises:
        FileNotFoundError: 파일이 없을 때
        MapLoadError: 헤더/데이터 형식 오류
    """
    if not os.path.exists(path):
        logger.error(f"지도 이미지를 찾을 수 없습니다: {path}")
        raise FileNotFoundError(f"지도 이미지를 찾을 수 없습니다: {path}")

    with open(path, "rb") as f:
        data = f.read()

    tokens = []
    pos = 0
    # 매직넘버, 폭, 높이, maxval 의 4개 토큰 (주석 '#' 허용)
    while len(tokens) < 4:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if pos >= len(data):
            raise MapLoadError(f"PGM 헤더가 불완전합니다: {path}")
        if data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        tokens.append(data[start:pos])
    pos += 1  # 헤더 뒤 공백 1바이트

    if tokens[0] != b"P5":
        logger.error(f"PGM 매직넘버 오류: {tokens[0]!r}")
        raise MapLoadError(f"magic: P5 형식만 지원합니다 (읽은 값: {tokens[0]!r})")
    try:
        width, height, maxval = (int(t) for t in tokens[1:4])
    except ValueError:
        raise MapLoadError(f"PGM 헤더의 width/height/maxval 이 정수가 아닙니다: {path}")
    if width <= 0 or height <= 0:
        raise MapLoadError(f"width/height: 양수여야 합니다 ({width}x{height})")
    if not 0 < maxval < 65536:
        raise MapLoadError(f"maxval: 1~65535 범위여야 합니다 ({maxval})")

    dtype = np.dtype(np.uint8) if maxval < 256 else np.dtype(">u2")
    expected = width * height * dtype.itemsize
    payload = data[pos:pos + expected]
    if len(payload) != expected:
        logger.error(f"PGM 데이터 크기 불일치: 기대 {expected}, 실제 {len(payload)}")
        raise MapLoadError(
            f"dimensions: {width}x{height} 에 필요한 {expected} 바이트 중 {len(payload)} 바이트만 존재합니다"
        )
    pixels = np.frombuffer(payload, dtype=dtype).reshape(height, width).astype(np.int64)
    return pixels, maxval


def write_pgm(path: str, pixels: np.ndarray, maxval: int = 255):
    """(H, W) 정수 배열을 P5 PGM 으로 저장합니다. maxval > 255 이면 16비트 빅엔디안."""
    pixels = np.asarray(pixels)
    height, width = pixels.shape
    dtype = np.uint8 if maxval < 256 else ">u2"
    body = np.clip(pixels, 0, maxval).astype(dtype).tobytes()
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)
    with open(path, "wb") as f:
        f.write(f"P5\n{width} {height}\n{maxval}\n".encode("ascii"))
        f.write(body)


# ═══════════════════════════════════════════
# 지도 파일 입출력
# ═══════════════════════════════════════════

_REQUIRED_META_KEYS = ("resolution", "origin", "occupied_thresh", "free_thresh")


def read_map_metadata(meta_path: str) -> dict:
    """
    `key: value` 형식의 지도 메타데이터를 읽습니다. 알 수 없는 키는 무시합니다.

    Returns:
        dict: image(str|None), resolution, origin(Pose2D), negate(int),
              occupied_thresh, free_thresh
    """
    if not os.path.exists(meta_path):
        logger.error(f"메타데이터 파일을 찾을 수 없습니다: {meta_path}")
        raise FileNotFoundError(f"메타데이터 파일을 찾을 수 없습니다: {meta_path}")

    raw = {}
    with open(meta_path, "r", encoding="utf-8") as f:
        for line in f:
            line = line.split("#", 1)[0].strip()
            if not line or ":" not in line:
                continue
            key, value = line.split(":", 1)
            raw[key.strip()] = value.strip()

    for key in _REQUIRED_META_KEYS:
        if key not in raw:
            logger.error(f"메타데이터 필수 키 누락: {key}")
            raise MapLoadError(f"{key}: 메타데이터에 필수 키가 없습니다 ({meta_path})")

    def _number(key: str) -> float:
        try:
            return float(raw[key])
        except ValueError:
            raise MapLoadError(f"{key}: 숫자가 아닙니다 ({raw[key]!r})")

    origin_tokens = raw["origin"].replace("[", " ").replace("]", " ").replace(",", " ").split()
    if len(origin_tokens) != 3:
        raise MapLoadError(f"origin: x y θ 세 값이 필요합니다 ({raw['origin']!r})")
    try:
        origin = Pose2D(*(float(t) for t in origin_tokens))
    except ValueError:
        raise MapLoadError(f"origin: 숫자가 아닙니다 ({raw['origin']!r})")

    resolution = _number("resolution")
    if not resolution > 0:
        raise MapLoadError(f"resolution: 0보다 커야 합니다 ({resolution})")

    negate = int(_number("negate")) if "negate" in raw else 0
    if negate not in (0, 1):
        raise MapLoadError(f"negate: 0 또는 1 이어야 합니다 ({negate})")

    return {
        "image": raw.get("image"),
        "resolution": resolution,
        "origin": origin,
        "negate": negate,
        "occupied_thresh": _number("occupied_thresh"),
        "free_thresh": _number("free_thresh"),
    }


def classify_pixels(pixels: np.ndarray, maxval: int, negate: int,
                    occupied_thresh: float, free_thresh: float) -> np.ndarray:
    """픽셀값을 점유 확률로 바꾼 뒤 임계값으로 3상태 분류합니다. (이미지 방향 유지)"""
    if negate:
        occ = pixels / float(maxval)
    else:
        occ = (maxval - pixels) / float(maxval)
    cells = np.full(pixels.shape, UNKNOWN, dtype=np.int8)
    cells[occ > occupied_thresh] = OCCUPIED
    cells[occ < free_thresh] = FREE
    return cells


def load_map(image_path: str, meta_path: str) -> OccupancyGrid:
    """
    PGM 이미지와 메타데이터로부터 점유 격자를 생성합니다.

    Args:
        image_path: P5 PGM 경로
        meta_path: 메타데이터 경로

    Returns:
        OccupancyGrid

    Raises:
        FileNotFoundError: 파일 없음
        MapLoadError: 헤더/메타데이터/크기 오류 (문제 필드 이름 포함)
    """
    meta = read_map_metadata(meta_path)
    pixels, maxval = read_pgm(image_path)
    if maxval != 255:
        logger.warning(f"maxval={maxval} 지도는 비표준입니다: {image_path}")

    cells = classify_pixels(
        pixels, maxval, meta["negate"], meta["occupied_thresh"], meta["free_thresh"],
    )
    grid = OccupancyGrid(cells=np.flipud(cells), resolution=meta["resolution"], origin=meta["origin"])
    logger.info(
        f"지도 로드 완료: {os.path.basename(image_path)} "
        f"({grid.width}x{grid.height}, {grid.resolution} m/cell)"
    )
    return grid


def load_map_from_metadata(meta_path: str) -> OccupancyGrid:
    """메타데이터의 `image:` 항목(메타파일 기준 상대 경로)을 따라 지도를 읽습니다."""
    meta = read_map_metadata(meta_path)
    if not meta["image"]:
        logger.error(f"메타데이터에 image 키가 없습니다: {meta_path}")
        raise MapLoadError(f"image: 메타데이터에 이미지 경로가 없습니다 ({meta_path})")
    image_path = meta["image"]
    if not os.path.isabs(image_path):
        image_path = os.path.join(os.path.dirname(os.path.abspath(meta_path)), image_path)
    return load_map(image_path, meta_path)


def save_map(grid: OccupancyGrid, image_path: str, meta_path: str,
             occupied_thresh: float = 0.65, free_thresh: float = 0.196):
    """
    지도를 P5 PGM + 메타데이터로 저장합니다.
    점유 0, 자유 255, 미지 128 픽셀로 기록하므로 load_map 이 상태를 그대로 복원합니다.
    """
    pixels = np.full(grid.cells.shape, 128, dtype=np.int64)
    pixels[grid.cells == OCCUPIED] = 0
    pixels[grid.cells == FREE] = 255
    write_pgm(image_path, np.flipud(pixels), maxval=255)

    meta_dir = os.path.dirname(os.path.abspath(meta_path))
    os.makedirs(meta_dir, exist_ok=True)
    rel_image = os.path.relpath(os.path.abspath(image_path), meta_dir)
    origin = grid.origin
    with open(meta_path, "w", encoding="utf-8") as f:
        f.write(f"image: {rel_image}\n")
        f.write(f"resolution: {grid.resolution!r}\n")
        f.write(f"origin: [{origin.x!r}, {origin.y!r}, {origin.theta!r}]\n")
        f.write("negate: 0\n")
        f.write(f"occupied_thresh: {occupied_thresh!r}\n")
        f.write(f"free_thresh: {free_thresh!r}\n")
    logger.info(f"지도 저장 완료: {image_path}")


def describe_grid(grid: OccupancyGrid) -> dict:
    """map-info 출력을 위한 지도 요약"""
    counts = {
        "free": int(np.count_nonzero(grid.cells == FREE)),
        "occupied": int(np.count_nonzero(grid.cells == OCCUPIED)),
        "unknown": int(np.count_nonzero(grid.cells == UNKNOWN)),
    }
    x_min, y_min, x_max, y_max = grid.bounds()
    return {
        "width": grid.width,
        "height": grid.height,
        "resolution": grid.resolution,
        "origin": [grid.origin.x, grid.origin.y, grid.origin.theta],
        "bounds": [x_min, y_min, x_max, y_max],
        "cells": counts,
        "free_area_m2": grid.free_area,
        "checksum": grid.checksum(),
    }

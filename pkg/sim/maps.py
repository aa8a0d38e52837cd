# -*- coding: utf-8 -*-
"""
sim/maps.py - 절차적 시험 지도
================================
외부 파일 없이 시뮬레이션/시험에 쓰는 지도를 생성합니다.

    corridor_cross      : 십자 교차 복도
    rooms_off_corridor  : 긴 복도 양옆에 크기가 다른 방이 붙은 지도
    cluttered_office    : 책상과 기둥이 흩어진 사무실
    circular_room       : 원형 방
    pillar_hall         : 일정 간격 기둥이 늘어선 홀 (주기 구조)
    two_rooms           : 문 하나로 이어진 두 방

사용 예시:
    >>> grid = build_map("rooms_off_corridor", resolution=0.05)
"""

import logging

import numpy as np

from core.grid_map import OccupancyGrid, FREE, OCCUPIED

# ── 로거 설정 ──
logger = logging.getLogger(__name__)

WALL = 0.2


class _Canvas:
    """미터 단위 도형을 셀에 칠하는 작업용 격자. 처음에는 전부 점유."""

    def __init__(self, width_m: float, height_m: float, resolution: float):
        self.resolution = resolution
        self.cells = np.full(
            (int(round(height_m / resolution)), int(round(width_m / resolution))), OCCUPIED, dtype=np.int8,
        )
        rows, cols = np.indices(self.cells.shape)
        self.cx = (cols + 0.5) * resolution
        self.cy = (rows + 0.5) * resolution

    def rect(self, x0: float, y0: float, x1: float, y1: float, state: int = FREE):
        mask = (self.cx >= x0) & (self.cx < x1) & (self.cy >= y0) & (self.cy < y1)
        self.cells[mask] = state

    def disc(self, cx: float, cy: float, radius: float, state: int = OCCUPIED):
        mask = (self.cx - cx) ** 2 + (self.cy - cy) ** 2 <= radius ** 2
        self.cells[mask] = state

    def grid(self) -> OccupancyGrid:
        return OccupancyGrid(cells=self.cells, resolution=self.resolution)


def corridor_cross(resolution: float = 0.05, size: float = 20.0, corridor_width: float = 2.0) -> OccupancyGrid:
    """정사각형 영역 중앙에서 교차하는 두 복도"""
    canvas = _Canvas(size, size, resolution)
    center = 0.5 * size
    half = 0.5 * corridor_width
    canvas.rect(WALL, center - half, size - WALL, center + half)
    canvas.rect(center - half, WALL, center + half, size - WALL)
    return canvas.grid()


def rooms_off_corridor(resolution: float = 0.05) -> OccupancyGrid:
    """
    30 m × 14.5 m. y ∈ [6.0, 8.5] 의 동서 복도와 북쪽 4개, 남쪽 4개 방.
    방 크기/문 위치/가구 배치가 모두 달라 대칭이 없습니다.
    """
    canvas = _Canvas(30.0, 14.5, resolution)
    canvas.rect(WALL, 6.0, 30.0 - WALL, 8.5)

    north = [(WALL, 6.8), (7.0, 14.8), (15.0, 20.8), (21.0, 30.0 - WALL)]
    north_doors = [3.0, 12.5, 16.0, 26.5]
    for (x0, x1), door in zip(north, north_doors):
        canvas.rect(x0, 8.5 + WALL, x1, 14.5 - WALL)
        canvas.rect(door, 8.5, door + 1.0, 8.5 + WALL)

    south = [(WALL, 9.8), (10.0, 15.8), (16.0, 24.8), (25.0, 30.0 - WALL)]
    south_doors = [8.0, 11.0, 22.5, 27.0]
    for (x0, x1), door in zip(south, south_doors):
        canvas.rect(x0, WALL, x1, 6.0 - WALL)
        canvas.rect(door, 6.0 - WALL, door + 1.0, 6.0)

    # 가구
    canvas.rect(1.5, 11.5, 3.5, 12.5, OCCUPIED)
    canvas.rect(9.0, 10.0, 10.0, 13.0, OCCUPIED)
    canvas.disc(18.0, 11.5, 0.4)
    canvas.rect(23.0, 12.0, 27.5, 12.8, OCCUPIED)
    canvas.rect(2.0, 1.5, 5.0, 2.3, OCCUPIED)
    canvas.disc(13.0, 3.0, 0.5)
    canvas.rect(18.0, 2.0, 18.8, 4.5, OCCUPIED)
    canvas.disc(20.5, 1.8, 0.3)
    canvas.rect(26.5, 3.5, 28.5, 4.2, OCCUPIED)
    canvas.disc(5.0, 7.8, 0.2)
    canvas.rect(19.0, 6.0, 19.6, 6.4, OCCUPIED)
    return canvas.grid()


def cluttered_office(resolution: float = 0.05) -> OccupancyGrid:
    """16 m × 12 m 사무실. 책상 6개, 기둥 3개, 캐비닛 줄."""
    canvas = _Canvas(16.0, 12.0, resolution)
    canvas.rect(WALL, WALL, 16.0 - WALL, 12.0 - WALL)
    for x0, y0 in [(2.0, 2.0), (5.5, 2.0), (2.0, 8.0), (9.0, 8.5), (12.0, 3.0), (9.0, 4.5)]:
        canvas.rect(x0, y0, x0 + 1.6, y0 + 0.8, OCCUPIED)
    for cx, cy in [(7.5, 6.5), (4.0, 5.5), (13.5, 9.5)]:
        canvas.disc(cx, cy, 0.3)
    canvas.rect(WALL, 10.5, 6.0, 11.8, OCCUPIED)
    return canvas.grid()


def circular_room(resolution: float = 0.05, radius: float = 4.0) -> OccupancyGrid:
    """반지름 radius 의 원형 방 (중심 = 지도 중심)"""
    size = 2.0 * (radius + 1.0)
    canvas = _Canvas(size, size, resolution)
    canvas.disc(0.5 * size, 0.5 * size, radius, FREE)
    return canvas.grid()


def pillar_hall(resolution: float = 0.05, period: float = 3.0, nx: int = 8, ny: int = 5,
                pillar_radius: float = 0.25) -> OccupancyGrid:
    """period 간격 격자 위에 원기둥이 늘어선 홀. 기둥 중심은 (period·(i+0.5), period·(j+0.5))."""
    width = period * nx
    height = period * ny
    canvas = _Canvas(width, height, resolution)
    canvas.rect(WALL, WALL, width - WALL, height - WALL)
    for i in range(nx):
        for j in range(ny):
            canvas.disc(period * (i + 0.5), period * (j + 0.5), pillar_radius)
    return canvas.grid()


def two_rooms(resolution: float = 0.05, door_width: float = 1.0) -> OccupancyGrid:
    """10 m × 6 m 영역을 x = 5 m 벽으로 나누고 중앙(y = 3 m)에 문을 둔 두 방"""
    canvas = _Canvas(10.0, 6.0, resolution)
    canvas.rect(WALL, WALL, 10.0 - WALL, 6.0 - WALL)
    canvas.rect(4.9, WALL, 5.1, 6.0 - WALL, OCCUPIED)
    canvas.rect(4.9, 3.0 - 0.5 * door_width, 5.1, 3.0 + 0.5 * door_width, FREE)
    return canvas.grid()


MAP_BUILDERS = {
    "corridor_cross": corridor_cross,
    "rooms_off_corridor": rooms_off_corridor,
    "cluttered_office": cluttered_office,
    "circular_room": circular_room,
    "pillar_hall": pillar_hall,
    "two_rooms": two_rooms,
}


def build_map(name: str, resolution: float = 0.05) -> OccupancyGrid:
    """
    이름으로 절차적 지도를 생성합니다.

    Raises:
        ValueError: 알 수 없는 지도 이름
    """
    if name not in MAP_BUILDERS:
        logger.error(f"알 수 없는 지도 이름: {name}")
        raise ValueError(f"map: 알 수 없는 지도입니다 ({name}). 사용 가능: {sorted(MAP_BUILDERS)}")
    grid = MAP_BUILDERS[name](resolution=resolution)
    logger.debug(f"절차적 지도 생성: {name} ({grid.width}x{grid.height})")
    return grid

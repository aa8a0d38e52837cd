# -*- coding: utf-8 -*-
"""
core/geometry.py - 2D 포즈 및 각도 유틸리티
=============================================
로봇 포즈 (x, y, θ) 자료형과 각도 정규화, 강체 변환 연산을 제공합니다.
각도는 항상 (−π, π] 구간으로 정규화합니다.
"""

import math
from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * math.pi


def normalize_angle(angle: float) -> float:
    """각도를 (−π, π] 구간으로 정규화합니다."""
    wrapped = math.pi - math.fmod(math.pi - angle, TWO_PI)
    if wrapped > math.pi:
        wrapped -= TWO_PI
    elif wrapped <= -math.pi:
        wrapped += TWO_PI
    return wrapped


def normalize_angles(angles: np.ndarray) -> np.ndarray:
    """배열 버전의 각도 정규화. 결과는 (−π, π]."""
    return np.pi - np.mod(np.pi - np.asarray(angles, dtype=float), TWO_PI)


@dataclass(frozen=True)
class Pose2D:
    """
    평면 로봇 포즈
    ===============
    Attributes:
        x (float): 월드 좌표 x [m]
        y (float): 월드 좌표 y [m]
        theta (float): 헤딩 [rad], (−π, π]
    """

    x: float = 0.0
    y: float = 0.0
    theta: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "y", float(self.y))
        object.__setattr__(self, "theta", normalize_angle(float(self.theta)))

    @classmethod
    def from_array(cls, values) -> "Pose2D":
        return cls(float(values[0]), float(values[1]), float(values[2]))

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.theta], dtype=float)

    def compose(self, other: "Pose2D") -> "Pose2D":
        """self ⊕ other : other를 self 좌표계에서 표현된 포즈로 보고 월드로 변환"""
        c, s = math.cos(self.theta), math.sin(self.theta)
        return Pose2D(
            self.x + c * other.x - s * other.y,
            self.y + s * other.x + c * other.y,
            self.theta + other.theta,
        )

    def inverse(self) -> "Pose2D":
        c, s = math.cos(self.theta), math.sin(self.theta)
        return Pose2D(
            -c * self.x - s * self.y,
            s * self.x - c * self.y,
            -self.theta,
        )

    def transform_points(self, points: np.ndarray) -> np.ndarray:
        """로컬 좌표 점들 (N, 2)을 이 포즈 기준 월드 좌표로 변환합니다."""
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        c, s = math.cos(self.theta), math.sin(self.theta)
        out = np.empty_like(pts)
        out[:, 0] = self.x + c * pts[:, 0] - s * pts[:, 1]
        out[:, 1] = self.y + s * pts[:, 0] + c * pts[:, 1]
        return out

    def distance_to(self, other: "Pose2D") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)

    def angle_error_to(self, other: "Pose2D") -> float:
        """헤딩 차이의 절댓값 [rad]"""
        return abs(normalize_angle(self.theta - other.theta))

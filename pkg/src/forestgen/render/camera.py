"""View and projection matrices (OpenGL conventions, column vectors)."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

NEAR = 0.1


def perspective(fov_y: float, aspect: float, near: float, far: float) -> np.ndarray:
    f = 1.0 / math.tan(0.5 * fov_y)
    m = np.zeros((4, 4))
    m[0, 0] = f / aspect
    m[1, 1] = f
    m[2, 2] = (far + near) / (near - far)
    m[2, 3] = 2.0 * far * near / (near - far)
    m[3, 2] = -1.0
    return m


def orthographic(left, right, bottom, top, near, far) -> np.ndarray:
    m = np.eye(4)
    m[0, 0] = 2.0 / (right - left)
    m[1, 1] = 2.0 / (top - bottom)
    m[2, 2] = -2.0 / (far - near)
    m[0, 3] = -(right + left) / (right - left)
    m[1, 3] = -(top + bottom) / (top - bottom)
    m[2, 3] = -(far + near) / (far - near)
    return m


def look_at(eye, target, up=(0.0, 1.0, 0.0)) -> np.ndarray:
    eye = np.asarray(eye, dtype=float)
    f = np.asarray(target, dtype=float) - eye
    f = f / np.linalg.norm(f)
    up = np.asarray(up, dtype=float)
    if abs(f @ up) > 0.999 * np.linalg.norm(up):
        up = np.array([0.0, 0.0, 1.0]) if abs(f[2]) < 0.9 else np.array([1.0, 0.0, 0.0])
    s = np.cross(f, up)
    s = s / np.linalg.norm(s)
    u = np.cross(s, f)
    m = np.eye(4)
    m[0, :3], m[1, :3], m[2, :3] = s, u, -f
    m[0, 3], m[1, 3], m[2, 3] = -(s @ eye), -(u @ eye), f @ eye
    return m


@dataclass
class Camera:
    position: tuple = (0.0, 1.7, 0.0)
    yaw: float = 0.0        # about +y, 0 looks down +z
    pitch: float = 0.0      # positive looks up
    fov_y: float = 1.0
    aspect: float = 16 / 9
    far: float = 500.0
    near: float = NEAR

    def __post_init__(self):
        if not -math.pi / 2 < self.pitch < math.pi / 2:
            raise ValueError("pitch must lie in (-pi/2, pi/2)")

    @property
    def forward(self) -> np.ndarray:
        cp = math.cos(self.pitch)
        return np.array([math.sin(self.yaw) * cp, math.sin(self.pitch), math.cos(self.yaw) * cp])

    def view(self) -> np.ndarray:
        p = np.asarray(self.position, dtype=float)
        return look_at(p, p + self.forward)

    def projection(self) -> np.ndarray:
        return perspective(self.fov_y, self.aspect, self.near, self.far)

    def view_projection(self) -> np.ndarray:
        return self.projection() @ self.view()


def frustum_planes(pv: np.ndarray) -> np.ndarray:
    """Six normalised planes (a, b, c, d), inside where a*x + b*y + c*z + d >= 0."""
    r = np.asarray(pv, dtype=float)
    planes = np.array([r[3] + r[0], r[3] - r[0], r[3] + r[1], r[3] - r[1], r[3] + r[2], r[3] - r[2]])
    return planes / np.linalg.norm(planes[:, :3], axis=1, keepdims=True)


def sphere_in_frustum(planes: np.ndarray, center, radius: float) -> bool:
    c = np.asarray(center, dtype=float)
    return bool(np.all(planes[:, :3] @ c + planes[:, 3] >= -radius))

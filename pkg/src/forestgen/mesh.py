"""Indexed triangle meshes and small linear-algebra helpers."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class Mesh:
    positions: np.ndarray   # (V, 3)
    normals: np.ndarray     # (V, 3)
    tangents: np.ndarray    # (V, 3)
    uvs: np.ndarray         # (V, 2)
    triangles: np.ndarray   # (T, 3) int32

    @property
    def vertex_count(self) -> int:
        return len(self.positions)

    @property
    def triangle_count(self) -> int:
        return len(self.triangles)

    @property
    def is_empty(self) -> bool:
        return self.vertex_count == 0 or self.triangle_count == 0

    @classmethod
    def empty(cls) -> "Mesh":
        z3 = np.zeros((0, 3))
        return cls(z3, z3.copy(), z3.copy(), np.zeros((0, 2)), np.zeros((0, 3), np.int32))

    def transformed(self, matrix: np.ndarray) -> "Mesh":
        """Apply a 4x4 affine transform; normals and tangents use the rotation part only."""
        m = np.asarray(matrix, dtype=float)
        lin = m[:3, :3]
        pos = apply_affine(m, self.positions)
        nrm = normalize_rows(apply_linear(np.linalg.inv(lin).T, self.normals))
        tan = normalize_rows(apply_linear(lin, self.tangents))
        return Mesh(pos, nrm, tan, self.uvs.copy(), self.triangles.copy())

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        return self.positions.min(axis=0), self.positions.max(axis=0)

    @staticmethod
    def concat(meshes) -> "Mesh":
        meshes = [m for m in meshes if m.vertex_count]
        if not meshes:
            return Mesh.empty()
        offsets = np.cumsum([0] + [m.vertex_count for m in meshes[:-1]])
        return Mesh(
            np.concatenate([m.positions for m in meshes]),
            np.concatenate([m.normals for m in meshes]),
            np.concatenate([m.tangents for m in meshes]),
            np.concatenate([m.uvs for m in meshes]),
            np.concatenate([m.triangles + off for m, off in zip(meshes, offsets)]).astype(np.int32),
        )


def apply_affine(m: np.ndarray, pts: np.ndarray) -> np.ndarray:
    # elementwise on purpose: results must not depend on batch size (no BLAS)
    x, y, z = pts[..., 0], pts[..., 1], pts[..., 2]
    return np.stack([m[r, 0] * x + m[r, 1] * y + m[r, 2] * z + m[r, 3] for r in range(3)], axis=-1)


def apply_linear(m: np.ndarray, vecs: np.ndarray) -> np.ndarray:
    x, y, z = vecs[..., 0], vecs[..., 1], vecs[..., 2]
    return np.stack([m[r, 0] * x + m[r, 1] * y + m[r, 2] * z for r in range(3)], axis=-1)


def normalize_rows(v: np.ndarray, eps: float = 1e-12) -> np.ndarray:
    n = np.sqrt(np.sum(v * v, axis=-1, keepdims=True))
    return np.where(n > eps, v / np.maximum(n, eps), v)


def normalize(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    n = np.sqrt(v @ v)
    return v / n if n > 0 else v


def rotation(axis, angle: float) -> np.ndarray:
    """3x3 right-handed rotation about ``axis`` (Rodrigues)."""
    k = normalize(axis)
    c, s = np.cos(angle), np.sin(angle)
    x, y, z = k
    C = 1.0 - c
    return np.array([
        [c + x * x * C, x * y * C - z * s, x * z * C + y * s],
        [y * x * C + z * s, c + y * y * C, y * z * C - x * s],
        [z * x * C - y * s, z * y * C + x * s, c + z * z * C],
    ])


def rotation_between(a, b) -> np.ndarray:
    """Minimal rotation taking unit vector ``a`` onto unit vector ``b``."""
    a = normalize(a)
    b = normalize(b)
    axis = np.cross(a, b)
    s = np.sqrt(axis @ axis)
    c = float(np.clip(a @ b, -1.0, 1.0))
    if s < 1e-12:
        if c > 0:
            return np.eye(3)
        # antiparallel: any perpendicular axis
        perp = np.cross(a, [1.0, 0.0, 0.0])
        if perp @ perp < 1e-12:
            perp = np.cross(a, [0.0, 0.0, 1.0])
        return rotation(perp, np.pi)
    return rotation(axis, np.arctan2(s, c))


def translation(t) -> np.ndarray:
    m = np.eye(4)
    m[:3, 3] = t
    return m


def rotation_y(angle: float) -> np.ndarray:
    m = np.eye(4)
    c, s = np.cos(angle), np.sin(angle)
    m[0, 0], m[0, 2], m[2, 0], m[2, 2] = c, s, -s, c
    return m


def rotation_x(angle: float) -> np.ndarray:
    m = np.eye(4)
    c, s = np.cos(angle), np.sin(angle)
    m[1, 1], m[1, 2], m[2, 1], m[2, 2] = c, -s, s, c
    return m


def scaling(s) -> np.ndarray:
    m = np.eye(4)
    m[0, 0], m[1, 1], m[2, 2] = np.broadcast_to(np.asarray(s, dtype=float), (3,))
    return m


def quad_mesh(corners, normal, tangent, uvs=((0, 0), (1, 0), (1, 1), (0, 1))) -> Mesh:
    """Single quad from 4 corners in counter-clockwise order."""
    p = np.asarray(corners, dtype=float)
    return Mesh(p, np.tile(normalize(normal), (4, 1)), np.tile(normalize(tangent), (4, 1)),
                np.asarray(uvs, dtype=float), np.array([[0, 1, 2], [0, 2, 3]], np.int32))

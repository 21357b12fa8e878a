"""Orthographic sun shadow map with 3x3 percentage-closer filtering."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .camera import look_at, orthographic
from .raster import rasterize

SHADOW_NEAR = 0.1


def shadow_width(terrain_width: float) -> float:
    return max(terrain_width * math.sqrt(2.0), 50.0)


def terrain_corners(terrain_width: float) -> np.ndarray:
    h = 0.5 * terrain_width
    return np.array([[-h, 0.0, -h], [-h, 0.0, h], [h, 0.0, -h], [h, 0.0, h]])


def shadow_far(sun_position, terrain_width: float) -> float:
    d = np.linalg.norm(terrain_corners(terrain_width) - np.asarray(sun_position, float), axis=1)
    return float(d.max()) + 10.0


def light_matrices(sun_position, terrain_width: float):
    """Orthographic projection and view matrix looking from the sun to the scene centre."""
    w = shadow_width(terrain_width)
    far = shadow_far(sun_position, terrain_width)
    proj = orthographic(-w / 2, w / 2, -w / 2, w / 2, SHADOW_NEAR, far)
    view = look_at(sun_position, (0.0, 0.0, 0.0))
    return proj, view


@dataclass
class ShadowMap:
    depth: np.ndarray        # (S, S) window depth in [0, 1], 1 where empty
    projection: np.ndarray
    view: np.ndarray

    @property
    def size(self) -> int:
        return self.depth.shape[0]

    @property
    def matrix(self) -> np.ndarray:
        return self.projection @ self.view

    def project(self, points):
        """Texel coordinates (column, row) as floats and window depth for world points."""
        p = np.asarray(points, dtype=float).reshape(-1, 3)
        m = self.matrix
        ndc = [m[r, 0] * p[:, 0] + m[r, 1] * p[:, 1] + m[r, 2] * p[:, 2] + m[r, 3] for r in range(3)]
        s = self.size
        return (ndc[0] * 0.5 + 0.5) * s, (0.5 - ndc[1] * 0.5) * s, ndc[2] * 0.5 + 0.5


def shadow_pass(store, meshes, models, keys, textures, alpha, sun_position, terrain_width, size) -> ShadowMap:
    """Render item depths from the sun; ``models`` are the items' model matrices."""
    proj, view = light_matrices(sun_position, terrain_width)
    pv = proj @ view
    mvps = np.einsum("ij,njk->nik", pv, np.asarray(models, float).reshape(-1, 4, 4)) if len(meshes) else []
    buf = rasterize(store, meshes, mvps, keys, textures, alpha, size, size)
    depth = np.where(np.isfinite(buf.depth), buf.depth * 0.5 + 0.5, 1.0)
    return ShadowMap(depth, proj, view)


def shadow_bias(normal, sun_direction):
    cos = np.clip(np.asarray(normal, float) @ np.asarray(sun_direction, float), 0.0, 1.0)
    return np.maximum(0.002, 0.02 * (1.0 - cos))


def pcf_shadow(smap: ShadowMap, points, bias=0.002) -> np.ndarray:
    """Fraction of the 3x3 texels around each point that occlude it; 0 outside the map."""
    cx, cy, d = smap.project(points)
    s = smap.size
    ix = np.floor(cx).astype(np.int64)
    iy = np.floor(cy).astype(np.int64)
    inside = (cx >= 0) & (cx < s) & (cy >= 0) & (cy < s) & (d <= 1.0) & (d >= 0.0)
    ref = d - np.broadcast_to(np.asarray(bias, float), d.shape)
    total = np.zeros(len(d))
    for dy in (-1, 0, 1):
        for dx in (-1, 0, 1):
            tx = np.clip(ix + dx, 0, s - 1)
            ty = np.clip(iy + dy, 0, s - 1)
            total += smap.depth[ty, tx] < ref
    return np.where(inside, total / 9.0, 0.0)

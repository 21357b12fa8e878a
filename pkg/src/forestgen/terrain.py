"""Fractal-noise heightmaps and per-tile terrain meshes.

Samples sit on one world-anchored grid of spacing ``delta = w / (n_v - 1)``
(``w`` being the tile width), so a vertex shared by two tiles is computed
from the very same coordinate in both and comes out bit-identical.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .config import TerrainConfig
from .mesh import Mesh, normalize_rows
from .noise import FractalNoise


class TerrainBoundsError(ValueError):
    pass


@dataclass
class Heightmap:
    heights: np.ndarray   # (n_v+2, n_v+2), index [i, j] with i along x, j along z
    xs: np.ndarray        # (n_v+2,) sample x coordinates
    zs: np.ndarray        # (n_v+2,) sample z coordinates
    center: tuple[float, float]
    width: float

    @property
    def n_v(self) -> int:
        return self.heights.shape[0] - 2

    @property
    def spacing(self) -> float:
        return self.width / (self.n_v - 1)


@dataclass
class TerrainTile:
    mesh: Mesh
    heightmap: Heightmap
    depth: int
    index: tuple[int, int]

    @property
    def center(self):
        return self.heightmap.center

    @property
    def width(self):
        return self.heightmap.width


def _axis(c: float, width: float, n_v: int) -> np.ndarray:
    delta = width / (n_v - 1)
    k0 = int(round((c - 0.5 * width) / delta))
    return (k0 + np.arange(-1, n_v + 1)) * delta


def generate_heightmap(center, width: float, noise: Callable, n_v: int, vertical_scale: float = 1.0) -> Heightmap:
    """Sample ``noise(x, z) * vertical_scale`` over the tile plus a one-sample apron."""
    if n_v < 2:
        raise ValueError("n_v must be >= 2")
    cx, cz = center
    xs = _axis(cx, width, n_v)
    zs = _axis(cz, width, n_v)
    X, Z = np.meshgrid(xs, zs, indexing="ij")
    h = np.asarray(noise(X, Z), dtype=float) * vertical_scale
    return Heightmap(np.broadcast_to(h, X.shape).copy(), xs, zs, (float(cx), float(cz)), float(width))


def build_tile_mesh(hm: Heightmap, texture_scale: int = 0, depth: int = 0) -> Mesh:
    n = hm.n_v
    h = hm.heights
    d = hm.spacing
    inner = h[1:-1, 1:-1]
    X, Z = np.meshgrid(hm.xs[1:-1], hm.zs[1:-1], indexing="ij")
    pos = np.round(np.stack([X, inner, Z], axis=-1), 3)

    dhx = h[:-2, 1:-1] - h[2:, 1:-1]     # h[i-1,j] - h[i+1,j]
    dhz = h[1:-1, :-2] - h[1:-1, 2:]     # h[i,j-1] - h[i,j+1]
    nrm = normalize_rows(np.stack([dhx / (2 * d), np.ones_like(dhx), dhz / (2 * d)], axis=-1))
    # tangent formula used as given; made orthogonal to the normal at shading time
    tan = normalize_rows(np.stack([np.full_like(dhx, 2 * d), np.ones_like(dhx), -dhx], axis=-1))

    scale = 2.0 ** (depth + texture_scale)
    steps = np.arange(n) / (n - 1)
    U, V = np.meshgrid(scale * steps, scale * steps, indexing="ij")
    uv = np.stack([U, V], axis=-1)

    # vertex id = i * n + j
    i, j = np.meshgrid(np.arange(n - 1), np.arange(n - 1), indexing="ij")
    a = (i * n + j).ravel()
    b = a + n        # (i+1, j)
    c = a + 1        # (i, j+1)
    dd = a + n + 1   # (i+1, j+1)
    tris = np.concatenate([np.stack([a, c, dd], 1), np.stack([a, dd, b], 1)]).astype(np.int32)
    return Mesh(pos.reshape(-1, 3), nrm.reshape(-1, 3), tan.reshape(-1, 3), uv.reshape(-1, 2), tris)


class Terrain:
    """Square terrain of ``4**depth`` leaf tiles centred on the origin."""

    def __init__(self, width: float, depth: int, n_v: int, noise: Callable, vertical_scale: float = 1.0,
                 texture_scale: int = 0):
        self.width = float(width)
        self.depth = int(depth)
        self.n_v = int(n_v)
        self.tiles_per_side = 2 ** self.depth
        self.tile_width = self.width / self.tiles_per_side
        self.tiles: dict[tuple[int, int], TerrainTile] = {}
        for ix in range(self.tiles_per_side):
            for iz in range(self.tiles_per_side):
                c = self.tile_center(ix, iz)
                hm = generate_heightmap(c, self.tile_width, noise, n_v, vertical_scale)
                mesh = build_tile_mesh(hm, texture_scale, self.depth)
                self.tiles[(ix, iz)] = TerrainTile(mesh, hm, self.depth, (ix, iz))

    def tile_center(self, ix: int, iz: int) -> tuple[float, float]:
        half = 0.5 * self.width
        return (-half + (ix + 0.5) * self.tile_width, -half + (iz + 0.5) * self.tile_width)

    def tile_index(self, x, z):
        """Leaf tile indices owning each point; points on the far edge go to the last tile."""
        x = np.asarray(x, dtype=float)
        z = np.asarray(z, dtype=float)
        half = 0.5 * self.width
        bad = (np.abs(x) > half) | (np.abs(z) > half) | ~np.isfinite(x) | ~np.isfinite(z)
        if np.any(bad):
            k = np.flatnonzero(np.ravel(bad))[0]
            raise TerrainBoundsError(
                f"point ({np.ravel(x)[k]:g}, {np.ravel(z)[k]:g}) outside terrain of width {self.width:g}")
        last = self.tiles_per_side - 1
        ix = np.clip(np.floor((x + half) / self.tile_width).astype(np.int64), 0, last)
        iz = np.clip(np.floor((z + half) / self.tile_width).astype(np.int64), 0, last)
        return ix, iz

    def height_at(self, x, z):
        """Bilinear interpolation of the owning tile's heightmap."""
        scalar = np.ndim(x) == 0 and np.ndim(z) == 0
        x = np.atleast_1d(np.asarray(x, dtype=float))
        z = np.atleast_1d(np.asarray(z, dtype=float))
        ix, iz = self.tile_index(x, z)
        out = np.empty(np.broadcast(x, z).shape)
        x, z = np.broadcast_arrays(x, z)
        ix, iz = np.broadcast_arrays(ix, iz)
        for key in set(zip(ix.ravel().tolist(), iz.ravel().tolist())):
            sel = (ix == key[0]) & (iz == key[1])
            hm = self.tiles[key].heightmap
            d = hm.spacing
            fx = (x[sel] - hm.xs[1]) / d
            fz = (z[sel] - hm.zs[1]) / d
            i0 = np.clip(np.floor(fx).astype(np.int64), 0, hm.n_v - 2)
            j0 = np.clip(np.floor(fz).astype(np.int64), 0, hm.n_v - 2)
            tx, tz = fx - i0, fz - j0
            hh = hm.heights[1:-1, 1:-1]
            h00, h10 = hh[i0, j0], hh[i0 + 1, j0]
            h01, h11 = hh[i0, j0 + 1], hh[i0 + 1, j0 + 1]
            out[sel] = (h00 * (1 - tx) * (1 - tz) + h10 * tx * (1 - tz)
                        + h01 * (1 - tx) * tz + h11 * tx * tz)
        return float(out[0]) if scalar else out

    def meshes(self):
        return {k: t.mesh for k, t in self.tiles.items()}


def build_terrain(cfg: TerrainConfig, depth: int, rng, noise: Callable | None = None) -> Terrain:
    if noise is None:
        noise = FractalNoise(rng.fork("terrain-noise").integers(0, 2**31 - 1), cfg.noise)
    return Terrain(cfg.width, depth, cfg.vertices_per_tile_edge, noise, cfg.vertical_scale, cfg.texture_scale)

"""2D simplex gradient noise with fractal (fBm) accumulation.

Pinned in-repo so heightmaps are identical on every platform.  All
operations are elementwise numpy, so a sample's value never depends on the
other samples evaluated alongside it.
"""

from __future__ import annotations

import math

import numpy as np

from .config import NoiseConfig

F2 = 0.5 * (math.sqrt(3.0) - 1.0)
G2 = (3.0 - math.sqrt(3.0)) / 6.0

# 12 gradient directions (cube edges projected to the plane)
_GRAD = np.array([
    [1, 1], [-1, 1], [1, -1], [-1, -1],
    [1, 0], [-1, 0], [1, 0], [-1, 0],
    [0, 1], [0, -1], [0, 1], [0, -1],
], dtype=float)


class SimplexNoise:
    def __init__(self, seed: int):
        rng = np.random.Generator(np.random.PCG64(seed))
        perm = rng.permutation(256).astype(np.int64)
        self.perm = np.concatenate([perm, perm])

    def _corner(self, x, y, gi):
        t = 0.5 - x * x - y * y
        g = _GRAD[gi]
        contrib = (t * t) * (t * t) * (g[..., 0] * x + g[..., 1] * y)
        return np.where(t < 0, 0.0, contrib)

    def __call__(self, x, y) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        s = (x + y) * F2
        i = np.floor(x + s)
        j = np.floor(y + s)
        t = (i + j) * G2
        x0 = x - (i - t)
        y0 = y - (j - t)
        upper = x0 > y0
        i1 = upper.astype(float)
        j1 = 1.0 - i1
        x1 = x0 - i1 + G2
        y1 = y0 - j1 + G2
        x2 = x0 - 1.0 + 2.0 * G2
        y2 = y0 - 1.0 + 2.0 * G2
        ii = i.astype(np.int64) & 255
        jj = j.astype(np.int64) & 255
        p = self.perm
        gi0 = p[ii + p[jj]] % 12
        gi1 = p[ii + i1.astype(np.int64) + p[jj + j1.astype(np.int64)]] % 12
        gi2 = p[ii + 1 + p[jj + 1]] % 12
        n = self._corner(x0, y0, gi0) + self._corner(x1, y1, gi1) + self._corner(x2, y2, gi2)
        return 70.0 * n


class FractalNoise:
    """Sum of simplex octaves, normalised to roughly [-1, 1]."""

    def __init__(self, seed: int, cfg: NoiseConfig = NoiseConfig()):
        self.cfg = cfg
        self.octaves = [SimplexNoise(seed + k) for k in range(cfg.octaves)]
        amp, total = 1.0, 0.0
        for _ in range(cfg.octaves):
            total += amp
            amp *= cfg.gain
        self.bound = 1.0 / total if total else 1.0

    def __call__(self, x, z) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        z = np.asarray(z, dtype=float)
        out = np.zeros(np.broadcast(x, z).shape)
        freq, amp = self.cfg.frequency, 1.0
        for octave in self.octaves:
            out = out + amp * octave(x * freq, z * freq)
            freq *= self.cfg.lacunarity
            amp *= self.cfg.gain
        return out * self.bound

"""Screen-space light scattering and exposure tone mapping."""

from __future__ import annotations

import numpy as np
from numba import njit

GAMMA = 2.2


def clamp_length(color, limit: float) -> np.ndarray:
    """Scale RGB vectors down so their Euclidean length is at most ``limit``."""
    c = np.asarray(color, dtype=float)
    n = np.sqrt(np.sum(c * c, axis=-1, keepdims=True))
    return c * np.minimum(1.0, limit / np.where(n > 0, n, 1.0))


def scattering_pass(occlusion, sun_screen, samples=48, decay=0.95, density=1.0, max_sample=2.0,
                    exposure=1.0) -> np.ndarray:
    """Additive light-shaft layer from marching each pixel towards the sun's screen position.

    ``occlusion`` is (H, W, 3) with sky radiance where the sky is visible and
    black elsewhere.  ``sun_screen`` is (x, y) in pixel units, rows growing
    downwards; pixel centres sit at half-integers.  Samples outside the image
    read as black.
    """
    occ = np.asarray(occlusion, dtype=float)
    h, w = occ.shape[:2]
    if samples < 1 or density <= 0:
        raise ValueError("samples must be >= 1 and density > 0")
    clamped = np.ascontiguousarray(clamp_length(occ, max_sample))
    out = np.zeros_like(clamped)
    _march(clamped, float(sun_screen[0]), float(sun_screen[1]), int(samples), float(decay), float(density), out)
    return exposure * out


@njit(cache=True)
def _march(clamped, sun_x, sun_y, samples, decay, density, out):
    h, w = clamped.shape[0], clamped.shape[1]
    for y in range(h):
        py = y + 0.5
        dy = (py - sun_y) / (density * samples)
        for x in range(w):
            px = x + 0.5
            dx = (px - sun_x) / (density * samples)
            weight = 1.0
            for i in range(samples):
                sx = int(np.floor(px - (i + 1) * dx))
                sy = int(np.floor(py - (i + 1) * dy))
                if 0 <= sx < w and 0 <= sy < h:
                    for k in range(3):
                        out[y, x, k] += weight * clamped[sy, sx, k]
                weight *= decay


def scattering_bound(exposure, max_sample, decay, samples) -> float:
    return exposure * max_sample * (1.0 - decay ** samples) / (1.0 - decay)


def tonemap(hdr, exposure=1.0) -> np.ndarray:
    return 1.0 - np.exp(-exposure * np.maximum(np.asarray(hdr, dtype=float), 0.0))


def tonemap_gamma(hdr, exposure=1.0) -> np.ndarray:
    return np.clip(tonemap(hdr, exposure), 0.0, 1.0) ** (1.0 / GAMMA)


def to_uint8(ldr) -> np.ndarray:
    return np.clip(np.rint(np.asarray(ldr) * 255.0), 0, 255).astype(np.uint8)

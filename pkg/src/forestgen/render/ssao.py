"""Screen-space ambient occlusion with a normal-aligned hemisphere kernel and a 4x4 blur."""

from __future__ import annotations

import numpy as np
from numba import njit

KERNEL_SEED = 20201
NOISE_SIZE = 4


def hemisphere_kernel(count: int, seed: int = KERNEL_SEED) -> np.ndarray:
    """Sample offsets in the unit +z hemisphere, denser towards the origin."""
    rng = np.random.Generator(np.random.PCG64(seed))
    out = np.empty((count, 3))
    for i in range(count):
        v = np.array([rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(0, 1)])
        v /= max(np.linalg.norm(v), 1e-12)
        v *= rng.uniform(0, 1)
        t = i / count
        v *= 0.1 + 0.9 * t * t
        out[i] = v
    return out


def rotation_noise(seed: int = KERNEL_SEED + 1) -> np.ndarray:
    rng = np.random.Generator(np.random.PCG64(seed))
    n = np.zeros((NOISE_SIZE * NOISE_SIZE, 3))
    n[:, 0] = rng.uniform(-1, 1, len(n))
    n[:, 1] = rng.uniform(-1, 1, len(n))
    return n


@njit(cache=True)
def _ssao(pos, nrm, covered, proj, kernel, noise, radius, bias, out):
    h, w = covered.shape
    k = kernel.shape[0]
    for y in range(h):
        for x in range(w):
            if not covered[y, x]:
                out[y, x] = 1.0
                continue
            px, py, pz = pos[y, x, 0], pos[y, x, 1], pos[y, x, 2]
            nx, ny, nz = nrm[y, x, 0], nrm[y, x, 1], nrm[y, x, 2]
            r = noise[(y % 4) * 4 + (x % 4)]
            # Gram-Schmidt tangent from the random vector
            d = r[0] * nx + r[1] * ny + r[2] * nz
            tx, ty, tz = r[0] - nx * d, r[1] - ny * d, r[2] - nz * d
            tl = np.sqrt(tx * tx + ty * ty + tz * tz)
            if tl < 1e-6:
                # random vector parallel to the normal: pick any perpendicular
                if abs(nx) < 0.9:
                    tx, ty, tz = 0.0, -nz, ny
                else:
                    tx, ty, tz = -nz, 0.0, nx
                tl = np.sqrt(tx * tx + ty * ty + tz * tz)
            tx, ty, tz = tx / tl, ty / tl, tz / tl
            bx, by, bz = ny * tz - nz * ty, nz * tx - nx * tz, nx * ty - ny * tx
            occ = 0.0
            for i in range(k):
                sx = px + radius * (tx * kernel[i, 0] + bx * kernel[i, 1] + nx * kernel[i, 2])
                sy = py + radius * (ty * kernel[i, 0] + by * kernel[i, 1] + ny * kernel[i, 2])
                sz = pz + radius * (tz * kernel[i, 0] + bz * kernel[i, 1] + nz * kernel[i, 2])
                cw = proj[3, 0] * sx + proj[3, 1] * sy + proj[3, 2] * sz + proj[3, 3]
                if cw <= 1e-9:
                    continue
                cx = (proj[0, 0] * sx + proj[0, 1] * sy + proj[0, 2] * sz + proj[0, 3]) / cw
                cy = (proj[1, 0] * sx + proj[1, 1] * sy + proj[1, 2] * sz + proj[1, 3]) / cw
                ix = int(np.floor((cx * 0.5 + 0.5) * w))
                iy = int(np.floor((0.5 - cy * 0.5) * h))
                if ix < 0 or ix >= w or iy < 0 or iy >= h or not covered[iy, ix]:
                    continue
                depth = pos[iy, ix, 2]
                if depth >= sz + bias:
                    diff = abs(pz - depth)
                    t = 1.0 if diff <= radius else radius / diff
                    occ += t * t * (3.0 - 2.0 * t)
            out[y, x] = 1.0 - occ / k


@njit(cache=True)
def _blur(src, out):
    h, w = src.shape
    for y in range(h):
        for x in range(w):
            acc = 0.0
            n = 0
            for dy in range(-2, 2):
                for dx in range(-2, 2):
                    yy, xx = y + dy, x + dx
                    if 0 <= yy < h and 0 <= xx < w:
                        acc += src[yy, xx]
                        n += 1
            out[y, x] = acc / n


def ssao_pass(view_pos, view_normal, covered, projection, samples=32, radius=0.5, bias=0.025,
              blur=True) -> np.ndarray:
    """Ambient visibility in [0, 1] per pixel from view-space positions and normals."""
    h, w = covered.shape
    raw = np.ones((h, w))
    if radius > 0 and samples > 0:
        _ssao(np.ascontiguousarray(view_pos, dtype=np.float64), np.ascontiguousarray(view_normal, dtype=np.float64),
              np.ascontiguousarray(covered), np.ascontiguousarray(projection, dtype=np.float64),
              hemisphere_kernel(samples), rotation_noise(), float(radius), float(bias), raw)
    if not blur:
        return raw
    out = np.empty_like(raw)
    _blur(raw, out)
    return out

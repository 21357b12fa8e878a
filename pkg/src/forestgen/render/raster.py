"""Z-buffered triangle rasterizer producing visibility buffers.

Each draw item references one mesh of a :class:`GeometryStore` and carries
its own model-view-projection matrix.  The rasterizer writes, per pixel, the
nearest fragment's item, triangle and perspective-correct barycentric
coordinates; attribute interpolation and shading happen afterwards.

Depth ties are broken by the item's stable key and then the triangle id, so
the result does not depend on the order or subset of items submitted.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from ..mesh import Mesh

ALPHA_CUTOFF = 0.5


class GeometryStore:
    """Append-only collection of meshes packed into flat arrays."""

    def __init__(self):
        self.meshes: list[Mesh] = []
        self._packed = None

    def add(self, mesh: Mesh) -> int:
        self.meshes.append(mesh)
        self._packed = None
        return len(self.meshes) - 1

    def __len__(self):
        return len(self.meshes)

    @property
    def packed(self):
        if self._packed is None:
            ms = self.meshes or [Mesh.empty()]
            vc = np.array([m.vertex_count for m in ms], dtype=np.int64)
            tc = np.array([m.triangle_count for m in ms], dtype=np.int64)
            vs = np.concatenate([[0], np.cumsum(vc)[:-1]]).astype(np.int64)
            ts = np.concatenate([[0], np.cumsum(tc)[:-1]]).astype(np.int64)
            cat = lambda attr, w: (np.concatenate([getattr(m, attr) for m in ms]).reshape(-1, w)
                                   .astype(np.float64))
            tris = np.concatenate([m.triangles for m in ms]).reshape(-1, 3).astype(np.int64)
            self._packed = dict(positions=cat("positions", 3), normals=cat("normals", 3),
                                tangents=cat("tangents", 3), uvs=cat("uvs", 2), tris=tris,
                                vert_start=vs, vert_count=vc, tri_start=ts, tri_count=tc)
        return self._packed


@dataclass
class RasterBuffers:
    depth: np.ndarray   # (H, W) NDC depth, +inf where empty
    key: np.ndarray     # (H, W) item key, -1 where empty
    item: np.ndarray    # (H, W) index into the submitted item list, -1 where empty
    tri: np.ndarray     # (H, W) global triangle index
    bary: np.ndarray    # (H, W, 3) barycentric weights of the triangle's vertices

    @property
    def covered(self) -> np.ndarray:
        return self.item >= 0


@njit(cache=True)
def _sample_alpha(alpha, tex, u, v):
    s = alpha.shape[1]
    fu = u - np.floor(u)
    fv = v - np.floor(v)
    ix = min(int(fu * s), s - 1)
    iy = min(int(fv * s), s - 1)
    return alpha[tex, iy, ix]


@njit(cache=True)
def _raster(positions, uvs, tris, vert_start, vert_count, tri_start, tri_count,
            item_mesh, item_mvp, item_tex, item_key, alpha, width, height,
            depth, key_buf, item_buf, tri_buf, bary):
    poly = np.empty((8, 4))
    pbar = np.empty((8, 3))
    out = np.empty((8, 4))
    obar = np.empty((8, 3))
    for it in range(item_mesh.shape[0]):
        m = item_mesh[it]
        vs = vert_start[m]
        vc = vert_count[m]
        M = item_mvp[it]
        clip = np.empty((vc, 4))
        for v in range(vc):
            x = positions[vs + v, 0]
            y = positions[vs + v, 1]
            z = positions[vs + v, 2]
            for r in range(4):
                clip[v, r] = M[r, 0] * x + M[r, 1] * y + M[r, 2] * z + M[r, 3]
        tex = item_tex[it]
        key = item_key[it]
        t0 = tri_start[m]
        for t in range(t0, t0 + tri_count[m]):
            ia = tris[t, 0]
            ib = tris[t, 1]
            ic = tris[t, 2]
            ok = True
            for k in range(3):
                src = ia if k == 0 else (ib if k == 1 else ic)
                for r in range(4):
                    poly[k, r] = clip[src, r]
                    if not np.isfinite(poly[k, r]):
                        ok = False
                pbar[k, 0] = 0.0
                pbar[k, 1] = 0.0
                pbar[k, 2] = 0.0
                pbar[k, k] = 1.0
            if not ok:
                continue
            # clip against the near plane z + w >= 0
            n_out = 0
            for k in range(3):
                k2 = (k + 1) % 3
                da = poly[k, 2] + poly[k, 3]
                db = poly[k2, 2] + poly[k2, 3]
                if da >= 0:
                    for r in range(4):
                        out[n_out, r] = poly[k, r]
                    for r in range(3):
                        obar[n_out, r] = pbar[k, r]
                    n_out += 1
                if (da >= 0) != (db >= 0):
                    s = da / (da - db)
                    for r in range(4):
                        out[n_out, r] = poly[k, r] + s * (poly[k2, r] - poly[k, r])
                    for r in range(3):
                        obar[n_out, r] = pbar[k, r] + s * (pbar[k2, r] - pbar[k, r])
                    n_out += 1
            if n_out < 3:
                continue
            for f in range(1, n_out - 1):
                i0 = 0
                i1 = f
                i2 = f + 1
                w0 = out[i0, 3]
                w1 = out[i1, 3]
                w2 = out[i2, 3]
                if w0 <= 0 or w1 <= 0 or w2 <= 0:
                    continue
                x0 = (out[i0, 0] / w0 * 0.5 + 0.5) * width
                y0 = (0.5 - out[i0, 1] / w0 * 0.5) * height
                x1 = (out[i1, 0] / w1 * 0.5 + 0.5) * width
                y1 = (0.5 - out[i1, 1] / w1 * 0.5) * height
                x2 = (out[i2, 0] / w2 * 0.5 + 0.5) * width
                y2 = (0.5 - out[i2, 1] / w2 * 0.5) * height
                z0 = out[i0, 2] / w0
                z1 = out[i1, 2] / w1
                z2 = out[i2, 2] / w2
                area = (x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0)
                if abs(area) < 1e-12:
                    continue
                xmin = max(int(np.floor(min(x0, min(x1, x2)))), 0)
                xmax = min(int(np.ceil(max(x0, max(x1, x2)))), width - 1)
                ymin = max(int(np.floor(min(y0, min(y1, y2)))), 0)
                ymax = min(int(np.ceil(max(y0, max(y1, y2)))), height - 1)
                if xmin > xmax or ymin > ymax:
                    continue
                inv_area = 1.0 / area
                for py in range(ymin, ymax + 1):
                    cy = py + 0.5
                    for px in range(xmin, xmax + 1):
                        cx = px + 0.5
                        l0 = ((x1 - cx) * (y2 - cy) - (x2 - cx) * (y1 - cy)) * inv_area
                        l1 = ((x2 - cx) * (y0 - cy) - (x0 - cx) * (y2 - cy)) * inv_area
                        l2 = 1.0 - l0 - l1
                        if l0 < 0 or l1 < 0 or l2 < 0:
                            continue
                        z = l0 * z0 + l1 * z1 + l2 * z2
                        if z < -1.0 or z > 1.0:
                            continue
                        d = depth[py, px]
                        if z > d:
                            continue
                        if z == d:
                            kb = key_buf[py, px]
                            if key > kb or (key == kb and t >= tri_buf[py, px]):
                                continue
                        q0 = l0 / w0
                        q1 = l1 / w1
                        q2 = l2 / w2
                        qs = q0 + q1 + q2
                        b0 = (q0 * obar[i0, 0] + q1 * obar[i1, 0] + q2 * obar[i2, 0]) / qs
                        b1 = (q0 * obar[i0, 1] + q1 * obar[i1, 1] + q2 * obar[i2, 1]) / qs
                        b2 = (q0 * obar[i0, 2] + q1 * obar[i1, 2] + q2 * obar[i2, 2]) / qs
                        if tex >= 0:
                            u = b0 * uvs[vs + ia, 0] + b1 * uvs[vs + ib, 0] + b2 * uvs[vs + ic, 0]
                            v = b0 * uvs[vs + ia, 1] + b1 * uvs[vs + ib, 1] + b2 * uvs[vs + ic, 1]
                            if _sample_alpha(alpha, tex, u, v) < ALPHA_CUTOFF:
                                continue
                        depth[py, px] = z
                        key_buf[py, px] = key
                        item_buf[py, px] = it
                        tri_buf[py, px] = t
                        bary[py, px, 0] = b0
                        bary[py, px, 1] = b1
                        bary[py, px, 2] = b2


def rasterize(store: GeometryStore, meshes, mvps, keys, textures, alpha, width: int, height: int) -> RasterBuffers:
    """Rasterize items given as parallel arrays of mesh id, 4x4 MVP, key and alpha texture id (-1 none)."""
    p = store.packed
    depth = np.full((height, width), np.inf)
    key_buf = np.full((height, width), -1, dtype=np.int64)
    item_buf = np.full((height, width), -1, dtype=np.int64)
    tri_buf = np.full((height, width), -1, dtype=np.int64)
    bary = np.zeros((height, width, 3))
    n = len(meshes)
    if n:
        _raster(p["positions"], p["uvs"], p["tris"], p["vert_start"], p["vert_count"], p["tri_start"],
                p["tri_count"], np.asarray(meshes, dtype=np.int64),
                np.ascontiguousarray(np.asarray(mvps, dtype=np.float64).reshape(n, 4, 4)),
                np.asarray(textures, dtype=np.int64), np.asarray(keys, dtype=np.int64),
                np.ascontiguousarray(alpha, dtype=np.float32), int(width), int(height),
                depth, key_buf, item_buf, tri_buf, bary)
    return RasterBuffers(depth, key_buf, item_buf, tri_buf, bary)

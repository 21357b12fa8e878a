"""Deferred frame rendering: visibility raster, G-buffer, lighting and post passes."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..config import RenderConfig
from .camera import Camera
from .lighting import DEFAULT_HALF_LIFE, SPECULAR, LightingEnv, billboard_normal, shade_leaf, shade_opaque
from .post import scattering_pass, tonemap_gamma
from .raster import GeometryStore, RasterBuffers, rasterize
from .shadow import ShadowMap, pcf_shadow, shadow_bias
from .sky import sample_sky
from .ssao import ssao_pass
from .textures import TextureSet

MATERIALS = ("bark", "leaf", "terrain", "billboard")
SKY = -1


@dataclass
class DrawItem:
    mesh: int
    model: np.ndarray
    key: int
    texture: int
    material: int
    color: tuple
    alpha: bool = False


@dataclass
class DrawList:
    mesh: np.ndarray
    model: np.ndarray
    key: np.ndarray
    texture: np.ndarray
    alpha_texture: np.ndarray   # texture id for cutout, -1 when opaque
    material: np.ndarray
    color: np.ndarray

    def __len__(self):
        return len(self.mesh)

    @classmethod
    def from_items(cls, items) -> "DrawList":
        items = list(items)
        n = len(items)
        return cls(np.array([i.mesh for i in items], dtype=np.int64),
                   np.array([i.model for i in items], dtype=float).reshape(n, 4, 4),
                   np.array([i.key for i in items], dtype=np.int64),
                   np.array([i.texture for i in items], dtype=np.int64),
                   np.array([i.texture if i.alpha else -1 for i in items], dtype=np.int64),
                   np.array([i.material for i in items], dtype=np.int64),
                   np.array([i.color for i in items], dtype=float).reshape(n, 3))


def compose(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """``a @ b[k]`` for a batch of 4x4 matrices, summed in a fixed order per element."""
    out = np.empty_like(b, dtype=float)
    for i in range(4):
        for k in range(4):
            out[:, i, k] = a[i, 0] * b[:, 0, k] + a[i, 1] * b[:, 1, k] + a[i, 2] * b[:, 2, k] + a[i, 3] * b[:, 3, k]
    return out


@dataclass
class GBuffer:
    covered: np.ndarray     # (H, W) bool
    position: np.ndarray    # (H, W, 3) world space
    normal: np.ndarray      # (H, W, 3) world space, facing the viewer
    tangent: np.ndarray
    albedo: np.ndarray
    material: np.ndarray    # (H, W) index into MATERIALS, SKY where empty
    occlusion: np.ndarray   # (H, W, 3) sky radiance on background, black elsewhere
    raster: RasterBuffers = field(repr=False, default=None)


@dataclass
class Frame:
    ldr: np.ndarray
    hdr: np.ndarray
    gbuffer: GBuffer
    ao: np.ndarray
    shadow: np.ndarray
    scatter: np.ndarray


def _interp(attr, vids, bary):
    return (bary[:, 0:1] * attr[vids[:, 0]] + bary[:, 1:2] * attr[vids[:, 1]] + bary[:, 2:3] * attr[vids[:, 2]])


def _affine_rows(m, p, translate=True):
    cols = [m[:, r, 0] * p[:, 0] + m[:, r, 1] * p[:, 1] + m[:, r, 2] * p[:, 2] + (m[:, r, 3] if translate else 0.0)
            for r in range(3)]
    return np.stack(cols, axis=1)


def _unit(v):
    n = np.sqrt(np.sum(v * v, axis=-1, keepdims=True))
    return v / np.where(n > 0, n, 1.0)


def sky_directions(camera: Camera, width: int, height: int) -> np.ndarray:
    """World-space view ray per pixel centre, shape (H, W, 3)."""
    proj = camera.projection()
    view = camera.view()
    xs = ((np.arange(width) + 0.5) / width) * 2.0 - 1.0
    ys = 1.0 - ((np.arange(height) + 0.5) / height) * 2.0
    X, Y = np.meshgrid(xs, ys)
    d = np.stack([X / proj[0, 0], Y / proj[1, 1], -np.ones_like(X)], axis=-1)
    r = view[:3, :3]
    world = d[..., 0:1] * r[0] + d[..., 1:2] * r[1] + d[..., 2:3] * r[2]
    return _unit(world)


def sun_screen_position(camera: Camera, sun_direction, width: int, height: int):
    """Pixel position of the sun at infinity, or None when it lies behind the camera."""
    pv = camera.view_projection()
    c = pv @ np.append(np.asarray(sun_direction, float), 0.0)
    if c[3] <= 1e-9:
        return None
    return ((c[0] / c[3]) * 0.5 + 0.5) * width, (0.5 - (c[1] / c[3]) * 0.5) * height


def geometry_pass(store: GeometryStore, textures: TextureSet, draws: DrawList, camera: Camera,
                  width: int, height: int, sky=None) -> GBuffer:
    pv = camera.view_projection()
    mvps = compose(pv, draws.model) if len(draws) else np.zeros((0, 4, 4))
    _, alpha = textures.arrays
    buf = rasterize(store, draws.mesh, mvps, draws.key, draws.alpha_texture, alpha, width, height)
    cov = buf.covered
    shape3 = (height, width, 3)
    position = np.zeros(shape3)
    normal = np.zeros(shape3)
    tangent = np.zeros(shape3)
    albedo = np.zeros(shape3)
    material = np.full((height, width), SKY, dtype=np.int64)
    if cov.any():
        p = store.packed
        it = buf.item[cov]
        mesh = draws.mesh[it]
        vids = p["tris"][buf.tri[cov]] + p["vert_start"][mesh][:, None]
        bary = buf.bary[cov]
        models = draws.model[it]
        pos = _affine_rows(models, _interp(p["positions"], vids, bary))
        nrm = _unit(_affine_rows(models, _interp(p["normals"], vids, bary), translate=False))
        tan = _unit(_affine_rows(models, _interp(p["tangents"], vids, bary), translate=False))
        uv = _interp(p["uvs"], vids, bary)
        view = _unit(np.asarray(camera.position, float) - pos)
        # every surface is two-sided: shade the side facing the camera
        nrm = billboard_normal(nrm, nrm, view)
        position[cov] = pos
        normal[cov] = nrm
        tangent[cov] = tan
        albedo[cov] = draws.color[it] * textures.sample_albedo(draws.texture[it], uv)
        material[cov] = draws.material[it]
    occlusion = np.zeros(shape3)
    if sky is not None and not cov.all():
        dirs = sky_directions(camera, width, height)
        occlusion[~cov] = sample_sky(sky, dirs[~cov])
    return GBuffer(cov, position, normal, tangent, albedo, material, occlusion, buf)


def lighting_pass(g: GBuffer, camera: Camera, env: LightingEnv, shadow, ao) -> np.ndarray:
    """HDR radiance: shaded surfaces plus sky on the background."""
    hdr = g.occlusion.copy()
    cov = g.covered
    if not cov.any():
        return hdr
    pos = g.position[cov]
    nrm = g.normal[cov]
    view = _unit(np.asarray(camera.position, float) - pos)
    mat = g.material[cov]
    s = shadow[cov]
    a = ao[cov]
    k_s = np.array([SPECULAR[m] for m in MATERIALS])[mat]
    out = shade_opaque(nrm, g.albedo[cov], view, env, s, a, k_s)
    leafy = (mat == MATERIALS.index("leaf")) | (mat == MATERIALS.index("billboard"))
    if leafy.any():
        out[leafy] = shade_leaf(nrm[leafy], g.albedo[cov][leafy], view[leafy], env, s[leafy], a[leafy],
                                g.tangent[cov][leafy], DEFAULT_HALF_LIFE, k_s=k_s[leafy])
    hdr[cov] = out
    return hdr


def render_frame(store: GeometryStore, textures: TextureSet, draws: DrawList, camera: Camera, env: LightingEnv,
                 settings: RenderConfig, shadow_map: ShadowMap | None = None, sky=None,
                 shadow_override: float | None = None) -> Frame:
    w, h = settings.width, settings.height
    g = geometry_pass(store, textures, draws, camera, w, h, sky)
    cov = g.covered

    shadow = np.zeros((h, w))
    if shadow_override is not None:
        shadow[:] = shadow_override
    elif shadow_map is not None and cov.any():
        bias = shadow_bias(g.normal[cov], env.sun_direction)
        shadow[cov] = pcf_shadow(shadow_map, g.position[cov], bias)

    ao = np.ones((h, w))
    if settings.ssao.enabled and cov.any():
        view = camera.view()
        vpos = np.zeros((h, w, 3))
        vnrm = np.zeros((h, w, 3))
        vpos[cov] = _affine_rows(view[None], g.position[cov])
        vnrm[cov] = _affine_rows(view[None], g.normal[cov], translate=False)
        ao = ssao_pass(vpos, vnrm, cov, camera.projection(), settings.ssao.samples, settings.ssao.radius,
                       settings.ssao.bias)

    hdr = lighting_pass(g, camera, env, shadow, ao)

    sc = settings.scattering
    scatter = np.zeros_like(hdr)
    sun = sun_screen_position(camera, env.sun_direction, w, h)
    if sun is not None and sc.samples > 0 and sc.exposure > 0:
        scatter = scattering_pass(g.occlusion, sun, sc.samples, sc.decay, sc.density, sc.max_sample, sc.exposure)
    hdr = hdr + scatter
    ldr = tonemap_gamma(hdr, settings.exposure)
    return Frame(ldr, hdr, g, ao, shadow, scatter)

"""Procedural texture set (albedo modulation and alpha) plus PNG overrides.

Albedo maps are multipliers around 1 applied to each object's base colour,
so one grass or leaf texture serves every species tint.  Texture rows run
along ``v`` and columns along ``u``.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

SIZE = 64


def _grid(size=SIZE):
    c = (np.arange(size) + 0.5) / size
    u, v = np.meshgrid(c, c)   # u varies along columns, v along rows
    return u, v


def _noise(size, seed, scale=0.1):
    rng = np.random.Generator(np.random.PCG64(seed))
    return 1.0 + scale * (rng.random((size, size)) - 0.5)


def bark_texture(size=SIZE):
    u, v = _grid(size)
    streak = 0.85 + 0.15 * np.sin(2 * np.pi * (8 * u + 0.3 * np.sin(2 * np.pi * 3 * v)))
    rgb = np.repeat((streak * _noise(size, 1, 0.15))[..., None], 3, axis=2)
    return rgb, np.ones((size, size))


def leaf_texture(size=SIZE):
    u, v = _grid(size)
    # u runs from stem to tip, v across the blade
    half_width = 0.48 * np.sin(np.pi * np.clip(u, 0, 1)) ** 0.8
    inside = np.abs(v - 0.5) <= half_width
    rib = np.exp(-((v - 0.5) / 0.03) ** 2)
    shade = (0.9 + 0.25 * rib) * _noise(size, 2, 0.08)
    return np.repeat(shade[..., None], 3, axis=2), inside.astype(float)


def grass_texture(size=SIZE, blades=9, seed=3):
    u, v = _grid(size)
    rng = np.random.Generator(np.random.PCG64(seed))
    alpha = np.zeros((size, size))
    h = 1.0 - v  # 0 at the base (v = 1), 1 at the top
    for _ in range(blades):
        c = rng.uniform(0.1, 0.9)
        top = rng.uniform(0.5, 1.0)
        lean = rng.uniform(-0.15, 0.15)
        width = 0.035 * (1 - h / top)
        alpha = np.maximum(alpha, ((np.abs(u - c - lean * h) < width) & (h < top)).astype(float))
    shade = 0.75 + 0.35 * h
    return np.repeat(shade[..., None], 3, axis=2), alpha


def fern_texture(size=SIZE, leaflets=7, seed=4, spread=0.42):
    u, v = _grid(size)
    h = 1.0 - v
    alpha = (np.abs(u - 0.5) < 0.015).astype(float) * (h < 0.95)
    for k in range(leaflets):
        y0 = 0.15 + 0.8 * k / leaflets
        reach = spread * (1.0 - k / (leaflets + 1))
        for side in (-1.0, 1.0):
            # leaflet: thin ellipse from the stem outwards and slightly up
            du = (u - 0.5) * side
            dy = h - (y0 + 0.25 * du)
            inside = (du > 0) & (du < reach) & (np.abs(dy) < 0.04 * (1 - du / max(reach, 1e-6)) + 0.005)
            alpha = np.maximum(alpha, inside.astype(float))
    shade = (0.8 + 0.3 * h) * _noise(size, seed, 0.1)
    return np.repeat(shade[..., None], 3, axis=2), alpha


def terrain_texture(size=SIZE):
    u, v = _grid(size)
    base = _noise(size, 5, 0.35)
    patches = 0.9 + 0.1 * np.sin(2 * np.pi * 2 * u) * np.sin(2 * np.pi * 3 * v)
    return np.repeat((base * patches)[..., None], 3, axis=2), np.ones((size, size))


def white_texture(size=SIZE):
    return np.ones((size, size, 3)), np.ones((size, size))


BUILTIN = {
    "white": white_texture,
    "bark": bark_texture,
    "leaf": leaf_texture,
    "needle": white_texture,
    "grass": grass_texture,
    "fern": lambda: fern_texture(seed=4),
    "fern2": lambda: fern_texture(leaflets=10, seed=6, spread=0.3),
    "terrain": terrain_texture,
}


def load_png_texture(path, size=SIZE):
    from PIL import Image

    with Image.open(path) as im:
        rgba = np.asarray(im.convert("RGBA").resize((size, size), Image.BILINEAR), dtype=np.float64) / 255.0
    rgb = rgba[..., :3]
    # stored textures are sRGB; bring albedo to linear and normalise around 1
    lin = rgb ** 2.2
    mean = lin[rgba[..., 3] >= 0.5].mean() if np.any(rgba[..., 3] >= 0.5) else 1.0
    return lin / max(mean, 1e-6), rgba[..., 3]


class TextureSet:
    def __init__(self, size=SIZE):
        self.size = size
        self.names: dict[str, int] = {}
        self._albedo: list = []
        self._alpha: list = []
        self._cache = None

    def get(self, name: str) -> int:
        """Id for a built-in texture name or a PNG path."""
        if name in self.names:
            return self.names[name]
        if name in BUILTIN:
            rgb, a = BUILTIN[name]()
        elif Path(name).suffix.lower() == ".png":
            rgb, a = load_png_texture(name, self.size)
        else:
            raise KeyError(f"unknown texture {name!r}")
        self.names[name] = len(self._albedo)
        self._albedo.append(np.asarray(rgb, dtype=np.float64))
        self._alpha.append(np.asarray(a, dtype=np.float64))
        self._cache = None
        return self.names[name]

    def has_alpha(self, tid: int) -> bool:
        return bool(np.any(self._alpha[tid] < 0.5))

    @property
    def arrays(self):
        if self._cache is None:
            if not self._albedo:
                self.get("white")
            self._cache = (np.stack(self._albedo), np.stack(self._alpha).astype(np.float32))
        return self._cache

    def sample_albedo(self, tids, uv) -> np.ndarray:
        """Nearest-texel albedo multipliers for parallel arrays of texture ids and uvs."""
        albedo, _ = self.arrays
        s = albedo.shape[1]
        fu = uv[:, 0] - np.floor(uv[:, 0])
        fv = uv[:, 1] - np.floor(uv[:, 1])
        ix = np.minimum((fu * s).astype(np.int64), s - 1)
        iy = np.minimum((fv * s).astype(np.int64), s - 1)
        return albedo[tids, iy, ix]

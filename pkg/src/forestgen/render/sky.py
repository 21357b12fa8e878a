"""Equirectangular sky maps: lookup, a procedural fallback and sun estimation.

A texel at (u, v) in [0, 1)^2 covers azimuth phi = 2*pi*u and polar angle
theta = pi*v, with direction (sin theta cos phi, cos theta, sin theta sin phi).
Row 0 is the zenith.
"""

from __future__ import annotations

import math

import numpy as np

SUN_RADIANCE = 40.0
SUN_ANGULAR_RADIUS = 0.03


def direction_from_uv(u, v) -> np.ndarray:
    phi = 2.0 * np.pi * np.asarray(u, float)
    theta = np.pi * np.asarray(v, float)
    st = np.sin(theta)
    return np.stack([st * np.cos(phi), np.cos(theta), st * np.sin(phi)], axis=-1)


def uv_from_direction(d):
    d = np.asarray(d, float)
    d = d / np.linalg.norm(d, axis=-1, keepdims=True)
    phi = np.mod(np.arctan2(d[..., 2], d[..., 0]), 2.0 * np.pi)
    theta = np.arccos(np.clip(d[..., 1], -1.0, 1.0))
    return phi / (2.0 * np.pi), theta / np.pi


def direction_from_angles(azimuth: float, elevation: float) -> np.ndarray:
    """Unit direction for an azimuth about +y measured from +x towards +z, and elevation above the horizon."""
    ce = math.cos(elevation)
    return np.array([ce * math.cos(azimuth), math.sin(elevation), ce * math.sin(azimuth)])


def procedural_sky(sun_direction, width: int = 256, height: int = 128) -> np.ndarray:
    """HDR gradient sky with a bright sun disk, shape (height, width, 3)."""
    u = (np.arange(width) + 0.5) / width
    v = (np.arange(height) + 0.5) / height
    d = direction_from_uv(*np.meshgrid(u, v))
    up = d[..., 1:2]
    horizon = np.array([0.95, 1.0, 1.05]) * 1.3
    zenith = np.array([0.25, 0.45, 0.95])
    ground = np.array([0.22, 0.2, 0.17]) * 0.5
    t = np.clip(up, 0.0, 1.0) ** 0.6
    sky = np.where(up >= 0, horizon * (1 - t) + zenith * t, ground)
    s = np.asarray(sun_direction, float)
    s = s / np.linalg.norm(s)
    cos = d @ s
    glow = np.clip(cos, 0, 1)[..., None] ** 64 * np.array([1.5, 1.3, 1.0])
    disk = (cos >= math.cos(SUN_ANGULAR_RADIUS))[..., None] * SUN_RADIANCE * np.array([1.0, 0.95, 0.85])
    return sky + glow + disk


def sample_sky(image, directions) -> np.ndarray:
    """Bilinear lookup along world directions, wrapping in azimuth."""
    img = np.asarray(image, float)
    h, w = img.shape[:2]
    u, v = uv_from_direction(directions)
    x = u * w - 0.5
    y = np.clip(v * h - 0.5, 0.0, h - 1.0)
    x0 = np.floor(x).astype(np.int64)
    y0 = np.floor(y).astype(np.int64)
    fx = (x - x0)[..., None]
    fy = (y - y0)[..., None]
    x1 = (x0 + 1) % w
    x0 = x0 % w
    y1 = np.minimum(y0 + 1, h - 1)
    top = img[y0, x0] * (1 - fx) + img[y0, x1] * fx
    bottom = img[y1, x0] * (1 - fx) + img[y1, x1] * fx
    return top * (1 - fy) + bottom * fy


def brightest_texel(image):
    """(row, column) maximising the 3x3 RGB sum; columns wrap, rows clamp at the poles."""
    img = np.asarray(image, float)
    if img.shape[0] < 3 or img.shape[1] < 3:
        raise ValueError("sky image must be at least 3x3")
    lum = img[..., :3].sum(axis=-1)
    padded = np.pad(lum, ((1, 1), (0, 0)), mode="edge")
    acc = np.zeros_like(lum)
    for dy in (-1, 0, 1):
        rows = padded[1 + dy:1 + dy + lum.shape[0]]
        for dx in (-1, 0, 1):
            acc += np.roll(rows, -dx, axis=1)
    return np.unravel_index(int(np.argmax(acc)), acc.shape)


def estimate_sun(image, distance: float) -> np.ndarray:
    """Sun position ``distance`` from the origin towards the brightest part of the sky."""
    h, w = np.asarray(image).shape[:2]
    row, col = brightest_texel(image)
    return distance * direction_from_uv((col + 0.5) / w, (row + 0.5) / h)

"""Sun lighting: Blinn-Phong with ambient occlusion, shadows and leaf translucency.

All shading functions are vectorised over leading axes; vectors live in the
last axis.  The sun is a directional light, so ``omega`` is the unit vector
from the scene centre towards the sun position.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

SHININESS = 32.0
SPECULAR = {"bark": 0.05, "leaf": 0.15, "terrain": 0.05, "billboard": 0.05}
TRANSLUCENCY_NORM = math.sqrt(3.0 / (2.0 * math.pi))
DEFAULT_HALF_LIFE = np.full(3, 1.0 / math.sqrt(3.0))

# half-life 2 basis in tangent space (tangent, bitangent, normal)
HL2_BASIS = np.array([
    [-1.0 / math.sqrt(6.0), -1.0 / math.sqrt(2.0), 1.0 / math.sqrt(3.0)],
    [-1.0 / math.sqrt(6.0), 1.0 / math.sqrt(2.0), 1.0 / math.sqrt(3.0)],
    [math.sqrt(2.0 / 3.0), 0.0, 1.0 / math.sqrt(3.0)],
])


def _unit(v):
    v = np.asarray(v, dtype=float)
    n = np.sqrt(np.sum(v * v, axis=-1, keepdims=True))
    return v / np.where(n > 0, n, 1.0)


def _dot(a, b):
    return np.sum(a * b, axis=-1, keepdims=True)


@dataclass
class LightingEnv:
    sun_position: np.ndarray
    sun_color: np.ndarray = field(default_factory=lambda: np.array([3.0, 2.85, 2.6]))
    ambient: float = 0.3
    translucency: float = 1.0
    basis: np.ndarray = field(default_factory=lambda: HL2_BASIS.copy())

    def __post_init__(self):
        self.sun_position = np.asarray(self.sun_position, dtype=float)
        self.sun_color = np.asarray(self.sun_color, dtype=float)

    @property
    def sun_direction(self) -> np.ndarray:
        return _unit(self.sun_position)


def billboard_normal(map_normal, board_normal, view):
    """Flip the map normal when the back of the board faces the viewer; zero counts as front."""
    back = _dot(np.asarray(board_normal, float), np.asarray(view, float)) < 0
    return np.where(back, -np.asarray(map_normal, float), map_normal)


def shade_opaque(normal, albedo, view, env: LightingEnv, shadow, ao, k_s=0.05, shininess=SHININESS):
    """Ambient plus shadowed diffuse and specular sun light.

    ``view`` points from the fragment to the camera; ``shadow`` is 1 in full
    shadow and 0 in full light.
    """
    n = _unit(normal)
    w = env.sun_direction
    c_d = np.asarray(albedo, float)
    s = np.asarray(shadow, float)[..., None] if np.ndim(shadow) else float(shadow)
    ao = np.asarray(ao, float)[..., None] if np.ndim(ao) else float(ao)
    k_s = np.asarray(k_s, float)[..., None] if np.ndim(k_s) else float(k_s)
    ambient = env.ambient * ao * c_d
    diffuse = np.maximum(_dot(n, w), 0.0) * c_d * env.sun_color
    half = _unit(_unit(view) + w)
    specular = np.maximum(_dot(n, half), 0.0) ** shininess * env.sun_color * k_s
    return ambient + (1.0 - s) * (diffuse + specular)


def translucency(tangent, bitangent, normal, half_life, trans_color, env: LightingEnv):
    """Light transmitted through a leaf, projected onto the half-life basis in the leaf frame."""
    w = env.sun_direction
    local = np.stack([_dot(tangent, w)[..., 0], _dot(bitangent, w)[..., 0], _dot(normal, w)[..., 0]], axis=-1)
    proj = np.maximum(local @ env.basis.T, 0.0)
    weight = np.sum(np.asarray(half_life, float) * proj, axis=-1, keepdims=True)
    return env.translucency * np.asarray(trans_color, float) * env.sun_color * TRANSLUCENCY_NORM * weight


def leaf_frame(tangent, facing_normal):
    """Tangent frame whose normal points away from the viewer, towards transmitted light."""
    n = -_unit(facing_normal)
    t = _unit(tangent - _dot(tangent, n) * n)
    return t, np.cross(n, t), n


def shade_leaf(normal, albedo, view, env: LightingEnv, shadow, ao, tangent, half_life=DEFAULT_HALF_LIFE,
               trans_color=None, k_s=0.15, shininess=SHININESS):
    """Opaque shading plus translucency.  ``normal`` must already face the viewer."""
    out = shade_opaque(normal, albedo, view, env, shadow, ao, k_s, shininess)
    if env.translucency == 0.0:
        return out
    t, b, n = leaf_frame(np.asarray(tangent, float), np.asarray(normal, float))
    c_t = albedo if trans_color is None else trans_color
    return out + translucency(t, b, n, half_life, c_t, env)

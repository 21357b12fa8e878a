"""Ground cover: fallen leaves, twigs and crossed billboards scattered over the terrain."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .config import GroundCoverSpec
from .lsystem import derive, twig_lsystem
from .mesh import Mesh, quad_mesh, rotation, rotation_x, rotation_y, scaling, translation
from .species import leaf_model
from .turtle import interpret

LEAF_EPSILON = 0.01
TWIG_ITERATIONS = 5
TWIG_SIZE = 0.02       # grammar units to metres
TILT_RANGE = (4 * math.pi / 24, 10 * math.pi / 24)

# built-in billboard species: (texture, board width, board height)
BILLBOARD_TYPES = (("grass", 0.8, 0.5), ("fern", 1.0, 0.8), ("fern2", 1.2, 0.7))

KINDS = ("leaves", "twigs", "billboard")


def instance_count(density: float, default_density: float, species_count: int, width: float) -> int:
    """Number of instances per species: floor(d_0 * rho / n_T * w^2)."""
    if species_count < 1:
        raise ValueError("species_count must be >= 1")
    n = default_density * density * width * width / species_count
    # absorb representation error such as 999.9999999999999
    return int(math.floor(n + 1e-9 * max(1.0, n)))


@dataclass
class BoardPose:
    tilt: float        # phi, rotation about the xz axis
    axis_angle: float  # direction of that axis in the xz plane
    yaw: float         # theta_i = i*pi/N about y


def board_poses(n: int, rng) -> list[BoardPose]:
    if n < 1:
        raise ValueError("board count must be >= 1")
    poses = []
    for i in range(n):
        phi = rng.uniform(*TILT_RANGE)
        psi = rng.uniform(0.0, 2 * math.pi)
        poses.append(BoardPose(phi, psi, i * math.pi / n))
    return poses


def board_matrix(pose: BoardPose, width: float = 1.0, height: float = 1.0) -> np.ndarray:
    axis = np.array([math.cos(pose.axis_angle), 0.0, math.sin(pose.axis_angle)])
    tilt = np.eye(4)
    tilt[:3, :3] = rotation(axis, pose.tilt)
    return rotation_y(pose.yaw) @ tilt @ scaling((width, height, 1.0))


def unit_board() -> Mesh:
    """Upright unit quad in the xy plane with its base centred on the origin."""
    return quad_mesh([[-0.5, 0, 0], [0.5, 0, 0], [0.5, 1, 0], [-0.5, 1, 0]], [0, 0, 1], [1, 0, 0],
                     uvs=((0, 1), (1, 1), (1, 0), (0, 0)))


def build_crossed_billboard(n: int, rng, width: float = 1.0, height: float = 1.0, poses=None) -> Mesh:
    poses = poses if poses is not None else board_poses(n, rng)
    board = unit_board()
    return Mesh.concat([board.transformed(board_matrix(p, width, height)) for p in poses])


def build_twig(rng, iterations: int = TWIG_ITERATIONS, edges: int = 4, size: float = TWIG_SIZE) -> Mesh:
    """Twig grammar derived and laid flat (rotated a quarter turn about x)."""
    modules = derive(twig_lsystem(), iterations, rng)
    geom = interpret(modules, edges, base_radius=2.0)
    mesh = geom.branch_mesh
    if mesh.is_empty:
        return mesh
    # rest the lowest point on the ground plane
    flat = mesh.transformed(rotation_x(math.pi / 2))
    lift = -flat.positions[:, 1].min()
    return flat.transformed(scaling(size) @ translation((0.0, lift, 0.0)))


@dataclass
class GroundCoverModel:
    name: str
    kind: str
    high: Mesh
    low: Mesh
    material: str         # "leaf", "bark" or "billboard"
    texture: str
    color: tuple
    lift: float = 0.0     # height above the terrain


def build_models(spec: GroundCoverSpec, rng) -> list[GroundCoverModel]:
    """One model per ground-cover species of this spec."""
    name = spec.name or spec.kind
    tex = spec.textures
    if spec.kind == "leaves":
        m = leaf_model(0.12, 0.08).transformed(translation((-0.06, 0.0, 0.0)))
        return [GroundCoverModel(name, "leaves", m, m, "leaf", tex.get("leaf", "leaf"), spec.color, LEAF_EPSILON)]
    if spec.kind == "twigs":
        models = []
        for k in range(spec.species_count):
            r = rng.fork(f"twig{k}")
            hi = build_twig(r.fork("high"))
            lo = build_twig(r.fork("high"), edges=2)  # same derivation, two-edge branches
            models.append(GroundCoverModel(f"{name}{k}", "twigs", hi, lo, "bark", tex.get("bark", "bark"), spec.color))
        return models
    if spec.kind == "billboard":
        models = []
        for k in range(spec.species_count):
            texture, w, h = BILLBOARD_TYPES[k % len(BILLBOARD_TYPES)]
            r = rng.fork(f"board{k}")
            hi = build_crossed_billboard(spec.board_count, r.fork("high"), w, h)
            lo = build_crossed_billboard(2, r.fork("low"), w, h)
            models.append(GroundCoverModel(f"{name}{k}", "billboard", hi, lo, "billboard",
                                           tex.get(texture, texture), spec.color))
        return models
    raise ValueError(f"unknown ground cover kind {spec.kind!r}")


@dataclass
class InstanceGroup:
    model: int                # index into the model list
    matrices: np.ndarray      # (k, 4, 4)


@dataclass
class GroundCoverLayer:
    models: list
    tiles: dict = field(default_factory=dict)   # tile index -> list of InstanceGroup

    @property
    def instance_count(self) -> int:
        return sum(len(g.matrices) for groups in self.tiles.values() for g in groups)


def instance_matrices(xs, ys, zs, yaws, scales) -> np.ndarray:
    n = len(xs)
    c, s = np.cos(yaws), np.sin(yaws)
    m = np.zeros((n, 4, 4))
    m[:, 0, 0], m[:, 0, 2] = c * scales, s * scales
    m[:, 1, 1] = scales
    m[:, 2, 0], m[:, 2, 2] = -s * scales, c * scales
    m[:, 0, 3], m[:, 1, 3], m[:, 2, 3] = xs, ys, zs
    m[:, 3, 3] = 1.0
    return m


def scatter(spec: GroundCoverSpec, terrain, rng, models=None) -> GroundCoverLayer:
    """Place instance_count instances per species uniformly over the terrain."""
    models = models if models is not None else build_models(spec, rng.fork("models"))
    layer = GroundCoverLayer(models)
    w = terrain.width
    per_species = instance_count(spec.density, spec.default_density, spec.species_count, w)
    half = 0.5 * w
    for k, model in enumerate(models):
        if per_species == 0:
            continue
        r = rng.fork(f"place{k}")
        xs = r.uniform_array(-half, half, per_species)
        zs = r.uniform_array(-half, half, per_species)
        yaws = r.uniform_array(0.0, 2 * math.pi, per_species)
        scales = r.uniform_array(spec.scale[0], spec.scale[1], per_species) if spec.scale[1] > spec.scale[0] \
            else np.full(per_species, spec.scale[0])
        ys = terrain.height_at(xs, zs) + model.lift
        mats = instance_matrices(xs, ys, zs, yaws, scales)
        ix, iz = terrain.tile_index(xs, zs)
        keys = ix * terrain.tiles_per_side + iz
        for key in np.unique(keys):
            sel = keys == key
            tile = (int(key) // terrain.tiles_per_side, int(key) % terrain.tiles_per_side)
            layer.tiles.setdefault(tile, []).append(InstanceGroup(k, mats[sel]))
    return layer

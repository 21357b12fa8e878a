"""Scene configuration loading and seeded random streams.

The configuration file is YAML.  Every section is optional except ``seed``;
missing values fall back to the defaults declared on the dataclasses below.
The schema is a reconstruction: see README.md for the full key list.
"""

from __future__ import annotations

import dataclasses
import hashlib
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import yaml


class ConfigError(ValueError):
    """Raised for unreadable, malformed or invalid configuration files."""

    def __init__(self, message: str, field: str | None = None, line: int | None = None):
        self.field = field
        self.line = line
        parts = []
        if line is not None:
            parts.append(f"line {line}")
        if field is not None:
            parts.append(field)
        prefix = ": ".join(parts)
        super().__init__(f"{prefix}: {message}" if prefix else message)


# ---------------------------------------------------------------------------
# random streams


class RngStream:
    """Seeded 64-bit random stream (PCG64) that can be forked by label.

    A fork depends only on the parent's seed path and the label, never on how
    many numbers the parent has already produced.
    """

    def __init__(self, seed: int, label: str = "", _path: tuple[int, ...] = ()):
        self.seed = int(seed)
        self.label = label
        self._path = _path
        ss = np.random.SeedSequence(entropy=self.seed & 0xFFFFFFFFFFFFFFFF, spawn_key=_path)
        self._gen = np.random.Generator(np.random.PCG64(ss))

    def fork(self, label: str) -> "RngStream":
        return rng_fork(self, label)

    def random(self) -> float:
        return float(self._gen.random())

    def uniform(self, lo: float, hi: float) -> float:
        return rng_uniform(self, lo, hi)

    def integers(self, lo: int, hi: int) -> int:
        """Integer in [lo, hi)."""
        return int(self._gen.integers(lo, hi))

    def random_array(self, size) -> np.ndarray:
        return self._gen.random(size)

    def uniform_array(self, lo, hi, size) -> np.ndarray:
        u = self._gen.random(size)
        out = lo + (hi - lo) * u
        # rounding can land exactly on hi; nextafter(hi, lo) == hi when lo == hi
        return np.where(out >= hi, np.nextafter(hi, lo), out)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)

    def __repr__(self):
        return f"RngStream(seed={self.seed}, label={self.label!r})"


def _label_key(label: str) -> int:
    digest = hashlib.sha256(label.encode("utf-8")).digest()
    return int.from_bytes(digest[:4], "little")


def rng_fork(parent: RngStream, label: str) -> RngStream:
    name = f"{parent.label}/{label}" if parent.label else label
    return RngStream(parent.seed, name, parent._path + (_label_key(label),))


def rng_uniform(stream, lo: float, hi: float) -> float:
    """Uniform sample in [lo, hi); ``lo == hi`` returns ``lo``."""
    if lo > hi:
        raise ValueError(f"empty range: lo={lo} > hi={hi}")
    if lo == hi:
        return lo
    x = lo + (hi - lo) * stream.random()
    if x >= hi:
        x = math.nextafter(hi, lo)
    return x


# ---------------------------------------------------------------------------
# schema


@dataclass(frozen=True)
class NoiseConfig:
    octaves: int = 4
    frequency: float = 0.015
    lacunarity: float = 2.0
    gain: float = 0.5


@dataclass(frozen=True)
class TerrainConfig:
    width: float = 100.0
    vertical_scale: float = 3.0
    vertices_per_tile_edge: int = 9
    texture_scale: int = 0
    noise: NoiseConfig = field(default_factory=NoiseConfig)


@dataclass(frozen=True)
class QuadtreeConfig:
    max_depth: int = 4
    threshold: float = 0.75


@dataclass(frozen=True)
class Branching:
    angles: tuple[float, ...]
    probability: float


@dataclass(frozen=True)
class MaskConfig:
    trunk_radius: float = 0.3
    trunk_height: float = 3.0
    canopy_radius: float = 3.0
    canopy_base: float = 2.5
    canopy_height: float = 6.0


@dataclass(frozen=True)
class SpeciesConfig:
    name: str
    tree_type: str = "branching"
    edges: int = 6
    params: dict[str, tuple[float, float]] = field(default_factory=dict)
    branchings: tuple[Branching, ...] = ()
    iterations: tuple[int, int] = (3, 6)
    scale: tuple[float, float] = (0.8, 1.0)
    max_age: int = 100
    density: float = 1.0
    mask: MaskConfig = field(default_factory=MaskConfig)
    leaf_model: str = "leaf"
    leaf_size: tuple[float, float] = (0.25, 0.15)
    textures: dict[str, str] = field(default_factory=dict)
    bark_color: tuple[float, float, float] = (0.35, 0.25, 0.18)
    leaf_color: tuple[float, float, float] = (0.25, 0.45, 0.12)


@dataclass(frozen=True)
class GroundCoverSpec:
    kind: str
    name: str = ""
    density: float = 1.0
    default_density: float = 0.1
    species_count: int = 1
    board_count: int = 4
    scale: tuple[float, float] = (0.8, 1.2)
    color: tuple[float, float, float] = (0.3, 0.5, 0.15)
    textures: dict[str, str] = field(default_factory=dict)


@dataclass(frozen=True)
class ViabilityWeights:
    age: float = 1.0
    radius: float = 0.5
    feedback: float = 0.5


@dataclass(frozen=True)
class EcoConfig:
    steps: int = 1000
    steps_per_year: int = 10
    age_threshold: float = 0.3
    seeds_per_year: int = 3
    default_density: float = 0.01
    maturity: float = 0.3
    min_mask_fraction: float = 0.1
    placement_retries: int = 20
    variants: int = 3
    weights: ViabilityWeights = field(default_factory=ViabilityWeights)


@dataclass(frozen=True)
class LightingConfig:
    sun_position: tuple[float, float, float] | None = None  # None == "auto"
    sun_color: tuple[float, float, float] = (3.0, 2.85, 2.6)
    ambient: float = 0.3
    translucency: float = 1.0
    hdri: str | None = None
    sun_azimuth: float = 0.9
    sun_elevation: float = 0.6


@dataclass(frozen=True)
class ScatteringConfig:
    samples: int = 48
    decay: float = 0.95
    density: float = 1.0
    max_sample: float = 2.0
    exposure: float = 0.03


@dataclass(frozen=True)
class SsaoConfig:
    samples: int = 32
    radius: float = 0.5
    bias: float = 0.025
    enabled: bool = True


@dataclass(frozen=True)
class RenderConfig:
    width: int = 640
    height: int = 360
    fov_y: float = 1.0
    exposure: float = 1.0
    far: float = 500.0
    culling: bool = True
    shadow_map_size: int = 1024
    shadow_lod: str = "high"
    scattering: ScatteringConfig = field(default_factory=ScatteringConfig)
    ssao: SsaoConfig = field(default_factory=SsaoConfig)


@dataclass(frozen=True)
class View:
    position: tuple[float, float, float] = (0.0, 1.7, 0.0)
    yaw: float = 0.0
    pitch: float = 0.0


@dataclass(frozen=True)
class OutputConfig:
    mode: str = "batch"
    frame_path: str = "frames/frame_{index:04d}.png"
    views: tuple[View, ...] = (View(),)
    clamp_camera: bool = False


@dataclass(frozen=True)
class SceneConfig:
    seed: int = 0
    terrain: TerrainConfig = field(default_factory=TerrainConfig)
    quadtree: QuadtreeConfig = field(default_factory=QuadtreeConfig)
    species: tuple[SpeciesConfig, ...] = ()
    ground_cover: tuple[GroundCoverSpec, ...] = ()
    ecosystem: EcoConfig = field(default_factory=EcoConfig)
    lighting: LightingConfig = field(default_factory=LightingConfig)
    render: RenderConfig = field(default_factory=RenderConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    def replace(self, **changes) -> "SceneConfig":
        return dataclasses.replace(self, **changes)


# ---------------------------------------------------------------------------
# parsing


def _num(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"expected a number, got {value!r}", where)
    x = float(value)
    if not math.isfinite(x):
        raise ConfigError("must be finite", where)
    return x


def _int(value, where: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"expected an integer, got {value!r}", where)
    return int(value)


def _vec(value, n: int, where: str) -> tuple[float, ...]:
    if not isinstance(value, (list, tuple)) or len(value) != n:
        raise ConfigError(f"expected a list of {n} numbers", where)
    return tuple(_num(v, f"{where}[{i}]") for i, v in enumerate(value))


def _range(value, where: str) -> tuple[float, float]:
    """A scalar or a ``[lower, upper]`` pair."""
    if isinstance(value, (list, tuple)):
        lo, hi = _vec(value, 2, where)
    else:
        lo = hi = _num(value, where)
    if lo > hi:
        raise ConfigError(f"lower bound {lo} exceeds upper bound {hi}", where)
    return lo, hi


def _section(raw: dict, key: str, where: str) -> dict:
    value = raw.get(key, {})
    if value is None:
        return {}
    if not isinstance(value, dict):
        raise ConfigError("expected a mapping", f"{where}{key}")
    return value


def _check_keys(raw: dict, allowed, where: str):
    for key in raw:
        if key not in allowed:
            raise ConfigError("unknown key", f"{where}{key}")


def _build(cls, raw: dict, where: str, converters: dict | None = None):
    """Instantiate a flat dataclass from ``raw`` with per-field conversion."""
    converters = converters or {}
    names = {f.name: f for f in dataclasses.fields(cls)}
    _check_keys(raw, names, where)
    kwargs = {}
    for key, value in raw.items():
        conv = converters.get(key)
        if conv is not None:
            kwargs[key] = conv(value, f"{where}{key}")
            continue
        default = names[key].default
        if isinstance(default, bool):
            if not isinstance(value, bool):
                raise ConfigError("expected true/false", f"{where}{key}")
            kwargs[key] = value
        elif isinstance(default, int):
            kwargs[key] = _int(value, f"{where}{key}")
        elif isinstance(default, float):
            kwargs[key] = _num(value, f"{where}{key}")
        elif isinstance(default, tuple) and default and all(isinstance(v, (int, float)) for v in default):
            if all(isinstance(v, int) for v in default):
                vals = _vec(value, len(default), f"{where}{key}")
                kwargs[key] = tuple(int(v) for v in vals)
            else:
                kwargs[key] = _vec(value, len(default), f"{where}{key}")
        else:
            kwargs[key] = value
    return cls(**kwargs)


def _parse_species(raw, i: int) -> SpeciesConfig:
    where = f"species[{i}]."
    if not isinstance(raw, dict):
        raise ConfigError("expected a mapping", f"species[{i}]")
    raw = dict(raw)
    if "name" not in raw:
        raise ConfigError("missing species name", f"species[{i}].name")
    name = str(raw["name"])
    where = f"species[{name}]."
    params = {k: _range(v, f"{where}params.{k}") for k, v in (raw.pop("params", None) or {}).items()}
    branchings = []
    for j, b in enumerate(raw.pop("branchings", None) or []):
        if not isinstance(b, dict) or "angles" not in b or "probability" not in b:
            raise ConfigError("expected {angles, probability}", f"{where}branchings[{j}]")
        angles = tuple(_num(a, f"{where}branchings[{j}].angles") for a in b["angles"])
        branchings.append(Branching(angles, _num(b["probability"], f"{where}branchings[{j}].probability")))
    mask = _build(MaskConfig, raw.pop("mask", None) or {}, f"{where}mask.")
    textures = {str(k): str(v) for k, v in (raw.pop("textures", None) or {}).items()}
    sp = _build(SpeciesConfig, raw, where, {
        "name": lambda v, w: str(v),
        "tree_type": lambda v, w: str(v),
        "leaf_model": lambda v, w: str(v),
    })
    return dataclasses.replace(sp, params=params, branchings=tuple(branchings), mask=mask, textures=textures)


def _parse_ground_cover(raw, i: int) -> GroundCoverSpec:
    if not isinstance(raw, dict) or "kind" not in raw:
        raise ConfigError("expected a mapping with 'kind'", f"ground_cover[{i}]")
    raw = dict(raw)
    textures = {str(k): str(v) for k, v in (raw.pop("textures", None) or {}).items()}
    gc = _build(GroundCoverSpec, raw, f"ground_cover[{i}].", {
        "kind": lambda v, w: str(v),
        "name": lambda v, w: str(v),
        "scale": _range,
    })
    return dataclasses.replace(gc, textures=textures)


def _parse_sun(value, where):
    if value is None or value == "auto":
        return None
    return _vec(value, 3, where)


def _parse_views(value, where):
    if not isinstance(value, list) or not value:
        raise ConfigError("expected a non-empty list of views", where)
    views = []
    for i, v in enumerate(value):
        if not isinstance(v, dict):
            raise ConfigError("expected a mapping", f"{where}[{i}]")
        views.append(_build(View, v, f"{where}[{i}]."))
    return tuple(views)


def config_from_dict(raw: dict) -> SceneConfig:
    if not isinstance(raw, dict):
        raise ConfigError("top level must be a mapping")
    _check_keys(raw, {f.name for f in dataclasses.fields(SceneConfig)}, "")
    if "seed" not in raw:
        raise ConfigError("missing required key", "seed")
    seed = _int(raw["seed"], "seed")

    t = dict(_section(raw, "terrain", ""))
    noise = _build(NoiseConfig, _section(t, "noise", "terrain."), "terrain.noise.")
    t.pop("noise", None)
    terrain = dataclasses.replace(_build(TerrainConfig, t, "terrain."), noise=noise)

    quadtree = _build(QuadtreeConfig, _section(raw, "quadtree", ""), "quadtree.")

    e = dict(_section(raw, "ecosystem", ""))
    weights = _build(ViabilityWeights, _section(e, "weights", "ecosystem."), "ecosystem.weights.")
    e.pop("weights", None)
    eco = dataclasses.replace(_build(EcoConfig, e, "ecosystem."), weights=weights)

    lighting = _build(LightingConfig, _section(raw, "lighting", ""), "lighting.", {
        "sun_position": _parse_sun,
        "hdri": lambda v, w: None if v is None else str(v),
    })

    r = dict(_section(raw, "render", ""))
    scat = _build(ScatteringConfig, _section(r, "scattering", "render."), "render.scattering.")
    ssao = _build(SsaoConfig, _section(r, "ssao", "render."), "render.ssao.")
    r.pop("scattering", None)
    r.pop("ssao", None)
    render = dataclasses.replace(
        _build(RenderConfig, r, "render.", {"shadow_lod": lambda v, w: str(v)}),
        scattering=scat, ssao=ssao)

    output = _build(OutputConfig, _section(raw, "output", ""), "output.", {
        "mode": lambda v, w: str(v),
        "frame_path": lambda v, w: str(v),
        "views": _parse_views,
    })

    species_raw = raw.get("species") or []
    if not isinstance(species_raw, list):
        raise ConfigError("expected a list", "species")
    species = tuple(_parse_species(s, i) for i, s in enumerate(species_raw))
    gc_raw = raw.get("ground_cover") or []
    if not isinstance(gc_raw, list):
        raise ConfigError("expected a list", "ground_cover")
    ground_cover = tuple(_parse_ground_cover(g, i) for i, g in enumerate(gc_raw))

    cfg = SceneConfig(seed=seed, terrain=terrain, quadtree=quadtree, species=species,
                      ground_cover=ground_cover, ecosystem=eco, lighting=lighting,
                      render=render, output=output)
    validate(cfg)
    return cfg


TREE_TYPES = ("branching", "monopodial-alternating", "monopodial-pine")
GROUND_KINDS = ("leaves", "twigs", "billboard")


def validate(cfg: SceneConfig) -> None:
    def need(cond, field_name, msg):
        if not cond:
            raise ConfigError(msg, field_name)

    need(cfg.quadtree.max_depth >= 1, "quadtree.max_depth", "must be >= 1")
    need(cfg.quadtree.threshold > 0, "quadtree.threshold", "must be > 0")
    need(cfg.terrain.vertices_per_tile_edge >= 2, "terrain.vertices_per_tile_edge", "must be >= 2")
    need(cfg.terrain.width > 0, "terrain.width", "must be > 0")
    need(cfg.terrain.noise.octaves >= 1, "terrain.noise.octaves", "must be >= 1")
    sc = cfg.render.scattering
    need(0 <= sc.decay < 1, "render.scattering.decay", "must lie in [0, 1)")
    need(sc.samples >= 1, "render.scattering.samples", "must be >= 1")
    need(sc.density > 0, "render.scattering.density", "must be > 0")
    need(cfg.render.width >= 1 and cfg.render.height >= 1, "render.width", "image size must be positive")
    need(0 < cfg.render.fov_y < math.pi, "render.fov_y", "must lie in (0, pi)")
    need(cfg.render.shadow_lod in ("high", "low"), "render.shadow_lod", "must be 'high' or 'low'")
    need(cfg.output.mode in ("batch", "async"), "output.mode", "must be 'batch' or 'async'")
    eco = cfg.ecosystem
    need(eco.steps >= 0, "ecosystem.steps", "must be >= 0")
    need(eco.steps_per_year >= 1, "ecosystem.steps_per_year", "must be >= 1")
    need(0 < eco.age_threshold < 1, "ecosystem.age_threshold", "must lie in (0, 1)")
    need(eco.default_density >= 0, "ecosystem.default_density", "must be >= 0")
    need(eco.variants >= 1, "ecosystem.variants", "must be >= 1")
    need(0 < eco.min_mask_fraction <= 1, "ecosystem.min_mask_fraction", "must lie in (0, 1]")
    for sp in cfg.species:
        w = f"species[{sp.name}]"
        need(sp.tree_type in TREE_TYPES, f"{w}.tree_type", f"must be one of {TREE_TYPES}")
        need(sp.edges >= 2, f"{w}.edges", "must be >= 2")
        need(sp.iterations[0] <= sp.iterations[1], f"{w}.iterations", "i_min must not exceed i_max")
        need(sp.iterations[0] >= 0, f"{w}.iterations", "must be >= 0")
        need(sp.scale[0] <= sp.scale[1], f"{w}.scale", "s_min must not exceed s_max")
        need(sp.max_age > 0, f"{w}.max_age", "must be > 0")
        need(sp.density >= 0, f"{w}.density", "must be >= 0")
        for name, (lo, hi) in sp.params.items():
            need(lo <= hi, f"{w}.params.{name}", "lower bound exceeds upper bound")
        for k, v in dataclasses.asdict(sp.mask).items():
            need(v > 0, f"{w}.mask.{k}", "must be > 0")
        if sp.tree_type == "branching":
            need(len(sp.branchings) > 0, f"{w}.branchings", "branching species need at least one branching")
        if sp.branchings:
            total = sum(b.probability for b in sp.branchings)
            need(abs(total - 1.0) <= 1e-9, f"{w}.branchings",
                 f"branching probabilities sum to {total:g}, expected 1")
            for b in sp.branchings:
                need(0 < b.probability <= 1, f"{w}.branchings", "probabilities must lie in (0, 1]")
                need(len(b.angles) >= 1, f"{w}.branchings", "need at least one angle")
    for gc in cfg.ground_cover:
        w = f"ground_cover[{gc.name or gc.kind}]"
        need(gc.kind in GROUND_KINDS, f"{w}.kind", f"must be one of {GROUND_KINDS}")
        need(gc.density >= 0, f"{w}.density", "must be >= 0")
        need(gc.default_density >= 0, f"{w}.default_density", "must be >= 0")
        need(gc.species_count >= 1, f"{w}.species_count", "must be >= 1")
        need(gc.board_count >= 1, f"{w}.board_count", "must be >= 1")
    lt = cfg.lighting
    need(lt.ambient >= 0, "lighting.ambient", "must be >= 0")
    need(lt.translucency >= 0, "lighting.translucency", "must be >= 0")


def load_config(path, seed: int | None = None) -> SceneConfig:
    """Read, parse and validate a YAML scene file.

    ``seed`` overrides the file's seed when given.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror or exc}") from exc
    try:
        raw = yaml.safe_load(text)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark or exc.context_mark
        line = mark.line + 1 if mark is not None else None
        raise ConfigError(f"malformed YAML ({exc.problem})", line=line) from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"malformed YAML ({exc})") from exc
    if raw is None:
        raw = {}
    if isinstance(raw, dict) and seed is not None:
        raw = dict(raw, seed=seed)
    cfg = config_from_dict(raw)
    return _resolve_paths(cfg, path.parent)


def _resolve_paths(cfg: SceneConfig, base: Path) -> SceneConfig:
    """Make texture and HDRI paths relative to the config file's directory.

    Texture values without a file suffix name built-in textures and are kept.
    """
    def fix(p):
        q = Path(p)
        return str(q if q.is_absolute() or not q.suffix else base / q)

    lighting = cfg.lighting
    if lighting.hdri:
        lighting = dataclasses.replace(lighting, hdri=fix(lighting.hdri))
    species = tuple(dataclasses.replace(s, textures={k: fix(v) for k, v in s.textures.items()})
                    for s in cfg.species)
    gcs = tuple(dataclasses.replace(g, textures={k: fix(v) for k, v in g.textures.items()})
                for g in cfg.ground_cover)
    return cfg.replace(lighting=lighting, species=species, ground_cover=gcs)


def sample_config_path() -> Path:
    """Path of the bundled five-species sample scene."""
    return Path(__file__).parent / "data" / "sample.yaml"

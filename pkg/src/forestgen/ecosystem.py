"""Tree distribution by seeding, competition, death and growth.

Each plant is a trunk cylinder plus an elevated canopy cylinder whose
dimensions grow linearly with normalised age, from ``min_mask_fraction`` of
the species' full-size mask at age 0 to the full mask at the maximum age.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .config import EcoConfig, SpeciesConfig
from .groundcover import instance_count


@dataclass
class Plant:
    species: int
    x: float
    z: float
    age: int
    trunk_radius: float = 0.0
    trunk_height: float = 0.0
    canopy_radius: float = 0.0
    canopy_base: float = 0.0
    canopy_height: float = 0.0


class MaskTable:
    """Vectorised mask dimensions for every species."""

    def __init__(self, species, eco: EcoConfig):
        self.max_age = np.array([s.max_age for s in species], dtype=float)
        full = np.array([[s.mask.trunk_radius, s.mask.trunk_height, s.mask.canopy_radius,
                          s.mask.canopy_base, s.mask.canopy_height] for s in species], dtype=float).reshape(-1, 5)
        self.full = full
        self.min = eco.min_mask_fraction * full
        self.max_canopy_radius = float(full[:, 2].max()) if len(full) else 1.0

    def norm_age(self, species, age):
        return np.minimum(np.asarray(age, dtype=float) / self.max_age[species], 1.0)

    def dims(self, species, age) -> np.ndarray:
        """(n, 5) trunk radius, trunk height, canopy radius, canopy base, canopy height."""
        a = self.norm_age(species, age)[..., None]
        lo, hi = self.min[species], self.full[species]
        return lo + (hi - lo) * a


def make_plant(species: int, x: float, z: float, age: int, masks: MaskTable) -> Plant:
    d = masks.dims(np.array([species]), np.array([age]))[0]
    return Plant(species, x, z, age, *map(float, d))


def _overlap(lo1, hi1, lo2, hi2):
    return (lo1 < hi2) & (lo2 < hi1)


def collide_dims(dist, da, db):
    """Vectorised collision test between mask dimension rows ``da`` and ``db`` at horizontal ``dist``."""
    rta, hta, rca, yca, hca = (da[..., k] for k in range(5))
    rtb, htb, rcb, ycb, hcb = (db[..., k] for k in range(5))
    trunk = dist < rta + rtb
    canopy = (dist < rca + rcb) & _overlap(yca, yca + hca, ycb, ycb + hcb)
    ca_tb = (dist < rca + rtb) & _overlap(yca, yca + hca, 0.0, htb)
    cb_ta = (dist < rcb + rta) & _overlap(ycb, ycb + hcb, 0.0, hta)
    return trunk | canopy | ca_tb | cb_ta


def collides(a: Plant, b: Plant) -> bool:
    def row(p):
        return np.array([p.trunk_radius, p.trunk_height, p.canopy_radius, p.canopy_base, p.canopy_height])
    return bool(collide_dims(math.hypot(a.x - b.x, a.z - b.z), row(a), row(b)))


@dataclass
class Population:
    species: np.ndarray   # int
    x: np.ndarray
    z: np.ndarray
    age: np.ndarray       # int
    capacity: np.ndarray  # per species, the initial count (at least 1)
    width: float
    t: int = 0
    history: list = field(default_factory=list)

    def __len__(self):
        return len(self.species)

    def counts(self, n_species: int) -> np.ndarray:
        return np.bincount(self.species, minlength=n_species)

    def subset(self, keep) -> None:
        self.species, self.x, self.z, self.age = (self.species[keep], self.x[keep], self.z[keep], self.age[keep])

    def plants(self, masks: MaskTable) -> list[Plant]:
        d = masks.dims(self.species, self.age) if len(self) else np.zeros((0, 5))
        return [Plant(int(s), float(x), float(z), int(a), *map(float, r))
                for s, x, z, a, r in zip(self.species, self.x, self.z, self.age, d)]


def v_age(age, max_age, threshold: float):
    """Piecewise-linear age score: 0 at birth, 1 at threshold*max_age, 0 at max_age."""
    age = np.asarray(age, dtype=float)
    peak = threshold * max_age
    rising = np.where(peak > 0, age / np.where(peak > 0, peak, 1.0), 1.0)
    falling = (max_age - age) / np.where(max_age - peak > 0, max_age - peak, 1.0)
    return np.clip(np.where(age <= peak, rising, falling), 0.0, 1.0)


def viability_arrays(species, age, counts, capacity, masks: MaskTable, eco: EcoConfig):
    w = eco.weights
    va = v_age(age, masks.max_age[species], eco.age_threshold)
    rc = masks.dims(species, age)[:, 2]
    v = w.age * va + w.radius * rc / masks.max_canopy_radius - w.feedback * counts[species] / capacity[species]
    return np.clip(v, 0.0, 1.0 + w.radius)


def viability(p: Plant, pop: Population, masks: MaskTable, eco: EcoConfig) -> float:
    counts = pop.counts(len(masks.max_age))
    return float(viability_arrays(np.array([p.species]), np.array([p.age]), counts, pop.capacity, masks, eco)[0])


def colliding_pairs(x, z, dims) -> list[tuple[float, int, int]]:
    """All colliding index pairs as (distance, i, j) sorted by distance then indices."""
    n = len(x)
    if n < 2:
        return []
    reach = 2.0 * float(np.max(np.maximum(dims[:, 0], dims[:, 2])))
    pts = np.stack([x, z], axis=1)
    pairs = cKDTree(pts).query_pairs(reach, output_type="ndarray")
    if len(pairs) == 0:
        return []
    i, j = pairs[:, 0], pairs[:, 1]
    dist = np.hypot(x[i] - x[j], z[i] - z[j])
    hit = collide_dims(dist, dims[i], dims[j])
    i, j, dist = i[hit], j[hit], dist[hit]
    lo, hi = np.minimum(i, j), np.maximum(i, j)
    order = np.lexsort((hi, lo, dist))
    return [(float(dist[k]), int(lo[k]), int(hi[k])) for k in order]


def _fits(x, z, d, px, pz, pd) -> bool:
    if len(px) == 0:
        return True
    dist = np.hypot(px - x, pz - z)
    return not np.any(collide_dims(dist, d[None, :], pd))


def init_population(species, eco: EcoConfig, width: float, rng) -> Population:
    masks = MaskTable(species, eco)
    n_t = max(1, len(species))
    sp_list, ages = [], []
    for k, s in enumerate(species):
        n = instance_count(s.density, eco.default_density, n_t, width)
        r = rng.fork(f"ages{k}")
        for _ in range(n):
            sp_list.append(k)
            ages.append(r.integers(0, s.max_age))
    sp = np.array(sp_list, dtype=np.int64)
    age = np.array(ages, dtype=np.int64)
    capacity = np.maximum(np.bincount(sp, minlength=len(species)), 1).astype(float)
    if len(sp) == 0:
        return Population(sp, np.zeros(0), np.zeros(0), age, capacity, width)
    dims = masks.dims(sp, age)
    # largest canopies first; stable on index for determinism
    order = np.lexsort((np.arange(len(sp)), -dims[:, 2]))
    half = 0.5 * width
    place = rng.fork("place")
    px, pz, pd, keep_sp, keep_age = [], [], [], [], []
    for idx in order:
        for _ in range(eco.placement_retries):
            x = place.uniform(-half, half)
            z = place.uniform(-half, half)
            if _fits(x, z, dims[idx], np.array(px), np.array(pz), np.array(pd).reshape(-1, 5)):
                px.append(x)
                pz.append(z)
                pd.append(dims[idx])
                keep_sp.append(sp[idx])
                keep_age.append(age[idx])
                break
    return Population(np.array(keep_sp, dtype=np.int64), np.array(px), np.array(pz),
                      np.array(keep_age, dtype=np.int64), capacity, width)


def simulate_step(pop: Population, species, eco: EcoConfig, rng, masks: MaskTable | None = None) -> Population:
    masks = masks or MaskTable(species, eco)
    n_species = len(species)
    half = 0.5 * pop.width

    # 1. end of year: mature trees seed in a ring around themselves
    if pop.t % eco.steps_per_year == eco.steps_per_year - 1 and len(pop):
        mature = masks.norm_age(pop.species, pop.age) >= eco.maturity
        parents = np.flatnonzero(mature)
        if len(parents):
            r = rng.fork(f"seed{pop.t}")
            k = eco.seeds_per_year
            par = np.repeat(parents, k)
            rc = masks.dims(pop.species[par], pop.age[par])[:, 2]
            radius = rc + r.random_array(len(par)) * rc
            theta = r.uniform_array(0.0, 2 * math.pi, len(par))
            sx = pop.x[par] + radius * np.cos(theta)
            sz = pop.z[par] + radius * np.sin(theta)
            inside = (np.abs(sx) <= half) & (np.abs(sz) <= half)
            pop.species = np.concatenate([pop.species, pop.species[par][inside]])
            pop.x = np.concatenate([pop.x, sx[inside]])
            pop.z = np.concatenate([pop.z, sz[inside]])
            pop.age = np.concatenate([pop.age, np.zeros(int(inside.sum()), dtype=np.int64)])

    # 2. collisions, judged at next year's size so no pair overlaps after growth
    if len(pop) > 1:
        dims = masks.dims(pop.species, pop.age + 1)
        pairs = colliding_pairs(pop.x, pop.z, dims)
        if pairs:
            counts = pop.counts(n_species)
            v = viability_arrays(pop.species, pop.age, counts, pop.capacity, masks, eco)
            alive = np.ones(len(pop), bool)
            for _, i, j in pairs:
                if alive[i] and alive[j]:
                    alive[j if v[i] >= v[j] else i] = False
            pop.subset(alive)

    # 3. death of old age
    if len(pop):
        pop.subset(pop.age < masks.max_age[pop.species])

    # 4. growth
    pop.age = pop.age + 1
    pop.t += 1
    return pop


def simulate(pop: Population, species, eco: EcoConfig, rng, steps: int | None = None, record=None) -> Population:
    masks = MaskTable(species, eco)
    for _ in range(eco.steps if steps is None else steps):
        simulate_step(pop, species, eco, rng, masks)
        if record is not None:
            record(pop)
    return pop


def finalize_plant(age: int, sp: SpeciesConfig, rng=None):
    """Iteration count, mesh scale and y rotation for a grown plant."""
    a_hat = min(age / sp.max_age, 1.0)
    i_min, i_max = sp.iterations
    span = i_max + 1 - i_min
    n_i = math.floor(a_hat * span)
    iterations = min(max(i_min + n_i - 1, i_min), i_max)
    frac = min(max(a_hat * span - n_i, 0.0), 1.0)
    s_min, s_max = sp.scale
    scale = s_min + (s_max - s_min) * frac
    yaw = rng.uniform(0.0, 2 * math.pi) if rng is not None else 0.0
    return iterations, scale, yaw


def conspecific_fraction(pop: Population) -> float:
    """Fraction of plants whose nearest neighbour is of the same species."""
    if len(pop) < 2:
        return 0.0
    tree = cKDTree(np.stack([pop.x, pop.z], axis=1))
    _, idx = tree.query(np.stack([pop.x, pop.z], axis=1), k=2)
    return float(np.mean(pop.species[idx[:, 1]] == pop.species))


def count_collisions(pop: Population, masks: MaskTable) -> int:
    if len(pop) < 2:
        return 0
    return len(colliding_pairs(pop.x, pop.z, masks.dims(pop.species, pop.age)))


def write_csv(path, rows) -> None:
    """Rows of (step, species, x, z, age)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["step", "species", "x", "z", "age"])
        w.writerows(rows)


def population_rows(pop: Population):
    return [(pop.t, int(s), float(x), float(z), int(a)) for s, x, z, a in zip(pop.species, pop.x, pop.z, pop.age)]

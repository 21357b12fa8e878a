"""3D turtle interpretation of module strings into branch and canopy geometry.

Interpretation is split in two: :func:`interpret` walks the module string once
and records a ring *skeleton* (cross-section centres, frames and radii) plus
the sub-model references; :func:`skeleton_mesh` then turns the skeleton into
triangles for any edge count.  Building the low level of detail therefore
reuses exactly the same branch structure with two edges per cross-section.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .mesh import Mesh, normalize, normalize_rows, rotation, rotation_between

Y_AXIS = np.array([0.0, 1.0, 0.0])
INITIAL_UP = np.array([0.0, 0.0, 1.0])


class TurtleError(ValueError):
    def __init__(self, message: str, offset: int):
        self.offset = offset
        super().__init__(f"module {offset}: {message}")


@dataclass
class SubModelRef:
    position: np.ndarray
    heading: np.ndarray
    up: np.ndarray
    model_index: int
    width_scale: float = 1.0
    height_scale: float = 1.0


@dataclass
class Skeleton:
    centers: np.ndarray    # (R, 3)
    headings: np.ndarray   # (R, 3)
    refs: np.ndarray       # (R, 3) zero-angle direction of each ring
    radii: np.ndarray      # (R,)
    arc: np.ndarray        # (R,) path length from the root
    segments: np.ndarray   # (S, 2) lower/upper ring ids
    base_radius: float = 1.0

    @property
    def ring_count(self) -> int:
        return len(self.radii)


@dataclass
class TreeGeometry:
    branch_mesh: Mesh
    submodel_batches: dict
    refs: list
    edge_count: int
    skeleton: Skeleton
    low_lod: "TreeGeometry | None" = None

    @property
    def branch_vertices(self) -> int:
        return self.branch_mesh.vertex_count

    @property
    def canopy_vertices(self) -> int:
        return sum(m.vertex_count for m in self.submodel_batches.values())

    def combined(self) -> Mesh:
        return Mesh.concat([self.branch_mesh] + [self.submodel_batches[k] for k in sorted(self.submodel_batches)])


@dataclass
class TurtleState:
    position: np.ndarray
    heading: np.ndarray
    up: np.ndarray
    radius: float
    ring: int = -1                 # id of the most recent cross-section
    tropism: bool = False
    tropism_dir: np.ndarray = field(default_factory=lambda: np.array([0.0, -1.0, 0.0]))
    elasticity: float = 0.0
    leaf_phase: float = 0.0

    def copy(self) -> "TurtleState":
        return replace(self)


# ---------------------------------------------------------------------------
# tropism


def tropism_alpha(h, v, e: float) -> float:
    """Tropism rotation factor ``e |h x v| / angle(h, v)``; 0 when h and v are (anti)parallel."""
    h = np.asarray(h, dtype=float)
    v = np.asarray(v, dtype=float)
    nh, nv = math.sqrt(h @ h), math.sqrt(v @ v)
    cross = np.cross(h, v)
    cn = math.sqrt(cross @ cross)
    cos_t = max(-1.0, min(1.0, float(h @ v) / (nh * nv)))
    theta = math.acos(cos_t)
    if cn < 1e-12 * nh * nv or theta < 1e-12 or math.pi - theta < 1e-9:
        return 0.0
    return e * cn / theta


def apply_tropism(h, u, v, e):
    """Bend the frame towards ``v`` by ``alpha * theta_v`` (never past ``v``)."""
    alpha = tropism_alpha(h, v, e)
    if alpha == 0.0:
        return h, u
    vn = normalize(v)
    theta = math.acos(max(-1.0, min(1.0, float(h @ vn))))
    angle = max(-1.0, min(1.0, alpha)) * theta
    r = rotation(np.cross(h, vn), angle)
    return normalize(r @ h), normalize(r @ u)


# ---------------------------------------------------------------------------
# cross-section connection


def _ring_points(centers, refs, headings, radii, n: int) -> np.ndarray:
    """(R, n, 3) ring vertices, counter-clockwise about each heading."""
    phi = 2.0 * np.pi * np.arange(n) / n
    side = np.cross(headings, refs)
    c, s = np.cos(phi), np.sin(phi)
    dirs = refs[:, None, :] * c[None, :, None] + side[:, None, :] * s[None, :, None]
    return centers[:, None, :] + radii[:, None, None] * dirs


def _connect(points: np.ndarray, segments: np.ndarray, axis: np.ndarray, centers: np.ndarray):
    """Quads between ring pairs with averaged corner normals/tangents.

    ``points`` is (R, N, 3); vertex id of ring r, corner k is r*N + k.
    Returns (triangles, normals, tangents) for all R*N vertices.
    """
    R, N, _ = points.shape
    V = R * N
    flat = points.reshape(V, 3)
    lo, hi = segments[:, 0], segments[:, 1]
    k = np.arange(N)
    k1 = (k + 1) % N
    A = (lo[:, None] * N + k[None, :]).ravel()
    B = (lo[:, None] * N + k1[None, :]).ravel()
    C = (hi[:, None] * N + k[None, :]).ravel()
    D = (hi[:, None] * N + k1[None, :]).ravel()
    pA, pB, pC, pD = flat[A], flat[B], flat[C], flat[D]

    corner_n = [
        (A, np.cross(pB - pA, pC - pA)),   # n_A = AB x AC
        (B, np.cross(pD - pB, pA - pB)),   # n_B = BD x BA
        (C, np.cross(pA - pC, pD - pC)),   # n_C = CA x CD
        (D, np.cross(pC - pD, pB - pD)),   # n_D = DC x DB
    ]
    tan_lo = pB - pA
    tan_hi = pD - pC

    nsum = np.zeros((V, 3))
    first = np.zeros((V, 3))
    have_first = np.zeros(V, bool)
    for idx, n in corner_n:
        unit = normalize_rows(n)
        ok = np.sqrt(np.sum(n * n, axis=1)) > 1e-12
        np.add.at(nsum, idx[ok], unit[ok])
        # fallback for opposing faces that cancel (two-edge ribbons)
        fresh = ok & ~have_first[idx]
        sel = idx[fresh]
        _, uniq = np.unique(sel, return_index=True)
        first[sel[uniq]] = unit[fresh][uniq]
        have_first[sel[uniq]] = True

    tsum = np.zeros((V, 3))
    for idx, t in ((A, tan_lo), (B, tan_lo), (C, tan_hi), (D, tan_hi)):
        unit = normalize_rows(t)
        np.add.at(tsum, idx, unit)

    norms = np.sqrt(np.sum(nsum * nsum, axis=1))
    normals = nsum / np.maximum(norms, 1e-300)[:, None]
    cancel = norms < 1e-6
    normals[cancel & have_first] = first[cancel & have_first]
    degenerate = cancel & ~have_first
    if np.any(degenerate):
        ring_of = np.repeat(np.arange(R), N)
        normals[degenerate] = axis[ring_of[degenerate]]

    tnorm = np.sqrt(np.sum(tsum * tsum, axis=1))
    tangents = tsum / np.maximum(tnorm, 1e-300)[:, None]
    bad_t = tnorm < 1e-9
    if np.any(bad_t):
        ring_of = np.repeat(np.arange(R), N)
        # any direction perpendicular to the axis
        fallback = np.cross(axis[ring_of[bad_t]], [1.0, 0.0, 0.0])
        small = np.sum(fallback * fallback, axis=1) < 1e-12
        fallback[small] = np.cross(axis[ring_of[bad_t]][small], [0.0, 0.0, 1.0])
        tangents[bad_t] = normalize_rows(fallback)

    tris = np.stack([np.stack([A, B, D], 1), np.stack([A, D, C], 1)], axis=1).reshape(-1, 3)
    return tris.astype(np.int32), normals, tangents


def connect_cross_sections(lower, upper):
    """Connect two N-point cross-sections.

    Returns a :class:`Mesh` over the 2N input vertices (lower first), with
    quads ABCD split into triangles ABD and ADC and per-vertex normals and
    tangents averaged over adjacent faces.
    """
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    if lower.shape != upper.shape:
        raise ValueError("cross-sections must have the same number of vertices")
    pts = np.stack([lower, upper])
    centers = pts.mean(axis=1)
    axis = normalize(centers[1] - centers[0])
    tris, nrm, tan = _connect(pts, np.array([[0, 1]]), np.stack([axis, axis]), centers)
    n = len(lower)
    uvs = np.stack([np.tile(np.arange(n) / n, 2), np.repeat([0.0, 1.0], n)], axis=1)
    return Mesh(pts.reshape(-1, 3), nrm, tan, uvs, tris)


def skeleton_mesh(sk: Skeleton, edges: int) -> Mesh:
    if len(sk.segments) == 0:
        return Mesh.empty()
    pts = _ring_points(sk.centers, sk.refs, sk.headings, sk.radii, edges)
    tris, nrm, tan = _connect(pts, sk.segments, sk.headings, sk.centers)
    circumference = 2.0 * math.pi * sk.base_radius if sk.base_radius > 0 else 1.0
    u = np.tile(np.arange(edges) / edges, sk.ring_count)
    v = np.repeat(sk.arc / circumference, edges)
    # drop rings that belong to no segment so vertex counts stay exact
    used = np.zeros(sk.ring_count, bool)
    used[sk.segments.ravel()] = True
    keep = np.repeat(used, edges)
    remap = np.cumsum(keep) - 1
    return Mesh(pts.reshape(-1, 3)[keep], nrm[keep], tan[keep], np.stack([u, v], 1)[keep],
                remap[tris].astype(np.int32))


# ---------------------------------------------------------------------------
# sub-models


def submodel_frame(ref: SubModelRef) -> np.ndarray:
    """4x4 transform taking model x to the heading and y to the up vector."""
    h = normalize(ref.heading)
    u = np.asarray(ref.up, dtype=float)
    u = normalize(u - (u @ h) * h)
    m = np.eye(4)
    m[:3, 0] = h * ref.height_scale
    m[:3, 1] = u
    m[:3, 2] = np.cross(h, u) * ref.width_scale
    m[:3, 3] = ref.position
    return m


def inject_submodel(ref: SubModelRef, submodel: Mesh) -> Mesh:
    return submodel.transformed(submodel_frame(ref))


def batch_submodels(refs, submodels) -> dict:
    """Combine every injected instance of each model index into one mesh."""
    by_model: dict = {}
    for r in refs:
        by_model.setdefault(r.model_index, []).append(r)
    out = {}
    for idx in sorted(by_model):
        group = by_model[idx]
        model = submodels[idx]
        n = len(group)
        P = np.array([r.position for r in group], dtype=float)
        H = normalize_rows(np.array([r.heading for r in group], dtype=float))
        U = np.array([r.up for r in group], dtype=float)
        U = normalize_rows(U - np.sum(U * H, axis=1, keepdims=True) * H)
        Z = np.cross(H, U)
        hs = np.array([r.height_scale for r in group])[:, None]
        ws = np.array([r.width_scale for r in group])[:, None]
        Hs, Zs = H * hs, Z * ws

        def lin(cols, v):
            a, b, c = cols
            return (a[:, None, :] * v[None, :, 0:1] + b[:, None, :] * v[None, :, 1:2]
                    + c[:, None, :] * v[None, :, 2:3])

        pos = lin((Hs, U, Zs), model.positions) + P[:, None, :]
        # inverse-transpose of [h*hs, u, z*ws] is [h/hs, u, z/ws]
        nrm = normalize_rows(lin((H / hs, U, Z / ws), model.normals))
        tan = normalize_rows(lin((Hs, U, Zs), model.tangents))
        V = model.vertex_count
        tris = (model.triangles[None, :, :] + (np.arange(n) * V)[:, None, None]).reshape(-1, 3)
        out[idx] = Mesh(pos.reshape(-1, 3), nrm.reshape(-1, 3), tan.reshape(-1, 3),
                        np.tile(model.uvs, (n, 1)), tris.astype(np.int32))
    return out


def leaf_spiral(p0, p1, r0: float, r1: float, ref, n_l: int, model_index: int,
                radial_angle: float, lift_angle: float, rng=None, phase: float = 0.0):
    """Spiral ``n_l`` sub-model references around the prism from p0 to p1.

    With ``rng`` the radial step and the axial spacing are each jittered by a
    uniform offset within 50% of their constant value; ``rng=None`` gives the
    exact spiral.  Returns (refs, final phase).
    """
    n_l = int(n_l)
    if n_l <= 0:
        return [], phase
    p0 = np.asarray(p0, dtype=float)
    p1 = np.asarray(p1, dtype=float)
    axis = p1 - p0
    length = math.sqrt(axis @ axis)
    h = axis / length if length > 0 else Y_AXIS
    ref = np.asarray(ref, dtype=float)
    ref = ref - (ref @ h) * h
    if ref @ ref < 1e-18:
        ref = np.cross(h, [1.0, 0.0, 0.0])
        if ref @ ref < 1e-18:
            ref = np.cross(h, [0.0, 0.0, 1.0])
    ref = normalize(ref)
    side = np.cross(h, ref)
    step = length / n_l
    ca, sa = math.cos(lift_angle), math.sin(lift_angle)
    refs = []
    phi = phase
    t = 0.5 * step
    for k in range(n_l):
        if k > 0:
            dphi, dt = radial_angle, step
            if rng is not None:
                dphi += rng.uniform(-0.5 * radial_angle, 0.5 * radial_angle) if radial_angle else 0.0
                dt += rng.uniform(-0.5 * step, 0.5 * step) if step else 0.0
            phi += dphi
            t += dt
        t = min(t, length)
        f = t / length if length > 0 else 0.0
        radial = math.cos(phi) * ref + math.sin(phi) * side
        pos = p0 + t * h + ((1 - f) * r0 + f * r1) * radial
        heading = ca * radial + sa * h
        up = -sa * radial + ca * h
        refs.append(SubModelRef(pos, heading, up, int(model_index)))
    return refs, phi + radial_angle


# ---------------------------------------------------------------------------
# interpretation

_ANGLE_SYMBOLS = "+&/"
_DRAW = "F"


class _Builder:
    def __init__(self, base_radius: float):
        self.centers, self.headings, self.refs, self.radii, self.arc = [], [], [], [], []
        self.segments = []
        self.base_radius = base_radius

    def ring(self, center, heading, ref, radius, arc) -> int:
        self.centers.append(np.array(center, dtype=float))
        self.headings.append(np.array(heading, dtype=float))
        self.refs.append(np.array(ref, dtype=float))
        self.radii.append(float(radius))
        self.arc.append(float(arc))
        return len(self.radii) - 1

    def skeleton(self) -> Skeleton:
        if not self.radii:
            z = np.zeros((0, 3))
            return Skeleton(z, z, z, np.zeros(0), np.zeros(0), np.zeros((0, 2), np.int64), self.base_radius)
        return Skeleton(np.array(self.centers), np.array(self.headings), np.array(self.refs),
                        np.array(self.radii), np.array(self.arc),
                        np.array(self.segments, dtype=np.int64).reshape(-1, 2), self.base_radius)


def _transport(ref, old_h, new_h):
    r = rotation_between(old_h, new_h) @ ref
    r = r - (r @ new_h) * new_h
    n = math.sqrt(r @ r)
    if n < 1e-12:
        r = np.cross(new_h, [1.0, 0.0, 0.0])
        if r @ r < 1e-12:
            r = np.cross(new_h, [0.0, 0.0, 1.0])
        return normalize(r)
    return r / n


def trace(modules, base_radius: float = 1.0, rng=None):
    """Walk the module string; return (skeleton, sub-model refs, final state)."""
    st = TurtleState(np.zeros(3), Y_AXIS.copy(), INITIAL_UP.copy(), float(base_radius))
    stack: list[TurtleState] = []
    b = _Builder(float(base_radius))
    refs: list[SubModelRef] = []

    def need(m, i, n):
        if len(m.params) < n:
            raise TurtleError(f"{m.symbol!r} needs {n} parameter(s)", i)

    def current_ring():
        if st.ring < 0:
            ref = st.up - (st.up @ st.heading) * st.heading
            st.ring = b.ring(st.position, st.heading, normalize(ref), st.radius, 0.0)
        return st.ring

    def extrude(length, radius):
        lower = current_ring()
        if st.tropism:
            st.heading, st.up = apply_tropism(st.heading, st.up, st.tropism_dir, st.elasticity)
        st.position = st.position + length * st.heading
        ref = _transport(b.refs[lower], b.headings[lower], st.heading)
        st.ring = b.ring(st.position, st.heading, ref, radius, b.arc[lower] + abs(length))
        b.segments.append((lower, st.ring))
        return lower

    for i, m in enumerate(modules):
        s = m.symbol
        p = m.params
        if s == "F":
            d = p[0] if p else 1.0
            lower = extrude(d, st.radius)
            if len(p) >= 5 and p[1] >= 1:
                new, st.leaf_phase = leaf_spiral(
                    b.centers[lower], st.position, b.radii[lower], st.radius, b.refs[lower],
                    int(p[1]), int(p[2]), p[3], p[4], rng, st.leaf_phase)
                refs.extend(new)
            elif len(p) not in (0, 1, 5):
                raise TurtleError("F takes 1 or 5 parameters", i)
        elif s == "+":
            need(m, i, 1)
            st.heading = normalize(rotation(st.up, p[0]) @ st.heading)
        elif s == "&":
            need(m, i, 1)
            r = rotation(np.cross(st.up, st.heading), p[0])
            st.heading, st.up = normalize(r @ st.heading), normalize(r @ st.up)
        elif s == "/":
            need(m, i, 1)
            st.up = normalize(rotation(st.heading, p[0]) @ st.up)
        elif s == "$":
            new_h = Y_AXIS.copy()
            u = st.up - (st.up @ new_h) * new_h
            if u @ u < 1e-12:
                u = -st.heading + (st.heading @ new_h) * new_h
                if u @ u < 1e-12:
                    u = INITIAL_UP.copy()
            st.heading, st.up = new_h, normalize(u)
        elif s == "!":
            need(m, i, 1)
            if p[0] < 0:
                raise TurtleError("radius must be >= 0", i)
            st.radius = float(p[0])
        elif s == "%":
            st.radius = 0.0
            lower = current_ring()
            ref = b.refs[lower]
            st.ring = b.ring(st.position, st.heading, ref, 0.0, b.arc[lower])
            b.segments.append((lower, st.ring))
        elif s == "~":
            need(m, i, 1)
            refs.append(SubModelRef(st.position.copy(), st.heading.copy(), st.up.copy(), int(p[0])))
        elif s == "T":
            if len(p) == 1 and p[0] == 0:
                st.tropism = False
            elif len(p) == 4:
                v = np.array(p[:3], dtype=float)
                if v @ v == 0:
                    raise TurtleError("tropism direction must be non-zero", i)
                st.tropism, st.tropism_dir, st.elasticity = True, v, float(p[3])
            else:
                raise TurtleError("T takes 4 parameters or the single value 0", i)
        elif s == "[":
            current_ring()  # parent and child share this cross-section
            stack.append(st.copy())
        elif s == "]":
            if not stack:
                raise TurtleError("pop from empty stack", i)
            st = stack.pop()
        elif s.isalpha():
            pass  # growth placeholders such as A or B draw nothing
        else:
            raise TurtleError(f"unknown symbol {s!r}", i)
    if stack:
        raise TurtleError("unbalanced '[' at end of string", len(modules))
    return b.skeleton(), refs, st


def interpret(modules, edges: int = 6, base_radius: float = 1.0, submodels=(), rng=None) -> TreeGeometry:
    """Build high level-of-detail geometry for a module string."""
    if edges < 2:
        raise ValueError("edge count must be >= 2")
    sk, refs, _ = trace(modules, base_radius, rng)
    for r in refs:
        if not 0 <= r.model_index < len(submodels):
            raise ValueError(f"sub-model index {r.model_index} not in table of {len(submodels)}")
    return TreeGeometry(skeleton_mesh(sk, edges), batch_submodels(refs, submodels), refs, edges, sk)


def merge_refs(refs) -> list:
    """Merge consecutive pairs: average position and orientation, double width, 1.1x height."""
    out = []
    for i in range(0, len(refs) - 1, 2):
        a, b = refs[i], refs[i + 1]
        h = a.heading + b.heading
        h = normalize(h) if h @ h > 1e-12 else normalize(a.heading)
        u = a.up + b.up
        u = u - (u @ h) * h
        if u @ u < 1e-12:
            u = a.up - (a.up @ h) * h
        out.append(SubModelRef(0.5 * (a.position + b.position), h, normalize(u), a.model_index,
                               2.0 * a.width_scale, 1.1 * a.height_scale))
    if len(refs) % 2:
        out.append(refs[-1])
    return out


def build_low_lod(geometry: TreeGeometry, submodels=()) -> TreeGeometry:
    """Two-edge branches over the same skeleton plus pairwise-merged sub-models."""
    merged = merge_refs(geometry.refs)
    low = TreeGeometry(skeleton_mesh(geometry.skeleton, 2), batch_submodels(merged, submodels),
                       merged, 2, geometry.skeleton)
    geometry.low_lod = low
    return low

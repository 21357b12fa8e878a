"""Built-in tree grammar templates and the sub-models they inject.

Three templates are provided, selected by ``SpeciesConfig.tree_type``:

``branching``
    Each internode ends in a split chosen from the species' branchings; the
    parent axis stops there.  An optional side branch may sprout half way up.
``monopodial-alternating``
    One trunk to the top with side branches on a 137.5 degree spiral; every
    side branch carries short third-level branches on both sides.
``monopodial-pine``
    One trunk with side branches in discrete whorls (the branchings give the
    angles around the trunk); side branches fork in two at every step.

These productions are reconstructions: the published description names the
structure but not the rules.  Leaves are only carried by the newest growth,
older segments drop them through the ``F(d,n,m,r,a) -> F(d)`` rule.
Grammar constants come from ``SpeciesConfig.params``; any missing one falls
back to the template default below.  Branching angles are in degrees.
"""

from __future__ import annotations

import dataclasses
import math

from .config import Branching, SpeciesConfig
from .lsystem import LSystemDef, derive, parse_lsystem
from .mesh import Mesh, quad_mesh, rotation_x
from .turtle import TreeGeometry, build_low_lod, interpret

TREE_TYPES = ("branching", "monopodial-alternating", "monopodial-pine")

# grammar constants: (lo, hi); lengths in metres, angles in degrees
COMMON_DEFAULTS = {
    "trunk_length": (1.6, 2.0),
    "trunk_width": (0.22, 0.26),
    "length_ratio": (0.8, 0.9),
    "width_ratio": (0.65, 0.72),
    "branch_angle": (30.0, 45.0),
    "leaf_count": (6.0, 6.0),
    "radial_angle": (137.5, 137.5),
    "lift_angle": (20.0, 40.0),
    "elasticity": (0.04, 0.08),
}

TEMPLATE_DEFAULTS = {
    "branching": {"side_probability": (0.5, 0.5), "side_angle": (50.0, 70.0), "side_length": (0.4, 0.5)},
    "monopodial-alternating": {"side_length": (0.6, 0.75), "twig_angle": (40.0, 55.0),
                               "twig_length": (0.35, 0.45)},
    "monopodial-pine": {"side_length": (0.8, 1.0), "fork_angle": (20.0, 30.0), "whorl_twist": (30.0, 45.0)},
}

DEFAULT_BRANCHINGS = {
    "branching": (Branching((180.0, 180.0), 0.6), Branching((120.0, 120.0, 120.0), 0.4)),
    "monopodial-pine": (Branching((72.0,) * 4, 0.5), Branching((90.0,) * 3, 0.5)),
}

ANGLE_PARAMS = {"branch_angle", "radial_angle", "lift_angle", "side_angle", "twig_angle",
                "fork_angle", "whorl_twist"}


def _fmt(x: float) -> str:
    return repr(float(x))


def _constants(sp: SpeciesConfig) -> dict:
    values = dict(COMMON_DEFAULTS)
    values.update(TEMPLATE_DEFAULTS[sp.tree_type])
    unknown = set(sp.params) - set(values)
    if unknown:
        raise ValueError(f"species {sp.name!r}: unknown parameter(s) {sorted(unknown)}")
    values.update(sp.params)
    out = {}
    for name, (lo, hi) in values.items():
        if name in ANGLE_PARAMS:
            lo, hi = math.radians(lo), math.radians(hi)
        out[name] = (lo, hi)
    return out


def _const_lines(consts: dict) -> list[str]:
    lines = []
    for name, (lo, hi) in sorted(consts.items()):
        if lo == hi:
            lines.append(f"const {name} = {_fmt(lo)}")
        else:
            lines.append(f"const {name} = {_fmt(lo)} .. {_fmt(hi)}")
    return lines


AXIOM_PARAMS = ("trunk_length", "trunk_width", "elasticity")


def _axiom(trunk_length: float, trunk_width: float, elasticity: float) -> str:
    # ranged constants cannot appear in the axiom, so each tree samples its own values
    return (f"axiom: T(0, -1, 0, {_fmt(elasticity)})"
            f"A({_fmt(trunk_length)}, {_fmt(trunk_width)})")


def _leafy(length: str = "l") -> str:
    return f"F({length}, leaf_count, 0, radial_angle, lift_angle)"


LEAFY = _leafy()


def _branching_source(sp, branchings) -> list[str]:
    lo, hi = sp.params.get("side_probability", TEMPLATE_DEFAULTS["branching"]["side_probability"])
    p_side = 0.5 * (lo + hi)
    lines = [
        "s1: S(l,w) -> [/(radial_angle)&(side_angle)!(w*0.6)"
        "F(l*side_length, leaf_count, 0, radial_angle, lift_angle)] : " + _fmt(p_side),
        "s2: S(l,w) -> : " + _fmt(1.0 - p_side),
    ]
    for i, br in enumerate(branchings):
        children = []
        azimuth = 0.0
        for theta in br.angles:
            children.append(f"[/({_fmt(math.radians(azimuth))})&(branch_angle)"
                            f"A(l*length_ratio, w*width_ratio)]")
            azimuth += theta
        lines.append(f"b{i}: A(l,w) -> !(w)F(l*0.5)S(l,w)!(w*0.95){_leafy('l*0.5')}"
                     f"{''.join(children)} : {_fmt(br.probability)}")
    return lines


def _alternating_source(sp, branchings) -> list[str]:
    return [
        f"a1: A(l,w) -> !(w){LEAFY}[&(branch_angle)B(l*side_length, w*width_ratio)]"
        "/(137.5deg)A(l*length_ratio, w*length_ratio)",
        f"a2: B(l,w) -> !(w){LEAFY}[+(twig_angle)C(l*twig_length, w*width_ratio)]"
        "[+(-twig_angle)C(l*twig_length, w*width_ratio)]B(l*length_ratio, w*width_ratio)",
        f"a3: C(l,w) -> !(w){LEAFY}C(l*length_ratio, w*width_ratio)",
    ]


def _pine_source(sp, branchings) -> list[str]:
    lines = []
    for i, br in enumerate(branchings):
        whorl = []
        for theta in br.angles:
            whorl.append(f"[&(branch_angle)B(l*side_length, w*width_ratio)]/({_fmt(math.radians(theta))})")
        lines.append(f"w{i}: A(l,w) -> !(w){LEAFY}{''.join(whorl)}/(whorl_twist)"
                     f"A(l*length_ratio, w*length_ratio) : {_fmt(br.probability)}")
    lines.append(f"f1: B(l,w) -> !(w){LEAFY}[+(fork_angle)B(l*length_ratio, w*width_ratio)]"
                 "[+(-fork_angle)B(l*length_ratio, w*width_ratio)]")
    return lines


_TEMPLATES = {
    "branching": _branching_source,
    "monopodial-alternating": _alternating_source,
    "monopodial-pine": _pine_source,
}


def species_source(sp: SpeciesConfig) -> str:
    """Grammar text for a species, suitable for :func:`parse_lsystem`."""
    if sp.tree_type not in _TEMPLATES:
        raise ValueError(f"species {sp.name!r}: unknown tree type {sp.tree_type!r}")
    consts = _constants(sp)
    consts.pop("side_probability", None)  # fixed into the production weights
    branchings = sp.branchings or DEFAULT_BRANCHINGS.get(sp.tree_type, ())
    body = _TEMPLATES[sp.tree_type](sp, branchings)
    strip = "k1: F(d,n,m,r,a) -> F(d)"
    mid = {k: 0.5 * (consts[k][0] + consts[k][1]) for k in AXIOM_PARAMS}
    return "\n".join([f"# {sp.name}: {sp.tree_type}", _axiom(**mid)] + _const_lines(consts) + body
                     + [strip]) + "\n"


def species_lsystem(sp: SpeciesConfig) -> LSystemDef:
    return parse_lsystem(species_source(sp))


# ---------------------------------------------------------------------------
# sub-models


def leaf_model(length: float, width: float) -> Mesh:
    """Flat leaf in the xz plane, stem at the origin, pointing along +x."""
    h = 0.5 * width
    return quad_mesh([[0, 0, h], [length, 0, h], [length, 0, -h], [0, 0, -h]],
                     [0, 1, 0], [1, 0, 0], uvs=((0, 0), (1, 0), (1, 1), (0, 1)))


def needle_model(length: float, width: float, blades: int = 3) -> Mesh:
    """Needle tuft: thin quads along +x fanned around the x axis."""
    base = leaf_model(length, width)
    return Mesh.concat([base.transformed(rotation_x(k * math.pi / blades)) for k in range(blades)])


def submodel_table(sp: SpeciesConfig) -> list[Mesh]:
    length, width = sp.leaf_size
    if sp.leaf_model == "needle":
        return [needle_model(length, width)]
    if sp.leaf_model == "leaf":
        return [leaf_model(length, width)]
    raise ValueError(f"species {sp.name!r}: unknown leaf model {sp.leaf_model!r}")


def base_radius(sp: SpeciesConfig) -> float:
    lo, hi = sp.params.get("trunk_width", COMMON_DEFAULTS["trunk_width"])
    return 0.5 * (lo + hi)


def build_tree(sp: SpeciesConfig, iterations: int, rng, defn: LSystemDef | None = None) -> TreeGeometry:
    """Derive and interpret one tree; the returned geometry carries its low LOD."""
    defn = defn or species_lsystem(sp)
    consts = _constants(sp)
    arng = rng.fork("axiom")
    sampled = {k: arng.uniform(*consts[k]) for k in AXIOM_PARAMS}
    axiom = parse_lsystem(_axiom(**sampled)).axiom
    modules = derive(dataclasses.replace(defn, axiom=axiom), iterations, rng.fork("derive"))
    table = submodel_table(sp)
    geom = interpret(modules, sp.edges, base_radius(sp), table, rng.fork("leaves"))
    build_low_lod(geom, table)
    return geom


def lod_reduction(geom: TreeGeometry) -> float:
    """Fraction of vertices removed by the low LOD (branches and canopy together)."""
    high = geom.branch_vertices + geom.canopy_vertices
    low = geom.low_lod.branch_vertices + geom.low_lod.canopy_vertices
    return 1.0 - low / high if high else 0.0


def vertex_summary(geom: TreeGeometry) -> dict:
    lo = geom.low_lod
    return {
        "edges": geom.edge_count,
        "high_branches": geom.branch_vertices,
        "high_canopy": geom.canopy_vertices,
        "low_branches": lo.branch_vertices if lo else 0,
        "low_canopy": lo.canopy_vertices if lo else 0,
    }


__all__ = ["TREE_TYPES", "species_source", "species_lsystem", "leaf_model", "needle_model",
           "submodel_table", "build_tree", "lod_reduction", "vertex_summary", "base_radius"]

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from forestgen.config import RngStream
from forestgen.lsystem import parse_modules
from forestgen.mesh import quad_mesh
from forestgen.turtle import (SubModelRef, TurtleError, apply_tropism, build_low_lod,
                              connect_cross_sections, inject_submodel, interpret, leaf_spiral,
                              merge_refs, submodel_frame, trace, tropism_alpha)


def ring(radius, y, n=6):
    """Counter-clockwise about +y, the turtle's winding."""
    phi = 2 * np.pi * np.arange(n) / n
    return np.stack([radius * np.cos(phi), np.full(n, y), -radius * np.sin(phi)], axis=1)


def test_three_segment_branch_with_radius_step():
    g = interpret(parse_modules("F(1)!(0.6)F(1)F(1)"), edges=6)
    sk = g.skeleton
    assert sk.ring_count == 4
    # F extrudes at the current radius, so the first segment is a straight prism
    assert np.allclose(sk.radii, [1.0, 1.0, 0.6, 0.6])
    assert np.allclose(sk.centers, [[0, 0, 0], [0, 1, 0], [0, 2, 0], [0, 3, 0]])
    assert g.branch_mesh.triangle_count == 3 * 12
    assert g.branch_mesh.vertex_count == 4 * 6
    radial = g.branch_mesh.positions * [1, 0, 1]
    assert np.all(np.sum(g.branch_mesh.normals * radial, axis=1) > 0)


def test_push_pop_shares_base_ring():
    sk, _, st_ = trace(parse_modules("[F(1)]F(1)"))
    assert sk.segments.tolist() == [[0, 1], [0, 2]]
    assert np.allclose(st_.position, [0, 1, 0])


def test_turn_left_extrudes_sideways():
    sk, _, st_ = trace(parse_modules(f"+({math.pi / 2})F(1)"))
    end = st_.position
    assert end @ np.array([0, 1, 0]) == pytest.approx(0, abs=1e-12)
    assert np.linalg.norm(end) == pytest.approx(1)


def test_dollar_resets_heading():
    _, _, st_ = trace(parse_modules("&(0.7)/(1.1)$F(2)"))
    assert np.allclose(st_.heading, [0, 1, 0])
    assert abs(st_.heading @ st_.up) < 1e-12


def test_percent_closes_branch():
    sk, _, _ = trace(parse_modules("F(1)%"))
    assert sk.radii[-1] == 0.0
    assert np.allclose(sk.centers[-1], sk.centers[-2])


def test_submodel_module_records_ref():
    _, refs, _ = trace(parse_modules("F(2)~(1)"))
    assert len(refs) == 1 and refs[0].model_index == 1
    assert np.allclose(refs[0].position, [0, 2, 0])


@pytest.mark.parametrize("text, offset", [("F(1)]", 1), ("F(1)?F(1)", 1)])
def test_errors_name_offset(text, offset):
    with pytest.raises(TurtleError) as info:
        trace(parse_modules(text))
    assert info.value.offset == offset


def test_placeholder_letters_draw_nothing():
    sk, refs, _ = trace(parse_modules("A(1,2)F(1)B"))
    assert len(sk.segments) == 1 and not refs


def test_tropism_alpha_example():
    assert tropism_alpha([0, 1, 0], [1, 0, 0], 0.22) == pytest.approx(0.22 / (math.pi / 2), abs=1e-5)
    assert tropism_alpha([0, 1, 0], [1, 0, 0], 0.22) == pytest.approx(0.14006, abs=1e-5)


def test_tropism_singular_and_zero_cases():
    assert tropism_alpha([0.3, 0.2, 0.9], [1, 2, 0.5], 0.0) == 0.0
    assert tropism_alpha([0, 1, 0], [0, 3, 0], 0.5) == 0.0
    assert tropism_alpha([0, 1, 0], [0, -1, 0], 0.5) == 0.0


def test_tropism_never_increases_angle():
    h, u = np.array([0.0, 1.0, 0.0]), np.array([0.0, 0.0, 1.0])
    v = np.array([0.3, -1.0, 0.2])
    prev = math.acos(h @ v / np.linalg.norm(v))
    for _ in range(200):
        h, u = apply_tropism(h, u, v, 0.4)
        ang = math.acos(np.clip(h @ v / np.linalg.norm(v), -1, 1))
        assert ang <= prev + 1e-12
        assert abs(h @ u) < 1e-6
        prev = ang


def test_tropism_module_bends_branch():
    _, _, st_ = trace(parse_modules("T(1,0,0,0.3)F(1)F(1)F(1)"))
    assert st_.heading[0] > 0.3


def test_cylinder_normals_point_outward():
    m = connect_cross_sections(ring(1, 0), ring(1, 1))
    radial = m.positions.copy()
    radial[:, 1] = 0
    radial /= np.linalg.norm(radial, axis=1, keepdims=True)
    assert np.allclose(m.normals, radial, atol=1e-9)
    assert m.triangle_count == 12


def test_cone_normals_tilt_up():
    m = connect_cross_sections(ring(1, 0), ring(0.6, 1))
    half_angle = math.atan2(0.4, 1.0)
    assert np.allclose(m.normals[:, 1], math.sin(half_angle), atol=1e-9)
    assert np.allclose(np.linalg.norm(m.normals, axis=1), 1)


def test_two_edge_ribbon():
    m = connect_cross_sections(ring(1, 0, 2), ring(1, 1, 2))
    assert m.triangle_count == 4
    assert np.allclose(np.linalg.norm(m.normals, axis=1), 1)


def test_degenerate_face_falls_back_to_axis():
    tip = np.zeros((6, 3)) + [0, 1, 0]
    m = connect_cross_sections(ring(0, 0), tip)
    assert np.all(np.isfinite(m.normals))
    assert np.allclose(m.normals, [0, 1, 0])


def test_aligned_submodel_is_identity():
    ref = SubModelRef(np.zeros(3), np.array([1.0, 0, 0]), np.array([0, 1.0, 0]), 0)
    assert np.allclose(submodel_frame(ref), np.eye(4))


def test_upright_submodel():
    ref = SubModelRef(np.array([0, 5.0, 0]), np.array([0, 1.0, 0]), np.array([-1.0, 0, 0]), 0)
    m = submodel_frame(ref)
    assert np.allclose(m[:3, 0], [0, 1, 0]) and np.allclose(m[:3, 1], [-1, 0, 0])
    assert np.allclose(m[:3, 3], [0, 5, 0])
    leaf = quad_mesh([[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0]], [0, 0, 1], [1, 0, 0])
    out = inject_submodel(ref, leaf)
    assert np.allclose(np.linalg.norm(out.normals, axis=1), 1)
    assert np.allclose(out.positions[1], [0, 6, 0])


def test_leaf_spiral_empty():
    assert leaf_spiral([0, 0, 0], [0, 1, 0], 1, 1, [0, 0, 1], 0, 0, 1.0, 0.5)[0] == []


def test_leaf_spiral_exact():
    a_r = math.radians(137.5)
    refs, phase = leaf_spiral([0, 0, 0], [0, 8, 0], 0.5, 0.5, [0, 0, 1], 8, 0, a_r, 0.3)
    assert len(refs) == 8
    ys = np.array([r.position[1] for r in refs])
    assert np.allclose(np.diff(ys), 1.0)
    side = np.cross([0, 1, 0], [0, 0, 1])
    for k, r in enumerate(refs):
        radial = r.position - [0, r.position[1], 0]
        assert np.linalg.norm(radial) == pytest.approx(0.5)
        ang = math.atan2(radial @ side, radial @ [0, 0, 1])
        assert math.remainder(ang - k * a_r, 2 * math.pi) == pytest.approx(0, abs=1e-9)
        assert np.linalg.norm(r.heading) == pytest.approx(1) and np.linalg.norm(r.up) == pytest.approx(1)
        # heading tilted out of the radial direction by the lift angle
        assert r.heading[1] == pytest.approx(math.sin(0.3))
    assert phase == pytest.approx(8 * a_r)


def test_leaf_spiral_jitter_range():
    a_r = 0.8
    refs, _ = leaf_spiral([0, 0, 0], [0, 1e4, 0], 1, 1, [0, 0, 1], 10_000, 0, a_r, 0.0, RngStream(3))
    side = np.cross([0, 1, 0], [0, 0, 1])
    ang = np.unwrap([math.atan2(r.position @ side, r.position @ [0, 0, 1]) for r in refs])
    d = np.diff(ang)
    assert d.min() >= a_r / 2 - 1e-9 and d.max() < 3 * a_r / 2
    dy = np.diff([r.position[1] for r in refs])
    assert dy.min() >= 0.5 - 1e-9 and dy.max() < 1.5


def test_merge_pairs():
    a = SubModelRef(np.array([0.0, 0, 0]), np.array([1.0, 0, 0]), np.array([0, 1.0, 0]), 2)
    b = SubModelRef(np.array([2.0, 0, 0]), np.array([0, 0, 1.0]), np.array([0, 1.0, 0]), 2)
    merged = merge_refs([a, b])
    assert len(merged) == 1
    m = merged[0]
    assert np.allclose(m.position, [1, 0, 0])
    assert np.allclose(m.heading, np.array([1, 0, 1]) / math.sqrt(2))
    assert m.width_scale == 2.0 and m.height_scale == pytest.approx(1.1)
    assert len(merge_refs([a, b, a])) == 2 and merge_refs([a, b, a])[-1] is a


def test_low_lod_ratio_on_twig_like_string():
    leaf = quad_mesh([[0, -0.5, 0], [1, -0.5, 0], [1, 0.5, 0], [0, 0.5, 0]], [0, 0, 1], [1, 0, 0])
    text = "!(0.3)F(2,6,0,2.4,0.4)[&(0.5)F(1,5,0,2.4,0.4)]/(2)F(1,3,0,2.4,0.4)"
    hi = interpret(parse_modules(text), edges=6, submodels=[leaf], rng=RngStream(1))
    lo = build_low_lod(hi, [leaf])
    assert lo.branch_vertices * 6 == hi.branch_vertices * 2
    assert len(lo.refs) == math.ceil(len(hi.refs) / 2)
    assert abs(lo.canopy_vertices - hi.canopy_vertices / 2) <= 2 * leaf.vertex_count


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.sampled_from("+&/"), st.floats(-6.3, 6.3)), min_size=1, max_size=200))
def test_frame_stays_orthonormal(turns):
    text = "".join(f"{s}({a})F(0.1)" for s, a in turns)
    _, _, st_ = trace(parse_modules(text))
    assert abs(np.linalg.norm(st_.heading) - 1) < 1e-6
    assert abs(np.linalg.norm(st_.up) - 1) < 1e-6
    assert abs(st_.heading @ st_.up) < 1e-6


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_branch_mesh_unit_normals(seed):
    from forestgen.lsystem import derive, twig_lsystem

    mods = derive(twig_lsystem(), 5, RngStream(seed))
    g = interpret(mods, edges=6)
    n = g.branch_mesh.normals
    t = g.branch_mesh.tangents
    assert np.allclose(np.linalg.norm(n, axis=1), 1, atol=1e-4)
    assert np.allclose(np.linalg.norm(t, axis=1), 1, atol=1e-4)
    assert g.branch_mesh.triangles.max() < g.branch_mesh.vertex_count
    assert g.branch_mesh.triangle_count == 12 * len(g.skeleton.segments)

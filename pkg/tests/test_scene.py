import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from forestgen.render.camera import Camera, frustum_planes
from forestgen.scene import (HIGH, LOW, build_quadtree, chebyshev_distance, sphere_frustum_test,
                             stop_recursion, visible_quads)


def ancestors(node, root):
    path = []

    def find(n, trail):
        if n is node:
            path.extend(trail)
            return True
        return any(find(c, trail + [n]) for c in n.children)

    find(root, [])
    return path


def test_leaf_counts_and_widths():
    assert len(list(build_quadtree(100.0, 1).leaves())) == 4
    leaves = list(build_quadtree(100.0, 4).leaves())
    assert len(leaves) == 256
    assert {leaf.width for leaf in leaves} == {6.25}
    assert {leaf.depth for leaf in leaves} == {4}


def test_children_tile_parent():
    root = build_quadtree(64.0, 3)
    for node in root.walk():
        if node.children:
            assert len(node.children) == 4
            cs = np.array([c.center for c in node.children])
            assert np.allclose(cs.mean(axis=0), node.center)
            assert all(c.width == node.width / 2 for c in node.children)
            assert np.allclose(np.abs(cs - node.center), node.width / 4)


def test_stop_rule_example():
    root = build_quadtree(100.0, 3)
    node = next(n for n in root.walk() if n.depth == 1 and n.center == (25.0, 25.0))
    assert node.width == 50.0
    assert not stop_recursion(node, (0.0, 0.0, 0.0), 0.5, 3)
    assert stop_recursion(node, (0.0, 0.0, -0.01), 0.49, 3)
    leaf = next(root.leaves())
    assert stop_recursion(leaf, leaf.center + (0,), 100.0, 3)


def test_camera_at_centre_gets_deepest_nodes_nearby():
    root = build_quadtree(100.0, 2)
    sel = visible_quads(root, (0.0, 2.0, 0.0), 10.0, culling=False)
    assert len(sel) == 16
    assert all(n.depth == 2 and lod == HIGH for n, lod in sel)


def _check_antichain_and_cover(sel, root):
    nodes = [n for n, _ in sel]
    ids = {n.ident for n in nodes}
    for n in nodes:
        assert not ids & {a.ident for a in ancestors(n, root)}
    return nodes


@settings(max_examples=60, deadline=None)
@given(st.floats(-60, 60), st.floats(0.5, 30), st.floats(-60, 60), st.floats(0.2, 2.0))
def test_selection_is_a_partition_without_culling(x, y, z, tau):
    root = build_quadtree(100.0, 4)
    sel = visible_quads(root, (x, y, z), tau, culling=False)
    nodes = _check_antichain_and_cover(sel, root)
    # without culling the selected nodes tile the whole terrain
    assert sum(n.width ** 2 for n in nodes) == pytest.approx(100.0 ** 2)
    for n, lod in sel:
        assert lod == (HIGH if n.depth >= 3 else LOW)


@settings(max_examples=60, deadline=None)
@given(st.floats(-60, 60), st.floats(0.5, 30), st.floats(-60, 60), st.floats(0.2, 2.0))
def test_lod_monotone_in_distance(x, y, z, tau):
    root = build_quadtree(100.0, 4)
    sel = visible_quads(root, (x, y, z), tau, culling=False)
    for depth in range(5):
        hi = [chebyshev_distance(n, (x, y, z)) for n, lod in sel if n.depth == depth and lod == HIGH]
        lo = [chebyshev_distance(n, (x, y, z)) for n, lod in sel if n.depth == depth and lod == LOW]
        if hi and lo:
            assert min(lo) >= max(hi)


@settings(max_examples=60, deadline=None)
@given(st.floats(-50, 50), st.floats(0.5, 20), st.floats(-50, 50), st.floats(-math.pi, math.pi),
       st.floats(-1.2, 1.2))
def test_culled_selection_matches_brute_force(x, y, z, yaw, pitch):
    root = build_quadtree(100.0, 4)
    cam = Camera((x, y, z), yaw, pitch, 1.0, 1.0, 500.0)
    pv = cam.view_projection()
    planes = frustum_planes(pv)
    culled = visible_quads(root, cam.position, 0.75, pv)
    full = visible_quads(root, cam.position, 0.75, culling=False)
    _check_antichain_and_cover(culled, root)
    full_ids = {n.ident: lod for n, lod in full}
    for n, lod in culled:
        assert sphere_frustum_test(n, planes)
        assert full_ids.get(n.ident) == lod
    for n, _ in full:
        if n.ident not in {m.ident for m, _ in culled}:
            # dropped only when this node or an ancestor fails the test
            assert any(not sphere_frustum_test(a, planes) for a in ancestors(n, root) + [n])


def test_nodes_behind_camera_are_dropped():
    root = build_quadtree(100.0, 4)
    cam = Camera((0.0, 2.0, 0.0), 0.0, 0.0, math.radians(60), 1.0, 500.0)
    sel = visible_quads(root, cam.position, 0.75, cam.view_projection())
    for n, _ in sel:
        # a node whose far edge lies more than 2w behind the camera cannot survive
        assert n.center[1] + n.width / 2 > -2 * n.width - 1e-9
    assert all(n.center[1] > -50 for n, _ in sel)


def test_sphere_examples():
    root = build_quadtree(100.0, 4)
    cam = Camera((0.0, 2.0, 0.0), 0.0, 0.0, math.radians(60), 1.0, 500.0)
    planes = frustum_planes(cam.view_projection())
    leaf = min(root.leaves(), key=lambda n: math.hypot(*n.center))
    assert sphere_frustum_test(leaf, planes)
    far_behind = build_quadtree(6.25, 0)
    far_behind.center = (0.0, -1000.0)
    assert not sphere_frustum_test(far_behind, planes)
    # just outside the left plane of a 60 degree frustum, but within 2w of it
    side = build_quadtree(6.25, 0)
    side.center = (40.0 * math.tan(math.radians(30)) + 5.0, 40.0)
    assert sphere_frustum_test(side, planes)
    side.center = (40.0 * math.tan(math.radians(30)) + 20.0, 40.0)
    assert not sphere_frustum_test(side, planes)


def test_sample_scene_partitions_plants(sample_engine):
    scene = sample_engine.scene
    assert len(scene.leaf_nodes()) == 256
    total = 0
    for leaf in scene.leaf_nodes():
        for t in leaf.trees:
            assert leaf.contains(t.position[0], t.position[2])
        total += len(leaf.trees)
    assert total == len(scene.instances) > 0


def test_pool_variants_bounded(sample_engine):
    scene = sample_engine.scene
    variants = scene.config.ecosystem.variants
    for s, it, v in scene.pool.keys():
        assert 0 <= v < variants
    for t in scene.instances:
        assert t.pool_key in scene.pool


def test_stats(sample_engine):
    st_ = sample_engine.scene.stats()
    assert st_["nodes_per_depth"] == {0: 1, 1: 4, 2: 16, 3: 64, 4: 256}
    assert st_["vertices_low"] < st_["vertices_high"]

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from forestgen.config import GroundCoverSpec, RngStream
from forestgen.groundcover import (LEAF_EPSILON, TILT_RANGE, board_poses, build_crossed_billboard,
                                   build_models, build_twig, instance_count, scatter)
from forestgen.lsystem import derive, twig_lsystem
from forestgen.terrain import Terrain
from forestgen.turtle import trace

from conftest import FixedRng


def flat(x, z):
    return np.zeros(np.broadcast(x, z).shape)


def test_instance_count_examples():
    assert instance_count(0.0, 0.2, 3, 100) == 0
    assert instance_count(1.5, 0.2, 3, 100) == 1000
    assert instance_count(1.0, 0.2, 2, 100) == 2 * instance_count(1.0, 0.2, 4, 100)


@given(st.floats(0, 5), st.floats(0, 1), st.integers(1, 6), st.sampled_from([10.0, 50.0, 100.0]), st.integers(1, 4))
def test_instance_count_homogeneity(rho, d0, n_t, w, k):
    exact = d0 * rho / n_t * w * w
    if abs(exact / k - round(exact / k)) < 1e-6 and abs(exact - round(exact)) < 1e-6:
        assert instance_count(rho, d0, k * n_t, w) * k == instance_count(rho, d0, n_t, w)


def test_board_yaws():
    poses = board_poses(4, RngStream(0))
    assert [p.yaw for p in poses] == [0.0, math.pi / 4, math.pi / 2, 3 * math.pi / 4]
    low = board_poses(2, RngStream(0))
    assert low[1].yaw - low[0].yaw == math.pi / 2


def test_single_board():
    m = build_crossed_billboard(1, RngStream(1))
    assert m.vertex_count == 4 and m.triangle_count == 2
    # base pinned at the origin
    assert np.allclose(m.positions[:2].mean(axis=0), 0.0)


def test_tilt_range():
    rng = RngStream(9)
    phis = np.array([p.tilt for _ in range(10_000) for p in board_poses(1, rng)])
    assert phis.min() >= TILT_RANGE[0] and phis.max() < TILT_RANGE[1]


def test_twig_forced_straight_chain():
    # u = 0.9 picks p2 for A and p4 for B
    mods = derive(twig_lsystem(), 2, FixedRng(0.9))
    sk, _, _ = trace(mods, base_radius=2.0)
    assert len(sk.segments) == 2
    assert np.allclose(sk.radii[1:], [1.0, 0.707])
    assert np.allclose(np.diff(sk.centers[:, 1]), [10, 9])


def test_twig_zero_iterations_is_empty():
    assert build_twig(RngStream(0), iterations=0).is_empty


def test_twig_lies_flat():
    m = build_twig(FixedRng(0.9), iterations=2, size=1.0)
    lo, hi = m.bounds()
    ext = hi - lo
    assert ext[1] <= max(ext[0], ext[2])
    assert lo[1] == pytest.approx(0.0, abs=1e-9)
    for seed in range(5):
        lo, hi = build_twig(RngStream(seed)).bounds()
        assert hi[1] - lo[1] <= max(hi[0] - lo[0], hi[2] - lo[2])


def test_zero_density_scatters_nothing():
    t = Terrain(100.0, 2, 5, flat)
    layer = scatter(GroundCoverSpec("leaves", density=0.0), t, RngStream(1))
    assert layer.instance_count == 0 and not layer.tiles


def test_leaf_scatter_on_flat_ground():
    t = Terrain(100.0, 3, 5, flat)
    spec = GroundCoverSpec("leaves", density=1.0, default_density=0.4)
    layer = scatter(spec, t, RngStream(5))
    assert layer.instance_count == 4000
    half = 50.0
    for (ix, iz), groups in layer.tiles.items():
        for g in groups:
            pos = g.matrices[:, :3, 3]
            assert np.allclose(pos[:, 1], LEAF_EPSILON)
            assert np.all(np.abs(pos[:, [0, 2]]) <= half)
            tix, tiz = t.tile_index(pos[:, 0], pos[:, 2])
            assert np.all(tix == ix) and np.all(tiz == iz)
            lin = g.matrices[:, :3, :3]
            s = np.linalg.norm(lin[:, :, 0], axis=1)
            assert np.all((s >= spec.scale[0]) & (s < spec.scale[1]))
            # scale times a y rotation
            assert np.allclose(np.einsum("nij,nik->njk", lin, lin), s[:, None, None] ** 2 * np.eye(3))


def test_billboard_models_have_two_board_low_lod():
    spec = GroundCoverSpec("billboard", species_count=3, board_count=4)
    models = build_models(spec, RngStream(2))
    assert len(models) == 3
    for m in models:
        assert m.high.triangle_count == 8 and m.low.triangle_count == 4

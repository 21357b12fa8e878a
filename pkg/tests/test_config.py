import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from forestgen.config import (ConfigError, RngStream, config_from_dict, load_config, rng_fork,
                              rng_uniform, sample_config_path)


def test_minimal_config_gets_defaults(tmp_path):
    path = tmp_path / "min.yaml"
    path.write_text("seed: 42\n")
    cfg = load_config(path)
    assert cfg.seed == 42
    assert cfg.quadtree.threshold == 0.75
    assert cfg.ecosystem.steps_per_year == 10
    assert cfg.lighting.ambient == 0.3
    assert cfg.lighting.translucency == 1.0
    assert cfg.render.exposure == 1.0
    assert cfg.species == ()


def test_branching_probabilities_must_sum_to_one():
    raw = {"seed": 1, "species": [{"name": "birch", "branchings": [
        {"angles": [180, 180], "probability": 0.5},
        {"angles": [120, 120, 120], "probability": 0.4}]}]}
    with pytest.raises(ConfigError, match="birch"):
        config_from_dict(raw)


def test_sample_config_round_trip(sample_config):
    assert len(sample_config.species) == 5
    assert sample_config.quadtree.max_depth == 4
    assert sample_config.terrain.width == 100
    again = load_config(sample_config_path())
    assert again == sample_config


@pytest.mark.parametrize("text, field", [
    ("quadtree: {max_depth: 0}", "max_depth"),
    ("terrain: {vertices_per_tile_edge: 1}", "vertices_per_tile_edge"),
    ("quadtree: {threshold: 0}", "threshold"),
    ("render: {scattering: {decay: 1.0}}", "decay"),
])
def test_invariant_violations_name_the_field(tmp_path, text, field):
    path = tmp_path / "bad.yaml"
    path.write_text("seed: 1\n" + text + "\n")
    with pytest.raises(ConfigError, match=field):
        load_config(path)


def test_malformed_yaml_reports_line(tmp_path):
    path = tmp_path / "bad.yaml"
    path.write_text("seed: 1\nterrain: [1, 2\n")
    with pytest.raises(ConfigError) as info:
        load_config(path)
    assert info.value.line is not None


def test_missing_file_is_a_config_error(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "nope.yaml")


def test_seed_override(tmp_path):
    path = tmp_path / "c.yaml"
    path.write_text("seed: 1\n")
    assert load_config(path, seed=9).seed == 9


def test_fork_is_deterministic():
    a = RngStream(42).fork("terrain").random_array(1000)
    b = RngStream(42).fork("terrain").random_array(1000)
    assert np.array_equal(a, b)


def test_fork_ignores_parent_consumption():
    parent = RngStream(42)
    parent.random_array(17)
    assert np.array_equal(parent.fork("x").random_array(10), RngStream(42).fork("x").random_array(10))


def test_forks_by_label_and_seed_differ():
    t = rng_fork(RngStream(42), "terrain").random_array(1000)
    e = rng_fork(RngStream(42), "ecosystem").random_array(1000)
    assert not np.any(t == e)
    assert not np.array_equal(rng_fork(RngStream(1), "x").random_array(1000),
                              rng_fork(RngStream(2), "x").random_array(1000))


def test_uniform_mean():
    rng = RngStream(7)
    xs = [rng_uniform(rng, 0.0, 1.0) for _ in range(100_000)]
    assert abs(np.mean(xs) - 0.5) < 0.01


def test_uniform_degenerate_and_reversed():
    rng = RngStream(0)
    assert rng_uniform(rng, 3.0, 3.0) == 3.0
    with pytest.raises(ValueError):
        rng_uniform(rng, 2.0, 1.0)


@given(st.integers(0, 2**32), st.floats(-1e6, 1e6), st.floats(0, 1e6))
def test_uniform_stays_in_half_open_range(seed, lo, span):
    hi = lo + span
    rng = RngStream(seed)
    for _ in range(20):
        x = rng_uniform(rng, lo, hi)
        assert (lo <= x < hi) or (x == lo == hi)


def test_uniform_half_pi_range():
    rng = RngStream(3)
    for _ in range(1000):
        assert -math.pi / 2 <= rng_uniform(rng, -math.pi / 2, math.pi / 2) < math.pi / 2

import json
import math
import random

import numpy as np
import pytest

from rdwsim import skeleton
from rdwsim.errors import EmptyFreeSpace, StaleCache
from rdwsim.gaincurve import GainBounds
from rdwsim.geom import PhysEnv, Point2
from rdwsim.horizon import t_max_over_orientations, max_times_by_orientation


def test_grid_counts():
    env = PhysEnv([[0, 0], [5, 0], [5, 5], [0, 5]], clearance=0.0)
    grid = skeleton.build(env, 0.5, 30)
    assert len(grid.positions) == 100
    assert grid.times.shape == (100, 30)
    assert len(grid.orientations) == 30


def test_positions_respect_clearance_and_obstacles():
    env = PhysEnv([[0, 0], [5, 0], [5, 5], [0, 5]],
                  [[[2, 2], [3, 2], [3, 3], [2, 3]]], clearance=0.3)
    grid = skeleton.build(env, 0.5, 8)
    for p in grid.positions:
        assert env.contains(p.x, p.y)
    assert Point2(2.25, 2.25) not in grid.positions  # inside the pillar's margin


def test_center_cell_values_match_direct_recompute(bounds, candidates, orientations):
    env = PhysEnv([[0, 0], [5, 0], [5, 5], [0, 5]], clearance=0.0)
    grid = skeleton.build(env, 0.5, 30)
    idx = grid.positions.index(Point2(2.25, 2.25))
    _, best = t_max_over_orientations(Point2(2.25, 2.25), 1.0, env,
                                      orientations, candidates, bounds)
    assert grid.best_time[idx] == pytest.approx(best, abs=1e-12)
    row = grid.times[idx]
    assert grid.harmonic_time[idx] == pytest.approx(len(row) / np.sum(1.0 / row), abs=1e-9)
    assert row.min() <= grid.harmonic_time[idx] <= grid.best_time[idx]


def test_harmonic_degeneracies(bounds):
    # a cell center exactly at the clearance distance has a zero-time
    # orientation (straight into the wall), which zeroes the harmonic mean
    env = PhysEnv([[0, 0], [5, 0], [5, 5], [0, 5]], clearance=0.25)
    grid = skeleton.build(env, 0.5, 4)  # orientations at 90, 180, 270, 0 deg
    edge = grid.positions.index(Point2(0.25, 2.25))
    assert grid.times[edge].min() == 0.0
    assert grid.harmonic_time[edge] == 0.0
    assert grid.best_time[edge] > 0.0

    # far from any wall every candidate circle is free: all orientations
    # unbounded, harmonic mean included
    wide = PhysEnv([[0, 0], [200, 0], [200, 200], [0, 200]], clearance=0.0)
    grid = skeleton.build(wide, 50.0, 4)
    inner = [i for i, p in enumerate(grid.positions)
             if 50 < p.x < 150 and 50 < p.y < 150]
    assert inner
    for i in inner:
        assert math.isinf(grid.best_time[i])
        assert math.isinf(grid.harmonic_time[i])


def test_harmonic_bounds_property(bounds):
    rng = random.Random(8)
    env = PhysEnv([[0, 0], [6, 0], [6, 4], [0, 4]], clearance=0.2)
    grid = skeleton.build(env, 0.5, 12)
    for i in range(len(grid.positions)):
        row = grid.times[i]
        assert row.min() - 1e-12 <= grid.harmonic_time[i] <= grid.best_time[i] + 1e-12
        assert grid.best_time[i] == row.max()


def test_spot_check_equivalence(bounds, candidates):
    env = PhysEnv([[0, 0], [5, 0], [5, 5], [0, 5]],
                  [[[1.5, 1.5], [2.5, 1.5], [2.5, 2.5], [1.5, 2.5]]], clearance=0.2)
    grid = skeleton.build(env, 0.5, 30)
    rng = random.Random(3)
    for _ in range(20):
        i = rng.randrange(len(grid.positions))
        j = rng.randrange(grid.lam)
        fresh = max_times_by_orientation(grid.positions[i], 1.0, env,
                                         [grid.orientations[j]], candidates, bounds)[0]
        assert fresh == grid.times[i][j]


def test_cache_round_trip(tmp_path):
    env = PhysEnv([[0, 0], [5, 0], [5, 5], [0, 5]], clearance=0.2)
    grid = skeleton.build(env, 0.5, 30)
    path = tmp_path / "cache.json"
    skeleton.save(grid, path)
    again = skeleton.load(path, env, 0.5, 30)
    assert np.array_equal(grid.times, again.times)
    assert np.array_equal(grid.best_time, again.best_time)
    assert np.array_equal(grid.harmonic_time, again.harmonic_time)
    assert grid.positions == again.positions
    assert grid.orientations == again.orientations
    # identical rebuild gives identical bytes
    skeleton.save(again, tmp_path / "cache2.json")
    assert (tmp_path / "cache.json").read_bytes() == (tmp_path / "cache2.json").read_bytes()


def test_stale_cache(tmp_path):
    env = PhysEnv([[0, 0], [5, 0], [5, 5], [0, 5]], clearance=0.2)
    grid = skeleton.build(env, 0.5, 10)
    path = tmp_path / "cache.json"
    skeleton.save(grid, path)
    with pytest.raises(StaleCache):
        skeleton.load(path, env, 0.5, 11)  # different fan size
    other = PhysEnv([[0, 0], [5, 0], [5, 5], [0, 5]], clearance=0.25)
    with pytest.raises(StaleCache):
        skeleton.load(path, other, 0.5, 10)  # environment changed
    with pytest.raises(StaleCache):
        skeleton.load(path, env, 0.5, 10, GainBounds(g_t_max=1.2))


def test_load_or_build_rebuilds_on_mismatch(tmp_path):
    env = PhysEnv([[0, 0], [5, 0], [5, 5], [0, 5]], clearance=0.2)
    path = tmp_path / "cache.json"
    grid = skeleton.load_or_build(path, env, 0.5, 6)
    assert path.exists()
    rebuilt = skeleton.load_or_build(path, env, 0.5, 8)
    assert rebuilt.lam == 8
    doc = json.loads(path.read_text())
    assert doc["header"]["lambda"] == 8


def test_empty_free_space():
    env = PhysEnv([[0, 0], [1, 0], [1, 1], [0, 1]], clearance=0.45)
    with pytest.raises(EmptyFreeSpace):
        skeleton.build(env, 0.5, 4)


def test_infinity_survives_cache(tmp_path):
    wide = PhysEnv([[0, 0], [200, 0], [200, 200], [0, 200]], clearance=0.0)
    grid = skeleton.build(wide, 50.0, 4)
    path = tmp_path / "cache.json"
    skeleton.save(grid, path)
    again = skeleton.load(path, wide, 50.0, 4)
    assert np.array_equal(grid.times, again.times)
    assert math.isinf(again.best_time.max())

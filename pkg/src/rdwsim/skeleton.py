"""Precomputed pose grid over an environment: walking-time table plus derived fields.

The environment is tiled with square cells; each free cell center is paired
with a fixed fan of orientations and the walking-time horizon is computed for
every such pose.  Two per-position summaries are derived: the best time over
orientations (how long a walker can last if reset to the best heading there)
and the harmonic mean over orientations (how forgiving the position is when
the next heading is unknown; one blocked orientation drags it to zero).

Times are stored for unit speed; divide by the walking speed to use them.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import EmptyFreeSpace, StaleCache
from .gaincurve import GainBounds, candidate_paths
from .geom import PhysEnv, Point2
from .horizon import max_times_by_orientation, skeleton_orientations

CACHE_FORMAT = "rdwsim-grid-v1"


def _harmonic_mean(row: np.ndarray) -> float:
    """Harmonic mean on the extended nonnegative reals: any 0 -> 0, all inf -> inf."""
    if np.any(row == 0.0):
        return 0.0
    inv = np.where(np.isinf(row), 0.0, 1.0 / row)
    s = inv.sum()
    if s == 0.0:
        return math.inf
    return float(len(row) / s)


@dataclass(frozen=True)
class SkeletonGrid:
    """Immutable pose-grid table for one environment (times at unit speed)."""

    delta: float
    lam: int
    k: int
    g_t_max: float
    r_min: float
    env_fingerprint: str
    positions: tuple[Point2, ...]
    orientations: tuple[float, ...]
    times: np.ndarray          # shape (n_positions, lam)
    best_time: np.ndarray      # max over orientations, per position
    harmonic_time: np.ndarray  # harmonic mean over orientations, per position

    def params_fingerprint(self) -> dict:
        return {
            "format": CACHE_FORMAT,
            "delta": self.delta,
            "lambda": self.lam,
            "k": self.k,
            "g_t_max": self.g_t_max,
            "r_min": self.r_min,
            "env": self.env_fingerprint,
        }


def grid_positions(env: PhysEnv, delta: float) -> list[Point2]:
    """Centers of the delta-sized tiling cells that lie in eroded free space."""
    x0, y0, x1, y1 = env.bbox
    nx = max(1, math.ceil((x1 - x0) / delta - 1e-9))
    ny = max(1, math.ceil((y1 - y0) / delta - 1e-9))
    out = []
    for j in range(ny):
        for i in range(nx):
            x = x0 + (i + 0.5) * delta
            y = y0 + (j + 0.5) * delta
            if env.contains(x, y):
                out.append(Point2(x, y))
    return out


def build(env: PhysEnv, delta: float = 0.5, lam: int = 30,
          bounds: GainBounds | None = None, k: int = 10) -> SkeletonGrid:
    """Compute the full walking-time table for an environment.

    Deterministic for identical inputs.  Raises EmptyFreeSpace when no cell
    center survives the clearance erosion.
    """
    bounds = bounds or GainBounds()
    positions = grid_positions(env, delta)
    if not positions:
        raise EmptyFreeSpace(f"no {delta} m cell center lies in the free space of this environment")
    orientations = skeleton_orientations(lam)
    candidates = candidate_paths(k, bounds)
    times = np.empty((len(positions), lam))
    for idx, pos in enumerate(positions):
        times[idx] = max_times_by_orientation(pos, 1.0, env, orientations, candidates, bounds)
    best = times.max(axis=1)
    harmonic = np.array([_harmonic_mean(times[i]) for i in range(len(positions))])
    return SkeletonGrid(
        delta=float(delta), lam=int(lam), k=int(k),
        g_t_max=bounds.g_t_max, r_min=bounds.r_min,
        env_fingerprint=env.fingerprint(),
        positions=tuple(positions),
        orientations=tuple(orientations),
        times=times, best_time=best, harmonic_time=harmonic,
    )


def _encode(value: float) -> float | None:
    return None if math.isinf(value) else value


def _decode(value) -> float:
    return math.inf if value is None else float(value)


def save(grid: SkeletonGrid, path) -> None:
    """Write the grid as one JSON document (inf encoded as null)."""
    doc = {
        "header": grid.params_fingerprint(),
        "positions": [[p.x, p.y] for p in grid.positions],
        "orientations": list(grid.orientations),
        "times": [[_encode(float(t)) for t in row] for row in grid.times],
        "best_time": [_encode(float(t)) for t in grid.best_time],
        "harmonic_time": [_encode(float(t)) for t in grid.harmonic_time],
    }
    blob = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    Path(path).write_text(blob, encoding="utf-8")


def load(path, env: PhysEnv, delta: float = 0.5, lam: int = 30,
         bounds: GainBounds | None = None, k: int = 10) -> SkeletonGrid:
    """Load a cache, refusing one built for different geometry or parameters."""
    bounds = bounds or GainBounds()
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    header = doc.get("header", {})
    expected = {
        "format": CACHE_FORMAT,
        "delta": float(delta),
        "lambda": int(lam),
        "k": int(k),
        "g_t_max": bounds.g_t_max,
        "r_min": bounds.r_min,
        "env": env.fingerprint(),
    }
    if header != expected:
        raise StaleCache(f"cache header {header} does not match expected {expected}")
    positions = tuple(Point2(float(x), float(y)) for x, y in doc["positions"])
    times = np.array([[_decode(t) for t in row] for row in doc["times"]])
    return SkeletonGrid(
        delta=float(delta), lam=int(lam), k=int(k),
        g_t_max=bounds.g_t_max, r_min=bounds.r_min,
        env_fingerprint=env.fingerprint(),
        positions=positions,
        orientations=tuple(float(o) for o in doc["orientations"]),
        times=times,
        best_time=np.array([_decode(t) for t in doc["best_time"]]),
        harmonic_time=np.array([_decode(t) for t in doc["harmonic_time"]]),
    )


def load_or_build(path, env: PhysEnv, delta: float = 0.5, lam: int = 30,
                  bounds: GainBounds | None = None, k: int = 10) -> SkeletonGrid:
    """Load the cache at ``path`` if it matches, else rebuild and overwrite it."""
    p = Path(path)
    if p.exists():
        try:
            return load(p, env, delta, lam, bounds, k)
        except StaleCache:
            pass
    grid = build(env, delta, lam, bounds, k)
    p.parent.mkdir(parents=True, exist_ok=True)
    save(grid, p)
    return grid

"""Independent oracles for the test suite.

Everything here recomputes expected values from first principles (marching,
enumeration, finite differences) without touching the analytic kernels under
test, so agreement is meaningful.
"""

import math
from itertools import combinations

import numpy as np


def point_free_mask(xs, ys, boundary, obstacles, clearance):
    """Crossing-number free-space test, vectorized over sample points."""

    def inside(ring):
        flags = np.zeros(xs.shape, bool)
        n = len(ring)
        for i in range(n):
            x1, y1 = ring[i]
            x2, y2 = ring[(i + 1) % n]
            cond = (np.asarray(y1 > ys) != np.asarray(y2 > ys))
            with np.errstate(divide="ignore", invalid="ignore"):
                xint = (x2 - x1) * (ys - y1) / (y2 - y1) + x1
            flags ^= cond & (xs < xint)
        return flags

    ok = inside(boundary)
    for obs in obstacles:
        ok &= ~inside(obs)
    mind2 = np.full(xs.shape, np.inf)
    for ring in [boundary] + list(obstacles):
        n = len(ring)
        for i in range(n):
            ax, ay = ring[i]
            bx, by = ring[(i + 1) % n]
            dx, dy = bx - ax, by - ay
            t = np.clip(((xs - ax) * dx + (ys - ay) * dy) / (dx * dx + dy * dy), 0.0, 1.0)
            d2 = (xs - ax - t * dx) ** 2 + (ys - ay - t * dy) ** 2
            mind2 = np.minimum(mind2, d2)
    return ok & (mind2 >= clearance * clearance)


def march_arc(x, y, heading, signed_radius, env_dict, step=1e-4, max_len=None):
    """First blocked sample along the tangent arc; inf if the full circle is free."""
    r = abs(signed_radius)
    if max_len is None:
        max_len = 2.0 * math.pi * r
    cx = x - signed_radius * math.sin(heading)
    cy = y + signed_radius * math.cos(heading)
    phi0 = math.atan2(y - cy, x - cx)
    spin = 1.0 if signed_radius > 0 else -1.0
    boundary = env_dict["boundary"]
    obstacles = env_dict.get("obstacles", [])
    c = env_dict.get("clearance", 0.0)
    n = int(max_len / step) + 1
    chunk = 65536
    for lo in range(1, n, chunk):
        s = np.arange(lo, min(lo + chunk, n)) * step
        ang = phi0 + spin * s / r
        xs = cx + r * np.cos(ang)
        ys = cy + r * np.sin(ang)
        free = point_free_mask(xs, ys, boundary, obstacles, c)
        bad = np.nonzero(~free)[0]
        if bad.size:
            return float(s[bad[0]])
    return math.inf


def march_ray(x, y, heading, env_dict, step=1e-4, max_len=100.0):
    """First blocked sample along a straight ray; inf if none within max_len."""
    boundary = env_dict["boundary"]
    obstacles = env_dict.get("obstacles", [])
    c = env_dict.get("clearance", 0.0)
    dx, dy = math.cos(heading), math.sin(heading)
    n = int(max_len / step) + 1
    chunk = 65536
    for lo in range(1, n, chunk):
        s = np.arange(lo, min(lo + chunk, n)) * step
        free = point_free_mask(x + s * dx, y + s * dy, boundary, obstacles, c)
        bad = np.nonzero(~free)[0]
        if bad.size:
            return float(s[bad[0]])
    return math.inf


def mw_u_and_exact_p(a, b):
    """Mann-Whitney by direct pair counting and full permutation enumeration.

    Returns (u_of_a, p_greater, p_less, p_two_sided).
    """

    def u_stat(xs, ys):
        u = 0.0
        for x in xs:
            for y in ys:
                if x > y:
                    u += 1.0
                elif x == y:
                    u += 0.5
        return u

    pooled = list(a) + list(b)
    n1 = len(a)
    u_obs = u_stat(a, b)
    ge = le = total = 0
    idx = set(range(len(pooled)))
    for comb in combinations(range(len(pooled)), n1):
        sel = set(comb)
        xs = [pooled[i] for i in comb]
        ys = [pooled[i] for i in idx - sel]
        u = u_stat(xs, ys)
        total += 1
        if u >= u_obs - 1e-12:
            ge += 1
        if u <= u_obs + 1e-12:
            le += 1
    p_g = ge / total
    p_l = le / total
    return u_obs, p_g, p_l, min(1.0, 2.0 * min(p_g, p_l))


def random_env_dict(rng, allow_obstacle=True):
    """A random rectangular room, optionally with one rectangular pillar."""
    w = rng.uniform(4.0, 8.0)
    h = rng.uniform(4.0, 8.0)
    x0 = rng.uniform(-3.0, 3.0)
    y0 = rng.uniform(-3.0, 3.0)
    clearance = rng.choice([0.0, 0.1, 0.2])
    obstacles = []
    if allow_obstacle and rng.random() < 0.5:
        ow = rng.uniform(0.5, 1.5)
        oh = rng.uniform(0.5, 1.5)
        ox = rng.uniform(x0 + 1.0, x0 + w - 1.0 - ow)
        oy = rng.uniform(y0 + 1.0, y0 + h - 1.0 - oh)
        obstacles.append([[ox, oy], [ox + ow, oy], [ox + ow, oy + oh], [ox, oy + oh]])
    return {
        "boundary": [[x0, y0], [x0 + w, y0], [x0 + w, y0 + h], [x0, y0 + h]],
        "obstacles": obstacles,
        "clearance": clearance,
    }

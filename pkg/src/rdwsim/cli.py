"""Batch front end: precompute caches, run trials, sweep comparisons, render reports.

All configuration is JSON (see docs/formats.md); the only interactivity is a
handful of override flags.  Exit codes: 0 ok, 1 runtime failure, 2 usage or
configuration error.
"""

from __future__ import annotations

import argparse
import json
import math
import statistics
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .errors import RdwError
from .gaincurve import GainBounds
from .geom import PhysEnv
from .controller import ALL_METHODS
from .sim import TrialConfig, mann_whitney_u, run_trial
from .skeleton import build as build_grid, load_or_build, save as save_grid

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2

CSV_COLUMNS = ("trial_id", "method", "seed", "n_users", "common_resets",
               "virtual_distances", "wall_time_ms", "status")

_ENV_DIR = Path(__file__).parent / "envs"


class UsageError(Exception):
    """Configuration or command-line problem; maps to exit code 2."""


def bundled_env_names() -> list[str]:
    return sorted(p.stem for p in _ENV_DIR.glob("*.json"))


def resolve_env(name: str) -> Path:
    """Accept either a bundled layout name or a path to an environment file."""
    p = Path(name)
    if p.suffix == ".json" and p.exists():
        return p
    bundled = _ENV_DIR / f"{name}.json"
    if bundled.exists():
        return bundled
    raise UsageError(f"unknown environment {name!r}; bundled layouts: {bundled_env_names()}")


def _merge(defaults: dict, override: dict) -> dict:
    out = dict(defaults)
    for key, val in override.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            merged = dict(out[key])
            merged.update(val)
            out[key] = merged
        else:
            out[key] = val
    return out


def _trial_config(cfg: dict, method: str, seed: int) -> TrialConfig:
    envs = cfg.get("envs")
    if not envs:
        raise UsageError("config needs a non-empty 'envs' list")
    if method not in ALL_METHODS:
        raise UsageError(f"unknown method {method!r}; supported methods: {list(ALL_METHODS)}")
    paths = tuple(str(resolve_env(e)) for e in envs)
    d = dict(cfg)
    d["method"] = method
    d["seed"] = seed
    return TrialConfig.from_dict(d, paths)


def _grid_cache_path(cache_dir: Path, env: PhysEnv, config: TrialConfig) -> Path:
    tag = (f"{env.fingerprint()[:16]}-d{config.delta}-l{config.lam}-k{config.k}"
           f"-g{config.bounds.g_t_max}-r{config.bounds.r_min}")
    return cache_dir / f"grid-{tag}.json"


def _load_grids(config: TrialConfig, cache_dir: Path | None):
    """Environments plus (for the coordinated method) their pose-grid caches."""
    envs = []
    for path in config.env_paths:
        env = PhysEnv.from_file(path)
        if config.clearance is not None and config.clearance != env.clearance:
            env = PhysEnv(env.boundary, env.obstacles, config.clearance)
        envs.append(env)
    if config.method != "ours":
        return envs, None
    grids = []
    built: dict[str, object] = {}
    for env in envs:
        fp = env.fingerprint()
        if fp not in built:
            if cache_dir is None:
                built[fp] = build_grid(env, config.delta, config.lam, config.bounds, config.k)
            else:
                built[fp] = load_or_build(_grid_cache_path(cache_dir, env, config), env,
                                          config.delta, config.lam, config.bounds, config.k)
        grids.append(built[fp])
    return envs, grids


def _run_task(args: tuple) -> list[str]:
    label, config, cache_dir, timing = args
    trial_id = f"{label}:{config.method}:{config.seed}"
    try:
        envs, grids = _load_grids(config, cache_dir)
        stats = run_trial(config, envs=envs, grids=grids)
    except Exception as exc:  # recorded per-trial; the sweep carries on
        return [trial_id, config.method, str(config.seed), "", "", "",
                "", f"error:{type(exc).__name__}"]
    row = [trial_id, stats.method, str(stats.seed), str(stats.n_users),
           str(stats.common_resets),
           ";".join(repr(d) for d in stats.virtual_distances),
           str(int(round(stats.wall_ms))) if timing else "",
           stats.status]
    return row


def run_tasks(tasks: list[tuple], jobs: int) -> list[list[str]]:
    """Run trial tasks, preserving task order regardless of worker scheduling."""
    if jobs <= 1 or len(tasks) <= 1:
        return [_run_task(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_run_task, tasks, chunksize=1))


def _write_csv(path, rows: list[list[str]]) -> None:
    lines = [",".join(CSV_COLUMNS)]
    lines += [",".join(row) for row in rows]
    text = "\n".join(lines) + "\n"
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def _precompute_caches(configs: list[TrialConfig], cache_dir: Path) -> None:
    cache_dir.mkdir(parents=True, exist_ok=True)
    done = set()
    for config in configs:
        if config.method != "ours":
            continue
        for path in config.env_paths:
            env = PhysEnv.from_file(path)
            if config.clearance is not None and config.clearance != env.clearance:
                env = PhysEnv(env.boundary, env.obstacles, config.clearance)
            cpath = _grid_cache_path(cache_dir, env, config)
            if cpath in done:
                continue
            load_or_build(cpath, env, config.delta, config.lam, config.bounds, config.k)
            done.add(cpath)


# -- subcommands -----------------------------------------------------------------


def cmd_precompute(args) -> int:
    env = PhysEnv.from_file(resolve_env(args.env))
    bounds = GainBounds(r_min=args.radius_min)
    t0 = time.perf_counter()
    grid = build_grid(env, args.delta, args.orientations, bounds, args.k)
    elapsed = time.perf_counter() - t0
    save_grid(grid, args.out)
    print(f"{len(grid.positions)} positions x {grid.lam} orientations -> {args.out} "
          f"({elapsed:.2f}s)")
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = json.loads(Path(args.config).read_text(encoding="utf-8"))
    label = cfg.get("label", Path(args.config).stem)
    method = args.method or cfg.get("method", "ours")
    seed0 = args.seed if args.seed is not None else int(cfg.get("seed", 0))
    configs = [_trial_config(cfg, method, seed0 + i) for i in range(args.trials)]
    cache_dir = Path(args.cache_dir) if args.cache_dir else None
    if cache_dir is not None:
        _precompute_caches(configs, cache_dir)
    tasks = [(label, c, cache_dir, args.timing) for c in configs]
    rows = run_tasks(tasks, args.jobs)
    _write_csv(args.out, rows)
    return EXIT_OK


def _five_number(data: list[float]) -> dict:
    if len(data) == 1:
        q1 = med = q3 = float(data[0])
    else:
        q1, med, q3 = statistics.quantiles(data, n=4, method="inclusive")
    return {
        "n": len(data),
        "mean": statistics.fmean(data),
        "median": med,
        "q1": q1,
        "q3": q3,
        "min": min(data),
        "max": max(data),
    }


def summarize(rows: list[list[str]]) -> dict:
    """Per (config, method) reset statistics plus pairwise tests against 'ours'."""
    resets: dict[tuple[str, str], list[int]] = {}
    failed = 0
    for row in rows:
        rec = dict(zip(CSV_COLUMNS, row))
        if rec["status"] != "ok":
            failed += 1
            continue
        label = rec["trial_id"].rsplit(":", 2)[0]
        resets.setdefault((label, rec["method"]), []).append(int(rec["common_resets"]))
    groups = []
    labels = sorted({k[0] for k in resets})
    for label in labels:
        methods = sorted({k[1] for k in resets if k[0] == label})
        ours = resets.get((label, "ours"))
        n_comparisons = sum(1 for m in methods if m != "ours") if ours else 0
        for method in methods:
            entry = {"config": label, "method": method}
            entry.update(_five_number(resets[(label, method)]))
            if ours and method != "ours":
                u, p = mann_whitney_u(ours, resets[(label, method)])
                entry["vs_ours"] = {
                    "U": u,
                    "p": p,
                    "p_bonferroni": min(1.0, p * n_comparisons),
                    "comparisons": n_comparisons,
                }
            groups.append(entry)
    return {"groups": groups, "failed_trials": failed}


def cmd_compare(args) -> int:
    spec = json.loads(Path(args.spec).read_text(encoding="utf-8"))
    methods = args.methods.split(",") if args.methods else spec.get("methods")
    if not methods:
        raise UsageError("spec needs a non-empty 'methods' list")
    for m in methods:
        if m not in ALL_METHODS:
            raise UsageError(f"unknown method {m!r}; supported methods: {list(ALL_METHODS)}")
    spec_configs = spec.get("configs")
    if not spec_configs:
        raise UsageError("spec needs a non-empty 'configs' list")
    trials = args.trials if args.trials is not None else int(spec.get("trials", 1))
    base_seed = args.seed if args.seed is not None else int(spec.get("base_seed", 0))
    jobs = args.jobs if args.jobs is not None else int(spec.get("jobs", 1))
    defaults = spec.get("defaults", {})

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    cache_dir = out_dir / "cache"

    tasks = []
    for cfg in spec_configs:
        label = cfg.get("label")
        if not label or any(ch in label for ch in ":,/\\"):
            raise UsageError(f"every config needs a filename-safe 'label', got {label!r}")
        merged = _merge(defaults, cfg)
        for method in methods:
            for t in range(trials):
                config = _trial_config(merged, method, base_seed + t)
                tasks.append((label, config, cache_dir, args.timing))
    tasks.sort(key=lambda t: (t[0], t[1].method, t[1].seed))
    _precompute_caches([t[1] for t in tasks], cache_dir)

    rows = run_tasks(tasks, jobs)
    _write_csv(out_dir / "results.csv", rows)
    summary = summarize(rows)
    (out_dir / "summary.json").write_text(
        json.dumps(summary, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    print(f"{len(rows)} trials -> {out_dir / 'results.csv'}")
    return EXIT_OK


# -- SVG emission ------------------------------------------------------------------
#
# Plain hand-emitted vector documents; no rendering dependency.


def _svg_header(width: float, height: float) -> list[str]:
    return [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0f}" '
            f'height="{height:.0f}" viewBox="0 0 {width:.0f} {height:.0f}">',
            '<style>text{font-family:sans-serif;font-size:11px}</style>',
            f'<rect width="{width:.0f}" height="{height:.0f}" fill="white"/>']


def svg_boxplot(title: str, groups: dict[str, list[float]]) -> str:
    methods = list(groups)
    width = 90 + 110 * len(methods)
    height = 320
    top, bottom, left = 40, 280, 70
    vmax = max(max(vs) for vs in groups.values())
    vmin = min(min(vs) for vs in groups.values())
    span = (vmax - vmin) or 1.0
    vmax += 0.05 * span
    vmin -= 0.05 * span

    def ypix(v: float) -> float:
        return bottom - (v - vmin) / (vmax - vmin) * (bottom - top)

    out = _svg_header(width, height)
    out.append(f'<text x="{width / 2:.1f}" y="20" text-anchor="middle">{title}</text>')
    for i in range(5):
        v = vmin + i * (vmax - vmin) / 4
        y = ypix(v)
        out.append(f'<line x1="{left}" y1="{y:.1f}" x2="{width - 20:.0f}" y2="{y:.1f}" '
                   'stroke="#ddd"/>')
        out.append(f'<text x="{left - 6}" y="{y + 4:.1f}" text-anchor="end">{v:.1f}</text>')
    for idx, method in enumerate(methods):
        stats = _five_number(groups[method])
        cx = left + 55 + 110 * idx
        half = 28
        y_q1, y_q3 = ypix(stats["q1"]), ypix(stats["q3"])
        y_med = ypix(stats["median"])
        y_min, y_max = ypix(stats["min"]), ypix(stats["max"])
        out.append(f'<line x1="{cx}" y1="{y_min:.1f}" x2="{cx}" y2="{y_max:.1f}" stroke="black"/>')
        for y in (y_min, y_max):
            out.append(f'<line x1="{cx - 12}" y1="{y:.1f}" x2="{cx + 12}" y2="{y:.1f}" '
                       'stroke="black"/>')
        out.append(f'<rect x="{cx - half}" y="{y_q3:.1f}" width="{2 * half}" '
                   f'height="{max(0.5, y_q1 - y_q3):.1f}" fill="#9ecae1" stroke="black"/>')
        out.append(f'<line x1="{cx - half}" y1="{y_med:.1f}" x2="{cx + half}" y2="{y_med:.1f}" '
                   'stroke="black" stroke-width="2"/>')
        out.append(f'<text x="{cx}" y="{bottom + 18}" text-anchor="middle">{method}</text>')
    out.append(f'<text x="16" y="{(top + bottom) / 2:.0f}" '
               f'transform="rotate(-90 16 {(top + bottom) / 2:.0f})" '
               'text-anchor="middle">common resets</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _ramp(frac: float) -> str:
    stops = ((68, 1, 84), (59, 82, 139), (33, 145, 140), (94, 201, 98), (253, 231, 37))
    f = min(1.0, max(0.0, frac)) * (len(stops) - 1)
    i = min(int(f), len(stops) - 2)
    t = f - i
    rgb = [round(stops[i][c] + t * (stops[i + 1][c] - stops[i][c])) for c in range(3)]
    return f"rgb({rgb[0]},{rgb[1]},{rgb[2]})"


def svg_heatmap(title: str, positions: list[tuple[float, float]],
                values: list[float], delta: float) -> str:
    finite = [v for v in values if math.isfinite(v)]
    lo = min(finite) if finite else 0.0
    hi = max(finite) if finite else 1.0
    span = (hi - lo) or 1.0
    xs = [p[0] for p in positions]
    ys = [p[1] for p in positions]
    scale = 60.0
    pad = 30.0
    width = (max(xs) - min(xs) + delta) * scale + 2 * pad
    height = (max(ys) - min(ys) + delta) * scale + 2 * pad + 20
    out = _svg_header(width, height)
    out.append(f'<text x="{width / 2:.1f}" y="18" text-anchor="middle">{title} '
               f'[{lo:.2f}, {hi:.2f}] s</text>')
    x0 = min(xs) - delta / 2
    y1 = max(ys) + delta / 2
    for (x, y), v in zip(positions, values):
        color = "#888888" if not math.isfinite(v) else _ramp((v - lo) / span)
        px = pad + (x - delta / 2 - x0) * scale
        py = pad + 20 + (y1 - (y + delta / 2)) * scale
        out.append(f'<rect x="{px:.1f}" y="{py:.1f}" width="{delta * scale:.1f}" '
                   f'height="{delta * scale:.1f}" fill="{color}"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def cmd_report(args) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    lines = Path(args.csv).read_text(encoding="utf-8").splitlines()
    if not lines:
        raise UsageError(f"{args.csv} is empty")
    header = tuple(lines[0].split(","))
    missing = [c for c in CSV_COLUMNS if c not in header]
    if missing:
        raise UsageError(f"{args.csv} is missing column(s): {', '.join(missing)}")
    col = {name: header.index(name) for name in CSV_COLUMNS}
    groups: dict[str, dict[str, list[float]]] = {}
    for lineno, line in enumerate(lines[1:], start=2):
        fields = line.split(",")
        if len(fields) != len(header):
            raise UsageError(f"{args.csv}:{lineno}: expected {len(header)} fields, "
                             f"got {len(fields)}")
        if fields[col["status"]] != "ok":
            continue
        label = fields[col["trial_id"]].rsplit(":", 2)[0]
        method = fields[col["method"]]
        groups.setdefault(label, {}).setdefault(method, []).append(
            float(fields[col["common_resets"]]))
    written = []
    for label, by_method in sorted(groups.items()):
        path = out_dir / f"boxplot_{label}.svg"
        path.write_text(svg_boxplot(f"common resets: {label}",
                                    dict(sorted(by_method.items()))), encoding="utf-8")
        written.append(path)
    for cache in args.cache or []:
        doc = json.loads(Path(cache).read_text(encoding="utf-8"))
        positions = [tuple(p) for p in doc["positions"]]
        delta = float(doc["header"]["delta"])
        stem = Path(cache).stem
        for field, name in (("best_time", "best-orientation walk time"),
                            ("harmonic_time", "harmonic-mean walk time")):
            vals = [math.inf if v is None else float(v) for v in doc[field]]
            path = out_dir / f"heatmap_{stem}_{field}.svg"
            path.write_text(svg_heatmap(name, positions, vals, delta), encoding="utf-8")
            written.append(path)
    for path in written:
        print(path)
    return EXIT_OK


# -- entry point -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rdwsim",
        description="Batch simulator for multi-user redirected walking in separate rooms.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("precompute", help="build a pose-grid cache for an environment")
    p.add_argument("env", help="bundled layout name or path to an environment JSON")
    p.add_argument("--out", required=True, help="cache file to write")
    p.add_argument("--delta", type=float, default=0.5, help="grid spacing in meters")
    p.add_argument("--orientations", type=int, default=30, help="orientations per position")
    p.add_argument("--k", type=int, default=10, help="curvature candidate pairs")
    p.add_argument("--radius-min", type=float, default=7.5, help="minimum bend radius")
    p.set_defaults(func=cmd_precompute)

    p = sub.add_parser("run", help="run seeded trials of one configuration")
    p.add_argument("config", help="trial configuration JSON")
    p.add_argument("--seed", type=int, default=None, help="first seed (overrides config)")
    p.add_argument("--trials", type=int, default=1, help="number of consecutive seeds")
    p.add_argument("--method", default=None, help="override the configured method")
    p.add_argument("--out", default=None, help="CSV output path (default: stdout)")
    p.add_argument("--cache-dir", default=None, help="directory for pose-grid caches")
    p.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    p.add_argument("--timing", action="store_true",
                   help="fill the wall_time_ms column (breaks byte-determinism)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("compare", help="run a full method-by-config sweep")
    p.add_argument("spec", help="experiment spec JSON")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--trials", type=int, default=None, help="trials per cell (overrides spec)")
    p.add_argument("--seed", type=int, default=None, help="base seed (overrides spec)")
    p.add_argument("--jobs", type=int, default=None, help="parallel workers (overrides spec)")
    p.add_argument("--methods", default=None, help="comma-separated methods (overrides spec)")
    p.add_argument("--timing", action="store_true",
                   help="fill the wall_time_ms column (breaks byte-determinism)")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("report", help="render SVG box plots (and optional heatmaps)")
    p.add_argument("csv", help="results CSV produced by run/compare")
    p.add_argument("--out", required=True, help="output directory for SVGs")
    p.add_argument("--cache", action="append", default=None,
                   help="pose-grid cache to render as heatmaps (repeatable)")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, json.JSONDecodeError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except RdwError as exc:
        from .errors import (EmptyFreeSpace, InvalidEnvironment,
                             PoseOutsideFreeSpace, StaleCache)
        print(f"error: {exc}", file=sys.stderr)
        config_errors = (InvalidEnvironment, EmptyFreeSpace, StaleCache, PoseOutsideFreeSpace)
        return EXIT_USAGE if isinstance(exc, config_errors) else EXIT_RUNTIME
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())

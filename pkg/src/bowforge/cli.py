"""Command line: ``bowforge <mode> --config scene.json``.

A scene is a JSON document ``{"config": ..., "payload": ..., "seed": ..., "tol": ...}``
validated against ``schemas/<mode>.json``.  Exit codes: 0 success,
2 invalid input, 3 numerical failure (error name as JSON on stderr).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from contextlib import contextmanager
from concurrent.futures import ThreadPoolExecutor
from importlib import resources

import jsonschema
import numpy as np

from . import __version__
from . import serialize as ser
from .errors import BowforgeError
from .factor import (definite_splits, factor_residual, factorize, moment_mu, moment_nu,
                     random_pair, scan_splits)
from .ghmetric import PointConfig, assemble_phi, is_positive_definite, validity_threshold
from .glt import ContourPlan, Leg, Multiplet, gh_config, gh_frame_metric, kahler_potential
from .matpoly import DEFAULT_TOL, QuadMatPoly, char_curve, is_real_curve
from .nahm import PiecewiseNahmSolution, disassemble_T, integrate, shoot, verify_bow

MODES = ("factorize", "curve", "flow", "verify-bow", "asym-metric", "glt", "plot")
CSV_MODES = ("flow", "asym-metric", "glt")
DEFAULT_TOLS = {"factorize": DEFAULT_TOL, "curve": DEFAULT_TOL, "verify-bow": 1e-8}

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NUMERICAL = 3


class InvalidScene(Exception):
    """Input that fails parsing, schema or semantic validation."""


# --- input -------------------------------------------------------------------------


def load_schema(mode: str) -> dict:
    text = resources.files("bowforge").joinpath("schemas", f"{mode}.json").read_text(encoding="utf-8")
    return json.loads(text)


def read_scene(path: str | None, mode: str) -> dict:
    if path is None:
        raise InvalidScene("--config is required")
    try:
        with open(path, encoding="utf-8") as f:
            text = f.read()
    except OSError as exc:
        raise InvalidScene(f"{path}: {exc.strerror}") from exc
    try:
        scene = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidScene(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    validator = jsonschema.Draft202012Validator(load_schema(mode))
    err = jsonschema.exceptions.best_match(validator.iter_errors(scene))
    if err is not None:
        where = "/".join(str(p) for p in err.absolute_path) or "<root>"
        raise InvalidScene(f"{path}: {where}: {err.message}")
    return scene


def thread_count() -> int:
    raw = os.environ.get("BOWFORGE_THREADS", "1")
    try:
        n = int(raw)
    except ValueError as exc:
        raise InvalidScene(f"BOWFORGE_THREADS must be an integer, got {raw!r}") from exc
    if n < 1:
        raise InvalidScene("BOWFORGE_THREADS must be at least 1")
    return n


def ordered_map(fn, items, threads: int) -> list:
    """``[fn(x) for x in items]`` over at most ``threads`` workers, results in input order."""
    items = list(items)
    if threads == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


@contextmanager
def parsing():
    """Turn ``ValueError`` raised while decoding input into :class:`InvalidScene`."""
    try:
        yield
    except ValueError as exc:
        raise InvalidScene(str(exc)) from exc


def _source_poly(payload: dict, rng: np.random.Generator) -> QuadMatPoly:
    with parsing():
        if "T" in payload:
            return ser.decode_poly(payload["T"])
        if "pair" in payload:
            return moment_mu(ser.decode_pair(payload["pair"]))
    return moment_mu(random_pair(payload["random"]["k"], rng))


def _config(scene: dict):
    with parsing():
        return ser.decode_config(scene["config"])


# --- modes -------------------------------------------------------------------------


def run_factorize(scene, rng, tol, fmt, threads):
    T = _source_poly(scene["payload"], rng)
    pair = factorize(T, tol)
    return {
        "A": ser.encode_array(pair.A),
        "B": ser.encode_array(pair.B),
        "residual": factor_residual(T, pair),
        "definite_splits": len(definite_splits(scan_splits(T, tol), tol)),
        "T": ser.encode_poly(T),
    }


def run_curve(scene, rng, tol, fmt, threads):
    T = _source_poly(scene["payload"], rng)
    S = char_curve(T)
    return {"curve": ser.encode_curve(S), "genus": S.genus, "is_real": is_real_curve(S, tol)}


def run_flow(scene, rng, tol, fmt, threads):
    p = scene["payload"]
    with parsing():
        start = ser.decode_triple(p["start"])
    tr = integrate(start, tuple(p["t_span"]), int(p["steps"]))
    if fmt == "csv":
        return [tr]
    return {"trajectory": ser.encode_trajectory(tr), "curve_drift": tr.curve_drift()}


def run_verify_bow(scene, rng, tol, fmt, threads):
    cfg = _config(scene)
    p = scene["payload"]
    with parsing():
        pair = ser.decode_pair(p["pair"])
        I = ser.decode_array(p["I"], 2)
        J = ser.decode_array(p["J"], 2)
        start = ser.decode_triple(p["start"]) if "start" in p else None
    if pair.k != cfg.k or I.shape != (cfg.r, cfg.k) or J.shape != (cfg.r, cfg.k):
        raise InvalidScene(f"pair must be {cfg.k}x{cfg.k} and I, J must be {cfg.r}x{cfg.k}")
    if start is None:
        start = disassemble_T(-moment_nu(pair) + cfg.c_poly("L"))
    sol = PiecewiseNahmSolution(cfg, shoot(cfg, start, I, J, int(p["steps"])), pair, I, J)
    report = verify_bow(sol, tol)
    return {"report": ser.encode_report(report), "ok": report.ok(tol)}


def _asym_points(cfg, p) -> list:
    if "y" in p:
        ys = [np.asarray(p["y"], dtype=float)]
    else:
        if cfg.k != 1:
            raise InvalidScene("radial grids are defined for k = 1; pass explicit y for k > 1")
        dirs = np.asarray(p["grid"]["directions"], dtype=float)
        norms = np.linalg.norm(dirs, axis=1)
        if np.any(norms == 0):
            raise InvalidScene("grid directions must be nonzero")
        ys = [rad * d[None] / n for d, n in zip(dirs, norms) for rad in p["grid"]["radii"]]
    x = np.asarray(p["x"], dtype=float) if "x" in p else None
    with parsing():
        return [PointConfig(cfg, y, x, p.get("a_minus"), p.get("a_plus")) for y in ys]


def run_asym_metric(scene, rng, tol, fmt, threads):
    cfg = _config(scene)
    pcs = _asym_points(cfg, scene["payload"])
    samples = ordered_map(assemble_phi, pcs, threads)
    if fmt == "csv":
        return samples
    return {
        "validity_threshold": validity_threshold(cfg),
        "samples": [
            {
                "points": ser.encode_point_config(m.points),
                "Phi": ser.encode_real(m.Phi),
                "eigenvalues": ser.encode_real(np.linalg.eigvalsh(m.Phi)),
                "positive_definite": is_positive_definite(m.Phi),
            }
            for m in samples
        ],
    }


def _plan(p):
    if "plan" not in p:
        return None
    with parsing():
        legs = tuple(Leg(**leg) for leg in p["plan"]["legs"])
    residues = tuple((int(i), float(w)) for i, w in p["plan"]["residues"])
    return ContourPlan(legs, residues)


def run_glt(scene, rng, tol, fmt, threads):
    cfg = _config(scene)
    if cfg.k != 1:
        raise InvalidScene("the glt mode builds contour plans for k = 1 only")
    p = scene["payload"]
    if len(p["sections"]) != cfg.r:
        raise InvalidScene(f"expected r = {cfg.r} sections")
    plan = _plan(p)
    sections = [Multiplet.from_r3(x) for x in p["sections"]]
    res = kahler_potential(cfg, sections, plan)
    grid = [np.asarray(g, dtype=float) for g in p.get("grid", [])]
    if any(g.shape != (cfg.r, 3) for g in grid):
        raise InvalidScene(f"each grid entry must list r = {cfg.r} points")
    if p.get("metric", False):
        grid = [2 * np.array([s.to_r3() for s in sections])] + grid
    frames = ordered_map(lambda y: gh_frame_metric(cfg, y, plan), grid, threads)
    if fmt == "csv":
        n = cfg.r
        header = [f"y{i}_{c}" for i in range(n) for c in "xyz"] + ["K"]
        header += [f"eig_{i}" for i in range(2 * n)]
        rows = [[*y.ravel(), fr.K, *np.linalg.eigvalsh(fr.metric)] for y, fr in zip(grid, frames)]
        return (header, rows)
    out = {"F": res.F, "u": ser.encode_array(res.u), "K": res.K,
           "windings": list(res.windings), "gh_config": ser.encode_config(gh_config(cfg))}
    out["metric_samples"] = [
        {"y": ser.encode_real(y), "K": fr.K, "kaehler_metric": ser.encode_array(fr.metric),
         "killing": ser.encode_real(fr.killing), "base": ser.encode_real(fr.base)}
        for y, fr in zip(grid, frames)
    ]
    return out


def gnuplot_script(payload: dict) -> str:
    csv_path = payload["csv"]
    if os.path.isabs(csv_path):
        raise InvalidScene("plot needs a CSV path relative to the script")
    lines = [
        "# gnuplot script generated by bowforge",
        "set datafile separator ','",
        "set datafile commentschars '#'",
        "set key autotitle columnhead",
        f"set xlabel {json.dumps(payload['x'])}",
    ]
    if payload.get("title"):
        lines.append(f"set title {json.dumps(payload['title'])}")
    if payload.get("logscale"):
        lines.append("set logscale y")
    plots = [f"{json.dumps(csv_path)} using {json.dumps(payload['x'])}:{json.dumps(col)} with linespoints"
             for col in payload["y"]]
    lines.append("plot " + ", \\\n     ".join(plots))
    return "\n".join(lines) + "\n"


RUNNERS = {
    "factorize": run_factorize,
    "curve": run_curve,
    "flow": run_flow,
    "verify-bow": run_verify_bow,
    "asym-metric": run_asym_metric,
    "glt": run_glt,
}


# --- output ------------------------------------------------------------------------


def render(mode: str, result, fmt: str, meta: dict) -> str:
    if fmt == "json":
        return ser.dumps_json({"provenance": meta, "result": result})
    if mode == "flow":
        return ser.trajectories_csv(result, meta)
    if mode == "asym-metric":
        return ser.metric_samples_csv(result, meta)
    header, rows = result
    return ser.table_csv(header, rows, meta)


def emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    with open(out, "w", encoding="utf-8", newline="") as f:
        f.write(text)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bowforge", description="Numerics for bow varieties.")
    ap.add_argument("mode", choices=MODES)
    ap.add_argument("--config", help="scene JSON file")
    ap.add_argument("--seed", type=int, default=None, help="RNG seed (overrides the scene)")
    ap.add_argument("--tol", type=float, default=None, help="tolerance (overrides the scene)")
    ap.add_argument("--out", default=None, help="output path (default stdout)")
    ap.add_argument("--format", choices=("json", "csv"), default="json")
    ap.add_argument("--version", action="version", version=f"bowforge {__version__}")
    return ap


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    mode = args.mode
    try:
        scene = read_scene(args.config, mode)
        if mode == "plot":
            emit(gnuplot_script(scene["payload"]), args.out)
            return EXIT_OK
        if args.format == "csv" and mode not in CSV_MODES:
            raise InvalidScene(f"mode {mode} has no CSV output")
        seed = args.seed if args.seed is not None else scene.get("seed", 0)
        if not 0 <= seed < 2 ** 64:
            raise InvalidScene("seed must be an unsigned 64-bit integer")
        tol = args.tol if args.tol is not None else scene.get("tol", DEFAULT_TOLS.get(mode, DEFAULT_TOL))
        if not tol > 0:
            raise InvalidScene("tol must be positive")
        threads = thread_count()
        rng = np.random.default_rng(np.random.SeedSequence(seed))
        result = RUNNERS[mode](scene, rng, tol, args.format, threads)
        meta = ser.provenance(__version__, seed, tol, mode)
        emit(render(mode, result, args.format, meta), args.out)
        return EXIT_OK
    except (InvalidScene, NotImplementedError) as exc:
        sys.stderr.write(f"bowforge: invalid input: {exc}\n")
        return EXIT_INVALID
    except BowforgeError as exc:
        sys.stderr.write(json.dumps({"error": exc.name, "message": str(exc)}, sort_keys=True) + "\n")
        return EXIT_NUMERICAL
    except (ValueError, np.linalg.LinAlgError, FloatingPointError) as exc:
        sys.stderr.write(json.dumps({"error": type(exc).__name__, "message": str(exc)}, sort_keys=True) + "\n")
        return EXIT_NUMERICAL


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()

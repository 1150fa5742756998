"""Command line front end.

Run one adaptive computation and write ``history.csv``, ``summary.json`` and
``meshes/level_<l>.txt`` into the output directory::

    afem-newton --problem case1 --p 2 --max-triangles 6000 --out run1

or run the property suite and print a JSON array of reports::

    afem-newton verify
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .driver import RunConfig, RunError, RunHistory, final_iterates, nailfem_run, quasi_error_series, \
    reduction_factors
from .mesh import MeshError, write_mesh
from .problem import get_problem, problem_from_config
from .rates import fit_rate

__all__ = ["main", "read_config", "write_history", "summarize", "CSV_COLUMNS"]

CSV_COLUMNS = ("ell", "k", "total_step", "n_triangles", "n_free_dofs", "residual_norm", "estimator",
               "quasi_error", "delta_used", "delta_min", "cumulative_cost", "energy")

# config-file key -> (argparse dest, converter)
_KEYS = {
    "problem": ("problem", str),
    "p": ("p", int),
    "theta": ("theta", float),
    "lambda_lin": ("lambda_lin", float),
    "kmin": ("kmin", int),
    "k_min": ("kmin", int),
    "max_triangles": ("max_triangles", int),
    "max_cost": ("max_cost", float),
    "tol": ("tol", float),
    "uniform": ("uniform", lambda s: s.strip().lower() in ("1", "true", "yes", "on")),
    "out": ("out", str),
    "mesh": ("mesh", str),
}
_PROBLEM_KEYS = {"a11", "a12", "a22", "b1", "b2", "load", "truncation", "scale"}


def read_config(path) -> dict:
    """Flat ``key = value`` file; ``#`` starts a comment, dashes in keys read as underscores."""
    cfg = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip().replace("-", "_")
        if not sep or not key:
            raise ValueError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        if key not in _KEYS and key not in _PROBLEM_KEYS:
            raise ValueError(f"{path}:{lineno}: unknown config key {key!r}")
        cfg[key] = value.strip()
    return cfg


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def write_history(h: RunHistory, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in h.records:
            w.writerow([_fmt(getattr(r, c)) for c in CSV_COLUMNS])


def _slope(x, y):
    try:
        return fit_rate(x, y, decades=1).slope
    except ValueError:
        return None


def summarize(h: RunHistory) -> dict:
    rf = [r for *_, r in reduction_factors(h)]
    last = h.records[-1]
    return {
        "rate_slope_estimator": _slope(*final_iterates(h)),
        "rate_slope_quasi_error": _slope(*quasi_error_series(h)),
        "final_delta_min": last.delta_min,
        "max_reduction_factor": max(rf) if rf else None,
        "levels": len(h.levels),
        "total_newton_steps": last.total_step,
        "final_triangles": last.n_triangles,
        "final_estimator": last.estimator,
        "jacobian": "symmetric" if h.jacobian_symmetric else "nonsymmetric",
    }


def _run_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="afem-newton",
        description="Adaptive FEM with adaptively damped Newton for semilinear elliptic problems. "
                    "Use 'afem-newton verify' for the property suite.")
    ap.add_argument("--problem", help="case1, case2, poisson or custom (custom reads config keys)")
    ap.add_argument("--p", type=int, help="polynomial degree 1..4 (default 1)")
    ap.add_argument("--theta", type=float, help="Doerfler parameter in (0, 1] (default 0.3)")
    ap.add_argument("--lambda-lin", dest="lambda_lin", type=float, help="stopping parameter (default 0.1)")
    ap.add_argument("--kmin", type=int, help="minimal Newton steps per level (default 1)")
    ap.add_argument("--max-triangles", dest="max_triangles", type=int, help="stop once the mesh has this many triangles")
    ap.add_argument("--max-cost", dest="max_cost", type=float, help="stop at this cumulative cost (default 5e6)")
    ap.add_argument("--tol", type=float, help="stop once the estimator is below tol")
    ap.add_argument("--uniform", action="store_const", const=True, help="mark every element (theta = 1)")
    ap.add_argument("--out", help="output directory (default: out)")
    ap.add_argument("--config", help="flat key=value file; flags win on conflict")
    ap.add_argument("--mesh", help="l_shape, unit_square or a mesh file")
    ap.add_argument("-v", "--verbose", action="store_true", help="log one line per level")
    return ap


def _build(args) -> tuple[RunConfig, Path]:
    cfg = read_config(args.config) if args.config else {}
    merged = {}
    for key, value in cfg.items():
        if key in _KEYS:
            dest, conv = _KEYS[key]
            try:
                merged[dest] = conv(value)
            except ValueError:
                raise ValueError(f"config key {key!r}: invalid value {value!r}") from None
    for dest in {d for d, _ in _KEYS.values()}:
        if getattr(args, dest) is not None:
            merged[dest] = getattr(args, dest)

    tag = merged.get("problem", "case1")
    prob = problem_from_config(cfg) if tag == "custom" else get_problem(tag)
    if tag != "custom" and _PROBLEM_KEYS & cfg.keys():
        raise ValueError(f"config keys {sorted(_PROBLEM_KEYS & cfg.keys())} need problem = custom")
    config = RunConfig(
        problem=prob,
        p=merged.get("p", 1),
        theta=merged.get("theta", 0.3),
        lambda_lin=merged.get("lambda_lin", 0.1),
        k_min=merged.get("kmin", 1),
        max_triangles=merged.get("max_triangles"),
        max_cost=merged.get("max_cost", 5e6),
        tol=merged.get("tol"),
        uniform=bool(merged.get("uniform", False)),
        mesh=merged.get("mesh", "l_shape"),
    )
    if not 1 <= config.p <= 4:
        raise ValueError(f"p must be in 1..4, got {config.p}")
    return config, Path(merged.get("out", "out"))


def _main_run(argv) -> int:
    args = _run_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        config, out = _build(args)
        h = nailfem_run(config)
    except RunError as err:
        print(f"afem-newton: run failed after {len(err.history.records)} steps: {err}", file=sys.stderr)
        return 1
    except (ValueError, MeshError, OSError, ArithmeticError, RuntimeError) as err:
        print(f"afem-newton: error: {err}", file=sys.stderr)
        return 1
    try:
        (out / "meshes").mkdir(parents=True, exist_ok=True)
        write_history(h, out / "history.csv")
        for ell, snap in enumerate(h.levels):
            write_mesh(snap.mesh, out / "meshes" / f"level_{ell}.txt")
        summary = summarize(h)
        (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    except OSError as err:
        print(f"afem-newton: cannot write output: {err}", file=sys.stderr)
        return 1
    print(f"{summary['levels']} levels, {summary['final_triangles']} triangles, "
          f"eta = {summary['final_estimator']:.3e}, output in {out}")
    return 0


def _main_verify(argv) -> int:
    from .verify import run_verify

    ap = argparse.ArgumentParser(prog="afem-newton verify",
                                 description="Run the property suite and print a JSON array of reports.")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    reports = run_verify(seed=args.seed)
    json.dump([r.to_dict() for r in reports], sys.stdout, indent=2)
    sys.stdout.write("\n")
    return 0 if all(r.passed for r in reports) else 1


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    if argv[:1] == ["verify"]:
        return _main_verify(argv[1:])
    return _main_run(argv)


if __name__ == "__main__":
    sys.exit(main())

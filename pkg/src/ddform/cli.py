"""``ddform <command> --config <path> [--out <dir>]``

Exit codes: 0 success, 1 property/acceptance failure, 2 invalid config,
3 solver non-convergence.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import invariants
from .assemble import (
    SolverError,
    assemble_divergence_form,
    assemble_double_div,
    residual,
    solve_dirichlet,
)
from .config import ConfigError, ExperimentConfig
from .grid import DiscreteField, Grid, gradient
from .oracle import annihilation_residuals, annulus_samples
from .regmeter import (
    detect_first_level,
    detect_zero_level,
    first_level_reports,
    interpolate,
    oscillation_table,
    zero_level_reports,
)

log = logging.getLogger("ddform")

EXIT_OK, EXIT_FAILED, EXIT_CONFIG, EXIT_SOLVER = 0, 1, 2, 3


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to None."""
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_json(path: Path, data: dict) -> None:
    path.write_text(json.dumps(_clean(data), sort_keys=True, indent=2) + "\n")


def _solve(cfg: ExperimentConfig, n: int, form: str | None = None):
    grid = Grid(cfg.dim, n)
    field = cfg.build_field()
    form = form or cfg.solve_form()
    if form == "divergence":
        try:
            system = assemble_divergence_form(grid, field, cfg.build_lower())
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    else:
        system = assemble_double_div(grid, field, cfg.build_lower())
    u, stats = solve_dirichlet(system, cfg.boundary_function(), return_stats=True)
    return grid, system, u, stats


def _error_against_exact(cfg, grid, u):
    exact = cfg.exact_solution()
    if exact is None:
        return None, None
    ref = np.asarray(exact(grid.points()), dtype=float).reshape(grid.shape)
    err = u.values - ref
    return float(np.max(np.abs(err))), DiscreteField(grid, err)


def cmd_solve(cfg: ExperimentConfig, out: Path) -> int:
    grid, system, u, stats = _solve(cfg, cfg.n)
    u.to_csv(out / "solution.csv")
    sup_err, err_field = _error_against_exact(cfg, grid, u)
    if err_field is not None:
        err_field.to_csv(out / "error.csv")
    write_json(out / "summary.json", {
        "command": "solve",
        "config_hash": cfg.digest(),
        "form": system.form,
        "n": grid.n,
        "h": grid.h,
        "residual": residual(system, u),
        "solver": stats.to_dict(),
        "sup_error": sup_err,
    })
    return EXIT_OK


def _write_reports(out: Path, reports) -> list:
    rows = []
    for k, rep in enumerate(reports):
        rep.to_csv(out / f"decay_{k}.csv")
        rows.append(rep.summary())
    return rows


def _stats(reports) -> dict:
    alphas = [r.alpha_star for r in reports if r.alpha_star is not None]
    r2s = [r.r2 for r in reports if r.r2 is not None]
    if not alphas:
        return {"median_alpha_star": None, "min_alpha_star": None, "min_r2": None}
    return {
        "median_alpha_star": float(np.median(alphas)),
        "min_alpha_star": float(np.min(alphas)),
        "max_alpha_star": float(np.max(alphas)),
        "min_r2": float(np.min(r2s)),
    }


def cmd_theorem1(cfg: ExperimentConfig, out: Path) -> int:
    grid, system, u, stats = _solve(cfg, cfg.n)
    u.to_csv(out / "solution.csv")
    rho, delta = cfg.decay_rho()
    summary = {
        "command": "theorem1",
        "config_hash": cfg.digest(),
        "form": system.form,
        "rho": rho,
        "delta": delta,
        "solver": stats.to_dict(),
    }
    level = detect_zero_level(u, cfg.decay.tol, cfg.decay.region)
    summary["status"] = level.status
    if level.status != "ok":
        log.warning("no zero level-set points: %s", level.status)
        summary.update(points=0, reports=[])
        write_json(out / "summary.json", summary)
        return EXIT_OK
    reports = zero_level_reports(u, level.points, rho, cfg.decay.k_max)
    summary.update(points=len(reports), reports=_write_reports(out, reports), **_stats(reports))
    c = cfg.coefficient
    if cfg.dim == 1 and cfg.boundary.family == "oracle_1d" and c.kind == "holder_bump" and c.center is not None:
        z = np.asarray(c.center, dtype=float)
        cusp = oscillation_table(u, z, interpolate(u, z), rho, cfg.decay.k_max, kind="cusp")
        cusp.to_csv(out / "decay_cusp.csv")
        summary["cusp"] = cusp.summary()
    write_json(out / "summary.json", summary)
    return EXIT_OK


def cmd_theorem2(cfg: ExperimentConfig, out: Path) -> int:
    if cfg.dim < 2:
        raise ConfigError("theorem2 needs dim >= 2: one-dimensional solutions have no nontrivial S1 points")
    kind = cfg.build_field().smoothness.kind
    if kind not in ("sobolev", "constant"):
        raise ConfigError(f"theorem2 needs Sobolev or constant coefficients, got {kind!r}")
    grid, system, u, stats = _solve(cfg, cfg.n, form="divergence")
    du = gradient(u)
    u.to_csv(out / "solution.csv")
    rho, delta = cfg.decay_rho()
    summary = {
        "command": "theorem2",
        "config_hash": cfg.digest(),
        "form": system.form,
        "rho": rho,
        "delta": delta,
        "solver": stats.to_dict(),
    }
    level = detect_first_level(u, du, cfg.decay.tol, cfg.decay.grad_tol, cfg.decay.region)
    summary["status"] = level.status
    if level.status != "ok":
        log.warning("no first level-set points: %s", level.status)
        summary.update(points=0, reports=[])
        write_json(out / "summary.json", summary)
        return EXIT_OK
    reports = first_level_reports(du, level.points, rho, cfg.decay.k_max)
    summary.update(points=len(reports), reports=_write_reports(out, reports), **_stats(reports))
    write_json(out / "summary.json", summary)
    return EXIT_OK


def cmd_convergence(cfg: ExperimentConfig, out: Path) -> int:
    if cfg.exact_solution() is None:
        raise ConfigError("convergence needs a closed-form solution (1-D oracle or constant coefficients)")
    ns = cfg.n_list or ([257, 513, 1025, 2049] if cfg.dim == 1 else [33, 65, 129, 257])
    rows = []
    for n in ns:
        grid, system, u, _ = _solve(cfg, int(n))
        err, _ = _error_against_exact(cfg, grid, u)
        rows.append({"n": int(n), "h": grid.h, "error": err})
    for prev, cur in zip(rows, rows[1:]):
        ok = prev["error"] > 0 and cur["error"] > 0
        cur["order"] = math.log2(prev["error"] / cur["error"]) if ok else None
    rows[0]["order"] = None
    with open(out / "convergence.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["n", "h", "error", "order"])
        for r in rows:
            order = "" if r["order"] is None else f"{r['order']:.17g}"
            w.writerow([r["n"], f"{r['h']:.17g}", f"{r['error']:.17g}", order])
    errs = [r["error"] for r in rows]
    write_json(out / "summary.json", {
        "command": "convergence",
        "config_hash": cfg.digest(),
        "form": cfg.solve_form(),
        "table": rows,
        "strictly_decreasing": all(b < a for a, b in zip(errs, errs[1:])),
    })
    return EXIT_OK


def cmd_fundsol(cfg: ExperimentConfig, out: Path) -> int:
    if cfg.dim != 3:
        raise ConfigError("fundsol needs dim = 3")
    fs = cfg.fundsol
    A = cfg.base_matrix() if fs.matrix is None else np.asarray(fs.matrix, dtype=float)
    y = np.zeros(3) if fs.pole is None else np.asarray(fs.pole, dtype=float)
    r0, r1 = fs.annulus
    if fs.step >= r0 / 10:
        raise ConfigError(f"fundsol.step must be below r0/10 = {r0 / 10}")
    try:
        pts = annulus_samples(3, y, r0, r1, fs.samples, cfg.seed)
        total, magnitude = annihilation_residuals(A, y, pts, fs.step)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    rel = float(np.max(np.abs(total)) / np.max(magnitude))
    passed = rel <= fs.tolerance
    write_json(out / "summary.json", {
        "command": "fundsol",
        "config_hash": cfg.digest(),
        "matrix": A,
        "pole": y,
        "annulus": [r0, r1],
        "samples": fs.samples,
        "step": fs.step,
        "absolute_defect": float(np.max(np.abs(total))),
        "relative_defect": rel,
        "tolerance": fs.tolerance,
        "passed": passed,
    })
    return EXIT_OK if passed else EXIT_FAILED


def cmd_invariants(cfg: ExperimentConfig, out: Path) -> int:
    results = invariants.run_all(cfg.seed, cfg.inject)
    failed = [r.name for r in results if not r.passed]
    write_json(out / "summary.json", {
        "command": "invariants",
        "config_hash": cfg.digest(),
        "seed": cfg.seed,
        "inject": cfg.inject,
        "checks": [r.to_dict() for r in results],
        "failed": failed,
        "passed": not failed,
    })
    for r in results:
        log.info("%s %s (value %.3g)", "PASS" if r.passed else "FAIL", r.name, r.value)
    return EXIT_FAILED if failed else EXIT_OK


COMMANDS = {
    "solve": cmd_solve,
    "theorem1": cmd_theorem1,
    "theorem2": cmd_theorem2,
    "convergence": cmd_convergence,
    "fundsol": cmd_fundsol,
    "invariants": cmd_invariants,
}


def run(command: str, cfg: ExperimentConfig, out_root: Path | None = None) -> tuple[int, Path]:
    """Run ``command`` and return ``(exit_code, output_directory)``."""
    root = Path(out_root if out_root is not None else cfg.output)
    out = root / f"{command}-{cfg.digest()}"
    out.mkdir(parents=True, exist_ok=True)
    return COMMANDS[command](cfg, out), out


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="ddform", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True, help="JSON experiment config")
    parser.add_argument("--out", default=None, help="output root (default: config 'output')")
    parser.add_argument("-v", "--verbose", action="store_true")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format="%(levelname)s %(message)s")
    try:
        cfg = ExperimentConfig.load(args.config)
        if cfg.command != args.command:
            raise ConfigError(f"config is for {cfg.command!r}, not {args.command!r}")
        code, out = run(args.command, cfg, args.out)
    except ConfigError as exc:
        print(f"ddform: invalid config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverError as exc:
        print(f"ddform: solver did not converge: {exc} (relative residual {exc.residual:.3e})", file=sys.stderr)
        return EXIT_SOLVER
    print(out)
    return code


if __name__ == "__main__":
    sys.exit(main())

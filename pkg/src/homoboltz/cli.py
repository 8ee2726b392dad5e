"""Batch front door: JSON-configured experiments with CSV/JSON outputs.

Subcommands: lambda | qcoef | eigen | secmom | profile | stability |
hierarchy | density | dsmc | report.  One JSON config file drives each
run; the schema rejects unknown keys so configs stay reproducible, and
all randomness is seeded from the config (or the --seed flag).  Exit
codes map 1:1 to the package error kinds.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .errors import ConfigError, exit_code_for

_KERNEL_SCHEMA = {
    "oneOf": [
        {"type": "string", "enum": ["isotropic"]},
        {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "name": {"type": "string", "enum": ["isotropic", "bump"]},
                "center": {"type": "number"},
                "width": {"type": "number", "exclusiveMinimum": 0},
                "csv": {"type": "string"},
            },
        },
    ]
}

_MATRIX = {"type": "array", "items": {"type": "array", "items": {"type": "number"}}}

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "dimension": {"type": "integer", "enum": [2, 3]},
        "kernel": _KERNEL_SCHEMA,
        "quadrature_resolution": {"type": "integer", "minimum": 4},
        "deformation": _MATRIX,
        "p": {"type": "number"},
        "p_values": {"type": "array", "items": {"type": "number", "minimum": 0}},
        "grid": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "n_axis": {"type": "integer", "minimum": 8},
                "r_max": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "tolerance": {"type": "number", "exclusiveMinimum": 0},
        "max_iterations": {"type": "integer", "minimum": 1},
        "t_final": {"type": "number", "exclusiveMinimum": 0},
        "dt": {"type": "number", "exclusiveMinimum": 0},
        "horizon": {"type": "number", "exclusiveMinimum": 0},
        "hierarchy_order": {"type": "integer", "minimum": 3, "maximum": 8},
        "hermite_radius": {"type": "number", "exclusiveMinimum": 0},
        "particles": {"type": "integer", "minimum": 2},
        "seed": {"type": "integer", "minimum": 0},
        "initial_mean": {"type": "array", "items": {"type": "number"}},
        "initial_covariance": _MATRIX,
        "t_grid": {"type": "array", "items": {"type": "number", "minimum": 0}},
        "record_every": {"type": "integer", "minimum": 1},
    },
}


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        cfg = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    import jsonschema

    try:
        jsonschema.validate(cfg, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"config validation failed: {exc.message}") from exc
    return cfg


def _setup(cfg: dict):
    from .kernels import build_quadrature, kernel_from_name, normalize_kernel

    d = cfg.get("dimension", 3)
    res = cfg.get("quadrature_resolution", 16 if d == 3 else 256)
    quad = build_quadrature(d, res)
    kernel = normalize_kernel(kernel_from_name(d, cfg.get("kernel", "isotropic")), quad)
    return d, kernel, quad


def _deformation(cfg: dict, d: int) -> np.ndarray:
    A = np.asarray(cfg.get("deformation", np.zeros((d, d))), dtype=float)
    if A.shape != (d, d):
        raise ConfigError(f"deformation matrix must be {d}x{d}, got {A.shape}")
    return A


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    raise TypeError(f"not serializable: {type(o)}")


def _emit_json(out_dir: Path, name: str, payload: dict) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / name).write_text(json.dumps(payload, indent=2, default=_json_default) + "\n")
    print(json.dumps(payload, default=_json_default))


def cmd_lambda(cfg: dict, out_dir: Path) -> None:
    from .io import write_csv
    from .kernels import lambda_p

    d, kernel, quad = _setup(cfg)
    ps = cfg.get("p_values", [])
    rows = [(float(p), lambda_p(kernel, quad, p)) for p in ps]
    out_dir.mkdir(parents=True, exist_ok=True)
    write_csv(out_dir / "lambda.csv", ["p", "lambda_p"], rows)
    for p, lam in rows:
        print(f"lambda({p:g}) = {lam:.12g}")


def cmd_qcoef(cfg: dict, out_dir: Path) -> None:
    from .kernels import q_coefficient

    d, kernel, quad = _setup(cfg)
    q = q_coefficient(kernel, quad)
    _emit_json(out_dir, "qcoef.json", {"dimension": d, "q": q})


def cmd_eigen(cfg: dict, out_dir: Path) -> None:
    from .kernels import q_coefficient
    from .moments import dominant_eigenpair, eigen_residual

    d, kernel, quad = _setup(cfg)
    A = _deformation(cfg, d)
    q = q_coefficient(kernel, quad)
    pair = dominant_eigenpair(A, q)
    _emit_json(out_dir, "eigen.json", {
        "beta": pair.beta,
        "N": pair.N,
        "spectral_gap": pair.spectral_gap,
        "residual": eigen_residual(A, q, pair.beta, pair.N),
        "q": q,
    })


def cmd_secmom(cfg: dict, out_dir: Path) -> None:
    from .io import write_csv
    from .kernels import q_coefficient
    from .moments import dominant_eigenpair, evolve_B

    d, kernel, quad = _setup(cfg)
    A = _deformation(cfg, d)
    q = q_coefficient(kernel, quad)
    pair = dominant_eigenpair(A, q)
    B0 = np.asarray(cfg.get("initial_covariance", np.eye(d)), dtype=float)
    t_grid = np.asarray(cfg.get("t_grid", np.linspace(0, 5, 11)), dtype=float)
    traj = evolve_B(A, q, pair.beta, B0, t_grid)
    header = ["t"] + [f"B_{i}{j}" for i in range(d) for j in range(d)]
    rows = [[float(t)] + [float(x) for x in B.ravel()]
            for t, B in zip(traj.times, traj.matrices)]
    out_dir.mkdir(parents=True, exist_ok=True)
    write_csv(out_dir / "secmom.csv", header, rows)
    print(f"wrote {out_dir / 'secmom.csv'} ({len(rows)} rows)")


def cmd_profile(cfg: dict, out_dir: Path) -> None:
    from .field import fixed_point_profile
    from .io import export_radial_csv, write_grid

    d, kernel, quad = _setup(cfg)
    A = _deformation(cfg, d)
    grid_cfg = cfg.get("grid", {})
    res = fixed_point_profile(
        A, kernel, quad, cfg.get("p", 4.0),
        n_axis=grid_cfg.get("n_axis", 64 if d == 3 else 128),
        r_max=grid_cfg.get("r_max", 8.0),
        tol=cfg.get("tolerance", 1e-8),
        max_iter=cfg.get("max_iterations", 200))
    out_dir.mkdir(parents=True, exist_ok=True)
    write_grid(res.profile, out_dir / "profile.grid")
    export_radial_csv(res.profile, out_dir / "profile_slices.csv")
    _emit_json(out_dir, "profile.json", {
        "beta": res.beta,
        "N": res.N,
        "iterations": res.iterations,
        "final_distance": res.final_distance,
        "contraction_estimate": res.contraction_estimate,
        "theta_bound": res.theta_bound,
    })


def cmd_stability(cfg: dict, out_dir: Path) -> None:
    from .field import CharFnGrid, GaussPolyModel, stability_experiment
    from .io import write_csv

    d, kernel, quad = _setup(cfg)
    A = _deformation(cfg, d)
    grid_cfg = cfg.get("grid", {})
    n_axis = grid_cfg.get("n_axis", 48 if d == 3 else 128)
    r_max = grid_cfg.get("r_max", 8.0)
    B0 = np.asarray(cfg.get("initial_covariance", 2 * np.eye(d)), dtype=float)
    init = CharFnGrid.gaussian(B0, dim=d, n_axis=n_axis, r_max=r_max,
                               core_radius=2.5 * 2 * r_max / n_axis)
    rep = stability_experiment(init, A, kernel, quad, cfg.get("p", 4.0),
                               cfg.get("horizon", 20.0), dt=cfg.get("dt", 0.05))
    out_dir.mkdir(parents=True, exist_ok=True)
    write_csv(out_dir / "stability.csv", ["t", "distance"],
              [(float(t), float(x)) for t, x in zip(rep.times, rep.distances)])
    _emit_json(out_dir, "stability.json", {
        "fitted_rate": rep.fitted_rate, "lambda": rep.lam, "beta": rep.beta,
        "theta_reference": rep.theta_reference,
    })


def cmd_hierarchy(cfg: dict, out_dir: Path) -> None:
    from .hierarchy import multi_indices, solve_hierarchy
    from .kernels import q_coefficient
    from .moments import dominant_eigenpair

    d, kernel, quad = _setup(cfg)
    A = _deformation(cfg, d)
    q = q_coefficient(kernel, quad)
    pair = dominant_eigenpair(A, q)
    M = cfg.get("hierarchy_order", 4)
    res = solve_hierarchy(A, q, pair.beta, pair.N, M, kernel, quad)
    payload = {"beta": pair.beta, "q": q, "orders": {}}
    for ell, Q in res.Q.items():
        payload["orders"][str(ell)] = {
            "multi_indices": [list(a) for a in multi_indices(d, ell)],
            "re": [float(c.real) for c in Q.coeffs],
            "im": [float(c.imag) for c in Q.coeffs],
            "residual": res.residuals.get(ell),
            "condition_number": res.condition_numbers.get(ell),
        }
        if ell >= 3:
            print(f"l={ell}: residual={res.residuals[ell]:.3e} "
                  f"cond={res.condition_numbers[ell]:.3e}")
    _emit_json(out_dir, "hierarchy.json", payload)


def cmd_density(cfg: dict, out_dir: Path) -> None:
    from .hierarchy import construct_compatible_density, solve_hierarchy
    from .kernels import q_coefficient
    from .moments import dominant_eigenpair

    d, kernel, quad = _setup(cfg)
    A = _deformation(cfg, d)
    q = q_coefficient(kernel, quad)
    pair = dominant_eigenpair(A, q)
    M = cfg.get("hierarchy_order", 4)
    res = solve_hierarchy(A, q, pair.beta, pair.N, M, kernel, quad)
    dens = construct_compatible_density(res.Q, M, cfg.get("hermite_radius", 8.0))
    _emit_json(out_dir, "density.json", {
        "R": dens.R,
        "gram_condition": dens.gram_condition,
        "xi": {"".join(map(str, a)): x for a, x in dens.xi.items() if x != 0.0},
        "max_abs_xi": max(abs(x) for x in dens.xi.values()),
    })


def cmd_dsmc(cfg: dict, out_dir: Path) -> None:
    from .dsmc import init_gaussian, run
    from .io import write_csv

    d, kernel, quad = _setup(cfg)
    A = _deformation(cfg, d)
    U = np.asarray(cfg.get("initial_mean", np.zeros(d)), dtype=float)
    cov = np.asarray(cfg.get("initial_covariance", np.eye(d)), dtype=float)
    ens = init_gaussian(cfg.get("particles", 100_000), U, cov, cfg.get("seed", 0))
    series = run(ens, A, kernel, quad, cfg.get("t_final", 5.0), cfg.get("dt", 0.05),
                 record_every=cfg.get("record_every", 5), fourth_orders=True)
    header = (["t"] + [f"U_{i}" for i in range(d)]
              + [f"B_{i}{j}" for i in range(d) for j in range(d)]
              + [f"se_B_{i}{j}" for i in range(d) for j in range(d)]
              + [f"m4_{''.join(map(str, a))}" for a in series[0].fourth]
              + [f"se_m4_{''.join(map(str, a))}" for a in series[0].fourth])
    rows = []
    for m in series:
        rows.append([m.t] + [float(x) for x in m.mean]
                    + [float(x) for x in m.second_raw.ravel()]
                    + [float(x) for x in m.second_raw_se.ravel()]
                    + [float(x) for x in m.fourth.values()]
                    + [float(x) for x in m.fourth_se.values()])
    out_dir.mkdir(parents=True, exist_ok=True)
    write_csv(out_dir / "dsmc.csv", header, rows)
    print(f"wrote {out_dir / 'dsmc.csv'} ({len(rows)} rows)")


def cmd_report(cfg: dict, out_dir: Path) -> None:
    """Physical-space summary: beta, N, lambda, U and the rescaling map."""
    from .kernels import q_coefficient
    from .moments import (dominant_eigenpair, eigen_residual,
                          extract_lambda_scale)

    d, kernel, quad = _setup(cfg)
    A = _deformation(cfg, d)
    q = q_coefficient(kernel, quad)
    pair = dominant_eigenpair(A, q)
    U = np.asarray(cfg.get("initial_mean", np.zeros(d)), dtype=float)
    B0 = np.asarray(cfg.get("initial_covariance", np.eye(d)), dtype=float)
    lam = extract_lambda_scale(A, q, pair.beta, pair.N, B0)
    _emit_json(out_dir, "report.json", {
        "beta": pair.beta,
        "N": pair.N,
        "lambda": lam,
        "U": U,
        "dirac_mass": bool(lam == 0.0),
        "residual": eigen_residual(A, q, pair.beta, pair.N),
        "rescaling": "v -> exp(beta t) v + exp(-t A^T) U applied to the "
                     "lambda-scaled profile density",
    })


_COMMANDS = {
    "lambda": cmd_lambda,
    "qcoef": cmd_qcoef,
    "eigen": cmd_eigen,
    "secmom": cmd_secmom,
    "profile": cmd_profile,
    "stability": cmd_stability,
    "hierarchy": cmd_hierarchy,
    "density": cmd_density,
    "dsmc": cmd_dsmc,
    "report": cmd_report,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="homoboltz",
        description="Self-similar asymptotics of the deformed Maxwell-Boltzmann "
                    "equation: batch experiments")
    parser.add_argument("command", choices=sorted(_COMMANDS))
    parser.add_argument("--config", help="JSON experiment config", default=None)
    parser.add_argument("--out", help="output directory", default="out")
    parser.add_argument("--workers", type=int, default=None,
                        help="numba thread count for grid operators")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the config seed")
    args = parser.parse_args(argv)
    try:
        cfg = _load_config(args.config)
        if args.seed is not None:
            cfg["seed"] = args.seed
        if args.workers is not None:
            import numba

            numba.set_num_threads(max(1, args.workers))
        _COMMANDS[args.command](cfg, Path(args.out))
    except Exception as exc:  # noqa: BLE001 - map to exit codes at the boundary
        print(f"error: {exc}", file=sys.stderr)
        return exit_code_for(exc)
    return 0


if __name__ == "__main__":
    sys.exit(main())

"""Configuration-driven experiment runner.

Every experiment is described by a JSON config (schema-validated, unknown
fields rejected) naming one task and its parameters.  Runs write a report
JSON with full provenance (config echo, defaults, seeds, versions, input
hash), machine-readable CSV sweeps, and rendered figures next to them.

Exit codes: 0 all residual checks passed, 1 a residual check failed,
2 usage or config error, 3 numerical infrastructure error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
import time
from dataclasses import asdict

import numpy as np

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

import jsonschema

from . import __version__, green, model, scatter, surface, waveop

TASKS = (
    "green-scan",
    "bound-states",
    "smatrix-sweep",
    "levinson-finite",
    "surface-levinson",
    "disorder-average",
    "waveop-check",
    "time-probe",
)

_NUMERICS_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "n_points": {"type": "integer", "minimum": 32},
        "n_max": {"type": "integer", "minimum": 32},
        "qtol": {"type": "number", "exclusiveMinimum": 0},
        "eps0": {"type": ["number", "null"], "exclusiveMinimum": 0},
        "eps_ratio": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "n_rungs": {"type": "integer", "minimum": 2},
        "richardson_order": {"type": "integer", "minimum": 1},
        "error_pass": {"type": "boolean"},
    },
}

_SYMBOL_SCHEMA = {
    "oneOf": [
        {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "kind": {"const": "laplacian"},
                "d": {"type": "integer", "minimum": 1},
                "amplitude": {"type": "number"},
            },
            "required": ["kind", "d"],
        },
        {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "d": {"type": "integer", "minimum": 1},
                "hoppings": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "additionalProperties": False,
                        "properties": {
                            "n": {"type": "array", "items": {"type": "integer"}},
                            "re": {"type": "number"},
                            "im": {"type": "number"},
                        },
                        "required": ["n", "re"],
                    },
                },
            },
            "required": ["d", "hoppings"],
        },
    ]
}

_POTENTIAL_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "kind": {"enum": ["constant", "periodic", "iid", "quasiperiodic"]},
        "amplitude": {"type": "number"},
        "values": {"type": "array", "items": {"type": "number"}},
        "seed": {"type": "integer"},
        "dist": {"enum": ["uniform"]},
        "frequency": {"type": "number"},
        "phase": {"type": "number"},
        "offset": {"type": "integer"},
    },
    "required": ["kind"],
}

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["task", "model"],
    "properties": {
        "version": {"type": "integer"},
        "task": {"enum": list(TASKS)},
        "model": {
            "type": "object",
            "additionalProperties": False,
            "required": ["symbol"],
            "properties": {
                "symbol": _SYMBOL_SCHEMA,
                "geometry": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {"d1": {"type": "integer", "minimum": 1}},
                    "required": ["d1"],
                },
            },
        },
        "parameters": {"type": "object"},
        "numerics": _NUMERICS_SCHEMA,
        "seed": {"type": "integer"},
        "threads": {"type": "integer", "minimum": 1},
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "csv": {"type": "boolean"},
                "figures": {"type": "boolean"},
            },
        },
    },
}


class ConfigError(ValueError):
    pass


def _symbol_from_config(spec: dict) -> model.DispersionSymbol:
    if spec.get("kind") == "laplacian":
        return model.laplacian(spec["d"], spec.get("amplitude", 1.0))
    return model.symbol_from_json(spec)


def _quadrature_from_config(spec: dict | None) -> green.QuadratureSpec:
    return green.QuadratureSpec(**(spec or {}))


def _cell_from_config(spec: dict, dimension: int) -> scatter.Perturbation:
    sites = [tuple(s) for s in spec["sites"]]
    for s in sites:
        if len(s) != dimension:
            raise ConfigError(f"cell site {s} does not match the model dimension")
    if "diagonal" in spec:
        return scatter.Perturbation.diagonal(sites, spec["diagonal"])
    matrix = np.array(spec["matrix_re"], dtype=float) + 1j * np.array(
        spec.get("matrix_im", np.zeros((len(sites), len(sites)))), dtype=float
    )
    return scatter.Perturbation(tuple(sites), matrix)


def validate_config(config: dict) -> None:
    try:
        jsonschema.validate(config, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise ConfigError(str(exc)) from exc


# ---------------------------------------------------------------------------
# task runners; each returns (results dict, list of (name, passed) checks)
# ---------------------------------------------------------------------------


def _task_green_scan(config, outdir, make_figures):
    params = config.get("parameters", {})
    symbol = _symbol_from_config(config["model"]["symbol"])
    quad = _quadrature_from_config(config.get("numerics"))
    sites = tuple(tuple(s) for s in params.get("sites", [[0] * symbol.dimension]))
    window = green.window_for(symbol)
    pad = params.get("padding", 0.2) * window.bandwidth
    e_grid = np.linspace(
        params.get("e_min", window.e_minus - pad),
        params.get("e_max", window.e_plus + pad),
        int(params.get("n_energies", 81)),
    )
    side = params.get("side", "minus")
    rows = []
    for e in e_grid:
        res = green.boundary_values(
            green.ResolventRequest(symbol=symbol, sites=sites, energy=float(e), side=side,
                                   quadrature=quad)
        )
        rows.append((float(e), res))
    csv_path = os.path.join(outdir, "green_scan.csv")
    with open(csv_path, "w") as fh:
        header = ["E"]
        for i in range(len(sites)):
            for j in range(len(sites)):
                header += [f"re_{i}{j}", f"im_{i}{j}"]
        header += ["error", "flags"]
        fh.write(",".join(header) + "\n")
        for e, res in rows:
            vals = []
            for i in range(len(sites)):
                for j in range(len(sites)):
                    vals += [repr(res.matrix[i, j].real), repr(res.matrix[i, j].imag)]
            fh.write(",".join([repr(e)] + vals + [repr(res.error), "|".join(sorted(res.flags))]) + "\n")

    checks = []
    results = {"csv": csv_path, "n_energies": len(rows)}
    for chk in params.get("checks", []):
        res = green.boundary_values(
            green.ResolventRequest(
                symbol=symbol, sites=sites, energy=float(chk["energy"]),
                side=chk.get("side", "minus"), quadrature=quad,
            )
        )
        val = res.matrix[chk.get("row", 0), chk.get("col", 0)]
        ok = True
        if "re" in chk:
            ok = ok and abs(val.real - chk["re"]) <= chk["tol"]
        if "im" in chk:
            ok = ok and abs(val.imag - chk["im"]) <= chk["tol"]
        checks.append((f"green value at E={chk['energy']}", ok))
        results.setdefault("check_values", []).append(
            {"energy": chk["energy"], "re": val.real, "im": val.imag, "passed": ok}
        )
    if make_figures:
        fig, ax = plt.subplots(figsize=(7, 4.5))
        es = [e for e, _ in rows]
        ax.plot(es, [r.matrix[0, 0].real for _, r in rows], label="Re g")
        ax.plot(es, [r.matrix[0, 0].imag for _, r in rows], label="Im g")
        ax.axvline(window.e_minus, color="gray", lw=0.6)
        ax.axvline(window.e_plus, color="gray", lw=0.6)
        ax.set_xlabel("E")
        ax.set_ylabel("g(E - i0)")
        ax.legend()
        fig.tight_layout()
        fig.savefig(os.path.join(outdir, "green_scan.png"), dpi=130)
        plt.close(fig)
        results["figure"] = os.path.join(outdir, "green_scan.png")
    return results, checks


def _problem_from_config(config) -> scatter.CellProblem:
    symbol = _symbol_from_config(config["model"]["symbol"])
    quad = _quadrature_from_config(config.get("numerics"))
    pert = _cell_from_config(config["parameters"]["cell"], symbol.dimension)
    provider = scatter.LatticeResolventProvider(symbol, pert.sites, quadrature=quad)
    return scatter.CellProblem(provider=provider, perturbation=pert)


def _task_bound_states(config, outdir, make_figures):
    params = config.get("parameters", {})
    problem = _problem_from_config(config)
    states = scatter.bound_states(problem)
    results = {
        "bound_states": [
            {"energy": s.energy, "multiplicity": s.multiplicity, "edge": s.edge,
             "edge_distance": s.edge_distance}
            for s in states
        ],
        "count": sum(s.multiplicity for s in states),
    }
    checks = []
    if "expected_count" in params:
        checks.append(("bound-state count", results["count"] == params["expected_count"]))
    if "expected_energy" in params and states:
        err = min(abs(s.energy - params["expected_energy"]) for s in states)
        checks.append(("bound-state energy", err <= params.get("energy_tol", 1e-6)))
    return results, checks


def _task_smatrix_sweep(config, outdir, make_figures):
    params = config.get("parameters", {})
    problem = _problem_from_config(config)
    window = problem.window
    b_grid = np.linspace(params.get("b_min", -6.0), params.get("b_max", 6.0),
                         int(params.get("n_b", 121)))
    rows = []
    max_defect = 0.0
    for b in b_grid:
        e = model.rescale_to_E(window, float(b))
        s = scatter.s_matrix(problem, e)
        max_defect = max(max_defect, s.unitarity_defect)
        phases = scatter.eigenphases(s)
        td = scatter.time_delay_trace(problem, float(b))
        rows.append((e, float(b), td, phases))
    csv_path = os.path.join(outdir, "smatrix_sweep.csv")
    with open(csv_path, "w") as fh:
        n_ph = len(rows[0][3])
        fh.write("E,b,re_tr_sdag_ds,im_tr_sdag_ds," + ",".join(f"phase_{i}" for i in range(n_ph)) + "\n")
        for e, b, td, phases in rows:
            fh.write(
                ",".join([repr(e), repr(b), repr(td), "0.0"] + [repr(p) for p in phases]) + "\n"
            )
    results = {"csv": csv_path, "max_unitarity_defect": max_defect}
    checks = [("unitarity defect", max_defect < params.get("unitarity_tol", 1e-8))]
    if make_figures:
        fig, ax = plt.subplots(figsize=(7, 4.5))
        for i in range(len(rows[0][3])):
            ax.plot([r[1] for r in rows], [r[3][i] for r in rows], ".", ms=3)
        ax.set_xlabel("b")
        ax.set_ylabel("eigenphases")
        fig.tight_layout()
        fig.savefig(os.path.join(outdir, "smatrix_sweep.png"), dpi=130)
        plt.close(fig)
        results["figure"] = os.path.join(outdir, "smatrix_sweep.png")
    return results, checks


def _task_levinson_finite(config, outdir, make_figures):
    params = config.get("parameters", {})
    problem = _problem_from_config(config)
    tol = params.get("winding_tolerance", 1e-3)
    report = scatter.levinson_check(problem, winding_tolerance=tol)
    path = os.path.join(outdir, "levinson_report.json")
    with open(path, "w") as fh:
        fh.write(report.to_json())
    results = json.loads(report.to_json())
    results["report"] = path
    checks = [("counting residual", report.residual < params.get("residual_tol", 1e-3))]
    if "expected_count" in params:
        checks.append(("bound-state count", report.count == params["expected_count"]))
    return results, checks


def _task_surface_levinson(config, outdir, make_figures):
    params = config.get("parameters", {})
    symbol = _symbol_from_config(config["model"]["symbol"])
    geometry = model.LatticeGeometry(symbol.dimension, config["model"].get("geometry", {}).get("d1", 1))
    lam = params["lam"]
    rep = surface.fibered_levinson(
        symbol,
        geometry,
        lam,
        k1_grid=params.get("k1_grid", 16),
        fiber_tolerance=params.get("fiber_tolerance", 1e-3),
        threads=config.get("threads", 1),
    )
    path = os.path.join(outdir, "surface_report.json")
    with open(path, "w") as fh:
        fh.write(rep.to_json())
    csv_path = os.path.join(outdir, "surface_fibers.csv")
    with open(csv_path, "w") as fh:
        fh.write("k1,count,winding,residual,excluded\n")
        for r in rep.per_fiber:
            fh.write(f"{r.parameter!r},{r.count!r},{r.winding!r},{r.residual!r},{int(r.excluded)}\n")
    results = {"lhs": rep.lhs, "rhs": rep.rhs, "residual": rep.residual, "report": path, "csv": csv_path}
    checks = [("density identity", rep.residual < params.get("residual_tol", 1e-3))]
    if "expected_density" in params:
        checks.append(
            ("density value", abs(rep.lhs - params["expected_density"]) < params.get("density_tol", 1e-3))
        )
    if make_figures:
        fig, ax = plt.subplots(figsize=(7, 4.5))
        ks = [r.parameter for r in rep.per_fiber]
        ax.plot(ks, [r.count for r in rep.per_fiber], "o", label="fiber bound states")
        ax.plot(ks, [-r.winding for r in rep.per_fiber], "+", ms=10, label="-winding")
        ax.set_xlabel("k1")
        ax.legend()
        fig.tight_layout()
        fig.savefig(os.path.join(outdir, "surface_levinson.png"), dpi=130)
        plt.close(fig)
        results["figure"] = os.path.join(outdir, "surface_levinson.png")
    return results, checks


def _task_disorder_average(config, outdir, make_figures):
    params = config.get("parameters", {})
    symbol = _symbol_from_config(config["model"]["symbol"])
    geometry = model.LatticeGeometry(symbol.dimension, config["model"].get("geometry", {}).get("d1", 1))
    potential = surface.CovariantPotential.from_json_dict(params["potential"])
    rep = surface.disorder_average(
        symbol,
        geometry,
        potential,
        period=params.get("period", 4),
        n_samples=params.get("n_samples", 10),
        theta_grid=params.get("theta_grid", 32),
        master_seed=config.get("seed", 0),
        fiber_tolerance=params.get("fiber_tolerance", 1e-3),
        threads=config.get("threads", 1),
    )
    path = os.path.join(outdir, "disorder_report.json")
    with open(path, "w") as fh:
        fh.write(rep.to_json())
    results = {
        "mean_lhs": rep.mean_lhs,
        "mean_rhs": rep.mean_rhs,
        "stderr_lhs": rep.stderr_lhs,
        "stderr_rhs": rep.stderr_rhs,
        "report": path,
    }
    checks = [("ensemble identity", abs(rep.mean_lhs - rep.mean_rhs) < params.get("residual_tol", 2e-3))]
    if make_figures:
        fig, ax = plt.subplots(figsize=(7, 4.5))
        residuals = [r.residual for r in rep.per_fiber]
        ax.hist(residuals, bins=24)
        ax.set_xlabel("per-fiber residual")
        ax.set_ylabel("count")
        fig.tight_layout()
        fig.savefig(os.path.join(outdir, "disorder_residuals.png"), dpi=130)
        plt.close(fig)
        results["figure"] = os.path.join(outdir, "disorder_residuals.png")
    return results, checks


def _task_waveop_check(config, outdir, make_figures):
    params = config.get("parameters", {})
    problem = _problem_from_config(config)
    grid = waveop.BGrid(params.get("B", 8.0), params.get("M", 512))
    report = waveop.index_identity_check(problem, grid,
                                         winding_tolerance=params.get("winding_tolerance", 1e-3))
    if params.get("check_convergence", False):
        conv = waveop.grid_convergence(problem, grid, reference=-report["winding"])
        report["convergence"] = conv
    path = os.path.join(outdir, "waveop_report.json")
    with open(path, "w") as fh:
        fh.write(json.dumps(report, indent=2))
    checks = [
        ("isometry defect", report["isometry_defect"] < params.get("isometry_tol", 1e-2)),
        ("index identity", report["residual"] < params.get("residual_tol", 0.05)),
    ]
    report["report"] = path
    return report, checks


def _task_time_probe(config, outdir, make_figures):
    params = config.get("parameters", {})
    symbol = _symbol_from_config(config["model"]["symbol"])
    geometry = model.LatticeGeometry(symbol.dimension, config["model"].get("geometry", {}).get("d1", 1))
    lam = params.get("lam", 2.0)
    surface_size = params.get("surface_size", 24)
    halfwidth = params.get("transverse_halfwidth", 8)
    horizon = params.get("horizon", 6.0)
    potential = surface.CovariantPotential(kind="constant", amplitude=lam)
    curves = []
    labels = []
    ok = True
    for spec in params.get("states", [{"type": "fiber-bound", "k1_index": 0}]):
        if spec["type"] == "fiber-bound":
            psi = surface.fiber_bound_state(symbol, geometry, lam, spec.get("k1_index", 0),
                                            surface_size, halfwidth)
            pot = potential
            expect = "surface-like"
        else:
            psi = surface.gaussian_packet(
                geometry, surface_size, halfwidth,
                transverse_center=spec.get("center", [halfwidth // 2] + [0] * (geometry.d2 - 1)),
                width=spec.get("width", 1.5),
                transverse_momentum=spec.get("momentum"),
            )
            pot = potential if spec.get("with_potential", False) else None
            expect = "bulk-like"
        curve = surface.time_probe(symbol, geometry, pot, surface_size, halfwidth, psi, horizon)
        got = curve.classify()
        ok = ok and (got == expect)
        curves.append(curve)
        labels.append(f"{spec['type']} ({got})")
    csv_path = os.path.join(outdir, "time_probe.csv")
    with open(csv_path, "w") as fh:
        fh.write("time," + ",".join(f"cumulative_{i}" for i in range(len(curves))) + "\n")
        for j in range(len(curves[0].times)):
            fh.write(
                ",".join([repr(curves[0].times[j])] + [repr(c.cumulative[j]) for c in curves]) + "\n"
            )
    results = {"classifications": labels, "csv": csv_path}
    checks = [("state classification", ok)]
    if make_figures:
        fig, ax = plt.subplots(figsize=(7, 4.5))
        for c, lbl in zip(curves, labels):
            ax.plot(c.times, c.cumulative, label=lbl)
        ax.set_xlabel("t")
        ax.set_ylabel("cumulative near-surface weight")
        ax.legend(fontsize=8)
        fig.tight_layout()
        fig.savefig(os.path.join(outdir, "time_probe.png"), dpi=130)
        plt.close(fig)
        results["figure"] = os.path.join(outdir, "time_probe.png")
    return results, checks


_RUNNERS = {
    "green-scan": _task_green_scan,
    "bound-states": _task_bound_states,
    "smatrix-sweep": _task_smatrix_sweep,
    "levinson-finite": _task_levinson_finite,
    "surface-levinson": _task_surface_levinson,
    "disorder-average": _task_disorder_average,
    "waveop-check": _task_waveop_check,
    "time-probe": _task_time_probe,
}


# ---------------------------------------------------------------------------
# presets
# ---------------------------------------------------------------------------

_LAP3 = {"kind": "laplacian", "d": 3}

PRESETS: dict[str, dict] = {
    "watson-greens": {
        "version": 1,
        "task": "green-scan",
        "model": {"symbol": _LAP3},
        "parameters": {
            "sites": [[0, 0, 0]],
            "n_energies": 97,
            "checks": [
                {"energy": 6.0, "re": 0.25273100886656824, "im": 0.0, "tol": 1e-5},
            ],
        },
    },
    "point-scatterer-levinson": {
        "version": 1,
        "task": "levinson-finite",
        "model": {"symbol": _LAP3},
        "parameters": {
            "cell": {"sites": [[0, 0, 0]], "diagonal": [4.5]},
            "residual_tol": 1e-3,
            "expected_count": 1,
        },
        "numerics": {"n_points": 96, "n_max": 256, "qtol": 1e-7, "error_pass": False},
    },
    "constant-surface-d3": {
        "version": 1,
        "task": "surface-levinson",
        "model": {"symbol": _LAP3, "geometry": {"d1": 1}},
        "parameters": {"lam": 2.0, "k1_grid": 16, "residual_tol": 1e-3, "expected_density": 1.0},
    },
    "iid-supercell-L4": {
        "version": 1,
        "task": "disorder-average",
        "model": {"symbol": _LAP3, "geometry": {"d1": 1}},
        "parameters": {
            "potential": {"kind": "iid", "seed": 20240817, "dist": "uniform", "amplitude": 1.0},
            "period": 4,
            "n_samples": 10,
            "theta_grid": 32,
            "residual_tol": 2e-3,
        },
        "seed": 20240817,
    },
    "waveop-index": {
        "version": 1,
        "task": "waveop-check",
        "model": {"symbol": _LAP3},
        "parameters": {
            "cell": {"sites": [[0, 0, 0]], "diagonal": [4.5]},
            "B": 8.0,
            "M": 512,
            "isometry_tol": 1e-2,
            "residual_tol": 0.05,
        },
        "numerics": {"n_points": 192, "n_max": 256, "qtol": 1e-8,
                     "richardson_order": 5, "error_pass": False},
    },
    "smatrix-sweep-d3": {
        "version": 1,
        "task": "smatrix-sweep",
        "model": {"symbol": _LAP3},
        "parameters": {
            "cell": {"sites": [[0, 0, 0]], "diagonal": [1.0]},
            "b_min": -6.0,
            "b_max": 6.0,
            "n_b": 97,
            "unitarity_tol": 1e-8,
        },
        "numerics": {"n_points": 96, "n_max": 256, "qtol": 1e-7, "error_pass": False},
    },
    "bound-states-1d": {
        "version": 1,
        "task": "bound-states",
        "model": {"symbol": {"kind": "laplacian", "d": 1}},
        "parameters": {
            "cell": {"sites": [[0]], "diagonal": [1.5]},
            "expected_count": 1,
            "expected_energy": 2.5,
            "energy_tol": 1e-9,
        },
        "numerics": {"n_points": 512},
    },
    "time-probe-surface": {
        "version": 1,
        "task": "time-probe",
        "model": {"symbol": _LAP3, "geometry": {"d1": 1}},
        "parameters": {
            "lam": 2.0,
            "surface_size": 24,
            "transverse_halfwidth": 8,
            "horizon": 3.5,
            "states": [
                {"type": "fiber-bound", "k1_index": 0},
                {"type": "fiber-bound", "k1_index": 5},
                {"type": "packet", "center": [4, 0], "width": 1.5},
            ],
        },
    },
}


# ---------------------------------------------------------------------------
# run orchestration
# ---------------------------------------------------------------------------


def run(config: dict, outdir: str, threads: int | None = None) -> tuple[dict, int]:
    """Execute one config; returns (report, exit_code) and writes artifacts."""
    try:
        validate_config(config)
    except ConfigError as exc:
        return {"error": f"config: {exc}"}, 2
    if threads is not None:
        config = dict(config)
        config["threads"] = threads
    os.makedirs(outdir, exist_ok=True)
    make_figures = config.get("output", {}).get("figures", True)
    started = time.time()
    try:
        results, checks = _RUNNERS[config["task"]](config, outdir, make_figures)
        code = 0 if all(ok for _, ok in checks) else 1
    except (ConfigError, KeyError) as exc:
        return {"error": f"config: {exc!r}"}, 2
    except Exception as exc:  # numerical infrastructure failures
        return {"error": f"{type(exc).__name__}: {exc}"}, 3
    report = {
        "config": config,
        "input_hash": hashlib.sha256(
            json.dumps(config, sort_keys=True).encode()
        ).hexdigest(),
        "toolkit_version": __version__,
        "task": config["task"],
        "results": results,
        "checks": [{"name": name, "passed": ok} for name, ok in checks],
        "wall_clock_seconds": time.time() - started,
    }
    path = os.path.join(outdir, "report.json")
    with open(path, "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True, default=float)
    return report, code


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="lattice-scatter",
        description="Lattice scattering toolkit: resolvents, S-matrices, state-counting identities",
    )
    sub = parser.add_subparsers(dest="command")
    p_run = sub.add_parser("run", help="run an experiment config")
    p_run.add_argument("config", help="path to a JSON config")
    p_run.add_argument("--out", default="out", help="output directory")
    p_run.add_argument(
        "--threads",
        type=int,
        default=int(os.environ.get("LATTICE_SCATTER_THREADS", "1")),
        help="worker threads (env LATTICE_SCATTER_THREADS)",
    )
    p_preset = sub.add_parser("preset", help="print a packaged experiment config")
    p_preset.add_argument("name", nargs="?", help="preset name; omit to list")
    args = parser.parse_args(argv)

    if args.command == "preset":
        if not args.name:
            print("\n".join(sorted(PRESETS)))
            return 0
        if args.name not in PRESETS:
            print(f"unknown preset {args.name!r}; available: {', '.join(sorted(PRESETS))}", file=sys.stderr)
            return 2
        print(json.dumps(PRESETS[args.name], indent=2, sort_keys=True))
        return 0

    if args.command == "run":
        try:
            with open(args.config) as fh:
                config = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            print(f"cannot read config: {exc}", file=sys.stderr)
            return 2
        report, code = run(config, args.out, threads=args.threads)
        if "error" in report:
            print(report["error"], file=sys.stderr)
        else:
            for chk in report["checks"]:
                print(f"[{'PASS' if chk['passed'] else 'FAIL'}] {chk['name']}")
            print(f"report: {os.path.join(args.out, 'report.json')}")
        return code

    parser.print_help()
    return 2


if __name__ == "__main__":
    sys.exit(main())

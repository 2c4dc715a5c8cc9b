"""Experiment runners: ODE with mixture vs moment-matched parameter, ARX model
goodness-of-fit, and reduced-set propagation of a drifting random walk.

Each runner takes a fully resolved config (see :func:`resolve_config`) and an
output directory, writes CSV files plus ``manifest.json`` (the resolved
config, reusable as ``--config``), and returns the computed numbers.

CSV schemas
-----------
``distances.csv``   time,kernel,value[,model]
``ensemble.csv``    time,realization,x0..x{d-1}[,model]  (propagate: plus weight)
``errors.csv``      method,size,seed,error
``summary.csv``     per-scenario aggregates
``histogram.csv``   law,bin_left,bin_right,density
``reduced_set.csv`` time,index,x0..x{d-1},weight
"""

from __future__ import annotations

import copy
import csv
import json
from pathlib import Path

import numpy as np

from .dynamics import DiscreteSystem, SineInput, builtin_arx, check_arx_stability, linear_ode
from .dynamics import random_walk_drift
from .embedding import mmd_over_time
from .kernels import Gaussian, Polynomial, kernel_from_config
from .propagation import PARAM_STREAM, ReducedSetConfig, approximation_error, propagate_direct
from .propagation import propagate_reduced
from .uncertainty import GMM, derive_seed, moment_match_gaussian, rng_for, spec_from_config

__all__ = [
    "ConfigError",
    "DEFAULTS",
    "SCENARIOS",
    "resolve_config",
    "run_ode_gmm",
    "run_arx_fit",
    "run_reduced_prop",
    "run_propagate",
    "run_scenario",
]


class ConfigError(ValueError):
    """Invalid scenario configuration."""


_TRUE_ELLIPSOID = {"kind": "ellipsoid", "center": [0.2, 0.3],
                   "shape": [[0.01, 0.003], [0.003, 0.01]]}

DEFAULTS = {
    "ode_gmm": {
        "seed": 42,
        "n_samples": 500,
        "x0": [1.0],
        "t_end": 3.0,
        "step": 0.01,
        "method": "euler",
        "gmm": {"kind": "gmm", "components": [
            {"weight": 0.7, "mean": [-0.6], "cov": [[0.0625]]},
            {"weight": 0.3, "mean": [1.0], "cov": [[0.1225]]},
        ]},
        "polynomial_degrees": [1, 2, 3, 4],
        "bandwidths": [0.1, 1.0, 10.0],
        "report_every": 10,
        "histogram_bins": 50,
        "n_plot_realizations": 50,
    },
    "arx_fit": {
        "seed": 42,
        "n_samples": 500,
        "horizon": 600,
        "a1": 0.5,
        "y_init": [0.0, 0.0],
        "input": {"amplitude": 1.0, "frequency": 0.1},
        "redraw": "step",
        "true": _TRUE_ELLIPSOID,
        "pve": {"kind": "ellipsoid", "center": [0.205, 0.295],
                "shape": [[0.011, 0.0033], [0.0033, 0.011]]},
        "lsq": {"kind": "gaussian", "mean": [0.18, 0.26],
                "cov": [[0.0004, 0.0], [0.0, 0.0004]]},
        "kernel": {"kind": "gaussian", "bandwidth": 0.5},
        "baseline": True,
        "n_plot_realizations": 20,
    },
    "reduced_prop": {
        "seed": 42,
        "horizon": 10,
        "x0": [0.0],
        "noise": {"kind": "uniform", "lower": [-0.5], "upper": [0.5], "drift": [0.1]},
        "kernel": {"kind": "gaussian", "bandwidth": 0.5},
        "reference_size": 500,
        "runs": 10,
        "sizes": [5, 10, 20, 50],
        "nxi": 10,
        "ridge": None,
        "selection": "uniform",
        "plot_size": 10,
        "n_plot_realizations": 50,
    },
    "propagate": {
        "seed": 42,
        "system": "random_walk_drift",
        "method": "direct",
        "n_samples": 100,
        "nr": 10,
        "nxi": 10,
        "ridge": None,
        "horizon": None,
        "x0": None,
        "law": None,
        "kernel": {"kind": "gaussian", "bandwidth": 0.5},
        "t_end": 3.0,
        "step": 0.01,
        "integrator": "rk4",
    },
}

SCENARIOS = tuple(DEFAULTS)


def _merge(base: dict, extra: dict, path="") -> dict:
    out = copy.deepcopy(base)
    for key, value in extra.items():
        if key not in base:
            raise ConfigError("unknown config key %r" % (path + key))
        out[key] = copy.deepcopy(value)
    return out


def resolve_config(scenario: str, user: dict | None = None, overrides: dict | None = None) -> dict:
    """Defaults <- config file <- command-line overrides, then validation."""
    if scenario not in DEFAULTS:
        raise ConfigError("unknown scenario %r" % scenario)
    user = dict(user or {})
    named = user.pop("scenario", scenario)
    if named != scenario:
        raise ConfigError("config is for scenario %r, not %r" % (named, scenario))
    cfg = _merge(DEFAULTS[scenario], user)
    cfg = _merge(cfg, {k: v for k, v in (overrides or {}).items() if v is not None})
    _VALIDATORS[scenario](cfg)
    return {"scenario": scenario, **cfg}


def _positive_int(cfg, key):
    v = cfg[key]
    if isinstance(v, bool) or not isinstance(v, int) or v < 1:
        raise ConfigError("%s must be a positive integer, got %r" % (key, v))


def _validate_ode_gmm(cfg):
    for key in ("n_samples", "report_every", "histogram_bins"):
        _positive_int(cfg, key)
    law = spec_from_config(cfg["gmm"])
    if not isinstance(law, GMM):
        raise ConfigError("ode_gmm needs a gmm parameter law")
    moment_match_gaussian(law)
    linear_ode(cfg["t_end"], cfg["step"], cfg["method"])
    for p in cfg["polynomial_degrees"]:
        Polynomial(p)
    for bw in cfg["bandwidths"]:
        Gaussian(bw)


def _validate_arx_fit(cfg):
    for key in ("n_samples", "horizon"):
        _positive_int(cfg, key)
    for key in ("true", "pve", "lsq"):
        try:
            check_arx_stability(cfg["a1"], spec_from_config(cfg[key]))
        except ValueError as exc:
            raise ConfigError("%s law: %s" % (key, exc)) from exc
    kernel_from_config(cfg["kernel"])


def _validate_reduced_prop(cfg):
    for key in ("horizon", "reference_size", "runs", "nxi", "plot_size"):
        _positive_int(cfg, key)
    for size in cfg["sizes"]:
        if not isinstance(size, int) or size < 1:
            raise ConfigError("sizes must be positive integers")
    ReducedSetConfig(1, cfg["nxi"], cfg["ridge"], cfg["selection"])
    spec_from_config(cfg["noise"])
    kernel_from_config(cfg["kernel"])


def _validate_propagate(cfg):
    if cfg["system"] not in ("linear_ode", "arx2", "random_walk_drift"):
        raise ConfigError("unknown system %r" % cfg["system"])
    if cfg["method"] not in ("direct", "reduced"):
        raise ConfigError("method must be 'direct' or 'reduced'")
    if cfg["method"] == "reduced" and cfg["system"] == "linear_ode":
        raise ConfigError("reduced-set propagation needs a discrete-time system")
    for key in ("n_samples", "nr", "nxi"):
        _positive_int(cfg, key)
    kernel_from_config(cfg["kernel"])


_VALIDATORS = {
    "ode_gmm": _validate_ode_gmm,
    "arx_fit": _validate_arx_fit,
    "reduced_prop": _validate_reduced_prop,
    "propagate": _validate_propagate,
}


# output helpers ------------------------------------------------------------

def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([float(v) if isinstance(v, (float, np.floating)) else v for v in row])


def _write_manifest(out: Path, cfg: dict):
    with open(out / "manifest.json", "w") as fh:
        json.dump(cfg, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _prepare_out(out_dir) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _ensemble_rows(ens, n_keep, model=None, stride=1):
    keep = min(n_keep, ens.n_realizations)
    for ti in range(0, len(ens.times), stride):
        for r in range(keep):
            row = [ens.times[ti], r, *ens.states[ti, r]]
            if model is not None:
                row.append(model)
            yield row


def _state_header(dim):
    return ["x%d" % i for i in range(dim)]


# scenarios -----------------------------------------------------------------

def run_ode_gmm(cfg: dict, out_dir) -> dict:
    """Linear ODE with a mixture-distributed rate vs its moment-matched Gaussian."""
    out = _prepare_out(out_dir)
    seed = cfg["seed"]
    gmm = spec_from_config(cfg["gmm"])
    gauss = moment_match_gaussian(gmm)
    system = linear_ode(cfg["t_end"], cfg["step"], cfg["method"])
    n = cfg["n_samples"]

    laws = {"gmm": gmm, "gaussian": gauss}
    ens = {name: propagate_direct(system, cfg["x0"], law, n, derive_seed(seed, i))
           for i, (name, law) in enumerate(laws.items())}
    # the very draws used above, for the parameter histogram
    params = {name: law.sample(n, rng_for(derive_seed(seed, i), PARAM_STREAM))
              for i, (name, law) in enumerate(laws.items())}

    lo = min(p.min() for p in params.values())
    hi = max(p.max() for p in params.values())
    hist_rows = []
    for name, p in params.items():
        density, edges = np.histogram(p[:, 0], bins=cfg["histogram_bins"], range=(lo, hi), density=True)
        hist_rows += [[name, edges[i], edges[i + 1], density[i]] for i in range(density.size)]
    _write_csv(out / "histogram.csv", ["law", "bin_left", "bin_right", "density"], hist_rows)

    dim = ens["gmm"].dim
    _write_csv(out / "ensemble.csv", ["time", "realization", *_state_header(dim), "model"],
               [row for name, e in ens.items()
                for row in _ensemble_rows(e, cfg["n_plot_realizations"], name)])

    kernels = [Polynomial(p) for p in cfg["polynomial_degrees"]]
    kernels += [Gaussian(bw) for bw in cfg["bandwidths"]]
    indices = list(range(0, len(ens["gmm"].times), cfg["report_every"]))
    if indices[-1] != len(ens["gmm"].times) - 1:
        indices.append(len(ens["gmm"].times) - 1)
    distances = {}
    rows = []
    for k in kernels:
        curve = mmd_over_time(ens["gmm"], ens["gaussian"], k, indices)
        distances[k.label] = curve
        rows += [[t, k.label, v] for t, v in curve]
    _write_csv(out / "distances.csv", ["time", "kernel", "value"], rows)
    _write_manifest(out, cfg)
    return {"distances": distances, "matched": gauss, "ensembles": ens}


def run_arx_fit(cfg: dict, out_dir) -> dict:
    """Distance of PVE-ellipsoid and LSQ-Gaussian ARX models to the true model over time."""
    out = _prepare_out(out_dir)
    seed = cfg["seed"]
    u = SineInput(**cfg["input"])
    laws = {name: spec_from_config(cfg[name]) for name in ("true", "pve", "lsq")}
    system = builtin_arx(cfg["a1"], laws["true"], u, cfg["horizon"], cfg["redraw"])
    n = cfg["n_samples"]
    ens = {name: propagate_direct(system, cfg["y_init"], law, n, derive_seed(seed, i))
           for i, (name, law) in enumerate(laws.items())}
    if cfg["baseline"]:
        ens["baseline"] = propagate_direct(system, cfg["y_init"], laws["true"], n, derive_seed(seed, 3))

    kernel = kernel_from_config(cfg["kernel"])
    distances = {}
    rows = []
    for model in [m for m in ("pve", "lsq", "baseline") if m in ens]:
        curve = mmd_over_time(ens[model], ens["true"], kernel)
        distances[model] = curve
        rows += [[t, kernel.label, v, model] for t, v in curve]
    _write_csv(out / "distances.csv", ["time", "kernel", "value", "model"], rows)

    # time average over steps 1..horizon; step 0 is the shared initial condition
    means = {m: float(np.mean([v for _, v in c[1:]])) for m, c in distances.items()}
    _write_csv(out / "summary.csv", ["model", "mean_distance"], sorted(means.items()))
    dim = ens["true"].dim
    _write_csv(out / "ensemble.csv", ["time", "realization", *_state_header(dim), "model"],
               [row for name, e in ens.items()
                for row in _ensemble_rows(e, cfg["n_plot_realizations"], name)])
    _write_manifest(out, cfg)
    return {"distances": distances, "mean_distance": means}


def run_reduced_prop(cfg: dict, out_dir) -> dict:
    """Approximation error of reduced-set vs diagonal Monte Carlo propagation."""
    out = _prepare_out(out_dir)
    seed = cfg["seed"]
    noise = spec_from_config(cfg["noise"])
    system = DiscreteSystem(random_walk_drift().map, cfg["horizon"], noise, name="random_walk_drift")
    kernel = kernel_from_config(cfg["kernel"])
    T = cfg["horizon"]

    ref_ens = propagate_direct(system, cfg["x0"], None, cfg["reference_size"], derive_seed(seed, 0))
    reference = ref_ens.embedding(T, kernel)

    errors = []
    plotted = None
    for run in range(cfg["runs"]):
        run_seed = derive_seed(seed, 1, run)
        for size in cfg["sizes"]:
            direct = propagate_direct(system, cfg["x0"], None, size, run_seed).embedding(T, kernel)
            errors.append(("direct", size, run_seed, approximation_error(direct, reference)))
            rs_cfg = ReducedSetConfig(size, cfg["nxi"], cfg["ridge"], cfg["selection"])
            path = propagate_reduced(system, cfg["x0"], rs_cfg, T, kernel, run_seed)
            errors.append(("reduced", size, run_seed, approximation_error(path[-1], reference)))
            if run == 0 and size == cfg["plot_size"]:
                plotted = path
    _write_csv(out / "errors.csv", ["method", "size", "seed", "error"], errors)

    summary = {}
    for method in ("direct", "reduced"):
        for size in cfg["sizes"]:
            vals = np.array([e for m, s, _, e in errors if m == method and s == size])
            summary[(method, size)] = (float(vals.mean()), float(vals.std()))
    _write_csv(out / "summary.csv", ["method", "size", "mean", "std"],
               [[m, s, mean, std] for (m, s), (mean, std) in summary.items()])

    dim = ref_ens.dim
    _write_csv(out / "ensemble.csv", ["time", "realization", *_state_header(dim)],
               _ensemble_rows(ref_ens, cfg["n_plot_realizations"]))
    if plotted is not None:
        _write_csv(out / "reduced_set.csv", ["time", "index", *_state_header(dim), "weight"],
                   [[float(t), i, *e.points[i], e.weights[i]]
                    for t, e in enumerate(plotted) for i in range(e.size)])
    _write_manifest(out, cfg)
    return {"errors": errors, "summary": summary, "reference": reference}


def _propagate_system(cfg):
    name = cfg["system"]
    if name == "linear_ode":
        system = linear_ode(cfg["t_end"], cfg["step"], cfg["integrator"])
        law = spec_from_config(cfg["law"] or DEFAULTS["ode_gmm"]["gmm"])
        return system, law, cfg["x0"] or [1.0]
    if name == "arx2":
        law = spec_from_config(cfg["law"] or _TRUE_ELLIPSOID)
        system = builtin_arx(DEFAULTS["arx_fit"]["a1"], law, SineInput(),
                             cfg["horizon"] or DEFAULTS["arx_fit"]["horizon"])
        return system, None, cfg["x0"] or [0.0, 0.0]
    system = random_walk_drift(cfg["horizon"] or 10)
    if cfg["law"] is not None:
        system = DiscreteSystem(system.map, system.horizon, spec_from_config(cfg["law"]),
                                name=system.name)
    return system, None, cfg["x0"] or [0.0]


def run_propagate(cfg: dict, out_dir) -> dict:
    """Propagate a built-in system and dump the ensemble or reduced expansions in long format."""
    out = _prepare_out(out_dir)
    system, law, x0 = _propagate_system(cfg)
    kernel = kernel_from_config(cfg["kernel"])
    if cfg["method"] == "direct":
        ens = propagate_direct(system, x0, law, cfg["n_samples"], cfg["seed"])
        w = 1.0 / ens.n_realizations
        rows = [[t, r, *ens.states[ti, r], w]
                for ti, t in enumerate(ens.times) for r in range(ens.n_realizations)]
        result = {"ensemble": ens}
        dim = ens.dim
    else:
        rs_cfg = ReducedSetConfig(cfg["nr"], cfg["nxi"], cfg["ridge"])
        path = propagate_reduced(system, x0, rs_cfg, system.horizon, kernel, cfg["seed"])
        rows = [[float(t), i, *e.points[i], e.weights[i]]
                for t, e in enumerate(path) for i in range(e.size)]
        result = {"expansions": path}
        dim = path[0].dim
    _write_csv(out / "ensemble.csv", ["time", "realization", *_state_header(dim), "weight"], rows)
    _write_manifest(out, cfg)
    return result


_RUNNERS = {
    "ode_gmm": run_ode_gmm,
    "arx_fit": run_arx_fit,
    "reduced_prop": run_reduced_prop,
    "propagate": run_propagate,
}


def run_scenario(cfg: dict, out_dir) -> dict:
    return _RUNNERS[cfg["scenario"]](cfg, out_dir)

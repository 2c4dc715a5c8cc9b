import csv
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from kme_dyn.cli import main, median_bandwidth, read_samples
from kme_dyn.scenarios import (DEFAULTS, resolve_config, run_arx_fit, run_ode_gmm,
                               run_reduced_prop)


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _write(path, text):
    path.write_text(text)
    return str(path)


# mmd subcommand -------------------------------------------------------------

def test_mmd_same_file_is_zero(tmp_path, capsys):
    f = _write(tmp_path / "a.csv", "x,y\n0,1\n2,3\n-1,0.5\n")
    assert main(["mmd", f, f]) == 0
    assert float(capsys.readouterr().out) == 0.0


def test_mmd_single_rows_closed_form(tmp_path, capsys):
    a = _write(tmp_path / "a.csv", "0\n")
    b = _write(tmp_path / "b.csv", "1\n")
    assert main(["mmd", a, b, "--kernel", "gaussian", "--bandwidth", "1", "--out",
                 str(tmp_path / "o")]) == 0
    value = float(capsys.readouterr().out)
    assert value == pytest.approx(math.sqrt(2 - 2 * math.exp(-0.5)), rel=1e-14)
    assert value == pytest.approx(0.887096, abs=1e-6)
    row = _rows(tmp_path / "o" / "mmd.csv")
    assert len(row) == 1 and float(row[0]["mmd"]) == value
    assert row[0]["kernel"] == "gaussian(1)"


def test_mmd_kernels_and_median(tmp_path, capsys):
    a = _write(tmp_path / "a.csv", "0,0\n1,0\n")
    b = _write(tmp_path / "b.csv", "0,1\n1,1\n")
    assert main(["mmd", a, b, "--kernel", "linear"]) == 0
    assert float(capsys.readouterr().out) == pytest.approx(1.0)
    assert main(["mmd", a, b, "--kernel", "polynomial", "--degree", "3"]) == 0
    assert main(["mmd", a, b, "--bandwidth", "median"]) == 0
    out = capsys.readouterr().out.split()
    assert len(out) == 2 and all(float(v) > 0 for v in out)


def test_median_bandwidth():
    X = np.array([[0.0], [1.0], [3.0]])
    assert median_bandwidth(X) == 2.0
    with pytest.raises(ValueError):
        median_bandwidth(np.zeros((3, 1)))


@pytest.mark.parametrize("text,needle", [
    ("", "no samples"),
    ("a,b\n", "no samples"),
    ("1,2\n3\n", ":2: expected 2 columns"),
    ("1,2\n3,oops\n", ":2: non-numeric"),
    ("1\nnan\n", ":2: non-finite"),
])
def test_read_samples_errors(tmp_path, text, needle):
    with pytest.raises(ValueError, match=needle):
        read_samples(_write(tmp_path / "s.csv", text))


def test_read_samples_header_and_blank_lines(tmp_path):
    X = read_samples(_write(tmp_path / "s.csv", "x\n\n1.5\n\n2.5\n"))
    np.testing.assert_array_equal(X, [[1.5], [2.5]])


def test_mmd_cli_errors(tmp_path, capsys):
    a = _write(tmp_path / "a.csv", "1,2\n")
    b = _write(tmp_path / "b.csv", "1\n")
    empty = _write(tmp_path / "e.csv", "")
    assert main(["mmd", a, b]) == 2
    assert "column mismatch" in capsys.readouterr().err
    assert main(["mmd", empty, b]) == 2
    assert main(["mmd", a, str(tmp_path / "missing.csv")]) == 2
    assert main(["mmd", b, b, "--bandwidth", "wide"]) == 2


# config resolution ----------------------------------------------------------

def test_resolve_materializes_defaults():
    cfg = resolve_config("ode_gmm")
    assert cfg["scenario"] == "ode_gmm"
    assert {k: v for k, v in cfg.items() if k != "scenario"} == DEFAULTS["ode_gmm"]
    assert cfg["seed"] == 42 and cfg["histogram_bins"] == 50


def test_resolve_precedence():
    cfg = resolve_config("reduced_prop", {"runs": 3, "nxi": 4}, {"runs": 2, "ridge": None})
    assert cfg["runs"] == 2 and cfg["nxi"] == 4 and cfg["ridge"] is None


@pytest.mark.parametrize("scenario,user", [
    ("ode_gmm", {"n_sample": 10}),
    ("ode_gmm", {"gmm": {"kind": "gaussian", "mean": [0.0], "cov": [[1.0]]}}),
    ("ode_gmm", {"step": 0.007}),
    ("ode_gmm", {"bandwidths": [0.0]}),
    ("arx_fit", {"pve": {"kind": "ellipsoid", "center": [0.45, 0.3], "shape": [[0.01, 0], [0, 0.01]]}}),
    ("reduced_prop", {"sizes": [0]}),
    ("reduced_prop", {"selection": "greedy"}),
    ("propagate", {"system": "lorenz"}),
    ("propagate", {"system": "linear_ode", "method": "reduced"}),
    ("ode_gmm", {"scenario": "arx_fit"}),
])
def test_resolve_rejects(scenario, user):
    with pytest.raises(ValueError):
        resolve_config(scenario, user)


def test_cli_bad_config_exit_code(tmp_path, capsys):
    bad = _write(tmp_path / "c.json", '{"runs": 2,\n "oops"}')
    assert main(["reduced-prop", "--config", bad, "--out", str(tmp_path)]) == 2
    assert "c.json:2" in capsys.readouterr().err
    assert main(["reduced-prop", "--set", "runs=0", "--out", str(tmp_path)]) == 2
    assert main(["reduced-prop", "--set", "bogus", "--out", str(tmp_path)]) == 2


def test_cli_numerical_failure_exit_code(tmp_path, capsys):
    law = json.dumps({"kind": "uniform", "lower": [1e5], "upper": [2e5]})
    code = main(["propagate", "--system", "linear_ode", "--set", "law=" + law,
                 "--set", "t_end=3.0", "--out", str(tmp_path)])
    assert code == 1
    assert "diverged" in capsys.readouterr().err


# scenario outputs -----------------------------------------------------------

def test_ode_gmm_outputs(tmp_path):
    cfg = resolve_config("ode_gmm", {"n_samples": 60, "report_every": 100, "histogram_bins": 20})
    res = run_ode_gmm(cfg, tmp_path)
    dist = _rows(tmp_path / "distances.csv")
    kernels = {r["kernel"] for r in dist}
    assert kernels == {"polynomial(1)", "polynomial(2)", "polynomial(3)", "polynomial(4)",
                       "gaussian(0.1)", "gaussian(1)", "gaussian(10)"}
    assert sorted({float(r["time"]) for r in dist}) == [0.0, 1.0, 2.0, 3.0]
    assert all(float(r["value"]) == 0.0 for r in dist if float(r["time"]) == 0.0)
    hist = _rows(tmp_path / "histogram.csv")
    assert len(hist) == 40
    for law in ("gmm", "gaussian"):
        rows = [r for r in hist if r["law"] == law]
        widths = [float(r["bin_right"]) - float(r["bin_left"]) for r in rows]
        assert sum(w * float(r["density"]) for w, r in zip(widths, rows)) == pytest.approx(1.0)
    ens = _rows(tmp_path / "ensemble.csv")
    assert list(ens[0]) == ["time", "realization", "x0", "model"]
    assert len(ens) == 2 * 301 * 50
    assert res["matched"].mean[0] == pytest.approx(-0.12)
    assert res["matched"].cov[0, 0] == pytest.approx(0.7 * (0.0625 + 0.36) + 0.3 * (0.1225 + 1) - 0.0144)
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest == cfg


def test_ode_gmm_degenerate_mixture_near_zero(tmp_path):
    comp = {"weight": 1.0, "mean": [-0.5], "cov": [[0.04]]}
    n = 400
    cfg = resolve_config("ode_gmm", {"gmm": {"kind": "gmm", "components": [comp]},
                                     "n_samples": n, "report_every": 50})
    res = run_ode_gmm(cfg, tmp_path)
    for curve in res["distances"].values():
        assert max(v for _, v in curve) <= 3 / math.sqrt(n)


def test_arx_outputs_and_identical_law_floor(tmp_path):
    true = DEFAULTS["arx_fit"]["true"]
    cfg = resolve_config("arx_fit", {"pve": true, "n_samples": 150, "horizon": 60})
    res = run_arx_fit(cfg, tmp_path)
    rows = _rows(tmp_path / "distances.csv")
    assert {r["model"] for r in rows} == {"pve", "lsq", "baseline"}
    assert len(rows) == 3 * 61
    summary = {r["model"]: float(r["mean_distance"]) for r in _rows(tmp_path / "summary.csv")}
    assert summary == pytest.approx(res["mean_distance"])
    # same law: within sampling noise of the independent-run baseline
    assert summary["pve"] <= 2.0 * summary["baseline"]
    assert summary["lsq"] > 3.0 * summary["baseline"]


def test_arx_point_estimate_misses_spread(tmp_path):
    point = {"kind": "point", "value": [0.2, 0.3]}
    cfg = resolve_config("arx_fit", {"lsq": point, "n_samples": 150, "horizon": 60})
    res = run_arx_fit(cfg, tmp_path)
    # a point mass has no spread, so it sits above the same-law sampling floor
    assert res["mean_distance"]["lsq"] > res["mean_distance"]["baseline"] > 0.0


def test_reduced_prop_outputs(tmp_path):
    cfg = resolve_config("reduced_prop", {"runs": 2, "sizes": [5, 10], "reference_size": 100})
    res = run_reduced_prop(cfg, tmp_path)
    errs = _rows(tmp_path / "errors.csv")
    assert len(errs) == 2 * 2 * 2
    assert {r["method"] for r in errs} == {"direct", "reduced"}
    summ = _rows(tmp_path / "summary.csv")
    assert len(summ) == 4 and set(summ[0]) == {"method", "size", "mean", "std"}
    rs = _rows(tmp_path / "reduced_set.csv")
    assert max(float(r["time"]) for r in rs) == 10.0
    assert all(float(r["error"]) >= 0 for r in errs)
    assert res["summary"][("reduced", 10)][0] >= 0


def test_reduced_prop_degenerate_noise(tmp_path):
    cfg = resolve_config("reduced_prop", {
        "noise": {"kind": "point", "value": [0.0]}, "runs": 2, "sizes": [5, 10],
        "reference_size": 50})
    res = run_reduced_prop(cfg, tmp_path)
    assert all(e <= 1e-10 for *_, e in res["errors"])


def test_reduced_full_reconstruction_at_reference_size(tmp_path):
    from kme_dyn.dynamics import random_walk_drift
    from kme_dyn.embedding import Expansion, rkhs_dist_sq
    from kme_dyn.kernels import Gaussian
    from kme_dyn.propagation import fit_weights, propagate_direct, reduce

    ens = propagate_direct(random_walk_drift(10), [0.0], None, 500, seed=1)
    ref = ens.embedding(10, Gaussian(0.5))
    assert rkhs_dist_sq(reduce(ref, 500, seed=2), ref) <= 1e-8
    alpha = fit_weights(ref, ref.points)
    assert rkhs_dist_sq(Expansion(ref.kernel, ref.points, alpha), ref) <= 1e-8


@pytest.mark.parametrize("argv", [
    ["propagate"],
    ["propagate", "--method", "reduced", "--nr", "5", "--nxi", "3"],
    ["propagate", "--system", "linear_ode", "--n-samples", "4", "--set", "t_end=0.5"],
    ["propagate", "--system", "arx2", "--horizon", "12", "--n-samples", "5"],
    ["propagate", "--system", "arx2", "--method", "reduced", "--horizon", "5", "--x0", "1", "0"],
])
def test_propagate_cli(tmp_path, argv):
    assert main(argv + ["--out", str(tmp_path)]) == 0
    rows = _rows(tmp_path / "ensemble.csv")
    assert rows and "weight" in rows[0]
    by_time = {}
    for r in rows:
        by_time.setdefault(r["time"], 0.0)
        by_time[r["time"]] += float(r["weight"])
    assert by_time["0.0"] == pytest.approx(1.0)
    if "reduced" not in argv:
        # fitted reduced-set weights are unconstrained, so only sampled ensembles sum to one
        assert all(abs(m - 1.0) < 1e-9 for m in by_time.values())


@pytest.mark.parametrize("argv", [
    ["ode-gmm", "--n-samples", "40", "--report-every", "100"],
    ["arx-fit", "--n-samples", "40", "--horizon", "30"],
    ["reduced-prop", "--runs", "2", "--sizes", "5", "--reference-size", "60"],
    ["propagate", "--method", "reduced"],
])
def test_rerun_from_manifest_byte_identical(tmp_path, argv):
    first, second = tmp_path / "a", tmp_path / "b"
    assert main(argv + ["--out", str(first)]) == 0
    assert main(["--verbose", argv[0], "--config", str(first / "manifest.json"),
                 "--out", str(second)]) == 0
    names = sorted(p.name for p in first.iterdir())
    assert names == sorted(p.name for p in second.iterdir())
    for name in names:
        assert (first / name).read_bytes() == (second / name).read_bytes(), name


def test_seed_changes_output(tmp_path):
    for seed, sub in ((1, "a"), (2, "b")):
        assert main(["reduced-prop", "--runs", "1", "--sizes", "5", "--reference-size", "40",
                     "--seed", str(seed), "--out", str(tmp_path / sub)]) == 0
    assert (tmp_path / "a" / "errors.csv").read_bytes() != (tmp_path / "b" / "errors.csv").read_bytes()


def test_console_script_help():
    out = subprocess.run([sys.executable, "-m", "kme_dyn.cli", "--help"], capture_output=True,
                         text=True, check=True)
    for cmd in ("ode-gmm", "arx-fit", "reduced-prop", "mmd", "propagate"):
        assert cmd in out.stdout

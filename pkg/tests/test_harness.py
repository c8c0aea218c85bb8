import hashlib
import json
import math
import os

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dualavg.da_core import theoretical_bounds
from dualavg.harness.analysis import certify_summary, coverage_check, coverage_threshold, rate_fit
from dualavg.harness.cli import main
from dualavg.harness.config import ConfigError, dump_config, load_config, parse_config
from dualavg.harness.plots import emit_plots
from dualavg.harness.runner import CSV_HEADER, build_problem, format_rows, run_experiment, run_trial, trial_rng

CONFIGS = os.path.join(os.path.dirname(__file__), os.pardir, "configs")

SMALL = """
[problem]
family = power
n = 3
rho = 2
set = euclidean_ball
x_star = zero
lipschitz_radius = 1.0

[algorithm]
scheme = {scheme}
mode = budget
N = 200
x0 = e1:0.5

[noise]
kind = {noise}
sigma = 0.5
seed = 11

[run]
trials = {trials}
sweep = {sweep}
"""


def small(scheme="ball", noise="none", trials=1, sweep=""):
    return parse_config(SMALL.format(scheme=scheme, noise=noise, trials=trials, sweep=sweep))


def digest(root, skip=("timing.json",)):
    out = {}
    for d, _, files in os.walk(root):
        for f in files:
            if f in skip:
                continue
            p = os.path.join(d, f)
            with open(p, "rb") as fh:
                out[os.path.relpath(p, root)] = hashlib.sha256(fh.read()).hexdigest()
    return out


# ---------------------------------------------------------------------------
# config


def test_parse_defaults_and_roundtrip():
    cfg = small()
    assert cfg.prox.kind == "half_sq_euclid"
    assert cfg.algorithm.N == 200 and cfg.noise.seed == 11
    again = parse_config(dump_config(cfg))
    assert again == cfg


@pytest.mark.parametrize("patch,field", [
    (("rho = 2", "rho = 1.5"), "problem.rho"),
    (("scheme = ball", "scheme = sgd"), "algorithm.scheme"),
    (("N = 200", "N = many"), "algorithm.N"),
    (("x_star = zero", "x_star = zero\ncolour = red"), "problem.colour"),
    (("kind = none", "kind = cauchy"), "noise.kind"),
    (("trials = 1", "trials = 0"), "run.trials"),
    (("mode = budget", "mode = eps"), "algorithm.eps"),
])
def test_validation_names_the_field(patch, field):
    text = SMALL.format(scheme="ball", noise="none", trials=1, sweep="")
    with pytest.raises(ConfigError) as exc:
        parse_config(text.replace(*patch))
    assert exc.value.field == field


def test_adaptive_needs_budget_and_stochastic_variants_need_noise():
    with pytest.raises(ConfigError, match="algorithm.mode"):
        parse_config(SMALL.format(scheme="adaptive", noise="none", trials=1, sweep="").replace(
            "mode = budget", "mode = eps\neps = 0.1"))
    with pytest.raises(ConfigError, match="noise.kind"):
        small(scheme="adaptive-s")


def test_out_override(tmp_path, monkeypatch):
    p = tmp_path / "c.ini"
    p.write_text(SMALL.format(scheme="ball", noise="none", trials=1, sweep=""))
    monkeypatch.setenv("DUALAVG_OUT", str(tmp_path / "elsewhere"))
    assert load_config(p).run.out == str(tmp_path / "elsewhere")


def test_shipped_configs_parse():
    names = sorted(f for f in os.listdir(CONFIGS) if f.endswith(".ini"))
    assert len(names) >= 10
    for name in names:
        cfg = load_config(os.path.join(CONFIGS, name))
        build_problem(cfg.at(cfg.run.sweep[0]) if cfg.run.sweep else cfg)


# ---------------------------------------------------------------------------
# runner


def test_trial_seeds_do_not_depend_on_trial_count():
    a = trial_rng(5, 3).standard_normal(4)
    b = trial_rng(5, 3).standard_normal(4)
    c = trial_rng(5, 4).standard_normal(4)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)


def test_csv_formatting():
    text = format_rows([(0, 1, 2, 3, 0.1, math.nan, 1 / 3, 1e-300, 2.0, 0.5)])
    assert text == "0,1,2,3,0.10000000000000001,,0.33333333333333331,1e-300,2,0.5\n"


def test_oracle_calls_match_trace():
    for scheme in ("da", "ball", "fixed_dilation", "adaptive"):
        rows, rec = run_trial(small(scheme), 0)
        assert rec["oracle_calls"] == rows[-1][3]
        assert rec["oracle_calls"] <= 201


def test_sweep_writes_one_trace_per_point(tmp_path):
    cfg = small(sweep="100, 1000, 10000, 100000")
    summary = run_experiment(cfg, tmp_path, sweep=True)
    assert [pt["N"] for pt in summary["points"]] == [100, 1000, 10000, 100000]
    merged = sorted(f for f in os.listdir(tmp_path / "traces") if f.endswith(".csv"))
    assert merged == ["N100.csv", "N1000.csv", "N10000.csv", "N100000.csv"]
    for f in merged:
        assert (tmp_path / "traces" / f).read_text().splitlines()[0] == CSV_HEADER
    assert (tmp_path / "summary.json").exists() and (tmp_path / "config.ini").exists()
    for pt in summary["points"]:
        assert pt["oracle_calls"]["max"] <= pt["N"]


def test_rerun_is_byte_identical(tmp_path):
    cfg = small(noise="subgaussian", trials=3)
    run_experiment(cfg, tmp_path / "a")
    run_experiment(cfg, tmp_path / "b")
    run_experiment(cfg, tmp_path / "c", workers=2)
    da, db, dc = digest(tmp_path / "a"), digest(tmp_path / "b"), digest(tmp_path / "c")
    assert da == db == dc
    assert len(da) == 3 + 1 + 2   # per-trial traces, merged trace, config and summary


def test_adding_trials_keeps_existing_ones(tmp_path):
    run_experiment(small(noise="subgaussian", trials=2), tmp_path / "a")
    run_experiment(small(noise="subgaussian", trials=4), tmp_path / "b")
    for t in range(2):
        name = os.path.join("traces", "N200", f"trial_{t:04d}.csv")
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_stochastic_summary_statistics(tmp_path):
    summary = run_experiment(small(noise="bounded", trials=6), tmp_path)
    pt = summary["points"][0]
    gaps = [r["f_gap"] for r in pt["trials"]]
    assert pt["f_gap"]["mean"] == pytest.approx(np.mean(gaps))
    assert pt["f_gap"]["q05"] <= pt["f_gap"]["q50"] <= pt["f_gap"]["q95"]
    assert pt["bound_kind"] == "expectation"
    assert len(set(gaps)) == 6


def test_resisting_family_records_lower_bound():
    cfg = parse_config(open(os.path.join(CONFIGS, "resisting.ini")).read())
    rows, rec = run_trial(cfg, 0)
    assert rec["M"] == 49 and rec["bound_kind"] == "lower"
    assert rec["f_gap"] > cfg.algorithm.eps
    # no known optimum: the trace leaves those cells empty
    assert math.isnan(rows[-1][4])


# ---------------------------------------------------------------------------
# analysis


@pytest.mark.parametrize("power", [1.0, 0.5, 0.75])
def test_rate_fit_exact_power_law(power):
    pts = [(n, 3.0 * n ** -power) for n in (1e2, 1e3, 1e4, 1e5)]
    fit = rate_fit(pts)
    assert fit["slope"] == pytest.approx(-power, abs=1e-6)
    assert fit["intercept"] == pytest.approx(math.log(3.0), abs=1e-6)
    assert fit["r2"] == pytest.approx(1.0)


def test_rate_fit_excludes_degenerate():
    pts = [(10, 0.1), (100, 0.0), (1000, 0.001), (10000, -1.0), (1e5, 1e-5)]
    fit = rate_fit(pts)
    assert fit["excluded"] == 2
    assert fit["slope"] == pytest.approx(-1.0)
    with pytest.raises(ValueError):
        rate_fit(pts[:3])


@settings(max_examples=40, deadline=None)
@given(c=st.floats(1e-3, 1e3), a=st.floats(0.1, 3.0))
def test_rate_fit_recovers_any_power(c, a):
    pts = [(n, c * n ** -a) for n in (10, 50, 300, 2000)]
    assert rate_fit(pts)["slope"] == pytest.approx(-a, abs=1e-8)


def test_coverage_all_below():
    res = coverage_check(np.full(150, 0.1), 1.0, 0.1)
    assert res == {"violations": 0, "rate": 0.0, "threshold": coverage_threshold(0.1, 150), "pass": True}


def test_coverage_rules():
    gaps = np.linspace(0.0, 1.0, 200)
    assert not coverage_check(gaps, 0.5, 0.1)["pass"]
    with pytest.raises(ValueError):
        coverage_check(gaps[:50], 1.0, 0.1)
    with pytest.raises(ValueError):
        coverage_check(list(gaps[:150]) + [None] * 50, 1.0, 0.1)
    thr = 0.1 + 3 * math.sqrt(0.09 / 500)
    assert coverage_threshold(0.1, 500) == pytest.approx(thr)


def test_certify_summary_kinds(tmp_path):
    summary = run_experiment(small(sweep="100, 1000"), tmp_path, sweep=True)
    checks = certify_summary(summary)
    assert checks and all(c["pass"] for c in checks)
    summary["points"][0]["bound"] = 1e-12
    assert not certify_summary(summary)[0]["pass"]


# ---------------------------------------------------------------------------
# plots and CLI


def test_plot_overlay_matches_bound(tmp_path):
    cfg = small(scheme="da", sweep="10, 100, 1000")
    summary = run_experiment(cfg, tmp_path, sweep=True)
    png, csv = emit_plots(summary, tmp_path)
    assert os.path.getsize(png) > 0
    lines = open(csv).read().splitlines()[1:]
    prob = build_problem(cfg)
    for line, N in zip(lines, (10, 100, 1000)):
        x, gap, bound = (float(v) for v in line.split(","))
        ref = theoretical_bounds(prob.oracle.params, prob.setup.prox, prob.R0, N)["f_gap_bound"]
        assert x == N and bound == ref and 0 < gap <= bound


def test_plot_empty_sweep(tmp_path):
    with pytest.raises(ValueError):
        emit_plots({"points": []}, tmp_path)
    (tmp_path / "summary.json").write_text(json.dumps({"points": []}))
    assert main(["plot", str(tmp_path)]) == 1


def test_cli_exit_codes(tmp_path, capsys):
    cfgfile = tmp_path / "c.ini"
    cfgfile.write_text(SMALL.format(scheme="ball", noise="none", trials=1, sweep="100, 1000"))
    out = tmp_path / "run"
    assert main(["run", str(cfgfile), "--out", str(out)]) == 0
    assert main(["certify", str(out)]) == 0
    assert main(["sweep", str(cfgfile), "--out", str(tmp_path / "sw"), "--seed", "3"]) == 0
    assert main(["plot", str(tmp_path / "sw")]) == 0
    # tamper with the stored bound: certification must fail
    s = json.loads((out / "summary.json").read_text())
    s["points"][0]["bound"] = 0.0
    (out / "summary.json").write_text(json.dumps(s))
    assert main(["certify", str(out)]) == 2
    bad = tmp_path / "bad.ini"
    bad.write_text("[problem]\nrho = 1\n")
    assert main(["run", str(bad), "--out", str(tmp_path / "x")]) == 1
    empty = tmp_path / "empty.ini"
    empty.write_text(SMALL.format(scheme="ball", noise="none", trials=1, sweep=""))
    assert main(["sweep", str(empty), "--out", str(tmp_path / "y")]) == 1
    assert "error" in capsys.readouterr().err


def test_cli_coverage(tmp_path):
    cfgfile = tmp_path / "c.ini"
    text = SMALL.format(scheme="adaptive-s", noise="subgaussian", trials=100, sweep="").replace(
        "N = 200", "N = 100\nalpha = 0.1")
    cfgfile.write_text(text)
    out = tmp_path / "cov"
    assert main(["run", str(cfgfile), "--out", str(out)]) == 0
    assert main(["coverage", str(out), "--alpha", "0.1"]) == 0
    # a budget-mode run without enough trials is an error
    few = tmp_path / "few.ini"
    few.write_text(text.replace("trials = 100", "trials = 5"))
    assert main(["run", str(few), "--out", str(tmp_path / "few")]) == 0
    assert main(["coverage", str(tmp_path / "few"), "--alpha", "0.1"]) == 1


def test_coverage_negative_control(tmp_path):
    cfg = load_config(os.path.join(CONFIGS, "coverage_adaptive_s.ini"))
    cfg.run.trials = 100
    s = run_experiment(cfg, tmp_path)
    pt = s["points"][0]
    gaps = [r["f_gap"] for r in pt["trials"]]
    cert = pt["bound"]
    assert coverage_check(gaps, cert, 0.1)["pass"]
    assert not coverage_check(gaps, cert / 1e3, 0.1)["pass"]

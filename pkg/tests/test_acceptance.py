"""End-to-end acceptance gate.

Each test is one shipped criterion and prints a single PASS/FAIL line
to the terminal, independent of pytest's capture settings.
"""

import math
from contextlib import contextmanager
from fractions import Fraction
from pathlib import Path

from kmrates import cli
from kmrates.convexity import eta_cat0
from kmrates.harness import comparison_table
from kmrates.iteration import constant_schedule, witness_theta
from kmrates.rates import (
    cat0_bound,
    cat0_constant_bound,
    constant_lambda_bound,
    groetsch_bound,
    groetsch_bound_tilde,
    ishikawa_bound,
    theta_closed_form,
)

AXIOM_KEYS = (
    "metric-symmetry", "metric-identity", "metric-triangle",
    "W1", "W2", "W3", "W4", "CN", "segment", "uc-midpoint", "uc-lambda",
)
FULL_SAMPLE_CONFIGS = {
    "euclid-rotation": 1e-9,
    "tree-swap": 1e-9,
    "hyperboloid-rotation": 1e-7,
}


@contextmanager
def verdict(capsys, index, label):
    ok = False
    try:
        yield
        ok = True
    finally:
        with capsys.disabled():
            print(f"acceptance {index}/8: {'PASS' if ok else 'FAIL'} {label}")


def test_c1_exact_rate_values(capsys):
    with verdict(capsys, 1, "exact certificate values and zero cutoffs"):
        theta = theta_closed_form(0.5)
        cat0 = eta_cat0()
        assert ishikawa_bound(1.0, 1.0, 2).value == 35772
        assert ishikawa_bound(2.0, 1.0, 2).value == 3228
        assert cat0_bound(0.5, 1.0, theta).value == 512
        assert cat0_constant_bound(0.5, 1.0, 0.5).value == 512
        assert groetsch_bound(1.0, 1.0, theta, cat0).value == 256
        assert groetsch_bound_tilde(1.0, 1.0, theta, cat0).value == 64
        # every family reports 0 once eps clears the diameter cutoff
        assert groetsch_bound(2.0, 1.0, theta, cat0).value == 0
        assert groetsch_bound_tilde(2.5, 1.0, theta, cat0).value == 0
        assert cat0_bound(2.0, 1.0, theta).value == 0
        assert cat0_constant_bound(2.0, 1.0, 0.5).value == 0
        assert constant_lambda_bound(2.0, 1.0, 0.5, cat0).value == 0


def test_c2_axiom_suites_at_full_samples(capsys, shipped_reports):
    with verdict(capsys, 2, "axiom and convexity suites clean at 10^4 samples"):
        for name, tol in FULL_SAMPLE_CONFIGS.items():
            checks = shipped_reports[name].checks
            for key in AXIOM_KEYS:
                report = checks[key]
                assert report.samples == 10000, (name, key)
                assert report.violations == 0, (name, key)
                assert report.tol == tol, (name, key)
            assert checks["midpoint-uniqueness"].violations == 0, name


def test_c3_descent_checks_along_traces(capsys, shipped_reports):
    with verdict(capsys, 3, "per-step and summed descent hold along traces"):
        for name in FULL_SAMPLE_CONFIGS:
            report = shipped_reports[name]
            assert report.trace.last_index >= 200, name
            for key in ("descent-step", "descent-step-tilde", "descent-summed"):
                check = report.checks[key]
                assert check.violations == 0, (name, key)
                # skips are allowed, silent failure is not
                assert check.samples > 0, (name, key)


def test_c4_residual_monotonicity(capsys, shipped_reports):
    with verdict(capsys, 4, "residuals nonincreasing on every shipped trace"):
        assert "euclid-alternating" in shipped_reports
        for name, report in shipped_reports.items():
            check = report.checks["residual-monotone"]
            assert check.violations == 0, name
            assert check.samples == report.trace.last_index, name


def test_c5_bounds_certify_crossings(capsys, shipped_reports):
    with verdict(capsys, 5, "observed crossings within every certificate"):
        assert len(shipped_reports) == 5
        for name, report in shipped_reports.items():
            assert report.rows, name
            for row in report.rows:
                assert row.n_star is not None, (name, row.eps)
                assert row.valid, (name, row.eps)
        rows = {row.eps: row for row in shipped_reports["euclid-rotation"].rows}
        # residual sqrt(2) (sqrt(2)/2)^n first drops below 1/2 at n = 3
        assert rows[0.5].n_star == 3


def test_c6_witness_indices(capsys):
    with verdict(capsys, 6, "witness indices match direct summation"):
        half = constant_schedule(0.5)
        for n in range(1, 1001):
            assert witness_theta(half, n) == 4 * n - 1
        for lam in (Fraction(1, 10), Fraction(1, 4), Fraction(1, 2),
                    Fraction(9, 10)):
            weight = lam * (1 - lam)
            closed = theta_closed_form(lam)
            sched = constant_schedule(float(lam))
            for n in (1, 2, 7, 100, 999, 1000):
                big_n = closed(n)
                # indices 0..N inclusive, checked in exact arithmetic
                assert (big_n + 1) * weight >= n
                assert witness_theta(sched, n) <= big_n


def test_c7_exponential_vs_quadratic_gap(capsys):
    with verdict(capsys, 7, "quadratic certificates beat the exponential one"):
        rows = comparison_table([1.0, 0.1, 0.01], 1.0, 2, 0.5)
        for row, needed in zip(rows, (2.0, 20.0, 250.0)):
            exp_log = row.ishikawa.log10
            assert exp_log is not None
            for quad in (row.cat0, row.cat0_constant):
                gap = exp_log - math.log10(quad.value)
                assert gap >= needed - 1.0, (row.eps, quad.theorem)


def test_c8_determinism(capsys, tmp_path):
    with verdict(capsys, 8, "identical seeds reproduce outputs byte for byte"):
        config = str(Path(__file__).resolve().parent.parent
                     / "configs" / "euclid-rotation.toml")
        outputs, traces = [], []
        for _ in range(2):
            assert cli.main(["run", config, "--out", str(tmp_path)]) == 0
            outputs.append(capsys.readouterr().out)
            traces.append((tmp_path / "euclid-rotation.csv").read_bytes())
        assert outputs[0] == outputs[1]
        assert traces[0] == traces[1]
        for tag in ("c", "d"):
            assert cli.main(["check", config]) == 0
            outputs.append(capsys.readouterr().out)
        assert outputs[2] == outputs[3]

import csv
import math

import numpy as np
import pytest

from kmrates.convexity import Modulus, constant_modulus, eta_cat0
from kmrates.geometry import GeometryError, Sampler
from kmrates.iteration import (DescentCheckParams, IterationError, alpha,
                               alternating_schedule, check_km_growth,
                               check_main_lemma, check_main_lemma_along,
                               check_main_lemma_tilde, check_residual_monotone,
                               check_summed_descent, check_summed_descent_auto,
                               constant_schedule, km_step, list_schedule,
                               merge_reports, run_km, witness_theta,
                               write_trace_csv)
from kmrates.operators import Operator, make_edge_swap, make_rotation, make_scaling
from kmrates.spaces import EuclideanSpace


@pytest.fixture
def quarter_turn(euclid):
    return make_rotation(euclid, math.pi / 2)


@pytest.fixture
def rotation_trace(euclid, quarter_turn):
    return run_km(euclid, quarter_turn, euclid.point([1.0, 0.0]),
                  constant_schedule(0.5), 40)


class TestSchedules:
    def test_constant_value(self):
        sched = constant_schedule(0.3)
        assert sched.constant == 0.3
        assert sched.value_at(0) == sched.value_at(999) == 0.3

    def test_constant_rejects_endpoints(self):
        for bad in (0.0, 1.0, -0.1, 1.7):
            with pytest.raises(GeometryError):
                constant_schedule(bad)

    def test_list_schedule_consumes_then_tails(self):
        sched = list_schedule([0.2, 0.8], tail=0.5)
        assert [sched.value_at(k) for k in range(4)] == [0.2, 0.8, 0.5, 0.5]

    def test_list_schedule_exhaustion(self):
        sched = list_schedule([0.2, 0.8])
        sched.value_at(1)
        with pytest.raises(IterationError):
            sched.value_at(2)

    def test_list_schedule_range_checked(self):
        with pytest.raises(GeometryError):
            list_schedule([0.2, 1.3]).value_at(1)

    def test_alternating_values(self):
        sched = alternating_schedule()
        expected = [0.5 + (-1) ** k / (k + 3) for k in range(6)]
        got = [sched.value_at(k) for k in range(6)]
        assert got == pytest.approx(expected)

    def test_alternating_rejects_escaping_base(self):
        with pytest.raises(GeometryError):
            alternating_schedule(base=0.5, shift=1)

    def test_vectorized_values_match_scalar(self):
        for sched in (constant_schedule(0.4), alternating_schedule(),
                      list_schedule([0.1, 0.9, 0.5], tail=0.3)):
            vec = sched.values(0, 7)
            assert vec == pytest.approx([sched.value_at(k) for k in range(7)])
            w = sched.weights(0, 7)
            assert w == pytest.approx(vec * (1 - vec))


class TestWitnessTheta:
    @staticmethod
    def brute_force(sched, n):
        total = 0.0
        k = 0
        while True:
            lam = sched.value_at(k)
            total += lam * (1 - lam)
            if total >= n:
                return k
            k += 1

    @pytest.mark.parametrize("sched", [
        constant_schedule(0.3), alternating_schedule(),
        list_schedule([0.9, 0.1, 0.5], tail=0.25),
    ], ids=["constant", "alternating", "list"])
    @pytest.mark.parametrize("n", [1, 2, 5, 17])
    def test_matches_direct_summation(self, sched, n):
        assert witness_theta(sched, n) == self.brute_force(sched, n)

    def test_half_schedule_closed_form(self):
        sched = constant_schedule(0.5)
        for n in (1, 2, 3, 10, 50):
            assert witness_theta(sched, n) == 4 * n - 1

    def test_zero_target(self):
        assert witness_theta(constant_schedule(0.5), 0) == 0

    def test_negative_target_rejected(self):
        with pytest.raises(GeometryError):
            witness_theta(constant_schedule(0.5), -1)

    def test_cutoff_raises(self):
        with pytest.raises(IterationError):
            witness_theta(constant_schedule(0.5), 10 ** 6, cutoff=100)


class TestRunKm:
    def test_rotation_residuals_match_closed_form(self, rotation_trace):
        # lam = 1/2 halves the point toward the rotated copy, so the
        # residual is sqrt(2) * (sqrt(2)/2)^n
        for n in range(20):
            expected = math.sqrt(2.0) * (math.sqrt(2.0) / 2.0) ** n
            assert rotation_trace.residual(n) == pytest.approx(expected, rel=1e-12)

    def test_trace_lengths(self, rotation_trace):
        assert len(rotation_trace) == 41
        assert rotation_trace.last_index == 40
        assert len(rotation_trace.points) == 41
        assert len(rotation_trace.lambdas) == 40

    def test_first_crossing(self, rotation_trace):
        assert rotation_trace.first_crossing(1.5) == 0
        assert rotation_trace.first_crossing(0.5) == 3
        assert rotation_trace.first_crossing(0.0) is None

    def test_km_step_matches_combine(self, euclid, quarter_turn):
        x = euclid.point([1.0, 0.0])
        out = km_step(euclid, quarter_turn, x, 0.5)
        assert np.allclose(out, euclid.combine(x, quarter_turn(x), 0.5))

    def test_early_stop_on_target(self, euclid, quarter_turn):
        trace = run_km(euclid, quarter_turn, euclid.point([1.0, 0.0]),
                       constant_schedule(0.5), 100, target_residual=0.1)
        assert trace.stopped_early
        assert trace.residual(trace.last_index) <= 0.1
        assert trace.last_index < 100
        assert all(r > 0.1 for r in trace.residuals[:-1])

    def test_fixed_point_start_stops_immediately(self, euclid, quarter_turn):
        trace = run_km(euclid, quarter_turn, euclid.point([0.0, 0.0]),
                       constant_schedule(0.5), 10)
        assert len(trace) == 1
        assert trace.residual(0) == 0.0
        assert trace.stopped_early

    def test_point_cap(self, euclid, quarter_turn):
        trace = run_km(euclid, quarter_turn, euclid.point([1.0, 0.0]),
                       constant_schedule(0.5), 10, point_cap=5)
        assert len(trace.residuals) == 11
        assert len(trace.points) == 6
        trace.point(5)
        with pytest.raises(IterationError):
            trace.point(6)

    def test_nonfinite_residual_aborts(self, euclid):
        flip = make_scaling(euclid, -1.0)
        huge = euclid.point([1e308, 0.0])
        with np.errstate(over="ignore"):
            with pytest.raises(IterationError):
                run_km(euclid, flip, huge, constant_schedule(0.5), 3)

    def test_negative_steps_rejected(self, euclid, quarter_turn):
        with pytest.raises(GeometryError):
            run_km(euclid, quarter_turn, euclid.point([1.0, 0.0]),
                   constant_schedule(0.5), -1)

    def test_weight_sum(self, rotation_trace):
        assert rotation_trace.weight_sum(3) == pytest.approx(4 * 0.25)

    def test_tree_iteration(self, tree):
        op = make_edge_swap(tree)
        trace = run_km(tree, op, tree.point(0, 2.0), constant_schedule(0.25), 30)
        assert check_residual_monotone(trace, 1e-9).passed
        assert trace.residual(0) == pytest.approx(4.0)


class TestTraceChecks:
    def test_residual_monotone_passes(self, rotation_trace):
        assert check_residual_monotone(rotation_trace, 1e-9).passed

    def test_residual_monotone_catches_growth(self, euclid):
        grow = make_scaling(euclid, 1.5)
        trace = run_km(euclid, grow, euclid.point([1.0, 0.0]),
                       constant_schedule(0.5), 10)
        report = check_residual_monotone(trace, 1e-9)
        assert not report.passed
        assert report.violations == 10

    def test_km_growth_fixed_reference(self, rotation_trace, euclid):
        assert check_km_growth(rotation_trace, euclid.point([0.0, 0.0]), 1e-9).passed

    def test_km_growth_arbitrary_reference(self, rotation_trace, euclid):
        # the growth estimates hold for every reference, not just fixed points
        assert check_km_growth(rotation_trace, euclid.point([0.4, -0.2]), 1e-9).passed

    def test_alpha_at_fixed_point_is_distance(self, rotation_trace, euclid):
        y = euclid.point([0.0, 0.0])
        for n in (0, 1, 5):
            expected = np.linalg.norm(rotation_trace.point(n))
            assert alpha(rotation_trace, y, n) == pytest.approx(expected)


class TestDescentChecks:
    def test_params_must_be_positive(self, euclid):
        with pytest.raises(GeometryError):
            DescentCheckParams(y=euclid.point([0.0, 0.0]), a=-1.0)

    def test_step_estimate_holds(self, rotation_trace, euclid):
        y = euclid.point([0.3, 0.0])
        n = 2
        al = alpha(rotation_trace, y, n)
        params = DescentCheckParams(y=y, a=rotation_trace.residual(n),
                                    gamma=al, beta=al, beta_tilde=al)
        report = check_main_lemma(rotation_trace, params, eta_cat0(), n, 1e-9)
        assert report.passed and report.skipped == 0

    def test_step_estimate_skips_failed_hypothesis(self, rotation_trace, euclid):
        y = euclid.point([0.3, 0.0])
        params = DescentCheckParams(y=y, a=100.0, gamma=0.001, beta=50.0,
                                    beta_tilde=50.0)
        report = check_main_lemma(rotation_trace, params, eta_cat0(), 2, 1e-9)
        assert report.skipped == 1 and report.violations == 0

    def test_step_estimate_requires_monotone_modulus(self, rotation_trace, euclid):
        wavy = Modulus(name="wavy",
                       eval_fn=lambda r, eps: eps * eps / 8 * (1.5 + math.sin(r)))
        params = DescentCheckParams(y=euclid.point([0.0, 0.0]), a=0.1,
                                    gamma=0.1, beta=9.0, beta_tilde=9.0)
        with pytest.raises(GeometryError):
            check_main_lemma(rotation_trace, params, wavy, 0, 1e-9)

    def test_tilde_needs_factored_modulus(self, rotation_trace, euclid):
        params = DescentCheckParams(y=euclid.point([0.0, 0.0]), a=0.1, delta=9.0)
        with pytest.raises(GeometryError):
            check_main_lemma_tilde(rotation_trace, params,
                                   constant_modulus(0.1), 0, 1e-9)

    def test_along_trace_both_variants(self, rotation_trace):
        plain = check_main_lemma_along(rotation_trace, eta_cat0(), 1e-9)
        tilde = check_main_lemma_along(rotation_trace, eta_cat0(), 1e-9, tilde=True)
        assert plain.passed and plain.samples == 40
        assert tilde.passed

    def test_summed_descent_explicit_params(self, rotation_trace, euclid):
        y = euclid.point([0.0, 0.0])
        N = 10
        a = rotation_trace.residual(N)
        gamma = min(alpha(rotation_trace, y, n) for n in range(N + 1))
        c = 1e-12
        params = DescentCheckParams(y=y, a=a, gamma=gamma, b=1.0, c=c,
                                    d=(N + 1) * c)
        report = check_summed_descent(rotation_trace, params, eta_cat0(), N, 1e-9)
        assert report.passed
        assert report.samples == 2  # plain and factored shrink terms

    def test_summed_descent_skips_bad_hypothesis(self, rotation_trace, euclid):
        params = DescentCheckParams(y=euclid.point([0.0, 0.0]), a=50.0,
                                    gamma=50.0, b=1.0, c=1e-12, d=1e-11)
        report = check_summed_descent(rotation_trace, params, eta_cat0(), 5, 1e-9)
        assert report.skipped == 1

    def test_summed_descent_needs_stored_points(self, euclid, quarter_turn):
        trace = run_km(euclid, quarter_turn, euclid.point([1.0, 0.0]),
                       constant_schedule(0.5), 10, point_cap=3)
        params = DescentCheckParams(y=euclid.point([0.0, 0.0]), a=0.01,
                                    gamma=0.01, b=2.0, c=1e-12, d=1e-10)
        with pytest.raises(GeometryError):
            check_summed_descent(trace, params, eta_cat0(), 8, 1e-9)

    def test_auto_variants_use_declared_fixed_point(self, rotation_trace):
        assert check_summed_descent_auto(rotation_trace, eta_cat0(), 1e-9).passed
        assert check_main_lemma_along(rotation_trace, eta_cat0(), 1e-9).passed

    def test_auto_variants_need_some_reference(self, euclid):
        anon = Operator(space=euclid, fn=lambda p: 0.5 * p, descriptor="halve")
        trace = run_km(euclid, anon, euclid.point([1.0, 0.0]),
                       constant_schedule(0.5), 5)
        with pytest.raises(GeometryError):
            check_main_lemma_along(trace, eta_cat0(), 1e-9)

    def test_merge_reports(self, rotation_trace):
        a = check_residual_monotone(rotation_trace, 1e-9)
        merged = merge_reports("combo", [a, a])
        assert merged.samples == 2 * a.samples
        assert merged.violations == 0


class TestTraceCsv:
    def test_round_trip_with_reference(self, tmp_path, rotation_trace):
        path = tmp_path / "trace.csv"
        write_trace_csv(rotation_trace, path)
        rows = list(csv.reader(path.open()))
        assert rows[0] == ["n", "residual", "distance_to_reference"]
        assert len(rows) == len(rotation_trace) + 1
        for n, row in enumerate(rows[1:]):
            assert int(row[0]) == n
            assert float(row[1]) == rotation_trace.residual(n)

    def test_without_reference_two_columns(self, tmp_path, euclid):
        anon = Operator(space=euclid, fn=lambda p: 0.5 * p, descriptor="halve")
        trace = run_km(euclid, anon, euclid.point([1.0, 0.0]),
                       constant_schedule(0.5), 5)
        path = tmp_path / "trace.csv"
        write_trace_csv(trace, path)
        rows = list(csv.reader(path.open()))
        assert rows[0] == ["n", "residual"]

    def test_capped_rows_leave_distance_empty(self, tmp_path, euclid, quarter_turn):
        trace = run_km(euclid, quarter_turn, euclid.point([1.0, 0.0]),
                       constant_schedule(0.5), 10, point_cap=4)
        path = tmp_path / "trace.csv"
        write_trace_csv(trace, path)
        rows = list(csv.reader(path.open()))
        assert rows[5][2] != ""
        assert rows[-1][2] == ""

    def test_explicit_reference_changes_distances(self, tmp_path, rotation_trace,
                                                  euclid):
        path = tmp_path / "trace.csv"
        write_trace_csv(rotation_trace, path, reference=euclid.point([1.0, 0.0]))
        rows = list(csv.reader(path.open()))
        assert float(rows[1][2]) == 0.0

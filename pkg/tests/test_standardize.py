import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from edusort.errors import InvalidTargets, IpfSupportError, NotConverged, ShapeMismatch
from edusort.standardize import (
    DEFAULT_OBJECTIVE,
    INVERSE_PRODUCT,
    UNIFORM,
    ObjectiveVariant,
    StandardizationProblem,
    deviation_report,
    kkt_certificate,
    standardize_ipf,
    standardize_qp,
)
from edusort.tables import ContingencyTable, interest_factors

VARIANTS = [UNIFORM, INVERSE_PRODUCT]


def table(cells):
    return ContingencyTable.from_array(cells, normalize=True)


def problem_for(source, target):
    return StandardizationProblem.to_marginals_of(source, target)


tables4 = arrays(float, (4, 4), elements=st.floats(0.001, 1.0)).map(table)
vec4 = arrays(float, 4, elements=st.floats(0.02, 1.0)).map(lambda v: v / v.sum())


class TestProblem:
    def test_invalid_targets(self):
        src = table(np.full((2, 2), 0.25))
        with pytest.raises(InvalidTargets):
            StandardizationProblem(src, [0.5, 0.6], [0.5, 0.5])
        with pytest.raises(InvalidTargets):
            StandardizationProblem(src, [1.5, -0.5], [0.5, 0.5])
        with pytest.raises(InvalidTargets):
            StandardizationProblem(src, [1.0], [0.5, 0.5])

    def test_preserving_target_keeps_interest_factors(self):
        src = table([[0.4, 0.1], [0.1, 0.4]])
        prob = StandardizationProblem(src, [0.7, 0.3], [0.6, 0.4])
        expected = np.outer([0.7, 0.3], [0.6, 0.4]) * interest_factors(src).values
        np.testing.assert_allclose(prob.preserving_target(), expected)

    def test_variant_aliases(self):
        assert ObjectiveVariant("invprod") == INVERSE_PRODUCT
        with pytest.raises(ValueError):
            ObjectiveVariant("entropy")


class TestQP:
    @pytest.mark.parametrize("variant", VARIANTS)
    def test_already_balanced(self, variant, brazil):
        src = brazil.observed2
        res = standardize_qp(problem_for(src, src), variant)
        np.testing.assert_allclose(res.table.cells, src.cells, atol=1e-12)
        assert res.objective_value == pytest.approx(0.0, abs=1e-20)

    @pytest.mark.parametrize("variant", VARIANTS)
    def test_independence_source(self, variant):
        src = table(np.outer([0.2, 0.3, 0.5], [0.4, 0.4, 0.2]))
        r, c = np.array([0.6, 0.3, 0.1]), np.array([0.1, 0.2, 0.7])
        res = standardize_qp(StandardizationProblem(src, r, c), variant)
        np.testing.assert_allclose(res.table.cells, np.outer(r, c), atol=1e-12)
        assert res.objective_value <= 1e-20

    def test_zero_target_row_is_fixed_to_zero(self):
        src = table([[0.3, 0.1, 0.1], [0.1, 0.2, 0.05], [0.05, 0.05, 0.05]])
        res = standardize_qp(StandardizationProblem(src, [0.5, 0.5, 0.0], [0.2, 0.3, 0.5]))
        assert (res.table.cells[2] == 0).all()
        assert res.max_marginal_residual <= 1e-8

    def test_empty_source_row_with_positive_target(self):
        src = table([[0.5, 0.5], [0.0, 0.0]])
        with pytest.raises(InvalidTargets):
            standardize_qp(StandardizationProblem(src, [0.5, 0.5], [0.5, 0.5]))

    def test_iteration_cap(self, brazil):
        prob = problem_for(brazil.observed1, brazil.observed2)
        with pytest.raises(NotConverged) as err:
            standardize_qp(prob, max_iter=1)
        assert err.value.result.table.cells.shape == (4, 4)
        assert err.value.residual == err.value.result.max_marginal_residual

    def test_brazil_matches_published_standardization(self, brazil):
        res = standardize_qp(problem_for(brazil.observed1, brazil.observed2), DEFAULT_OBJECTIVE)
        dev = deviation_report(res, brazil.standardized1)
        assert dev.mean_abs_dev <= 0.02
        # cells below the diagonal that are empty in the published table
        for i, j in [(1, 0), (2, 0), (2, 1), (3, 0), (3, 1), (3, 2)]:
            assert res.table.cells[i, j] <= 0.02

    @settings(max_examples=40, deadline=None)
    @given(tables4, vec4, vec4, st.sampled_from(VARIANTS))
    def test_feasible_optimal_monotone(self, src, r, c, variant):
        prob = StandardizationProblem(src, r, c)
        res = standardize_qp(prob, variant)
        x = res.table.cells
        assert res.converged
        assert (x >= 0).all()
        assert res.max_marginal_residual <= 1e-8
        cert = kkt_certificate(prob, variant, res.table)
        assert cert.stationarity <= 1e-6
        assert cert.min_bound_multiplier >= -1e-8
        trace = np.array(res.objective_trace)
        assert np.all(np.diff(trace) <= 1e-12 * max(1.0, trace[0]))

    @settings(max_examples=25, deadline=None)
    @given(tables4, vec4, vec4, st.sampled_from(VARIANTS))
    def test_idempotent(self, src, r, c, variant):
        once = standardize_qp(StandardizationProblem(src, r, c), variant).table
        twice = standardize_qp(StandardizationProblem(once, r, c), variant).table
        np.testing.assert_allclose(twice.cells, once.cells, atol=1e-8)


class TestQPAgainstGenericSolver:
    """Independent route: the same convex program handed to cvxpy."""

    cp = pytest.importorskip("cvxpy")

    def _solve(self, prob, variant):
        cp = self.cp
        w, included = variant.cell_weights(prob.target_row, prob.target_col)
        t = prob.preserving_target()
        x = cp.Variable(t.shape, nonneg=True)
        cons = [cp.sum(x, axis=1) == prob.target_row, cp.sum(x, axis=0) == prob.target_col]
        if (~included).any():
            cons.append(x[~included] == 0)
        obj = cp.Minimize(cp.sum(cp.multiply(w, cp.square(x - t))))
        value = cp.Problem(obj, cons).solve(solver=cp.CLARABEL)
        return x.value, value

    @pytest.mark.parametrize("variant", VARIANTS)
    def test_fixture_problems(self, variant, all_panels):
        for p in all_panels.values():
            for src, tgt in ((p.observed1, p.observed2), (p.observed2, p.observed1)):
                prob = problem_for(src, tgt)
                ours = standardize_qp(prob, variant)
                ref_x, ref_val = self._solve(prob, variant)
                assert ours.objective_value <= ref_val * (1 + 1e-6) + 1e-9
                np.testing.assert_allclose(ours.table.cells, ref_x, atol=1e-5)


class TestKktCertificate:
    def test_detects_suboptimal_point(self, brazil):
        prob = problem_for(brazil.observed1, brazil.observed2)
        independence = np.outer(prob.target_row, prob.target_col)
        cert = kkt_certificate(prob, DEFAULT_OBJECTIVE, independence)
        assert not cert.ok()


class TestIPF:
    def test_already_balanced(self, brazil):
        src = brazil.observed2
        res = standardize_ipf(problem_for(src, src))
        np.testing.assert_allclose(res.table.cells, src.cells, atol=1e-12)

    def test_closed_form_two_by_two(self):
        # odds ratio 16 with margins (0.6, 0.4): 15a^2 - 19a + 5.76 = 0
        a = (19 - math.sqrt(15.4)) / 30
        src = table([[0.4, 0.1], [0.1, 0.4]])
        res = standardize_ipf(StandardizationProblem(src, [0.6, 0.4], [0.6, 0.4]), tol=1e-12)
        expected = [[a, 0.6 - a], [0.6 - a, a - 0.2]]
        np.testing.assert_allclose(res.table.cells, expected, atol=1e-10)
        np.testing.assert_allclose(res.table.cells, [[0.5025, 0.0975], [0.0975, 0.3025]], atol=1e-4)

    def test_independence_source(self):
        src = table(np.outer([0.5, 0.5], [0.3, 0.7]))
        r, c = [0.8, 0.2], [0.4, 0.6]
        res = standardize_ipf(StandardizationProblem(src, r, c))
        np.testing.assert_allclose(res.table.cells, np.outer(r, c), atol=1e-10)

    def test_support_condition(self, brazil):
        prob = problem_for(brazil.observed1, brazil.observed2)
        with pytest.raises(IpfSupportError):
            standardize_ipf(prob)
        res = standardize_ipf(prob, jitter=1e-6)
        assert res.max_marginal_residual <= 1e-8

    @settings(max_examples=30, deadline=None)
    @given(tables4, vec4, vec4)
    def test_preserves_odds_ratios(self, src, r, c):
        res = standardize_ipf(StandardizationProblem(src, r, c), tol=1e-12)
        x, s = res.table.cells, src.cells
        got = x[0, 0] * x[1, 1] / (x[0, 1] * x[1, 0])
        want = s[0, 0] * s[1, 1] / (s[0, 1] * s[1, 0])
        assert got == pytest.approx(want, rel=1e-6)

    def test_qp_and_ipf_agree_when_balanced(self, all_panels):
        src = all_panels["south_africa"].observed2
        prob = problem_for(src, src)
        np.testing.assert_allclose(standardize_qp(prob).table.cells, standardize_ipf(prob).table.cells, atol=1e-12)


class TestDeviationReport:
    def test_identical(self, brazil):
        dev = deviation_report(brazil.observed1, brazil.observed1)
        assert dev.mean_abs_dev == 0 and dev.max_abs_dev == 0

    def test_hand_arithmetic(self):
        dev = deviation_report(np.array([[0.5, 0.5], [0, 0]]), np.array([[0.4, 0.6], [0, 0]]))
        assert dev.mean_abs_dev == pytest.approx(0.05)
        assert dev.max_abs_dev == pytest.approx(0.1)
        np.testing.assert_allclose(dev.per_cell, [[0.1, 0.1], [0, 0]])

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatch):
            deviation_report(np.zeros((2, 2)), np.zeros((3, 3)))

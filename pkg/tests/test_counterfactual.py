import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from edusort.counterfactual import (
    FIXED,
    RANDOM,
    CounterfactualSpec,
    counterfactual_gini,
    fixed_sorting,
    fixed_sorting_factors,
    random_matching,
    random_matching_factors,
    run,
)
from edusort.errors import ShapeMismatch, ZeroCellError
from edusort.income import JointDistribution, gini, household_distribution
from edusort.tables import ContingencyTable, EducationSchema

from conftest import mixed_table, synth


def spread(table, n=10, seed=0):
    """Joint distribution whose band-marginal is ``table``, with random band splits."""
    rng = np.random.default_rng(seed)
    k = len(table.schema)
    split = rng.dirichlet(np.ones(n), size=(k, k)).transpose(2, 0, 1)
    f = split * table.cells[None]
    rich = np.arange(1, n + 1)[:, None, None] * (1 + np.add.outer(np.arange(k), np.arange(k)))[None]
    y = f * rich
    return JointDistribution(n, table.schema, f, y / y.sum())


def independent_joint(r, c, n=10, seed=0):
    rng = np.random.default_rng(seed)
    band = rng.dirichlet(np.ones(n))
    f = band[:, None, None] * np.outer(r, c)[None]
    y = f * rng.uniform(0.5, 2.0, size=f.shape)
    schema = EducationSchema.default(len(r))
    return JointDistribution(n, schema, f, y / y.sum())


class TestRandomMatching:
    def test_brazil_factor(self, brazil):
        factors = random_matching_factors(brazil.observed2)
        t = brazil.observed2
        assert factors[0, 0] == pytest.approx(t.row_marginal[0] * t.col_marginal[0] / t.cells[0, 0], rel=1e-12)
        assert round(factors[0, 0], 2) == 0.54

    def test_brazil_every_band_scaled(self, brazil):
        joint = spread(brazil.observed2)
        out = random_matching(joint)
        ratio = out.joint.f[:, 0, 0] / joint.f[:, 0, 0]
        np.testing.assert_allclose(ratio, 0.54, atol=0.005)
        np.testing.assert_allclose(ratio, ratio[0], rtol=1e-12)

    def test_two_by_two_cell(self):
        t = ContingencyTable.from_array([[0.4, 0.1], [0.1, 0.4]])
        joint = spread(t)
        out = random_matching(joint)
        assert out.scaling_factors[0, 0] == pytest.approx(1 / 1.6)
        assert out.joint.f[:, 0, 0].sum() == pytest.approx(0.25, abs=1e-12)
        assert out.joint.f[:, 0, 1].sum() == pytest.approx(0.25, abs=1e-12)

    def test_independence_is_identity(self):
        joint = independent_joint([0.2, 0.5, 0.3], [0.1, 0.6, 0.3])
        out = random_matching(joint)
        assert np.abs(out.joint.f - joint.f).max() <= 1e-12
        assert np.abs(out.joint.y - joint.y).max() <= 1e-12
        assert counterfactual_gini(out).gini == pytest.approx(gini(joint).gini, abs=1e-12)

    @settings(max_examples=40, deadline=None)
    @given(st.floats(0.0, 0.9), st.integers(0, 10_000))
    def test_mass_and_type_marginal(self, alpha, seed):
        t = mixed_table(alpha)
        joint = spread(t, seed=seed)
        out = random_matching(joint)
        assert abs(out.joint.f.sum() - 1) <= 1e-9
        assert abs(out.joint.y.sum() - 1) <= 1e-9
        assert np.abs(out.joint.f.sum(axis=0) - t.independence().cells).max() <= 1e-9

    def test_bands_frozen(self):
        joint = spread(mixed_table(0.5))
        out = random_matching(joint)
        assert np.array_equal(out.joint.f > 0, joint.f > 0)

    def test_zero_cell_error(self):
        t = ContingencyTable.from_array([[0.5, 0.0], [0.25, 0.25]])
        joint = spread(t)
        with pytest.raises(ZeroCellError) as exc:
            random_matching(joint)
        assert (exc.value.i, exc.value.j) == (0, 1)

    def test_zero_cell_drop(self):
        t = ContingencyTable.from_array([[0.5, 0.0], [0.25, 0.25]])
        joint = spread(t)
        with pytest.warns(UserWarning):
            out = random_matching(joint, zero_cell_policy="drop-and-renormalize")
        assert out.dropped_cells == [(0, 1)]
        assert len(out.warnings) == 1
        assert abs(out.joint.f.sum() - 1) <= 1e-12
        assert out.joint.f[:, 0, 1].sum() == 0

    def test_impossible_cells_are_not_holes(self):
        t = ContingencyTable.from_array([[0.6, 0.4], [0.0, 0.0]])
        out = random_matching(spread(t))
        assert np.isnan(out.scaling_factors[1]).all()
        assert out.dropped_cells == []

    def test_table_must_marginalize_joint(self):
        joint = spread(mixed_table(0.5))
        with pytest.raises(ValueError):
            random_matching(joint, mixed_table(0.4))


class TestFixedSorting:
    def test_brazil_factor(self, brazil):
        factors = fixed_sorting_factors(brazil.standardized1, brazil.observed2)
        assert factors[0, 0] == pytest.approx(0.338 / 0.261, rel=2e-3)
        assert round(factors[0, 0], 1) == 1.3

    def test_two_type_factors(self):
        t1 = ContingencyTable.from_array([[0.6, 0.0], [0.0, 0.4]])
        t2 = ContingencyTable.from_array([[0.5, 0.0], [0.0, 0.5]])
        factors = fixed_sorting_factors(t1, t2)
        assert factors[0, 0] == pytest.approx(1.2) and factors[1, 1] == pytest.approx(0.8)

    def test_output_type_masses(self):
        t2 = ContingencyTable.from_array([[0.3, 0.2], [0.2, 0.3]])
        t1 = ContingencyTable.from_array([[0.36, 0.14], [0.14, 0.36]])
        out = fixed_sorting(spread(t2), t1)
        np.testing.assert_allclose(out.scaling_factors, [[1.2, 0.7], [0.7, 1.2]])
        assert np.abs(out.joint.f.sum(axis=0) - t1.cells).max() <= 1e-9
        assert abs(out.joint.f.sum() - 1) <= 1e-9

    def test_identity(self):
        t = mixed_table(0.3)
        joint = spread(t)
        out = fixed_sorting(joint, t)
        assert np.abs(out.joint.f - joint.f).max() <= 1e-12
        assert np.abs(out.joint.y - joint.y).max() <= 1e-12

    def test_requires_standardized_t1(self):
        with pytest.raises(ValueError, match="standardize"):
            fixed_sorting(spread(mixed_table(0.3)), ContingencyTable.from_array(np.full((4, 4), 1 / 16), labels=("LP", "P", "S", "U")))

    def test_schema_mismatch(self):
        with pytest.raises(ShapeMismatch):
            fixed_sorting(spread(mixed_table(0.3)), ContingencyTable.from_array([[0.5, 0], [0, 0.5]]))

    def test_hole_policies(self):
        t2 = ContingencyTable.from_array([[0.5, 0.0], [0.0, 0.5]])
        t1 = ContingencyTable.from_array([[0.4, 0.1], [0.1, 0.4]])
        joint = spread(t2)
        with pytest.raises(ZeroCellError):
            fixed_sorting(joint, t1)
        with pytest.warns(UserWarning):
            out = fixed_sorting(joint, t1, zero_cell_policy="drop-and-renormalize")
        assert sorted(out.dropped_cells) == [(0, 1), (1, 0)]
        assert abs(out.joint.f.sum() - 1) <= 1e-12


class TestSpecAndDirection:
    def test_spec_aliases(self):
        assert CounterfactualSpec("random").mode == RANDOM
        assert CounterfactualSpec("fixed", mixed_table(0.1)).mode == FIXED
        with pytest.raises(ValueError):
            CounterfactualSpec("fixed")
        with pytest.raises(ValueError):
            CounterfactualSpec("random", zero_cell_policy="ignore")

    def test_run_dispatch(self):
        t = mixed_table(0.2)
        joint = spread(t)
        a = run(CounterfactualSpec("random"), joint)
        b = random_matching(joint)
        assert np.array_equal(a.joint.f, b.joint.f)
        c = run(CounterfactualSpec("fixed", t), joint)
        assert np.abs(c.joint.f - joint.f).max() <= 1e-12

    def test_random_matching_lowers_gini_on_sorted_population(self):
        t = mixed_table(0.6)
        joint = household_distribution(synth(t, n=40_000, seed=5), t.schema)
        observed = gini(joint).gini
        assert counterfactual_gini(random_matching(joint)).gini < observed - 0.01

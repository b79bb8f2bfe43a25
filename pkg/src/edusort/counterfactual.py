"""Counterfactual household distributions under alternative marital sorting.

Both experiments rescale every (income band, couple type) mass by a
type-specific factor and keep households in their observed income bands.
Rescaled income shares no longer sum to one, so they are renormalized
before the Lorenz curve is built.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ShapeMismatch, ZeroCellError
from .income import GiniResult, JointDistribution, gini
from .tables import ContingencyTable

RANDOM = "random-matching"
FIXED = "fixed-sorting"
POLICIES = ("error", "drop-and-renormalize")
MARGINAL_MATCH_TOL = 1e-6
TABLE_MATCH_TOL = 1e-9


@dataclass(frozen=True)
class CounterfactualSpec:
    mode: str
    reference_table: ContingencyTable | None = None
    zero_cell_policy: str = "error"

    def __post_init__(self):
        aliases = {"random": RANDOM, "fixed": FIXED, RANDOM: RANDOM, FIXED: FIXED}
        if self.mode not in aliases:
            raise ValueError(f"unknown counterfactual mode {self.mode!r}")
        object.__setattr__(self, "mode", aliases[self.mode])
        if self.zero_cell_policy not in POLICIES:
            raise ValueError(f"unknown zero-cell policy {self.zero_cell_policy!r}")
        if self.mode == FIXED and self.reference_table is None:
            raise ValueError("fixed-sorting needs the standardized first-period table")


@dataclass(frozen=True, eq=False)
class CounterfactualResult:
    joint: JointDistribution
    scaling_factors: np.ndarray
    dropped_cells: list = field(default_factory=list)

    @property
    def warnings(self):
        return [f"dropped mass of empty cell ({i}, {j})" for i, j in self.dropped_cells]


def _check_marginalizes(joint: JointDistribution, table: ContingencyTable):
    if table.schema != joint.schema:
        raise ShapeMismatch("table and joint distribution use different schemas")
    if np.abs(joint.f.sum(axis=0) - table.cells).max() > TABLE_MATCH_TOL:
        raise ValueError("table is not the band-marginal of the joint distribution")


def _rescale(joint, factors, dropped):
    f = joint.f * factors[None, :, :]
    y = joint.y * factors[None, :, :]
    total_f = f.sum()
    if dropped:
        f = f / total_f
    return JointDistribution(joint.n, joint.schema, f, y / y.sum())


def _resolve_zero_cells(holes, policy, what):
    dropped = [(int(i), int(j)) for i, j in np.argwhere(holes)]
    if dropped and policy == "error":
        i, j = dropped[0]
        raise ZeroCellError(i, j, f"cell ({i}, {j}) is empty in the observed table but {what}")
    if dropped:
        warnings.warn(f"{len(dropped)} empty cell(s) dropped and the distribution renormalized", stacklevel=3)
    return dropped


def random_matching_factors(table: ContingencyTable) -> np.ndarray:
    """1 / I_ij; NaN where the type cannot occur (a zero marginal)."""
    expected = np.outer(table.row_marginal, table.col_marginal)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(expected > 0, expected / table.cells, np.nan)


def random_matching(joint: JointDistribution, table: ContingencyTable | None = None, zero_cell_policy="error") -> CounterfactualResult:
    """Reweight every type by the inverse of its interest factor.

    Type masses become the products of the observed marginals, so household
    shares still sum to one.
    """
    if table is None:
        table = joint.type_table()
    _check_marginalizes(joint, table)
    factors = random_matching_factors(table)
    holes = np.isinf(factors)
    dropped = _resolve_zero_cells(holes, zero_cell_policy, "has positive random-matching mass")
    applied = np.where(np.isfinite(factors), factors, 0.0)
    return CounterfactualResult(_rescale(joint, applied, dropped), factors, dropped)


def fixed_sorting_factors(table_t1_std: ContingencyTable, table_t2: ContingencyTable) -> np.ndarray:
    """Ratio of standardized first-period to observed second-period cells."""
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(
            table_t2.cells > 0,
            table_t1_std.cells / table_t2.cells,
            np.where(table_t1_std.cells > 0, np.inf, np.nan),
        )


def fixed_sorting(
    joint_t2: JointDistribution,
    table_t1_std: ContingencyTable,
    table_t2: ContingencyTable | None = None,
    zero_cell_policy="error",
) -> CounterfactualResult:
    """Impose first-period sorting (already standardized to period-2 marginals)."""
    if table_t2 is None:
        table_t2 = joint_t2.type_table()
    _check_marginalizes(joint_t2, table_t2)
    if table_t1_std.schema != table_t2.schema:
        raise ShapeMismatch("first- and second-period tables use different schemas")
    gap = max(
        np.abs(table_t1_std.row_marginal - table_t2.row_marginal).max(),
        np.abs(table_t1_std.col_marginal - table_t2.col_marginal).max(),
    )
    if gap > MARGINAL_MATCH_TOL:
        raise ValueError(
            f"first-period table marginals differ from period 2 by {gap:.2e}; standardize it first"
        )
    factors = fixed_sorting_factors(table_t1_std, table_t2)
    holes = np.isinf(factors)
    dropped = _resolve_zero_cells(holes, zero_cell_policy, "the first-period table puts mass there")
    applied = np.where(np.isfinite(factors), factors, 0.0)
    return CounterfactualResult(_rescale(joint_t2, applied, dropped), factors, dropped)


def counterfactual_gini(joint_cf) -> GiniResult:
    if isinstance(joint_cf, CounterfactualResult):
        joint_cf = joint_cf.joint
    return gini(joint_cf)


def run(spec: CounterfactualSpec, joint: JointDistribution, table: ContingencyTable | None = None) -> CounterfactualResult:
    if spec.mode == RANDOM:
        return random_matching(joint, table, spec.zero_cell_policy)
    return fixed_sorting(joint, spec.reference_table, table, spec.zero_cell_policy)

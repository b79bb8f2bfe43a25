"""Equivalized household income, decile assignment, and the decile Gini.

The Gini is computed from grouped data: households are split into ``n``
equal-weight income bands and the Lorenz curve is read off the
cumulative population and income shares of those bands.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptySample, NotNormalized, ShapeMismatch
from .records import CoupleRecord, Couples, as_couples
from .tables import MASS_TOL, ContingencyTable, EducationSchema

__all__ = [
    "CoupleRecord",
    "Couples",
    "EquivalizedHousehold",
    "Households",
    "DecileAssignment",
    "JointDistribution",
    "GiniResult",
    "equivalence_divisor",
    "equivalize",
    "equivalize_all",
    "assign_deciles",
    "joint_distribution",
    "gini",
    "household_distribution",
]

HEAD_WEIGHT = 1.0
ADULT_WEIGHT = 0.5
CHILD_WEIGHT = 0.3


def equivalence_divisor(n_other_adults, n_children):
    """Modified-OECD divisor for a couple household.

    One spouse is the head; the other spouse counts as an additional adult.
    """
    return HEAD_WEIGHT + ADULT_WEIGHT * (1 + np.asarray(n_other_adults)) + CHILD_WEIGHT * np.asarray(n_children)


@dataclass(frozen=True)
class EquivalizedHousehold:
    id: object
    type_cell: tuple
    equiv_income: float
    weight: float = 1.0


def equivalize(record: CoupleRecord) -> EquivalizedHousehold:
    divisor = float(equivalence_divisor(record.n_other_adults, record.n_children))
    income = (record.husband_income + record.wife_income) / divisor
    return EquivalizedHousehold(record.id, (record.husband_edu, record.wife_edu), income, record.weight)


@dataclass(frozen=True, eq=False)
class Households:
    """Columnar equivalized households.

    ``relative_income`` is the equivalized income expressed against the
    sample's total raw income.  Ranking and income shares use it, so both
    are bitwise unchanged when every income is multiplied by a constant and
    the products stay exactly representable.
    """

    id: np.ndarray
    row: np.ndarray
    col: np.ndarray
    equiv_income: np.ndarray
    weight: np.ndarray
    relative_income: np.ndarray | None = None

    def __post_init__(self):
        if self.relative_income is None:
            total = self.equiv_income.sum()
            rel = self.equiv_income / total if total > 0 else self.equiv_income.copy()
            object.__setattr__(self, "relative_income", rel)

    def __len__(self):
        return len(self.id)

    @classmethod
    def from_list(cls, households) -> "Households":
        households = list(households)
        return cls(
            id=np.asarray([h.id for h in households]),
            row=np.asarray([h.type_cell[0] for h in households], dtype=np.int64),
            col=np.asarray([h.type_cell[1] for h in households], dtype=np.int64),
            equiv_income=np.asarray([h.equiv_income for h in households], dtype=float),
            weight=np.asarray([h.weight for h in households], dtype=float),
        )


def equivalize_all(records) -> Households:
    couples = as_couples(records)
    divisor = equivalence_divisor(couples.n_other_adults, couples.n_children)
    raw = couples.total_income
    total = raw.sum()
    relative = (raw / total if total > 0 else raw) / divisor
    return Households(
        id=couples.id,
        row=couples.husband_edu,
        col=couples.wife_edu,
        equiv_income=raw / divisor,
        weight=couples.weight,
        relative_income=relative,
    )


def _as_households(households) -> Households:
    if isinstance(households, Households):
        return households
    return Households.from_list(households)


@dataclass(frozen=True, eq=False)
class DecileAssignment:
    """Band index (1-based) for each household, aligned with ``ids``."""

    ids: np.ndarray
    decile: np.ndarray
    n: int

    def __getitem__(self, household_id):
        hits = np.flatnonzero(self.ids == household_id)
        if len(hits) == 0:
            raise KeyError(household_id)
        return int(self.decile[hits[0]])

    def band_weights(self, weight) -> np.ndarray:
        return np.bincount(self.decile - 1, weights=weight, minlength=self.n)


def assign_deciles(households, n: int = 10) -> DecileAssignment:
    """Split households into ``n`` equal-weight bands by equivalized income.

    Households are ordered by (income, id); each lands in the band that
    contains the midpoint of its slice of the cumulative-weight axis.
    """
    hh = _as_households(households)
    if len(hh) == 0:
        raise EmptySample("no households to rank")
    if n < 1:
        raise ValueError("need at least one band")
    total = hh.weight.sum()
    if not total > 0:
        raise EmptySample("total household weight is zero")
    order = np.lexsort((hh.id, hh.relative_income))
    w = hh.weight[order]
    upper = np.cumsum(w)
    midpoint = upper - 0.5 * w
    band = np.floor(midpoint * n / total).astype(np.int64)
    band = np.clip(band, 0, n - 1) + 1
    decile = np.empty_like(band)
    decile[order] = band
    return DecileAssignment(hh.id, decile, n)


@dataclass(frozen=True, eq=False)
class JointDistribution:
    """Household shares ``f[p, i, j]`` and income shares ``y[p, i, j]``."""

    n: int
    schema: EducationSchema
    f: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        k = len(self.schema)
        for name in ("f", "y"):
            arr = np.array(getattr(self, name), dtype=float)
            if arr.shape != (self.n, k, k):
                raise ShapeMismatch(f"{name} has shape {arr.shape}, expected {(self.n, k, k)}")
            if np.any(arr < 0):
                raise ValueError(f"{name} has negative entries")
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    def type_table(self) -> ContingencyTable:
        """Marginalize household shares over income bands."""
        cells = self.f.sum(axis=0)
        return ContingencyTable(self.schema, cells / cells.sum())

    def check_normalized(self, tol=MASS_TOL):
        for name in ("f", "y"):
            total = getattr(self, name).sum()
            if abs(total - 1.0) > tol:
                raise NotNormalized(f"{name} shares sum to {total!r}, expected 1")


def joint_distribution(households, assignment: DecileAssignment, schema: EducationSchema) -> JointDistribution:
    hh = _as_households(households)
    if len(hh) != len(assignment.ids) or not np.array_equal(hh.id, assignment.ids):
        raise ValueError("households and decile assignment do not share the same ids")
    k = len(schema)
    if len(hh) and (hh.row.min() < 0 or hh.col.min() < 0 or hh.row.max() >= k or hh.col.max() >= k):
        raise ShapeMismatch("household type outside schema")
    income = hh.weight * hh.relative_income
    total_w = hh.weight.sum()
    total_y = income.sum()
    if not total_w > 0:
        raise EmptySample("total household weight is zero")
    if not total_y > 0:
        raise NotNormalized("total income is zero; income shares are undefined")
    idx = (assignment.decile - 1, hh.row, hh.col)
    f = np.zeros((assignment.n, k, k))
    y = np.zeros((assignment.n, k, k))
    np.add.at(f, idx, hh.weight)
    np.add.at(y, idx, income)
    return JointDistribution(assignment.n, schema, f / f.sum(), y / y.sum())


@dataclass(frozen=True, eq=False)
class GiniResult:
    F: np.ndarray
    Y: np.ndarray
    gini: float

    @property
    def points(self):
        return list(zip(self.F.tolist(), self.Y.tolist()))

    def as_dict(self):
        return {"gini": self.gini, "lorenz_F": self.F.tolist(), "lorenz_Y": self.Y.tolist()}


def lorenz_points(joint: JointDistribution):
    band_f = joint.f.reshape(joint.n, -1).sum(axis=1)
    band_y = joint.y.reshape(joint.n, -1).sum(axis=1)
    F = np.concatenate([[0.0], np.cumsum(band_f)])
    Y = np.concatenate([[0.0], np.cumsum(band_y)])
    return F, Y


def gini(joint: JointDistribution) -> GiniResult:
    """Gini from consecutive Lorenz points anchored at the origin.

    G = sum_{k=0}^{n-1} (F_k Y_{k+1} - F_{k+1} Y_k), which equals one minus
    twice the trapezoidal area under the piecewise-linear Lorenz curve.
    """
    joint.check_normalized()
    F, Y = lorenz_points(joint)
    g = float(np.sum(F[:-1] * Y[1:] - F[1:] * Y[:-1]))
    return GiniResult(F, Y, g)


def household_distribution(records, schema: EducationSchema, n: int = 10) -> JointDistribution:
    """Couples to joint (band, type) distribution in one call."""
    hh = equivalize_all(records)
    return joint_distribution(hh, assign_deciles(hh, n), schema)

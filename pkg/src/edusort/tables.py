"""Contingency tables of couple types and the interest-factor sorting measures.

Rows index the husband's education, columns the wife's.  The interest
factor of a cell is its observed share divided by the share expected if
spouses matched at random given the two marginal distributions.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import (
    EmptySample,
    NegativeCell,
    NotNormalized,
    SchemaViolation,
    ShapeMismatch,
    UndefinedDiagonal,
)
from .records import as_couples

MASS_TOL = 1e-9
MIN_LEVELS = 2
MAX_LEVELS = 12


@dataclass(frozen=True)
class EducationSchema:
    """Ordered education categories, lowest first, shared by both spouses."""

    labels: tuple

    def __post_init__(self):
        labels = tuple(str(label) for label in self.labels)
        object.__setattr__(self, "labels", labels)
        if len(set(labels)) != len(labels):
            raise ValueError(f"duplicate education labels in {labels}")
        if not MIN_LEVELS <= len(labels) <= MAX_LEVELS:
            raise ValueError(
                f"schema needs {MIN_LEVELS}..{MAX_LEVELS} categories, got {len(labels)}"
            )

    def __len__(self):
        return len(self.labels)

    def index(self, code) -> int:
        """Resolve a label or a 0-based integer code to an index."""
        if isinstance(code, (int, np.integer)):
            k = int(code)
            if 0 <= k < len(self.labels):
                return k
            raise KeyError(code)
        text = str(code).strip()
        if text in self.labels:
            return self.labels.index(text)
        try:
            k = int(text)
        except ValueError:
            raise KeyError(code) from None
        if 0 <= k < len(self.labels):
            return k
        raise KeyError(code)

    @classmethod
    def default(cls, n: int) -> "EducationSchema":
        return cls(tuple(f"E{k}" for k in range(n)))


@dataclass(frozen=True, eq=False)
class ContingencyTable:
    """Relative frequencies of husband-by-wife education types.

    ``cells`` is stored read-only.  Marginals are always derived from the
    cells, never supplied.
    """

    schema: EducationSchema
    cells: np.ndarray
    n_couples: float | None = None

    def __post_init__(self):
        cells = np.array(self.cells, dtype=float)
        k = len(self.schema)
        if cells.shape != (k, k):
            raise ShapeMismatch(f"cells have shape {cells.shape}, schema needs {(k, k)}")
        if not np.all(np.isfinite(cells)):
            raise NegativeCell("table contains non-finite cells")
        if np.any(cells < 0):
            raise NegativeCell("table contains negative cells")
        total = cells.sum()
        if abs(total - 1.0) > MASS_TOL:
            raise NotNormalized(f"cells sum to {total!r}, expected 1")
        cells.flags.writeable = False
        object.__setattr__(self, "cells", cells)

    @classmethod
    def from_array(cls, cells, labels: Sequence | None = None, normalize=False, n_couples=None):
        cells = np.asarray(cells, dtype=float)
        if cells.ndim != 2 or cells.shape[0] != cells.shape[1]:
            raise ShapeMismatch(f"expected a square matrix, got shape {cells.shape}")
        schema = EducationSchema(labels) if labels is not None else EducationSchema.default(len(cells))
        if normalize:
            total = cells.sum()
            if not total > 0:
                raise NotNormalized("table has no mass")
            cells = cells / total
        return cls(schema, cells, n_couples)

    @property
    def shape(self):
        return self.cells.shape

    @property
    def row_marginal(self) -> np.ndarray:
        """Husbands' education distribution."""
        return self.cells.sum(axis=1)

    @property
    def col_marginal(self) -> np.ndarray:
        """Wives' education distribution."""
        return self.cells.sum(axis=0)

    def independence(self) -> "ContingencyTable":
        """Table with the same marginals and no association."""
        return ContingencyTable(
            self.schema, _renormalize(np.outer(self.row_marginal, self.col_marginal))
        )

    def allclose(self, other: "ContingencyTable", atol=MASS_TOL) -> bool:
        return self.shape == other.shape and bool(np.all(np.abs(self.cells - other.cells) <= atol))


def _renormalize(cells):
    # absorb rounding drift of order 1e-16 so the mass check holds
    return cells / cells.sum()


@dataclass(frozen=True, eq=False)
class SortingMatrix:
    """Interest factors; ``values`` is NaN exactly where ``undefined_mask``."""

    schema: EducationSchema
    values: np.ndarray
    undefined_mask: np.ndarray

    def __post_init__(self):
        for name in ("values", "undefined_mask"):
            arr = np.array(getattr(self, name))
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)


@dataclass(frozen=True)
class WeightingScheme:
    """Weights for overall PAM: ``lam`` on the husbands' marginal, the rest on the wives'."""

    kind: str = "wife"
    lam: float = 0.0

    KINDS = ("wife", "husband", "average", "convex")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown weighting scheme {self.kind!r}")
        fixed = {"wife": 0.0, "husband": 1.0, "average": 0.5}
        if self.kind in fixed:
            object.__setattr__(self, "lam", fixed[self.kind])
        lam = float(self.lam)
        if not 0.0 <= lam <= 1.0:
            raise ValueError(f"convex weight must lie in [0, 1], got {lam}")
        object.__setattr__(self, "lam", lam)

    @classmethod
    def parse(cls, text: str) -> "WeightingScheme":
        """Parse ``wife``, ``husband``, ``average`` or ``convex=0.3``."""
        text = text.strip().lower()
        if text.startswith("convex"):
            _, sep, value = text.partition("=")
            if not sep:
                raise ValueError("convex scheme needs a weight, e.g. convex=0.3")
            return cls("convex", float(value))
        return cls(text)

    def weights(self, table: ContingencyTable) -> np.ndarray:
        # one formula for every kind, so convex(0) == wife and convex(0.5) == average bitwise
        return self.lam * table.row_marginal + (1.0 - self.lam) * table.col_marginal

    def __str__(self):
        return f"convex={self.lam:g}" if self.kind == "convex" else self.kind


WIFE = WeightingScheme("wife")
HUSBAND = WeightingScheme("husband")
AVERAGE = WeightingScheme("average")


def build_table(records, schema: EducationSchema) -> ContingencyTable:
    """Weighted share of couples in each (husband, wife) education cell.

    ``records`` is a :class:`~edusort.records.Couples` sample or any
    iterable of :class:`~edusort.records.CoupleRecord`.
    """
    couples = as_couples(records)
    if len(couples) == 0:
        raise EmptySample("no couples to tabulate")
    k = len(schema)
    h, w = couples.husband_edu, couples.wife_edu
    bad = (h < 0) | (h >= k) | (w < 0) | (w >= k)
    if bad.any():
        first = int(np.flatnonzero(bad)[0])
        raise SchemaViolation(couples.id[first].item())
    weight = couples.weight
    total = weight.sum()
    if not total > 0:
        raise EmptySample("total sampling weight is zero")
    counts = np.zeros((k, k))
    np.add.at(counts, (h, w), weight)
    return ContingencyTable(schema, _renormalize(counts), n_couples=float(len(couples)))


def interest_factors(table: ContingencyTable) -> SortingMatrix:
    """Observed share over the random-matching share, cell by cell."""
    expected = np.outer(table.row_marginal, table.col_marginal)
    undefined = expected == 0
    with np.errstate(divide="ignore", invalid="ignore"):
        values = np.where(undefined, np.nan, table.cells / expected)
    return SortingMatrix(table.schema, values, undefined)


def diagonal_pam(sorting: SortingMatrix) -> np.ndarray:
    """Per-group PAM: the diagonal interest factors (NaN where undefined)."""
    values = sorting.values
    if values.ndim != 2 or values.shape[0] != values.shape[1]:
        raise ShapeMismatch(f"diagonal PAM needs a square table, got {values.shape}")
    return np.diag(values).copy()


def overall_pam(table: ContingencyTable, scheme: WeightingScheme = WIFE) -> float:
    """Weighted sum of the diagonal interest factors."""
    weights = scheme.weights(table)
    diag = diagonal_pam(interest_factors(table))
    used = weights > 0
    missing = used & np.isnan(diag)
    if missing.any():
        raise UndefinedDiagonal(int(np.flatnonzero(missing)[0]))
    return float(np.sum(weights[used] * diag[used]))


@dataclass(frozen=True)
class PamTrend:
    pam_t1: float
    pam_t2: float
    pct_change: float

    def as_dict(self):
        return {"pam_t1": self.pam_t1, "pam_t2": self.pam_t2, "pct_change": self.pct_change}


def pam_trend(table_t1: ContingencyTable, table_t2: ContingencyTable, scheme: WeightingScheme = WIFE) -> PamTrend:
    """Relative change in overall PAM; positive ``pct_change`` means a decrease.

    One of the two tables should already be standardized to the other's
    marginals, otherwise the change mixes sorting with educational expansion.
    ``pct_change`` is a fraction (0.35 for 35 percent).
    """
    if table_t1.schema != table_t2.schema:
        raise ShapeMismatch("tables use different education schemas")
    p1 = overall_pam(table_t1, scheme)
    p2 = overall_pam(table_t2, scheme)
    return PamTrend(p1, p2, (p1 - p2) / p1)

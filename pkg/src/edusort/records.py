"""Couple-level records, single and columnar."""

from __future__ import annotations

from dataclasses import dataclass, fields
from typing import Iterable, Sequence

import numpy as np

COUPLE_FIELDS = (
    "id",
    "husband_edu",
    "wife_edu",
    "husband_age",
    "wife_age",
    "husband_income",
    "wife_income",
    "n_other_adults",
    "n_children",
    "weight",
)


@dataclass(frozen=True)
class CoupleRecord:
    """One married couple.

    ``n_other_adults`` counts members aged 14 or over besides the two
    spouses; ``n_children`` counts members under 14.
    """

    id: object
    husband_edu: int
    wife_edu: int
    husband_age: float = 40.0
    wife_age: float = 40.0
    husband_income: float = 0.0
    wife_income: float = 0.0
    n_other_adults: int = 0
    n_children: int = 0
    weight: float = 1.0

    def __post_init__(self):
        if self.husband_income < 0 or self.wife_income < 0:
            raise ValueError(f"record {self.id!r}: negative income")
        if self.n_other_adults < 0 or self.n_children < 0:
            raise ValueError(f"record {self.id!r}: negative household count")
        if self.husband_age <= 0 or self.wife_age <= 0:
            raise ValueError(f"record {self.id!r}: ages must be positive")
        if not self.weight >= 0:
            raise ValueError(f"record {self.id!r}: weight must be nonnegative")


@dataclass(frozen=True, eq=False)
class Couples:
    """Column-oriented sample of couples.

    Large synthetic samples (hundreds of thousands of rows) are kept in
    this form so that every pipeline step stays vectorised.
    """

    id: np.ndarray
    husband_edu: np.ndarray
    wife_edu: np.ndarray
    husband_age: np.ndarray
    wife_age: np.ndarray
    husband_income: np.ndarray
    wife_income: np.ndarray
    n_other_adults: np.ndarray
    n_children: np.ndarray
    weight: np.ndarray

    def __post_init__(self):
        n = len(self.id)
        for f in fields(self):
            col = getattr(self, f.name)
            if len(col) != n:
                raise ValueError(f"column {f.name} has length {len(col)}, expected {n}")
            if isinstance(col, np.ndarray):
                col.flags.writeable = False

    def __len__(self):
        return len(self.id)

    @classmethod
    def from_records(cls, records: Iterable[CoupleRecord]) -> "Couples":
        records = list(records)
        ids = [r.id for r in records]
        cols = {"id": _id_array(ids)}
        for name, dtype in _DTYPES.items():
            cols[name] = np.array([getattr(r, name) for r in records], dtype=dtype)
        return cls(**cols)

    @classmethod
    def from_columns(cls, **columns) -> "Couples":
        n = len(columns["id"])
        cols = {"id": _id_array(columns["id"])}
        for name, dtype in _DTYPES.items():
            value = columns.get(name)
            if value is None:
                value = np.full(n, _DEFAULTS[name], dtype=dtype)
            cols[name] = np.asarray(value, dtype=dtype)
        return cls(**cols)

    def records(self) -> list[CoupleRecord]:
        out = []
        for k in range(len(self)):
            out.append(
                CoupleRecord(
                    id=self.id[k].item() if hasattr(self.id[k], "item") else self.id[k],
                    **{name: getattr(self, name)[k].item() for name in _DTYPES},
                )
            )
        return out

    def subset(self, mask) -> "Couples":
        return Couples(**{f.name: getattr(self, f.name)[mask] for f in fields(self)})

    @property
    def total_income(self) -> np.ndarray:
        return self.husband_income + self.wife_income


_DTYPES = {
    "husband_edu": np.int64,
    "wife_edu": np.int64,
    "husband_age": np.float64,
    "wife_age": np.float64,
    "husband_income": np.float64,
    "wife_income": np.float64,
    "n_other_adults": np.int64,
    "n_children": np.int64,
    "weight": np.float64,
}

_DEFAULTS = {
    "husband_age": 40.0,
    "wife_age": 40.0,
    "husband_income": 0.0,
    "wife_income": 0.0,
    "n_other_adults": 0,
    "n_children": 0,
    "weight": 1.0,
}


def _id_array(ids: Sequence) -> np.ndarray:
    arr = np.asarray(ids)
    if arr.dtype.kind in "iu":
        return arr.astype(np.int64)
    return np.asarray([str(v) for v in ids], dtype=str) if len(ids) else np.array([], dtype=np.int64)


def as_couples(data) -> Couples:
    if isinstance(data, Couples):
        return data
    return Couples.from_records(data)

"""Published couple-type tables for four countries, rounded to three decimals.

Each country has an observed early and late table, the early table
standardized to the late marginals (``<country>_<year1>_std``), the late
table standardized to the early marginals (``<country>_<year2>_std``), and
the published interest factors of both observed tables
(``<country>_<year>_interest``, two decimals).  See ``PROVENANCE.md``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from importlib import resources

import numpy as np

from ..ingest import parse_table
from ..tables import ContingencyTable, EducationSchema

PERIODS = {
    "brazil": (1970, 2010),
    "indonesia": (1993, 2014),
    "mexico": (1970, 2015),
    "south_africa": (1996, 2011),
}
COUNTRIES = tuple(PERIODS)

# headline numbers reported alongside the tables
BRAZIL_PAM_1970_OBSERVED = 1.65
BRAZIL_PAM_1970_STANDARDIZED = 3.50
BRAZIL_PAM_2010 = 2.28
TREND_DECREASE_WIFE = {"brazil": 0.35, "mexico": 0.23, "indonesia": 0.14, "south_africa": 0.14}
TREND_DECREASE_HUSBAND = {"brazil": 0.34, "mexico": 0.23, "indonesia": 0.13, "south_africa": 0.13}


def _files():
    return resources.files(__name__)


def names() -> list[str]:
    return sorted(p.name[:-4] for p in _files().iterdir() if p.name.endswith(".csv"))


def path(name: str):
    """Traversable for a fixture file (``name`` with or without ``.csv``)."""
    if not name.endswith((".csv", ".txt")):
        name = name + ".csv"
    f = _files() / name
    if not f.is_file():
        raise FileNotFoundError(f"no packaged fixture {name!r}")
    return f


def table(name: str) -> ContingencyTable:
    # published tables are rounded by construction; no warning
    return parse_table(path(name).read_text(), source=name, warn=False)


def schema(levels: int) -> EducationSchema:
    text = path(f"edu{levels}.txt").read_text()
    return EducationSchema(tuple(line.strip() for line in text.splitlines() if line.strip()))


def interest(country: str, year: int) -> np.ndarray:
    """Published interest factors of an observed table."""
    rows = list(csv.reader(path(f"{country}_{year}_interest").read_text().splitlines()))
    return np.array([[float(v) for v in row[1:]] for row in rows[1:]])


@dataclass(frozen=True)
class CountryPanels:
    country: str
    year1: int
    year2: int
    observed1: ContingencyTable
    observed2: ContingencyTable
    standardized1: ContingencyTable
    standardized2: ContingencyTable


def panels(country: str) -> CountryPanels:
    y1, y2 = PERIODS[country]
    return CountryPanels(
        country,
        y1,
        y2,
        table(f"{country}_{y1}"),
        table(f"{country}_{y2}"),
        table(f"{country}_{y1}_std"),
        table(f"{country}_{y2}_std"),
    )


@dataclass(frozen=True)
class CalibrationProblem:
    """Standardize ``source`` to the marginals of ``target``; compare with ``reference``."""

    key: str
    source: ContingencyTable
    target: ContingencyTable
    reference: ContingencyTable


def calibration_problems() -> list[CalibrationProblem]:
    out = []
    for country in COUNTRIES:
        p = panels(country)
        out.append(CalibrationProblem(f"{country}_{p.year1}_to_{p.year2}", p.observed1, p.observed2, p.standardized1))
        out.append(CalibrationProblem(f"{country}_{p.year2}_to_{p.year1}", p.observed2, p.observed1, p.standardized2))
    return out

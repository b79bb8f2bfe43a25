"""File formats, sample restrictions and synthetic couple populations."""

from __future__ import annotations

import csv
import io
import logging
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import EmptySample, NegativeCell, NotNormalized, ParseError, ShapeError
from .records import COUPLE_FIELDS, Couples
from .tables import ContingencyTable, EducationSchema

log = logging.getLogger(__name__)

RENORMALIZE_BAND = (0.995, 1.005)
REQUIRED_COLUMNS = COUPLE_FIELDS[:7]
OPTIONAL_DEFAULTS = {"n_other_adults": 0, "n_children": 0, "weight": 1.0}
INCOME_COLUMNS = ("husband_income", "wife_income")

# reject reasons
AGE_OUT_OF_BAND = "age-out-of-band"
MISSING_FIELD = "missing-field"
BAD_CODE = "bad-code"
INVALID_VALUE = "invalid-value"
NOT_FIRST_MARRIAGE = "not-first-marriage"


# ---------------------------------------------------------------- schema files


def load_schema(path) -> EducationSchema:
    """One label per line, lowest education first; blank lines and ``#`` comments skipped."""
    labels = []
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            labels.append(line)
    return EducationSchema(tuple(labels))


def save_schema(schema: EducationSchema, path):
    Path(path).write_text("".join(f"{label}\n" for label in schema.labels))


# ----------------------------------------------------------------- table files


def format_table(table: ContingencyTable) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["row_label", *table.schema.labels])
    for label, row in zip(table.schema.labels, table.cells):
        writer.writerow([label, *(repr(float(v)) for v in row)])
    return buf.getvalue()


def save_table(table: ContingencyTable, path):
    Path(path).write_text(format_table(table))


def parse_table(text: str, source="<table>", warn=True) -> ContingencyTable:
    """Read the ``row_label,<col labels...>`` format.

    Marginals are never read from the file.  Tables whose mass lies inside
    the rounding band are renormalized with a warning.
    """
    rows = [r for r in csv.reader(io.StringIO(text)) if r and any(c.strip() for c in r)]
    if not rows:
        raise ShapeError(f"{source}: empty table file")
    header = [c.strip() for c in rows[0]]
    labels = header[1:]
    body = rows[1:]
    if len(body) != len(labels):
        raise ShapeError(f"{source}: {len(body)} rows for {len(labels)} columns")
    cells = np.empty((len(labels), len(labels)))
    for k, row in enumerate(body):
        if len(row) != len(labels) + 1:
            raise ShapeError(f"{source}: row {k + 2} has {len(row) - 1} cells, expected {len(labels)}")
        if row[0].strip() != labels[k]:
            raise ShapeError(f"{source}: row label {row[0]!r} does not match column {labels[k]!r}")
        try:
            cells[k] = [float(v) for v in row[1:]]
        except ValueError as exc:
            raise ShapeError(f"{source}: row {k + 2}: {exc}") from None
    if np.any(cells < 0):
        raise NegativeCell(f"{source}: negative cell")
    total = cells.sum()
    lo, hi = RENORMALIZE_BAND
    if not lo <= total <= hi:
        raise NotNormalized(f"{source}: cells sum to {total:.6f}, outside [{lo}, {hi}]")
    if total != 1.0:
        if warn and abs(total - 1.0) > 1e-12:
            log.warning("%s: cells sum to %.6f; renormalizing", source, total)
        cells = cells / total
    return ContingencyTable(EducationSchema(tuple(labels)), cells)


def load_table(path) -> ContingencyTable:
    return parse_table(Path(path).read_text(), source=str(path))


# --------------------------------------------------------------- couples files


@dataclass(frozen=True)
class SampleFilter:
    min_age: float = 25
    max_age: float = 55
    require_both_incomes_present: bool = True
    first_marriage_only: bool = False

    def __post_init__(self):
        if self.min_age > self.max_age:
            raise ValueError("min_age exceeds max_age")


@dataclass
class LoadResult:
    records: Couples
    rejects: Counter = field(default_factory=Counter)
    total_rows: int = 0


def load_couples(path, schema: EducationSchema, sample_filter: SampleFilter = SampleFilter()) -> LoadResult:
    """Parse a couples CSV, applying validation and the sample filter.

    Rows that fail a check are counted by reason rather than raising;
    structurally broken rows raise :class:`ParseError`.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [c.strip() for c in next(reader)]
        except StopIteration:
            raise ParseError(1, "missing header") from None
        missing = [c for c in REQUIRED_COLUMNS if c not in header]
        if missing:
            raise ParseError(1, f"header lacks required columns {missing}")
        if sample_filter.first_marriage_only and "first_marriage" not in header:
            raise ParseError(1, "first_marriage column required by the filter")
        pos = {name: header.index(name) for name in header}

        cols = {name: [] for name in COUPLE_FIELDS}
        rejects = Counter()
        total = 0
        for lineno, row in enumerate(reader, start=2):
            if not row or not any(c.strip() for c in row):
                continue
            total += 1
            if len(row) != len(header):
                raise ParseError(lineno, f"expected {len(header)} fields, got {len(row)}")
            reason = _parse_row(row, pos, schema, sample_filter, cols, lineno)
            if reason:
                rejects[reason] += 1

    if not cols["id"]:
        raise EmptySample(f"{path}: no couples survived validation ({dict(rejects)})")
    if all(_is_int(v) for v in cols["id"]):
        cols["id"] = [int(v) for v in cols["id"]]
    return LoadResult(Couples.from_columns(**cols), rejects, total)


def _is_int(text):
    return text.lstrip("-").isdigit()


def _parse_row(row, pos, schema, flt, cols, lineno):
    def raw(name):
        k = pos.get(name)
        return row[k].strip() if k is not None else ""

    def number(name, default=None):
        text = raw(name)
        if text == "":
            return default
        try:
            return float(text)
        except ValueError:
            raise ParseError(lineno, f"{name}: not a number: {text!r}") from None

    rid = raw("id")
    if rid == "":
        return MISSING_FIELD
    if raw("husband_edu") == "" or raw("wife_edu") == "":
        return MISSING_FIELD
    h_age, w_age = number("husband_age"), number("wife_age")
    if h_age is None or w_age is None:
        return MISSING_FIELD
    incomes = [number(c) for c in INCOME_COLUMNS]
    if any(v is None for v in incomes):
        if flt.require_both_incomes_present:
            return MISSING_FIELD
        incomes = [0.0 if v is None else v for v in incomes]
    try:
        h_edu = schema.index(raw("husband_edu"))
        w_edu = schema.index(raw("wife_edu"))
    except KeyError:
        return BAD_CODE
    adults = number("n_other_adults", OPTIONAL_DEFAULTS["n_other_adults"])
    children = number("n_children", OPTIONAL_DEFAULTS["n_children"])
    weight = number("weight", OPTIONAL_DEFAULTS["weight"])
    if (
        min(incomes) < 0
        or adults < 0
        or children < 0
        or adults != int(adults)
        or children != int(children)
        or h_age <= 0
        or w_age <= 0
        or weight < 0
    ):
        return INVALID_VALUE
    if not (flt.min_age <= h_age <= flt.max_age and flt.min_age <= w_age <= flt.max_age):
        return AGE_OUT_OF_BAND
    if flt.first_marriage_only and raw("first_marriage") not in ("1", "true", "True", "yes"):
        return NOT_FIRST_MARRIAGE

    cols["id"].append(rid)
    cols["husband_edu"].append(h_edu)
    cols["wife_edu"].append(w_edu)
    cols["husband_age"].append(h_age)
    cols["wife_age"].append(w_age)
    cols["husband_income"].append(incomes[0])
    cols["wife_income"].append(incomes[1])
    cols["n_other_adults"].append(int(adults))
    cols["n_children"].append(int(children))
    cols["weight"].append(weight)
    return None


def _fmt(v):
    v = float(v)
    return str(int(v)) if v.is_integer() else repr(v)


def format_couples(couples: Couples) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(COUPLE_FIELDS)
    columns = [getattr(couples, name) for name in COUPLE_FIELDS]
    for k in range(len(couples)):
        writer.writerow([columns[0][k], *(_fmt(col[k]) for col in columns[1:])])
    return buf.getvalue()


def save_couples(couples: Couples, path):
    Path(path).write_text(format_couples(couples))


# ------------------------------------------------------- synthetic populations


@dataclass(frozen=True)
class IncomeModel:
    """Log-normal earnings with education-specific medians.

    ``husband_location[i]`` and ``wife_location[j]`` are median incomes;
    ``dispersion`` is the log-scale standard deviation and ``correlation``
    links the spouses' log-income shocks.
    """

    husband_location: tuple
    wife_location: tuple
    dispersion: float = 0.6
    correlation: float = 0.3

    def __post_init__(self):
        if self.dispersion < 0:
            raise ValueError("dispersion must be nonnegative")
        if not 0.0 <= self.correlation < 1.0:
            raise ValueError("correlation must lie in [0, 1)")
        if min(self.husband_location) < 0 or min(self.wife_location) < 0:
            raise ValueError("income locations must be nonnegative")

    @classmethod
    def education_premium(cls, levels: int, base=1000.0, step=1.8, wife_ratio=0.8, dispersion=0.6, correlation=0.3):
        """Medians rising geometrically by ``step`` per education level."""
        husband = tuple(base * step**k for k in range(levels))
        wife = tuple(wife_ratio * v for v in husband)
        return cls(husband, wife, dispersion, correlation)


@dataclass(frozen=True)
class SynthSpec:
    table: ContingencyTable
    income_model: IncomeModel
    n_couples: int
    seed: int = 0
    child_rate: float = 1.0
    other_adult_rate: float = 0.2
    round_incomes: bool = True

    def __post_init__(self):
        if self.n_couples <= 0:
            raise ValueError("n_couples must be positive")
        k = len(self.table.schema)
        if len(self.income_model.husband_location) != k or len(self.income_model.wife_location) != k:
            raise ValueError("income model needs one location per education level")


def generate_synthetic(spec: SynthSpec) -> Couples:
    """Draw couples cell-wise from ``spec.table`` with log-normal incomes.

    Deterministic for a fixed seed.  Incomes are rounded to whole currency
    units by default, as census extracts report them.
    """
    rng = np.random.default_rng(spec.seed)
    n = spec.n_couples
    k = len(spec.table.schema)
    cell = rng.choice(k * k, size=n, p=spec.table.cells.ravel())
    h_edu, w_edu = np.divmod(cell, k)

    model = spec.income_model
    z1 = rng.standard_normal(n)
    z2 = model.correlation * z1 + np.sqrt(1.0 - model.correlation**2) * rng.standard_normal(n)
    h_inc = np.asarray(model.husband_location)[h_edu] * np.exp(model.dispersion * z1)
    w_inc = np.asarray(model.wife_location)[w_edu] * np.exp(model.dispersion * z2)
    if spec.round_incomes:
        h_inc, w_inc = np.round(h_inc), np.round(w_inc)

    return Couples.from_columns(
        id=np.arange(n, dtype=np.int64),
        husband_edu=h_edu,
        wife_edu=w_edu,
        husband_age=rng.integers(25, 56, size=n).astype(float),
        wife_age=rng.integers(25, 56, size=n).astype(float),
        husband_income=h_inc,
        wife_income=w_inc,
        n_other_adults=rng.poisson(spec.other_adult_rate, size=n),
        n_children=rng.poisson(spec.child_rate, size=n),
        weight=np.ones(n),
    )

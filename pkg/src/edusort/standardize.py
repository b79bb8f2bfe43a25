"""Move a contingency table to new marginals while keeping its association.

Two routes are provided.  :func:`standardize_qp` solves

    min_X  sum_ij w_ij (x_ij - r_i c_j I_ij)^2
    s.t.   X 1 = r,  X' 1 = c,  X >= 0

where ``I`` holds the source table's interest factors, so the
unconstrained optimum reproduces those factors exactly at the new
marginals.  :func:`standardize_ipf` is classical iterative proportional
fitting, which keeps odds ratios instead and serves as a cross-check.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidTargets, IpfSupportError, NotConverged, ShapeMismatch
from .tables import MASS_TOL, ContingencyTable, interest_factors

MAX_ITER = 10_000
MARGINAL_TOL = 1e-8
STATIONARITY_TOL = 1e-6
BOUND_TOL = 1e-8


@dataclass(frozen=True)
class ObjectiveVariant:
    """Cell weights of the QP objective.

    ``uniform`` weighs every cell equally; ``inverse-product`` divides by
    the random-matching share ``r_i c_j`` so that deviations are measured
    relative to the size of the cell.
    """

    kind: str = "inverse-product"

    ALIASES = {"uniform": "uniform", "inverse-product": "inverse-product", "invprod": "inverse-product"}

    def __post_init__(self):
        if self.kind not in self.ALIASES:
            raise ValueError(f"unknown objective variant {self.kind!r}")
        object.__setattr__(self, "kind", self.ALIASES[self.kind])

    def cell_weights(self, target_row, target_col):
        """Weights and the mask of cells included in the objective."""
        expected = np.outer(target_row, target_col)
        included = expected > 0
        if self.kind == "uniform":
            weights = np.where(included, 1.0, 0.0)
        else:
            with np.errstate(divide="ignore"):
                weights = np.where(included, 1.0 / np.where(included, expected, 1.0), 0.0)
        return weights, included


UNIFORM = ObjectiveVariant("uniform")
INVERSE_PRODUCT = ObjectiveVariant("inverse-product")
# chosen by the calibration run against the published standardized panels
DEFAULT_OBJECTIVE = INVERSE_PRODUCT


@dataclass(frozen=True, eq=False)
class StandardizationProblem:
    source: ContingencyTable
    target_row: np.ndarray
    target_col: np.ndarray

    def __post_init__(self):
        k = len(self.source.schema)
        for name in ("target_row", "target_col"):
            vec = np.array(getattr(self, name), dtype=float)
            if vec.shape != (k,):
                raise InvalidTargets(f"{name} has shape {vec.shape}, expected ({k},)")
            if not np.all(np.isfinite(vec)) or np.any(vec < 0):
                raise InvalidTargets(f"{name} has negative or non-finite entries")
            if abs(vec.sum() - 1.0) > MASS_TOL:
                raise InvalidTargets(f"{name} sums to {vec.sum()!r}, expected 1")
            vec.flags.writeable = False
            object.__setattr__(self, name, vec)

    @classmethod
    def to_marginals_of(cls, source: ContingencyTable, target: ContingencyTable):
        if source.schema != target.schema:
            raise ShapeMismatch("source and target tables use different schemas")
        return cls(source, target.row_marginal, target.col_marginal)

    def preserving_target(self) -> np.ndarray:
        """The table with the source's interest factors at the target marginals."""
        factors = np.nan_to_num(interest_factors(self.source).values, nan=0.0)
        return np.outer(self.target_row, self.target_col) * factors

    def marginal_residual(self, cells) -> float:
        return float(
            max(
                np.abs(cells.sum(axis=1) - self.target_row).max(),
                np.abs(cells.sum(axis=0) - self.target_col).max(),
            )
        )


@dataclass(frozen=True, eq=False)
class StandardizationResult:
    table: ContingencyTable
    objective_value: float
    iterations: int
    converged: bool
    max_marginal_residual: float
    method: str = "qp"
    objective_trace: tuple = ()
    active_cells: np.ndarray | None = None
    extra: dict = field(default_factory=dict)

    def diagnostics(self) -> dict:
        out = {
            "method": self.method,
            "objective_value": self.objective_value,
            "iterations": self.iterations,
            "converged": self.converged,
            "max_marginal_residual": self.max_marginal_residual,
        }
        if self.active_cells is not None:
            out["active_cells"] = [[int(i), int(j)] for i, j in np.argwhere(self.active_cells)]
        out.update(self.extra)
        return out


def _check_source_support(problem: StandardizationProblem):
    src = problem.source
    rows = (problem.target_row > 0) & (src.row_marginal == 0)
    cols = (problem.target_col > 0) & (src.col_marginal == 0)
    if rows.any() or cols.any():
        raise InvalidTargets(
            "source table has an empty row or column where the target marginal is positive "
            f"(rows {np.flatnonzero(rows).tolist()}, columns {np.flatnonzero(cols).tolist()})"
        )


def _constraint_matrix(n, m):
    A = np.zeros((n + m, n * m))
    for i in range(n):
        A[i, i * m : (i + 1) * m] = 1.0
    for j in range(m):
        A[n + j, j::m] = 1.0
    return A


def _objective(weights, x, target):
    return float(np.sum(weights * (x - target) ** 2))


def _clean(x, problem):
    x = np.where(x < 0, 0.0, x)
    return x / x.sum()


def standardize_qp(
    problem: StandardizationProblem,
    variant: ObjectiveVariant = DEFAULT_OBJECTIVE,
    tol: float = MARGINAL_TOL,
    max_iter: int = MAX_ITER,
) -> StandardizationResult:
    """Primal active-set solution of the I-preserving least-squares QP.

    Starts from the independence table ``r c'`` (feasible, and strictly
    positive wherever a cell can carry mass) and works only with bound
    constraints ``x_ij = 0`` in the working set, so every step stays on the
    marginal constraints and the objective never increases.
    """
    _check_source_support(problem)
    n, m = problem.source.shape
    r, c = problem.target_row, problem.target_col
    weights, included = variant.cell_weights(r, c)
    target = problem.preserving_target()

    w = weights.ravel()
    t = target.ravel()
    free_ok = included.ravel()
    hess = 2.0 * w
    A = _constraint_matrix(n, m)

    x = np.outer(r, c).ravel()
    working = ~free_ok
    x[working] = 0.0
    trace = [_objective(w, x, t)]
    converged = False
    iterations = 0
    step_floor = 1e-12

    for iterations in range(1, max_iter + 1):
        grad = hess * (x - t)
        free = ~working
        if not free.any():
            break
        A_f = A[:, free]
        h_inv = 1.0 / hess[free]
        lhs = (A_f * h_inv) @ A_f.T
        rhs = -(A_f * h_inv) @ grad[free]
        lam = np.linalg.lstsq(lhs, rhs, rcond=None)[0]
        step = np.zeros_like(x)
        step[free] = -h_inv * (grad[free] + A_f.T @ lam)

        if np.abs(step).max() <= step_floor:
            mult = grad + A.T @ lam
            releasable = working & free_ok
            if not releasable.any():
                converged = True
                break
            cand = np.where(releasable, mult, np.inf)
            k = int(np.argmin(cand))
            if cand[k] >= -BOUND_TOL * max(1.0, np.abs(mult[releasable]).max()):
                converged = True
                break
            working[k] = False
            continue

        alpha, blocking = 1.0, -1
        shrinking = free & (step < 0)
        if shrinking.any():
            ratios = np.full_like(x, np.inf)
            ratios[shrinking] = -x[shrinking] / step[shrinking]
            k = int(np.argmin(ratios))
            if ratios[k] < 1.0:
                alpha, blocking = float(ratios[k]), k
        x = x + alpha * step
        if blocking >= 0:
            working[blocking] = True
            x[blocking] = 0.0
        x[working] = 0.0
        trace.append(_objective(w, x, t))

    cells = _clean(x, problem).reshape(n, m)
    residual = problem.marginal_residual(cells)
    converged = converged and residual <= tol
    result = StandardizationResult(
        table=ContingencyTable(problem.source.schema, cells),
        objective_value=_objective(weights, cells, target),
        iterations=iterations,
        converged=converged,
        max_marginal_residual=residual,
        method="qp",
        objective_trace=tuple(trace),
        active_cells=(cells == 0) & included,
        extra={"objective": variant.kind},
    )
    if not converged:
        raise NotConverged(result)
    return result


@dataclass(frozen=True)
class KktCertificate:
    stationarity: float
    min_bound_multiplier: float

    def ok(self, stationarity_tol=STATIONARITY_TOL, bound_tol=BOUND_TOL) -> bool:
        return self.stationarity <= stationarity_tol and self.min_bound_multiplier >= -bound_tol


def kkt_certificate(problem: StandardizationProblem, variant: ObjectiveVariant, cells) -> KktCertificate:
    """Check first-order optimality of ``cells`` independently of the solver.

    Multipliers for the marginal constraints are fitted by least squares on
    the strictly positive cells; what remains of the gradient there is the
    stationarity error.  The same multipliers give the bound multipliers
    on zero cells, which must be nonnegative.
    """
    cells = np.asarray(getattr(cells, "cells", cells), dtype=float)
    n, m = cells.shape
    weights, included = variant.cell_weights(problem.target_row, problem.target_col)
    grad = (2.0 * weights * (cells - problem.preserving_target())).ravel()
    A = _constraint_matrix(n, m)
    x = cells.ravel()
    pos = (x > 0) & included.ravel()
    lam = np.linalg.lstsq(A[:, pos].T, -grad[pos], rcond=None)[0]
    reduced = grad + A.T @ lam
    stationarity = float(np.linalg.norm(reduced[pos]))
    at_bound = (x == 0) & included.ravel()
    min_mult = float(reduced[at_bound].min()) if at_bound.any() else 0.0
    return KktCertificate(stationarity, min_mult)


def standardize_ipf(
    problem: StandardizationProblem,
    tol: float = MARGINAL_TOL,
    max_iter: int = MAX_ITER,
    jitter: float = 0.0,
) -> StandardizationResult:
    """Alternate row and column rescaling until the marginals match.

    All odds ratios of the source are kept.  Zero source cells in rows and
    columns with positive targets break the classical support condition;
    ``jitter > 0`` fills them with ``jitter`` and renormalizes instead of
    raising.
    """
    r, c = problem.target_row, problem.target_col
    x = np.array(problem.source.cells)
    supported = np.outer(r > 0, c > 0)
    holes = supported & (x <= 0)
    if holes.any():
        if jitter <= 0:
            i, j = np.argwhere(holes)[0]
            raise IpfSupportError(
                f"source cell ({i}, {j}) is zero but its row and column targets are positive; "
                "use jitter to perturb empty cells"
            )
        x = np.where(holes, jitter, x)
        x = x / x.sum()
    x = np.where(supported, x, 0.0)

    residual = np.inf
    it = 0
    for it in range(1, max_iter + 1):
        rows = x.sum(axis=1)
        x = x * np.divide(r, rows, out=np.zeros_like(r), where=rows > 0)[:, None]
        cols = x.sum(axis=0)
        x = x * np.divide(c, cols, out=np.zeros_like(c), where=cols > 0)[None, :]
        residual = problem.marginal_residual(x)
        if residual <= tol:
            break

    cells = x / x.sum()
    residual = problem.marginal_residual(cells)
    result = StandardizationResult(
        table=ContingencyTable(problem.source.schema, cells),
        objective_value=float("nan"),
        iterations=it,
        converged=residual <= tol,
        max_marginal_residual=residual,
        method="ipf",
        extra={"jitter": jitter} if jitter else {},
    )
    if not result.converged:
        raise NotConverged(result)
    return result


@dataclass(frozen=True, eq=False)
class DeviationReport:
    mean_abs_dev: float
    max_abs_dev: float
    per_cell: np.ndarray

    def as_dict(self):
        return {
            "mean_abs_dev": self.mean_abs_dev,
            "max_abs_dev": self.max_abs_dev,
            "per_cell": self.per_cell.tolist(),
        }


def deviation_report(result, reference) -> DeviationReport:
    """Cellwise absolute deviation of a standardized table from a reference."""
    got = _cells_of(result)
    ref = _cells_of(reference)
    if got.shape != ref.shape:
        raise ShapeMismatch(f"cannot compare shapes {got.shape} and {ref.shape}")
    dev = np.abs(got - ref)
    return DeviationReport(float(dev.mean()), float(dev.max()), dev)


def _cells_of(obj):
    if isinstance(obj, StandardizationResult):
        obj = obj.table
    return np.asarray(getattr(obj, "cells", obj), dtype=float)

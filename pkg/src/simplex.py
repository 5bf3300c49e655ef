"""Dense two-phase simplex for the small linear programs of the game oracle"""

from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence

import numpy as np
import structlog

from src.errors import DomainError, InfeasibleLPError, IterationLimitError, UnboundedLPError

logger = structlog.get_logger(__name__)

DEGENERATE_STALL_LIMIT = 50


class PivotRule(str, Enum):
    """Entering-variable rule"""
    BLAND = "bland"
    HYBRID = "hybrid"  # Dantzig's most negative reduced cost, Bland's rule after degenerate stalls


@dataclass
class LPResult:
    """Optimal basic solution of a linear program"""
    x: np.ndarray
    objective: float
    duals_eq: np.ndarray
    duals_ub: np.ndarray
    iterations: int
    primal_residual: float
    dual_residual: float
    status: str = "optimal"


class _Tableau:
    """Canonical-form tableau for min c.x s.t. A x = b, x >= 0 with b >= 0"""

    def __init__(
        self,
        A: np.ndarray,
        b: np.ndarray,
        c: np.ndarray,
        tol: float,
        max_iterations: int,
        rule: PivotRule,
        refactor_every: int,
    ):
        self.tol = tol
        self.max_iterations = max_iterations
        self.rule = rule
        self.refactor_every = refactor_every
        self.iterations = 0
        self.phase = 1

        m, n = A.shape
        basis = self._crash_basis(A)
        missing = [row for row in range(m) if basis[row] < 0]
        artificial = np.zeros((m, len(missing)))
        for offset, row in enumerate(missing):
            artificial[row, offset] = 1.0
            basis[row] = n + offset

        self.n_structural = n
        self.A = np.hstack([A, artificial])
        self.b = b.astype(float)
        self.cost = np.concatenate([c.astype(float), np.zeros(len(missing))])
        self.basis = basis
        self.allowed = np.ones(self.A.shape[1], dtype=bool)
        self.T = np.hstack([self.A, self.b[:, None]])
        self.obj = np.zeros(self.A.shape[1] + 1)

    @staticmethod
    def _crash_basis(A: np.ndarray) -> list:
        """Use existing unit columns (slacks) as the starting basis where possible"""
        m = A.shape[0]
        basis = [-1] * m
        nonzero = A != 0.0
        counts = nonzero.sum(axis=0)
        rows = np.argmax(nonzero, axis=0)
        for j in np.flatnonzero(counts == 1):
            row = rows[j]
            if basis[row] < 0 and A[row, j] == 1.0:
                basis[row] = int(j)
        return basis

    def _price(self, cost: np.ndarray):
        cb = cost[self.basis]
        self.obj[:-1] = cost - cb @ self.T[:, :-1]
        self.obj[-1] = -cb @ self.T[:, -1]

    def _refactor(self, cost: np.ndarray):
        B = self.A[:, self.basis]
        self.T = np.linalg.solve(B, np.hstack([self.A, self.b[:, None]]))
        self.T[:, -1] = np.maximum(self.T[:, -1], 0.0)
        self._price(cost)

    def _pivot(self, row: int, col: int):
        pivot_row = self.T[row] / self.T[row, col]
        column = self.T[:, col].copy()
        column[row] = 0.0
        self.T -= np.outer(column, pivot_row)
        self.T[row] = pivot_row
        self.obj -= self.obj[col] * pivot_row
        self.basis[row] = col

    def _entering(self, bland: bool) -> Optional[int]:
        reduced = np.where(self.allowed, self.obj[:-1], 0.0)
        candidates = np.flatnonzero(reduced < -self.tol)
        if candidates.size == 0:
            return None
        if bland:
            return int(candidates[0])
        return int(candidates[np.argmin(reduced[candidates])])

    def _leaving(self, col: int) -> Optional[int]:
        column = self.T[:, col]
        rows = np.flatnonzero(column > self.tol)
        if rows.size == 0:
            return None
        ratios = self.T[rows, -1] / column[rows]
        best = ratios.min()
        tied = rows[ratios <= best + self.tol * (1.0 + abs(best))]
        # Bland's leaving rule: smallest basic variable index among ties
        return int(min(tied, key=lambda r: self.basis[r]))

    def _run(self, cost: np.ndarray):
        self._price(cost)
        stall = 0
        since_refactor = 0
        while True:
            bland = self.rule == PivotRule.BLAND or stall >= DEGENERATE_STALL_LIMIT
            col = self._entering(bland)
            if col is None:
                return
            row = self._leaving(col)
            if row is None:
                raise UnboundedLPError(
                    f"Objective unbounded along column {col}", self.iterations, self.phase
                )
            if self.iterations >= self.max_iterations:
                raise IterationLimitError(
                    f"No optimum after {self.iterations} pivots", self.iterations, self.phase
                )

            degenerate = self.T[row, -1] <= self.tol
            self._pivot(row, col)
            self.iterations += 1
            stall = stall + 1 if degenerate else 0

            since_refactor += 1
            if since_refactor >= self.refactor_every:
                self._refactor(cost)
                since_refactor = 0

    def solve(self):
        m = self.A.shape[0]
        artificial = np.arange(self.n_structural, self.A.shape[1])

        if artificial.size:
            phase_one_cost = np.zeros(self.A.shape[1])
            phase_one_cost[artificial] = 1.0
            self._run(phase_one_cost)
            infeasibility = -self.obj[-1]
            if infeasibility > self.tol * max(1.0, float(np.abs(self.b).max())):
                raise InfeasibleLPError(
                    f"Phase one ended with infeasibility {infeasibility:.3e}", self.iterations, 1
                )
            self._drive_out_artificials(artificial)
            self.allowed[artificial] = False

        self.phase = 2
        self._run(self.cost)

        B = self.A[:, self.basis]
        x = np.zeros(self.A.shape[1])
        x[self.basis] = np.maximum(np.linalg.solve(B, self.b), 0.0)
        y = np.linalg.solve(B.T, self.cost[self.basis])
        logger.debug(
            "simplex_finished", rows=m, columns=self.A.shape[1], iterations=self.iterations
        )
        return x[: self.n_structural], y

    def _drive_out_artificials(self, artificial: np.ndarray):
        first_artificial = artificial[0]
        for row, var in enumerate(list(self.basis)):
            if var < first_artificial:
                continue
            entries = np.abs(self.T[row, :first_artificial])
            col = int(np.argmax(entries))
            # A row with no structural entry is redundant and keeps its artificial at zero
            if entries[col] > self.tol:
                self._pivot(row, col)
                self.iterations += 1


def lp_solve(
    c: Sequence[float],
    A_ub: Optional[np.ndarray] = None,
    b_ub: Optional[Sequence[float]] = None,
    A_eq: Optional[np.ndarray] = None,
    b_eq: Optional[Sequence[float]] = None,
    *,
    maximize: bool = False,
    free: Optional[Sequence[bool]] = None,
    max_iterations: int = 100_000,
    tol: float = 1e-9,
    pivot_rule: PivotRule = PivotRule.HYBRID,
    refactor_every: int = 200,
) -> LPResult:
    """
    Solve a small dense linear program with the two-phase simplex method

    Variables are non-negative unless flagged in `free`. Duals are reported for
    the problem as posed (for a maximization, y solves min b.y s.t. A^T y >= c).

    Args:
        c: Objective coefficients
        A_ub: Inequality matrix (A_ub x <= b_ub)
        b_ub: Inequality right-hand side
        A_eq: Equality matrix (A_eq x = b_eq)
        b_eq: Equality right-hand side
        maximize: Maximize instead of minimize
        free: Per-variable flag for unrestricted sign
        max_iterations: Pivot limit over both phases
        tol: Pivot and optimality tolerance
        pivot_rule: Entering rule; Bland's rule is always used for leaving ties
        refactor_every: Pivots between tableau refactorizations

    Returns:
        LPResult with the optimal basic solution

    Raises:
        InfeasibleLPError, UnboundedLPError, IterationLimitError
    """
    c = np.asarray(c, dtype=float)
    n = c.shape[0]
    A_ub = np.zeros((0, n)) if A_ub is None else np.atleast_2d(np.asarray(A_ub, dtype=float))
    b_ub = np.zeros(0) if b_ub is None else np.asarray(b_ub, dtype=float)
    A_eq = np.zeros((0, n)) if A_eq is None else np.atleast_2d(np.asarray(A_eq, dtype=float))
    b_eq = np.zeros(0) if b_eq is None else np.asarray(b_eq, dtype=float)
    if A_ub.shape != (b_ub.shape[0], n) or A_eq.shape != (b_eq.shape[0], n):
        raise DomainError("Constraint shapes do not match the objective")
    if not (np.all(np.isfinite(A_ub)) and np.all(np.isfinite(A_eq)) and np.all(np.isfinite(c))):
        raise DomainError("LP data must be finite")

    free_mask = np.zeros(n, dtype=bool) if free is None else np.asarray(free, dtype=bool)
    free_cols = np.flatnonzero(free_mask)

    # Split free variables into positive and negative parts, then add slacks
    structural_ub = np.hstack([A_ub, -A_ub[:, free_cols]])
    structural_eq = np.hstack([A_eq, -A_eq[:, free_cols]])
    n_split = n + free_cols.size
    m_ub, m_eq = A_ub.shape[0], A_eq.shape[0]
    A = np.vstack([
        np.hstack([structural_ub, np.eye(m_ub)]),
        np.hstack([structural_eq, np.zeros((m_eq, m_ub))]),
    ])
    b = np.concatenate([b_ub, b_eq])
    sign = np.where(b < 0.0, -1.0, 1.0)
    A = A * sign[:, None]
    b = b * sign

    objective = -c if maximize else c
    cost = np.concatenate([objective, -objective[free_cols], np.zeros(m_ub)])

    tableau = _Tableau(A, b, cost, tol, max_iterations, PivotRule(pivot_rule), refactor_every)
    x_std, y_std = tableau.solve()

    x = x_std[:n].copy()
    x[free_cols] -= x_std[n:n_split]
    y = y_std * sign
    if maximize:
        y = -y

    primal_residual = 0.0
    if m_ub:
        primal_residual = max(primal_residual, float(np.max(np.maximum(A_ub @ x - b_ub, 0.0))))
    if m_eq:
        primal_residual = max(primal_residual, float(np.max(np.abs(A_eq @ x - b_eq))))
    reduced = cost - A.T @ y_std[: A.shape[0]]
    dual_residual = float(max(0.0, -reduced.min())) if reduced.size else 0.0

    result = LPResult(
        x=x,
        objective=float(c @ x),
        duals_eq=y[m_ub:],
        duals_ub=y[:m_ub],
        iterations=tableau.iterations,
        primal_residual=primal_residual,
        dual_residual=dual_residual,
    )
    logger.debug(
        "lp_solved",
        variables=n,
        rows=m_ub + m_eq,
        objective=result.objective,
        iterations=result.iterations,
        primal_residual=primal_residual,
        dual_residual=dual_residual,
    )
    return result

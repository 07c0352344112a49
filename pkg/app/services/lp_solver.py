"""
LP solver - active-set (vertex) revised simplex over constraint rows.

The solver works directly on ``min c'x  s.t.  Gx = h,  Kx <= f`` with free
variables. A vertex is described by a working set of ``n`` linearly
independent rows: every equality row plus ``n - n_eq`` inequality rows. Each
iteration refactors the working-set matrix (dense LU), reads the row
multipliers from ``A_W' y = c`` and, if some inequality multiplier has the
wrong sign, releases that row and walks along the edge to the first blocking
inequality. The final working set is exactly the optimal basis used for
sensitivity analysis, which is why the solver lives in-repo.

Phase 1 appends one artificial variable ``t`` that loosens every inequality
outside the starting set and minimizes it.
"""

import logging
from typing import Iterable, Sequence

import numpy as np
from scipy.linalg import lu_factor, lu_solve, null_space

from ..config import (
    CONDITION_LIMIT,
    DEGENERATE_STEP_LIMIT,
    FEASIBILITY_TOL,
    MAX_ITERATION_FACTOR,
    OPTIMALITY_TOL,
    PIVOT_TOL,
    RESIDUAL_TOL,
)
from ..errors import InfeasibleError, NumericalError, UnboundedError
from ..models.lp import Basis, LinearProgram, LpSolution

logger = logging.getLogger("carbonshift.services.lp_solver")

# Minimum relative residual norm for a row to count as independent of the
# rows already selected.
_INDEPENDENCE_TOL = 1e-7


def _equality_null_space(G: np.ndarray, n: int) -> np.ndarray:
    if G.shape[0] == 0:
        return np.eye(n)
    Z = null_space(G)
    if n - Z.shape[1] != G.shape[0]:
        raise NumericalError(
            f"Equality block is rank deficient (rank {n - Z.shape[1]} < {G.shape[0]} rows)"
        )
    return Z


def select_independent_rows(
    G: np.ndarray,
    K: np.ndarray,
    candidates: Iterable[int],
    needed: int,
    preferred: Iterable[int] = (),
) -> list[int]:
    """Pick ``needed`` rows of K that complete G to a nonsingular square matrix.

    Greedy pivoted Gram-Schmidt on the rows projected onto the null space of
    G: at each step the candidate with the largest remaining (relative) norm
    wins, which keeps the smallest singular value of the selection large.
    Rows listed in ``preferred`` are exhausted first. Ties go to the earlier
    row, so the result is deterministic given input order.
    """
    candidates = list(candidates)
    n = G.shape[1] if G.size else K.shape[1]
    Z = _equality_null_space(G, n)
    if needed == 0:
        return []
    if len(candidates) < needed:
        raise NumericalError(f"Only {len(candidates)} candidate rows for {needed} basis slots")
    projected = K[candidates] @ Z
    original = np.linalg.norm(K[candidates], axis=1)
    original[original == 0.0] = 1.0

    residual = projected.copy()
    available = np.ones(len(candidates), dtype=bool)
    preferred_mask = np.isin(candidates, list(preferred))
    chosen: list[int] = []

    for _ in range(needed):
        relative = np.linalg.norm(residual, axis=1) / original
        pick = -1
        for pool in (available & preferred_mask, available):
            if not pool.any():
                continue
            scores = np.where(pool, relative, -1.0)
            idx = int(np.argmax(scores))
            if scores[idx] > _INDEPENDENCE_TOL:
                pick = idx
                break
        if pick < 0:
            raise NumericalError("Constraint rows do not determine a vertex: no nonsingular selection found")

        q = residual[pick] / np.linalg.norm(residual[pick])
        residual -= np.outer(residual @ q, q)
        available[pick] = False
        chosen.append(candidates[pick])

    return sorted(chosen)


def _simplex(
    c: np.ndarray,
    A: np.ndarray,
    b: np.ndarray,
    n_eq: int,
    working: Sequence[int],
    max_iter: int,
) -> tuple[np.ndarray, list[int], np.ndarray, int]:
    """Run simplex iterations from a feasible vertex.

    ``working`` holds stacked row indices; positions ``0..n_eq-1`` are the
    equality rows and never leave. Returns ``(x, working, y, iterations)``.
    """
    n = c.size
    working = list(working)
    in_working = np.zeros(A.shape[0], dtype=bool)
    in_working[working] = True
    row_norms = np.linalg.norm(A, axis=1)
    row_norms[row_norms == 0.0] = 1.0
    dual_tol = OPTIMALITY_TOL * (1.0 + np.abs(c).max())
    degenerate_run = 0

    for iteration in range(max_iter):
        lu = lu_factor(A[working], check_finite=False)
        x = lu_solve(lu, b[working], check_finite=False)
        y = lu_solve(lu, c, trans=1, check_finite=False)

        wrong_sign = np.flatnonzero(y[n_eq:] > dual_tol)
        if wrong_sign.size == 0:
            return x, working, y, iteration

        bland = degenerate_run >= DEGENERATE_STEP_LIMIT
        if bland:
            rows = np.asarray(working)[n_eq + wrong_sign]
            leave = int(wrong_sign[np.argmin(rows)])
        else:
            leave = int(wrong_sign[np.argmax(y[n_eq + wrong_sign])])
        pos = n_eq + leave

        unit = np.zeros(n)
        unit[pos] = -1.0
        p = lu_solve(lu, unit, check_finite=False)
        p /= np.abs(p).max()

        Ap = A @ p
        slack = b - A @ x
        blocking = (~in_working) & (Ap > PIVOT_TOL * row_norms)
        blocking[:n_eq] = False
        candidates = np.flatnonzero(blocking)
        if candidates.size == 0:
            raise UnboundedError("Objective is unbounded below along a feasible edge")

        ratios = np.maximum(slack[candidates], 0.0) / Ap[candidates]
        alpha = ratios.min()
        ties = candidates[ratios <= alpha * (1.0 + 1e-9) + 1e-12]
        if bland or ties.size == 1:
            enter = int(ties.min())
        else:
            # Largest pivot first, lowest index among equals.
            enter = int(ties[np.lexsort((ties, -Ap[ties]))[0]])

        in_working[working[pos]] = False
        working[pos] = enter
        in_working[enter] = True
        degenerate_run = degenerate_run + 1 if alpha <= FEASIBILITY_TOL else 0
        if bland and degenerate_run == DEGENERATE_STEP_LIMIT:
            logger.debug("Degenerate cycling suspected; switching to Bland's rule")

    raise NumericalError(f"Simplex did not converge within {max_iter} iterations")


def _phase_one(
    lp: LinearProgram,
    working: list[int],
    violation: np.ndarray,
    max_iter: int,
) -> list[int]:
    """Find a feasible vertex; returns its working set in stacked row numbering."""
    n, n_eq, m = lp.n_vars, lp.n_eq, lp.n_ineq
    t_row = n_eq + m
    start = set(working[n_eq:])

    A_aug = np.zeros((n_eq + m + 1, n + 1))
    A_aug[: n_eq + m, :n] = lp.rows
    for j in range(m):
        if n_eq + j not in start:
            A_aug[n_eq + j, n] = -1.0
    A_aug[t_row, n] = -1.0
    b_aug = np.concatenate([lp.rhs, [0.0]])
    c_aug = np.zeros(n + 1)
    c_aug[n] = 1.0

    worst = n_eq + int(np.argmax(violation))
    x_aug, working_aug, _, iterations = _simplex(c_aug, A_aug, b_aug, n_eq, working + [worst], max_iter)

    t_star = x_aug[n]
    threshold = FEASIBILITY_TOL * (1.0 + np.abs(lp.rhs).max(initial=0.0))
    logger.debug(f"Phase 1 finished after {iterations} iterations, infeasibility {t_star:.3e}")
    if t_star > threshold:
        raise InfeasibleError(f"Linear program is infeasible (minimum violation {t_star:.6g})")

    if t_row not in working_aug:
        # Degenerate phase-1 optimum: swap t >= 0 into the basis so that the
        # remaining rows form a vertex of the original problem.
        lu = lu_factor(A_aug[working_aug], check_finite=False)
        target = np.zeros(n + 1)
        target[n] = -1.0
        z = lu_solve(lu, target, trans=1, check_finite=False)
        r = n_eq + int(np.argmax(np.abs(z[n_eq:])))
        working_aug[r] = t_row

    return [row for row in working_aug if row != t_row]


def _solve_without_vertex(lp: LinearProgram, lineality: np.ndarray) -> LpSolution:
    """Handle programs whose constraint rows leave directions free.

    Such a program has no vertex. If the objective moves along a free
    direction it is unbounded whenever it is feasible; otherwise it is solved
    on the orthogonal complement ``x = Q u`` and mapped back. The row
    multipliers carry over unchanged because ``c`` lies in the row space.
    """
    n, m = lp.n_vars, lp.n_ineq
    c = lp.objective
    moves_freely = np.linalg.norm(lineality.T @ c) > OPTIMALITY_TOL * (1.0 + np.abs(c).max())
    Q = null_space(lineality.T) if lineality.shape[1] < n else np.zeros((n, 0))
    logger.debug(f"Constraint rows leave {lineality.shape[1]} free directions; objective moves freely: {moves_freely}")

    if Q.shape[1] == 0:
        # Every row is zero: feasible iff 0 = h and 0 <= f.
        infeasible = np.any(np.abs(lp.h) > FEASIBILITY_TOL) or np.any(lp.f < -FEASIBILITY_TOL)
        if infeasible:
            raise InfeasibleError("Linear program is infeasible (constraint rows are all zero)")
        if moves_freely:
            raise UnboundedError("Objective is unbounded below: no constraint limits it")
        binding = tuple(int(j) for j in np.flatnonzero(lp.f <= FEASIBILITY_TOL))
        return LpSolution(
            x_star=np.zeros(n),
            objective_value=0.0,
            duals_eq=np.zeros(lp.n_eq),
            duals_ineq=np.zeros(m),
            binding_ineq=binding,
        )

    if lp.n_eq > Q.shape[1]:
        raise NumericalError(
            f"Equality block is rank deficient ({lp.n_eq} rows in a {Q.shape[1]}-dimensional row space)"
        )
    reduced = LinearProgram(
        objective=np.zeros(Q.shape[1]) if moves_freely else Q.T @ c,
        G=lp.G @ Q,
        h=lp.h,
        K=lp.K @ Q,
        f=lp.f,
        eq_labels=lp.eq_labels,
        ineq_labels=lp.ineq_labels,
    )
    sol = _solve_vertex_lp(reduced)
    if moves_freely:
        raise UnboundedError("Objective is unbounded below along a direction no constraint limits")

    x = Q @ sol.x_star
    return LpSolution(
        x_star=x,
        objective_value=float(c @ x),
        duals_eq=sol.duals_eq,
        duals_ineq=sol.duals_ineq,
        binding_ineq=sol.binding_ineq,
        basic_ineq=sol.basic_ineq,
        iterations=sol.iterations,
    )


def solve_lp(lp: LinearProgram) -> LpSolution:
    """Solve ``lp`` to a basic optimal solution with duals and binding set.

    Raises InfeasibleError, UnboundedError, or NumericalError when the
    equality block is rank deficient or the iterations break down.
    """
    lineality = null_space(lp.rows) if lp.rows.shape[0] else np.eye(lp.n_vars)
    if lineality.shape[1]:
        return _solve_without_vertex(lp, lineality)
    return _solve_vertex_lp(lp)


def _solve_vertex_lp(lp: LinearProgram) -> LpSolution:
    n, n_eq, m = lp.n_vars, lp.n_eq, lp.n_ineq
    A, b, c = lp.rows, lp.rhs, lp.objective
    max_iter = MAX_ITERATION_FACTOR * (n + m + 1)

    start = select_independent_rows(lp.G, lp.K, range(m), n - n_eq)
    working = list(range(n_eq)) + [n_eq + j for j in start]

    iterations = 0
    if m:
        x0 = lu_solve(lu_factor(A[working], check_finite=False), b[working], check_finite=False)
        violation = lp.K @ x0 - lp.f
        if np.any(violation > FEASIBILITY_TOL * (1.0 + np.abs(lp.f))):
            working = _phase_one(lp, working, violation, max_iter)

    x, working, y, iterations = _simplex(c, A, b, n_eq, working, max_iter)

    eq_residual = np.abs(lp.G @ x - lp.h) if n_eq else np.zeros(0)
    if np.any(eq_residual > FEASIBILITY_TOL * (1.0 + np.abs(lp.h))):
        raise NumericalError(f"Equality residual {eq_residual.max():.3e} exceeds tolerance")
    slack = lp.f - lp.K @ x if m else np.zeros(0)
    scale = FEASIBILITY_TOL * (1.0 + np.abs(lp.f))
    if np.any(slack < -scale):
        raise NumericalError(f"Inequality violation {-slack.min():.3e} exceeds tolerance")

    duals_ineq = np.zeros(m)
    basic_ineq = sorted(row - n_eq for row in working[n_eq:])
    for pos in range(n_eq, n):
        duals_ineq[working[pos] - n_eq] = y[pos]
    binding = tuple(int(j) for j in np.flatnonzero(slack <= scale))

    objective = float(c @ x)
    logger.debug(
        f"LP solved: n={n}, eq={n_eq}, ineq={m}, objective={objective:.6f}, "
        f"binding={len(binding)}, iterations={iterations}"
    )
    return LpSolution(
        x_star=x,
        objective_value=objective,
        duals_eq=y[:n_eq],
        duals_ineq=duals_ineq,
        binding_ineq=binding,
        basic_ineq=tuple(basic_ineq),
        iterations=iterations,
    )


def _build_basis(lp: LinearProgram, rows: Sequence[int]) -> Basis:
    rows = list(rows)
    A = np.vstack([lp.G, lp.K[rows]])
    b = np.concatenate([lp.h, lp.f[rows]])
    condition = float(np.linalg.cond(A))
    if not np.isfinite(condition) or condition > CONDITION_LIMIT:
        raise NumericalError(f"Basis condition estimate {condition:.3e} exceeds {CONDITION_LIMIT:.0e}")
    row_map = tuple(range(lp.n_eq)) + tuple(lp.n_eq + j for j in rows)
    return Basis(A=A, b=b, row_map=row_map, n_eq=lp.n_eq, condition=condition)


def extract_optimal_basis(lp: LinearProgram, sol: LpSolution) -> Basis:
    """Form the optimal basis from the binding set of a basic optimal solution.

    The solver's own final basis is used when it is available and well
    conditioned. Otherwise (degenerate solutions with more than ``n`` tight
    rows) rows are re-selected greedily, taking rows with nonzero multipliers
    first so that the basis stays dual feasible.
    """
    needed = lp.n_vars - lp.n_eq
    tight = list(sol.binding_ineq)
    if len(tight) < needed:
        raise NumericalError(f"Solution has {len(tight)} binding inequalities, a basis needs {needed}")

    basis = None
    if len(sol.basic_ineq) == needed and set(sol.basic_ineq) <= set(tight):
        try:
            basis = _build_basis(lp, sol.basic_ineq)
        except NumericalError as e:
            logger.warning(f"Solver basis rejected ({e}); re-selecting from binding set")

    if basis is None:
        preferred = [j for j in tight if abs(sol.duals_ineq[j]) > OPTIMALITY_TOL]
        if len(tight) > needed:
            logger.warning(
                f"Degenerate optimum: {len(tight)} binding inequalities for {needed} basis slots; "
                f"selecting by pivoted factorization"
            )
        rows = select_independent_rows(lp.G, lp.K, tight, needed, preferred)
        basis = _build_basis(lp, rows)

    residual = np.abs(basis.A @ sol.x_star - basis.b)
    if np.any(residual > FEASIBILITY_TOL * (1.0 + np.abs(basis.b))):
        raise NumericalError(f"Basis does not reproduce x* (residual {residual.max():.3e})")
    logger.debug(f"Optimal basis {basis.basis_id}: size {basis.size}, condition {basis.condition:.3e}")
    return basis


def solve_basis_system(basis: Basis, delta_b: np.ndarray) -> np.ndarray:
    """Solve ``A dx = db`` with the cached factorization of the basis.

    ``delta_b`` may be a vector or a matrix of right-hand-side columns.
    """
    delta_b = np.asarray(delta_b, dtype=float)
    if delta_b.shape[0] != basis.size:
        raise ValueError(f"delta_b has {delta_b.shape[0]} rows, basis has {basis.size}")

    lu, _ = basis.factorization
    if np.any(np.abs(np.diag(lu)) <= np.finfo(float).tiny):
        raise NumericalError("Basis factorization is singular")
    delta_x = lu_solve(basis.factorization, delta_b, check_finite=False)

    residual = np.abs(basis.A @ delta_x - delta_b).max(initial=0.0)
    if residual > RESIDUAL_TOL * (1.0 + np.abs(delta_b).max(initial=0.0)) * max(1.0, basis.condition ** 0.5):
        raise NumericalError(f"Basis back-solve residual {residual:.3e} exceeds tolerance")
    return delta_x

"""
Linear program data structures.

A LinearProgram is ``min c'x  s.t.  Gx = h,  Kx <= f`` with free variables;
every bound is an explicit row of K. Constraint rows are numbered in one
stacked sequence: equality rows ``0 .. n_eq-1`` followed by inequality rows
``n_eq .. n_eq+m-1``. Basis.row_map uses that numbering.
"""

import hashlib
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.linalg import lu_factor


def _frozen(array) -> np.ndarray:
    out = np.array(array, dtype=float, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class LinearProgram:
    objective: np.ndarray
    G: np.ndarray
    h: np.ndarray
    K: np.ndarray
    f: np.ndarray
    var_labels: tuple[str, ...] = ()
    eq_labels: tuple[str, ...] = ()
    ineq_labels: tuple[str, ...] = ()

    def __post_init__(self):
        c = _frozen(self.objective)
        n = c.size
        if n == 0:
            raise ValueError("a linear program needs at least one variable")
        G = _frozen(self.G).reshape(-1, n)
        K = _frozen(self.K).reshape(-1, n)
        h = _frozen(self.h)
        f = _frozen(self.f)
        if G.shape[0] != h.size:
            raise ValueError(f"G has {G.shape[0]} rows but h has {h.size} entries")
        if K.shape[0] != f.size:
            raise ValueError(f"K has {K.shape[0]} rows but f has {f.size} entries")
        if G.shape[0] > n:
            raise ValueError(f"{G.shape[0]} equality rows exceed {n} variables")
        for name, value in (("objective", c), ("G", G), ("h", h), ("K", K), ("f", f)):
            object.__setattr__(self, name, value)
        if not self.var_labels:
            object.__setattr__(self, "var_labels", tuple(f"x{i}" for i in range(n)))
        if not self.eq_labels:
            object.__setattr__(self, "eq_labels", tuple(f"eq{i}" for i in range(G.shape[0])))
        if not self.ineq_labels:
            object.__setattr__(self, "ineq_labels", tuple(f"ineq{i}" for i in range(K.shape[0])))

    @property
    def n_vars(self) -> int:
        return self.objective.size

    @property
    def n_eq(self) -> int:
        return self.G.shape[0]

    @property
    def n_ineq(self) -> int:
        return self.K.shape[0]

    @cached_property
    def rows(self) -> np.ndarray:
        """All constraint rows stacked, equalities first."""
        return np.vstack([self.G, self.K]) if self.n_eq + self.n_ineq else np.zeros((0, self.n_vars))

    @cached_property
    def rhs(self) -> np.ndarray:
        return np.concatenate([self.h, self.f])

    def label_of(self, row: int) -> str:
        if row < self.n_eq:
            return self.eq_labels[row]
        return self.ineq_labels[row - self.n_eq]


@dataclass(frozen=True, eq=False)
class LpSolution:
    """A basic optimal solution.

    Duals are sensitivities of the optimal objective to the right-hand side:
    ``duals_eq[i] = d obj / d h[i]`` and ``duals_ineq[j] = d obj / d f[j] <= 0``.
    ``basic_ineq`` is the set of inequality rows in the solver's final basis.
    """
    x_star: np.ndarray
    objective_value: float
    duals_eq: np.ndarray
    duals_ineq: np.ndarray
    binding_ineq: tuple[int, ...]
    basic_ineq: tuple[int, ...] = ()
    iterations: int = 0

    def __post_init__(self):
        for name in ("x_star", "duals_eq", "duals_ineq"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))


@dataclass(frozen=True, eq=False)
class Basis:
    """Square optimal basis ``A x* = b``; equality rows come first."""
    A: np.ndarray
    b: np.ndarray
    row_map: tuple[int, ...]
    n_eq: int
    condition: float = field(default=float("nan"))

    def __post_init__(self):
        object.__setattr__(self, "A", _frozen(self.A))
        object.__setattr__(self, "b", _frozen(self.b))

    @property
    def size(self) -> int:
        return self.A.shape[0]

    @cached_property
    def factorization(self):
        """LU factors of A, computed once and reused for every right-hand side."""
        return lu_factor(self.A, check_finite=False)

    @cached_property
    def basis_id(self) -> str:
        digest = hashlib.sha256(",".join(map(str, self.row_map)).encode()).hexdigest()
        return digest[:12]

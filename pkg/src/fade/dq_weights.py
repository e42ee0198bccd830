"""Differential-quadrature weight matrices.

A weight matrix ``W`` approximates a derivative at collocation point ``x_i``
as ``sum_j W[i, j] u(x_j)``.  Rows are collocation points, columns grid points.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .frac_calculus import rl_modified_bspline_deriv
from .splines import CUBIC_B, BasisKind, Grid, collocation_matrix, derivative_rhs


class ZeroPivotError(ZeroDivisionError):
    def __init__(self, index):
        super().__init__(f"zero pivot in tridiagonal elimination at row {index}")
        self.index = index


@dataclass(frozen=True)
class TridiagonalSystem:
    """``lower[i]`` couples row ``i+1`` to ``i``; ``upper[i]`` couples row ``i`` to
    ``i+1`` (both length ``n-1``).  ``rhs`` may carry several columns."""

    lower: np.ndarray
    diag: np.ndarray
    upper: np.ndarray
    rhs: np.ndarray

    @classmethod
    def from_dense(cls, A, rhs):
        A = np.asarray(A, dtype=float)
        return cls(np.diag(A, -1).copy(), np.diag(A).copy(), np.diag(A, 1).copy(), np.asarray(rhs, dtype=float))

    @property
    def diagonally_dominant(self) -> bool:
        off = np.zeros_like(self.diag)
        off[1:] += np.abs(self.lower)
        off[:-1] += np.abs(self.upper)
        return bool(np.all(np.abs(self.diag) > off))


def thomas_solve(sys: TridiagonalSystem) -> np.ndarray:
    """Solve a tridiagonal system by forward elimination and back substitution."""
    a, b, c = (np.asarray(v, dtype=float) for v in (sys.lower, sys.diag, sys.upper))
    d = np.array(sys.rhs, dtype=float)
    n = b.shape[0]
    if a.shape[0] != n - 1 or c.shape[0] != n - 1 or d.shape[0] != n:
        raise ValueError("inconsistent tridiagonal system dimensions")
    cp = np.empty(max(n - 1, 0))
    bp = b[0]
    if bp == 0.0:
        raise ZeroPivotError(0)
    if n > 1:
        cp[0] = c[0] / bp
    d[0] = d[0] / bp
    for i in range(1, n):
        bp = b[i] - a[i - 1] * cp[i - 1]
        if bp == 0.0:
            raise ZeroPivotError(i)
        if i < n - 1:
            cp[i] = c[i] / bp
        d[i] = (d[i] - a[i - 1] * d[i - 1]) / bp
    for i in range(n - 2, -1, -1):
        d[i] = d[i] - cp[i] * d[i + 1]
    return d


@dataclass(frozen=True)
class WeightMatrix:
    """Dense DQ weights.

    ``rows`` lists the collocation-point indices of ``entries``; integer-order
    matrices carry all ``M+1`` rows, fractional ones only ``1..M-1``.
    """

    order: float
    entries: np.ndarray
    grid: Grid
    rows: np.ndarray
    axis: str = "x"
    fractional: bool = False

    @property
    def M(self) -> int:
        return self.grid.M

    def interior_rows(self) -> np.ndarray:
        """Rows for collocation points ``1..M-1`` over all ``M+1`` columns."""
        sel = (self.rows >= 1) & (self.rows <= self.M - 1)
        out = self.entries[sel]
        if out.shape[0] != self.M - 1:
            raise ValueError("weight matrix lacks interior rows")
        return out

    def interior(self) -> np.ndarray:
        """Square block coupling interior points to interior points."""
        return self.interior_rows()[:, 1:-1]

    def apply(self, u) -> np.ndarray:
        return self.entries @ np.asarray(u, dtype=float)

    def with_axis(self, axis: str) -> "WeightMatrix":
        return WeightMatrix(self.order, self.entries, self.grid, self.rows, axis, self.fractional)


def _solve_collocation(kind, grid: Grid, rhs: np.ndarray) -> np.ndarray:
    A = collocation_matrix(kind, grid)
    return thomas_solve(TridiagonalSystem.from_dense(A, rhs))


def first_order_weights(kind, grid: Grid, axis: str = "x") -> WeightMatrix:
    """First-derivative weights from the modified-spline collocation system.

    Column ``i`` of the solve is ``A a_i = Z_i`` with ``A[k, j] = MB_k(x_j)`` and
    ``Z_i[k] = MB_k'(x_i)``; all ``M+1`` right-hand sides go through one
    Thomas sweep.
    """
    kind = BasisKind.coerce(kind)
    X = _solve_collocation(kind, grid, derivative_rhs(kind, grid, 1))
    return WeightMatrix(1, X.T.copy(), grid, np.arange(grid.M + 1), axis)


def second_order_weights_direct(kind, grid: Grid, axis: str = "x") -> WeightMatrix:
    """Second-derivative weights from their own collocation solve (no recursion)."""
    kind = BasisKind.coerce(kind)
    X = _solve_collocation(kind, grid, derivative_rhs(kind, grid, 2))
    return WeightMatrix(2, X.T.copy(), grid, np.arange(grid.M + 1), axis)


def higher_order_weights(W1: WeightMatrix, s: int, grid: Grid | None = None) -> WeightMatrix:
    """Order-``s`` weights from the first-order ones by Shu's recursion:
    ``a_ij^(r) = r (a_ii^(r-1) a_ij^(1) - a_ij^(r-1) / (x_i - x_j))`` off the
    diagonal and ``a_ii^(r) = -sum_{j != i} a_ij^(r)``.
    """
    if s < 2:
        raise ValueError("higher_order_weights needs s >= 2")
    grid = W1.grid if grid is None else grid
    if grid != W1.grid:
        raise ValueError("W1 was computed on a different grid")
    x = grid.x
    dx = x[:, None] - x[None, :]
    np.fill_diagonal(dx, 1.0)
    a1 = W1.entries
    W = a1
    for r in range(2, s + 1):
        d = np.diag(W).copy()
        W = r * (d[:, None] * a1 - W / dx)
        np.fill_diagonal(W, 0.0)
        np.fill_diagonal(W, -W.sum(axis=1))
    return WeightMatrix(s, W, grid, W1.rows, W1.axis)


def fractional_weights(beta: float, grid: Grid, kind=CUBIC_B, axis: str = "x",
                       rows=None) -> WeightMatrix:
    """Riemann-Liouville order-``beta`` weights at interior collocation points.

    Solves ``A a_i = d_i`` with ``A[k, m] = MB_k(x_m)`` and
    ``d_i[k] = D^beta MB_k(x_i)`` for ``i = 1..M-1``.  Boundary rows are
    rejected: the closed forms carry ``(x - x_0)^(-beta)`` terms.
    """
    kind = BasisKind.coerce(kind)
    if kind != CUBIC_B:
        raise ValueError("fractional weights are defined for the modified cubic B-spline basis")
    M = grid.M
    rows = np.arange(1, M) if rows is None else np.asarray(rows, dtype=int)
    if np.any((rows < 1) | (rows > M - 1)):
        raise ValueError("fractional weights exist only at interior points 1..M-1")
    xi = grid.x[rows]
    rhs = np.array([rl_modified_bspline_deriv(k, beta, xi, grid) for k in range(M + 1)])
    X = _solve_collocation(kind, grid, rhs)
    return WeightMatrix(beta, X.T.copy(), grid, rows, axis, fractional=True)


def dq_weights(order, grid: Grid, kind="ctb", axis: str = "x", method: str = "recursion") -> WeightMatrix:
    """Convenience dispatcher: integer order 1/2 (recursion or direct) or a
    fractional order in (1, 2]."""
    order = float(order)
    if order == 1.0:
        return first_order_weights(kind, grid, axis)
    if order.is_integer() and method == "recursion":
        return higher_order_weights(first_order_weights(kind, grid, axis), int(order))
    if order == 2.0 and method == "direct":
        return second_order_weights_direct(kind, grid, axis)
    if 1.0 < order < 2.0 or method == "fractional":
        return fractional_weights(order, grid, kind, axis)
    raise ValueError(f"unsupported order/method {order}/{method}")

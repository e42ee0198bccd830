"""Cubic trigonometric B-splines (CTB), cubic B-splines and their end-corrected variants.

Knots are uniform: ``x_i = a + i*h``.  Ghost knots outside ``[a, b]`` are never
stored; the piecewise formulas below evaluate them on the fly.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np


class SingularSpacingError(ValueError):
    """Raised when ``csc(h)`` or ``csc(3h/2)`` hits a pole for the CTB family."""


@dataclass(frozen=True)
class Grid:
    """Uniform 1D lattice ``a = x_0 < x_1 < ... < x_M = b``."""

    a: float
    b: float
    M: int

    def __post_init__(self):
        if int(self.M) != self.M or self.M < 1:
            raise ValueError(f"M must be a positive integer, got {self.M!r}")
        if not self.b > self.a:
            raise ValueError(f"need b > a, got a={self.a}, b={self.b}")
        object.__setattr__(self, "M", int(self.M))
        object.__setattr__(self, "a", float(self.a))
        object.__setattr__(self, "b", float(self.b))

    @property
    def h(self) -> float:
        return (self.b - self.a) / self.M

    @cached_property
    def x(self) -> np.ndarray:
        x = self.a + self.h * np.arange(self.M + 1)
        x[-1] = self.b
        return x

    @property
    def interior(self) -> np.ndarray:
        return self.x[1:-1]

    @property
    def ctb_dominant(self) -> bool:
        """True when ``0 < h < 1``, the range where the CTB collocation matrix is
        provably strictly diagonally dominant."""
        return 0.0 < self.h < 1.0

    def knot(self, i: int) -> float:
        """Knot ``x_i``; ghost indices (``i < 0`` or ``i > M``) are allowed."""
        return self.a + i * self.h


@dataclass(frozen=True)
class Grid2D:
    """Tensor lattice; unknowns are ordered x-fastest."""

    gx: Grid
    gy: Grid

    @classmethod
    def square(cls, a, b, c, d, Mx, My=None) -> "Grid2D":
        return cls(Grid(a, b, Mx), Grid(c, d, Mx if My is None else My))

    @property
    def shape(self) -> tuple[int, int]:
        """Full-grid array shape ``(My+1, Mx+1)``; row index is y."""
        return (self.gy.M + 1, self.gx.M + 1)

    @property
    def interior_shape(self) -> tuple[int, int]:
        return (self.gy.M - 1, self.gx.M - 1)

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.gx.x, self.gy.x)


class SplineFamily(enum.Enum):
    CTB = "ctb"
    CUBIC_B = "cubicb"


@dataclass(frozen=True)
class BasisKind:
    family: SplineFamily
    modified: bool = True

    @classmethod
    def coerce(cls, kind) -> "BasisKind":
        if isinstance(kind, BasisKind):
            return kind
        if isinstance(kind, SplineFamily):
            return cls(kind)
        key = str(kind).lower().replace("-", "").replace("_", "")
        aliases = {"ctb": SplineFamily.CTB, "mctb": SplineFamily.CTB,
                   "cubicb": SplineFamily.CUBIC_B, "cb": SplineFamily.CUBIC_B,
                   "mcb": SplineFamily.CUBIC_B, "bspline": SplineFamily.CUBIC_B}
        try:
            return cls(aliases[key])
        except KeyError:
            raise ValueError(f"unknown basis kind {kind!r}") from None


CTB = BasisKind(SplineFamily.CTB)
CUBIC_B = BasisKind(SplineFamily.CUBIC_B)


@dataclass(frozen=True)
class KnotValueTable:
    """Values of an (unmodified) basis function at its own knots.

    ``A0`` at the centre knot, ``A1`` at both neighbours, ``z`` the magnitude of
    the first derivative at the neighbours (positive on the left, negative on
    the right, zero at the centre).  ``d2c``/``d2n`` are second derivatives at
    centre/neighbours.
    """

    A0: float
    A1: float
    z: float
    d2c: float = field(default=float("nan"))
    d2n: float = field(default=float("nan"))

    @property
    def diagonally_dominant(self) -> bool:
        return self.A0 > 2 * self.A1 > 0


def knot_value_table(kind, grid: Grid) -> KnotValueTable:
    kind = BasisKind.coerce(kind)
    h = grid.h
    if kind.family is SplineFamily.CUBIC_B:
        return KnotValueTable(4.0, 1.0, 3.0 / h, -12.0 / h**2, 6.0 / h**2)
    s1, s32 = math.sin(h), math.sin(1.5 * h)
    if abs(s1) < 1e-14 or abs(s32) < 1e-14:
        raise SingularSpacingError(f"csc pole for CTB spacing h={h}")
    A0 = 2.0 / (1.0 + 2.0 * math.cos(h))
    A1 = math.sin(0.5 * h) ** 2 / (s1 * s32)
    z = 0.75 / s32
    d2c = eval_basis(kind, 0, grid.knot(0), grid, deriv=2)
    d2n = eval_basis(kind, 0, grid.knot(1), grid, deriv=2)
    return KnotValueTable(A0, A1, z, d2c, d2n)


# -- piecewise evaluation ---------------------------------------------------
#
# CTB pieces are sums of products of three factors sin(sigma*(x - c)/2), with
# p(x_k) -> (+1, x_k) and q(x_k) -> (-1, x_k).  Offsets are in units of h
# relative to the centre knot x_m.
_P, _Q = 1, -1
_CTB_PIECES = (
    (((_P, -2), (_P, -2), (_P, -2)),),
    (((_Q, 2), (_P, -1), (_P, -1)),
     ((_P, -2), (_P, -2), (_Q, 0)),
     ((_P, -2), (_P, -1), (_Q, 1))),
    (((_P, -2), (_Q, 1), (_Q, 1)),
     ((_Q, 2), (_Q, 2), (_P, 0)),
     ((_P, -1), (_Q, 1), (_Q, 2))),
    (((_Q, 2), (_Q, 2), (_Q, 2)),),
)

# Cubic B pieces: sum of coef * (sigma*(x - c))**3.
_CB_PIECES = (
    ((1.0, _P, -2),),
    ((1.0, _P, -2), (-4.0, _P, -1)),
    ((1.0, _Q, 2), (-4.0, _Q, 1)),
    ((1.0, _Q, 2),),
)


def _piece_index(x, xm, h):
    """Piece 0..3 for ``x`` in ``[x_{m-2}, x_{m+2})`` (right-open), else -1."""
    u = (np.asarray(x, dtype=float) - xm) / h
    k = np.floor(u + 2.0 + 1e-13).astype(int)
    return np.where((k >= 0) & (k <= 3), k, -1)


def _sine_factor(sigma, c, x, d):
    # d-th derivative of sin(sigma*(x-c)/2)
    return (0.5 * sigma) ** d * np.sin(0.5 * sigma * (x - c) + 0.5 * d * math.pi)


def _ctb_piece(piece, x, xm, h, d):
    chi = math.sin(0.5 * h) * math.sin(h) * math.sin(1.5 * h)
    total = np.zeros_like(x)
    for term in _CTB_PIECES[piece]:
        # Leibniz rule for a product of three factors
        for d1 in range(d + 1):
            for d2 in range(d + 1 - d1):
                d3 = d - d1 - d2
                coef = math.factorial(d) // (math.factorial(d1) * math.factorial(d2) * math.factorial(d3))
                prod = coef * np.ones_like(x)
                for (sigma, off), dk in zip(term, (d1, d2, d3)):
                    prod = prod * _sine_factor(sigma, xm + off * h, x, dk)
                total = total + prod
    return total / chi


def _cb_piece(piece, x, xm, h, d):
    total = np.zeros_like(x)
    for coef, sigma, off in _CB_PIECES[piece]:
        if d > 3:
            continue
        fall = math.factorial(3) // math.factorial(3 - d)
        total = total + coef * sigma**d * fall * (sigma * (x - (xm + off * h))) ** (3 - d)
    return total / h**3


def eval_basis(kind, m: int, x, grid: Grid, deriv: int = 0):
    """Value (or ``deriv``-th derivative, 0..2) of the unmodified basis ``m``.

    ``m`` ranges over ``-1..M+1``.  Support is ``[x_{m-2}, x_{m+2})``; outside
    it the result is 0.
    """
    kind = BasisKind.coerce(kind)
    if deriv not in (0, 1, 2):
        raise ValueError("deriv must be 0, 1 or 2")
    h = grid.h
    xm = grid.knot(m)
    scalar = np.ndim(x) == 0
    xa = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.zeros_like(xa)
    idx = _piece_index(xa, xm, h)
    piece_fn = _ctb_piece if kind.family is SplineFamily.CTB else _cb_piece
    for p in range(4):
        sel = idx == p
        if sel.any():
            out[sel] = piece_fn(p, xa[sel], xm, h, deriv)
    return float(out[0]) if scalar else out


def modification_rule(k: int, M: int) -> tuple[tuple[int, float], ...]:
    """Unmodified members and coefficients making up modified basis ``k``.

    ``MB_0 = B_0 + 2B_{-1}``, ``MB_1 = B_1 - B_{-1}``, mirrored at the right
    end, identity for ``2 <= k <= M-2``.
    """
    if not 0 <= k <= M:
        raise IndexError(f"modified basis index {k} outside 0..{M}")
    terms = {k: 1.0}
    if k == 0:
        terms[-1] = terms.get(-1, 0.0) + 2.0
    if k == 1:
        terms[-1] = terms.get(-1, 0.0) - 1.0
    if k == M - 1:
        terms[M + 1] = terms.get(M + 1, 0.0) - 1.0
    if k == M:
        terms[M + 1] = terms.get(M + 1, 0.0) + 2.0
    return tuple(terms.items())


def modified_basis_value(kind, k: int, x, grid: Grid, deriv: int = 0):
    """Modified basis ``k`` (or its derivative) at ``x``."""
    return sum(c * eval_basis(kind, m, x, grid, deriv) for m, c in modification_rule(k, grid.M))


def _knot_rows(kind, grid: Grid, deriv: int) -> np.ndarray:
    """Matrix ``T[k, i] = d^deriv MB_k(x_i)`` built from the knot tables."""
    tab = knot_value_table(kind, grid)
    centre, left, right = {0: (tab.A0, tab.A1, tab.A1),
                           1: (0.0, tab.z, -tab.z),
                           2: (tab.d2c, tab.d2n, tab.d2n)}[deriv]
    M = grid.M
    # unmodified members -1..M+1 at knots 0..M; member m sits at row m+1
    raw = np.zeros((M + 3, M + 1))
    for m in range(-1, M + 2):
        if 0 <= m <= M:
            raw[m + 1, m] = centre
        if 0 <= m - 1 <= M:
            raw[m + 1, m - 1] = left   # x_i = x_{m-1}
        if 0 <= m + 1 <= M:
            raw[m + 1, m + 1] = right  # x_i = x_{m+1}
    out = np.empty((M + 1, M + 1))
    for k in range(M + 1):
        out[k] = sum(c * raw[m + 1] for m, c in modification_rule(k, M))
    return out


def collocation_matrix(kind, grid: Grid) -> np.ndarray:
    """Dense tridiagonal ``A[k, j] = MB_k(x_j)``."""
    return _knot_rows(kind, grid, 0)


def derivative_rhs(kind, grid: Grid, order: int = 1) -> np.ndarray:
    """``Z[k, i] = MB_k^{(order)}(x_i)``; column ``i`` is the right-hand side for
    the weights at collocation point ``x_i``."""
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    return _knot_rows(kind, grid, order)

"""Spatial operators over interior unknowns.

2D unknowns are vectorised x-fastest: ``U[j*(Mx-1) + i] = U_{i+1, j+1}``, i.e. a
``(My-1, Mx-1)`` array flattened in C order.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple

import numpy as np

from .dq_weights import WeightMatrix


class LoadVector(NamedTuple):
    values: np.ndarray
    t: float


@dataclass(frozen=True)
class OperatorTerm:
    coef: float
    axis: str           # "x" or "y"
    weights: WeightMatrix

    @property
    def rows(self) -> np.ndarray:
        return self.weights.interior_rows()


class SpatialOperator:
    """``sum_t coef_t * W_t`` acting along its axis, restricted to interior points.

    Boundary columns (grid indices 0 and M) are kept with each term so Dirichlet
    data can be moved into the load vector.
    """

    def __init__(self, terms, nx: int, ny: int | None = None, coefficients: dict | None = None):
        self.terms = tuple(terms)
        self.nx = nx            # interior points along x
        self.ny = ny            # None for 1D
        self.coefficients = dict(coefficients or {})
        for t in self.terms:
            n_axis = nx if t.axis == "x" else ny
            if n_axis is None or t.weights.M - 1 != n_axis:
                raise ValueError(f"term on axis {t.axis} has {t.weights.M - 1} interior points, expected {n_axis}")

    @property
    def dim(self) -> int:
        return 1 if self.ny is None else 2

    @property
    def size(self) -> int:
        return self.nx if self.ny is None else self.nx * self.ny

    def axis_block(self, axis: str) -> np.ndarray:
        """Sum of the interior blocks acting along ``axis``."""
        n = self.nx if axis == "x" else self.ny
        out = np.zeros((n, n))
        for t in self.terms:
            if t.axis == axis and t.coef != 0.0:
                out += t.coef * t.weights.interior()
        return out

    @cached_property
    def blocks(self) -> dict:
        out = {"x": self.axis_block("x")}
        if self.ny is not None:
            out["y"] = self.axis_block("y")
        return out

    @cached_property
    def dense(self) -> np.ndarray:
        return self.shifted_dense(0.0, 1.0)

    def shifted_dense(self, shift: float = 0.0, scale: float = 1.0) -> np.ndarray:
        """``shift*I + scale*op`` as a fresh dense array.

        In 2D the blocks are scattered into a ``(ny, nx, ny, nx)`` view, so no
        Kronecker temporaries are formed (the largest desk-scale system is
        ~9000 unknowns).
        """
        if self.ny is None:
            out = scale * self.blocks["x"]
        else:
            nx, ny = self.nx, self.ny
            out4 = np.zeros((ny, nx, ny, nx))
            Bx, By = scale * self.blocks["x"], scale * self.blocks["y"]
            for j in range(ny):
                out4[j, :, j, :] += Bx
            for i in range(nx):
                out4[:, i, :, i] += By
            out = out4.reshape(ny * nx, ny * nx)
        out[np.diag_indices_from(out)] += shift
        return out

    def apply(self, u) -> np.ndarray:
        """Matrix-free product using the Kronecker structure."""
        u = np.asarray(u)
        if self.ny is None:
            return self.blocks["x"] @ u
        U = u.reshape(self.ny, self.nx)
        return (U @ self.blocks["x"].T + self.blocks["y"] @ U).ravel()

    def boundary_apply(self, full) -> np.ndarray:
        """Contribution of boundary values to ``op @ u_full`` at interior points.

        ``full`` is the full-grid field (length ``Mx+1`` in 1D, shape
        ``(My+1, Mx+1)`` in 2D); its interior entries are ignored.
        """
        full = np.asarray(full, dtype=float)
        if self.ny is None:
            out = np.zeros(self.nx)
            for t in self.terms:
                R = t.rows
                out += t.coef * (R[:, 0] * full[0] + R[:, -1] * full[-1])
            return out
        out = np.zeros((self.ny, self.nx))
        for t in self.terms:
            R = t.rows
            if t.axis == "x":
                # x-boundary columns at interior y rows
                out += t.coef * (np.outer(full[1:-1, 0], R[:, 0]) + np.outer(full[1:-1, -1], R[:, -1]))
            else:
                out += t.coef * (np.outer(R[:, 0], full[0, 1:-1]) + np.outer(R[:, -1], full[-1, 1:-1]))
        return out.ravel()


def _check_same_grid(*ws):
    g = ws[0].grid
    for w in ws[1:]:
        if w.grid != g:
            raise ValueError("weight matrices live on different grids")


def assemble_K_1d(kappa: float, eps: float, W1: WeightMatrix, W2: WeightMatrix) -> SpatialOperator:
    """``K = kappa W1 - eps W2`` on interior points."""
    _check_same_grid(W1, W2)
    n = W1.M - 1
    terms = [OperatorTerm(kappa, "x", W1), OperatorTerm(-eps, "x", W2)]
    return SpatialOperator(terms, n, None, {"kappa": kappa, "eps": eps})


def assemble_K_2d(kx: float, ky: float, ex: float, ey: float,
                  Wx1: WeightMatrix, Wx2: WeightMatrix,
                  Wy1: WeightMatrix, Wy2: WeightMatrix) -> SpatialOperator:
    """``K = kx I_y(x)W1x + ky W1y(x)I_x - ex I_y(x)W2x - ey W2y(x)I_x``."""
    _check_same_grid(Wx1, Wx2)
    _check_same_grid(Wy1, Wy2)
    terms = [OperatorTerm(kx, "x", Wx1), OperatorTerm(ky, "y", Wy1),
             OperatorTerm(-ex, "x", Wx2), OperatorTerm(-ey, "y", Wy2)]
    return SpatialOperator(terms, Wx1.M - 1, Wy1.M - 1,
                           {"kappa_x": kx, "kappa_y": ky, "eps_x": ex, "eps_y": ey})


def assemble_frac_L_2d(ex: float, ey: float, Wbx: WeightMatrix, Wby: WeightMatrix) -> SpatialOperator:
    """``L = ex I_y(x)Wb_x + ey Wb_y(x)I_x`` for the space-fractional problem."""
    terms = [OperatorTerm(ex, "x", Wbx), OperatorTerm(ey, "y", Wby)]
    return SpatialOperator(terms, Wbx.M - 1, Wby.M - 1, {"eps_x": ex, "eps_y": ey})


def boundary_load(t: float, source, boundary_full, op: SpatialOperator) -> LoadVector:
    """``G = f - (boundary part of K u)`` at interior points.

    For ``K = kappa W1 - eps W2`` this is
    ``f_i - kappa (a_i0 g1 + a_iM g2) + eps (a^(2)_i0 g1 + a^(2)_iM g2)``.
    ``source`` holds interior samples of ``f``; ``boundary_full`` is the
    full-grid field carrying the Dirichlet values.
    """
    f = np.asarray(source, dtype=float).ravel()
    if f.shape[0] != op.size:
        raise ValueError(f"source has {f.shape[0]} entries, operator has {op.size}")
    return LoadVector(f - op.boundary_apply(boundary_full), t)

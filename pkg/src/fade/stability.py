"""Stability diagnostics: DQ weight spectra and the resolvent-norm check
``||(I + tau^a K)^{-1}||_2 <= 1`` over parameter sweeps."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import lu_solve
from scipy.optimize import brentq

from .dq_weights import WeightMatrix, first_order_weights, higher_order_weights
from .operators import SpatialOperator, assemble_K_2d
from .splines import CTB, Grid
from .steppers import factorize

SWEEP_AXES = ("kappa", "eps", "M", "domain_extent", "tau")

DEFAULTS = dict(tau=1e-3, alpha=0.5, M=5, domain_extent=1.0, kappa=1.0, eps=1.0, basis="ctb")


class StagnationWarning(RuntimeWarning):
    pass


@dataclass
class StabilityReport:
    resolvent_norm: float
    spectrum: np.ndarray
    params: dict = field(default_factory=dict)

    @property
    def max_real(self) -> float:
        """Largest real part of the spectrum of ``-K``."""
        return float(np.max(self.spectrum.real)) if self.spectrum.size else 0.0


def _dense(K) -> np.ndarray:
    if isinstance(K, SpatialOperator):
        return K.dense
    return np.atleast_2d(np.asarray(K, dtype=float))


def _power(op, n, tol, max_iter, magnitude=False, warn=True):
    """Dominant eigenvalue of a symmetric operator by power iteration.

    With ``magnitude`` the norm of ``op v`` is tracked (largest ``|lambda|``),
    otherwise the Rayleigh quotient.
    """
    v = np.random.default_rng(0).standard_normal(n)
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(max_iter):
        w = op(v)
        nw = float(np.linalg.norm(w))
        new = nw if magnitude else float(v @ w)
        if nw == 0.0:
            return 0.0
        v = w / nw
        if abs(new - lam) <= tol * max(abs(new), 1e-300):
            return new
        lam = new
    if warn:
        warnings.warn(f"power iteration stopped after {max_iter} iterations without reaching {tol:g}",
                      StagnationWarning, stacklevel=3)
    return lam


def resolvent_norm(K, tau: float, alpha: float, tol: float = 1e-10, max_iter: int = 10_000) -> float:
    """Spectral norm of ``(I + tau^a K)^{-1}``.

    Power iteration runs on the inverse-Gram operator in the form
    ``D = A^{-1} A^{-T} - I = -A^{-1} (E + E^T + E E^T) A^{-T}`` with
    ``A = I + E``.  This keeps full precision when ``A`` is close to the
    identity (tiny ``tau``), where ``A^{-1} A^{-T}`` itself has a tightly
    clustered spectrum.  A loose first pass estimates ``|D|``; since
    ``D >= -I`` the shift ``rho`` never needs to exceed 1.  The second pass
    finds the top of ``D + rho I`` to ``tol``.
    """
    E = tau**alpha * _dense(K)
    n = E.shape[0]
    factor = factorize(np.eye(n) + E)
    C = E + E.T + E @ E.T
    if not np.any(C):
        return 1.0

    def D(v):
        return -lu_solve(factor, C @ lu_solve(factor, v, trans=1, check_finite=False), check_finite=False)

    rho = min(1.0, 1.1 * _power(D, n, 1e-4, 500, magnitude=True, warn=False))
    top = _power(lambda v: D(v) + rho * v, n, tol, max_iter) - rho
    return math.sqrt(max(1.0 + top, 0.0))


def weight_spectrum(W) -> np.ndarray:
    """Eigenvalues of the interior block of ``W`` (or of a square array)."""
    B = W.interior() if isinstance(W, WeightMatrix) else np.atleast_2d(np.asarray(W, dtype=float))
    if B.shape[0] != B.shape[1]:
        raise ValueError("weight spectrum needs a square block")
    return np.linalg.eigvals(B)


def imag_residue(spectrum) -> float:
    return float(np.max(np.abs(np.imag(spectrum)))) if np.size(spectrum) else 0.0


def _coef(coefficients):
    if isinstance(coefficients, dict):
        return tuple(float(coefficients.get(k, 0.0)) for k in ("kappa_x", "kappa_y", "eps_x", "eps_y"))
    return tuple(float(c) for c in coefficients)


def composed_spectrum_2d(Wx1, Wx2, Wy1, Wy2, coefficients) -> np.ndarray:
    """Eigenvalues of ``-K`` without forming ``K``.

    ``K = I_y (x) Cx + Cy (x) I_x`` with ``Cx = kx W1x - ex W2x`` and
    ``Cy = ky W1y - ey W2y``, so the spectrum is the Kronecker sum of the two
    axis spectra (ordered x-fastest).  Combining the first- and second-order
    blocks per axis before the eigensolve keeps this exact when they do not
    commute.
    """
    kx, ky, ex, ey = _coef(coefficients)
    Cx = kx * Wx1.interior() - ex * Wx2.interior()
    Cy = ky * Wy1.interior() - ey * Wy2.interior()
    lx = np.linalg.eigvals(Cx) if np.any(Cx) else np.zeros(Cx.shape[0], dtype=complex)
    ly = np.linalg.eigvals(Cy) if np.any(Cy) else np.zeros(Cy.shape[0], dtype=complex)
    return -np.add.outer(ly, lx).ravel()


def _params(fixed=None, **over) -> dict:
    p = dict(DEFAULTS)
    p.update(fixed or {})
    p.update(over)
    return p


def operator_for(p: dict):
    """Unit-square-style operator on ``[0, L]^2`` from a parameter dict; returns
    the operator and its four weight matrices."""
    L = float(p["domain_extent"])
    Mx = int(p.get("Mx", p["M"]))
    My = int(p.get("My", p["M"]))
    kx = float(p.get("kappa_x", p["kappa"]))
    ky = float(p.get("kappa_y", p["kappa"]))
    ex = float(p.get("eps_x", p["eps"]))
    ey = float(p.get("eps_y", p["eps"]))
    gx, gy = Grid(0.0, L, Mx), Grid(0.0, L, My)
    Wx1 = first_order_weights(p.get("basis", CTB), gx, "x")
    Wy1 = first_order_weights(p.get("basis", CTB), gy, "y")
    Wx2, Wy2 = higher_order_weights(Wx1, 2), higher_order_weights(Wy1, 2)
    K = assemble_K_2d(kx, ky, ex, ey, Wx1, Wx2, Wy1, Wy2)
    return K, (Wx1, Wx2, Wy1, Wy2), (kx, ky, ex, ey)


def stability_report(fixed=None, **over) -> StabilityReport:
    p = _params(fixed, **over)
    K, Ws, coefs = operator_for(p)
    rn = resolvent_norm(K, float(p["tau"]), float(p["alpha"]))
    return StabilityReport(rn, composed_spectrum_2d(*Ws, coefs), p)


def assumption_sweep(axis: str, values, fixed=None) -> list:
    """One ``StabilityReport`` per sweep value, in the given order.

    ``axis`` is one of ``kappa``, ``eps`` (both directions at once), ``M``
    (``Mx = My``), ``domain_extent`` (square ``[0, L]^2``) or ``tau``; all other
    parameters come from ``fixed`` over the defaults ``tau=1e-3``,
    ``alpha=0.5``, ``M=5`` on the unit square.
    """
    if axis not in SWEEP_AXES:
        raise ValueError(f"unknown sweep axis {axis!r}; choose from {SWEEP_AXES}")
    reports = []
    for v in values:
        v = int(v) if axis == "M" else float(v)
        reports.append(stability_report(fixed, **{axis: v}))
    return reports


def critical_ratio(kappa_max: float = 200.0, fixed=None, n_scan: int = 41, xtol: float = 1e-3) -> float:
    """Smallest ``kappa/eps`` at which the resolvent norm reaches 1.

    Scans ``kappa`` on ``[0, kappa_max]`` for the first sign change of
    ``norm - 1`` and refines it with Brent's method.  Returns ``inf`` when the
    norm stays below 1 over the scan.
    """
    p = _params(fixed)
    eps = float(p["eps"])

    def g(k):
        return stability_report(p, kappa=k).resolvent_norm - 1.0

    grid = np.linspace(0.0, kappa_max, n_scan)
    prev_k, prev_g = grid[0], g(grid[0])
    if prev_g >= 0:
        return 0.0
    for k in grid[1:]:
        gk = g(k)
        if gk >= 0:
            return brentq(g, prev_k, k, xtol=xtol) / eps
        prev_k, prev_g = k, gk
    return math.inf

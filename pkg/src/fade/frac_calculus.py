"""Fractional-calculus building blocks.

Temporal difference weights (first-order Grunwald-Letnikov and the third-order
generator family), the Caputo history term, a Mittag-Leffler evaluator, and
closed-form Riemann-Liouville derivatives of cubic B-splines.
"""
from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import mpmath
import numpy as np
from scipy.integrate import IntegrationWarning, quad
from scipy.special import gammaln, rgamma

from .splines import Grid, modification_rule

# third-order generator root: 4 / (7 + sqrt(39) i)
MU = 4.0 / complex(7.0, math.sqrt(39.0))


class WeightFamily(enum.Enum):
    GL1 = "gl1"
    HO3 = "ho3"


class FractionalSingularityError(ValueError):
    """A closed-form RL derivative was requested at a point where it is infinite."""


class MittagLefflerConvergenceError(ArithmeticError):
    pass


@dataclass(frozen=True)
class TemporalWeights:
    alpha: float
    family: WeightFamily
    w: np.ndarray

    def __len__(self):
        return len(self.w)

    @property
    def partial_sums(self) -> np.ndarray:
        return np.cumsum(self.w)


def _check_alpha(alpha):
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"temporal order alpha must lie in (0, 1], got {alpha}")


def _binomial_sequence(alpha: float, n: int) -> np.ndarray:
    # l_0 = 1, l_k = (1 - (alpha+1)/k) l_{k-1}
    k = np.arange(1, n + 1, dtype=float)
    return np.concatenate(([1.0], np.cumprod(1.0 - (alpha + 1.0) / k)))


def gl_weights(alpha: float, n: int) -> TemporalWeights:
    """First-order Grunwald-Letnikov weights ``w_0..w_n``."""
    _check_alpha(alpha)
    if n < 0:
        raise ValueError("n must be non-negative")
    return TemporalWeights(alpha, WeightFamily.GL1, _binomial_sequence(alpha, n))


def ho3_weights(alpha: float, n: int) -> TemporalWeights:
    """Third-order weights from the generator
    ``(11/6)^a (1 - mu z)^a (1 - conj(mu) z)^a (1 - z)^a``.

    The double sum over ``mu^q conj(mu)^(p-q)`` is evaluated as two discrete
    convolutions; the result is real up to rounding.
    """
    _check_alpha(alpha)
    if n < 0:
        raise ValueError("n must be non-negative")
    ell = _binomial_sequence(alpha, n)
    powers = MU ** np.arange(n + 1)
    c = np.convolve(powers * ell, np.conj(powers) * ell)[: n + 1]
    w = (11.0 / 6.0) ** alpha * np.convolve(c, ell)[: n + 1]
    imag = np.max(np.abs(w.imag)) if n >= 0 else 0.0
    if imag > 1e-12 * max(1.0, np.max(np.abs(w.real))):
        raise ArithmeticError(f"third-order weights not real: residue {imag:.3e}")
    return TemporalWeights(alpha, WeightFamily.HO3, np.ascontiguousarray(w.real))


def temporal_weights(family, alpha: float, n: int) -> TemporalWeights:
    family = WeightFamily(str(getattr(family, "value", family)).lower())
    return (gl_weights if family is WeightFamily.GL1 else ho3_weights)(alpha, n)


def caputo_residual_rhs(history, weights: TemporalWeights) -> np.ndarray:
    """Known side of the Caputo discretisation at level ``n = len(history)``.

    Returns ``-sum_{k=1}^{n-1} w_k U^{n-k} + (sum_{k=0}^{n-1} w_k) U^0``; the
    ``w_0 U^n`` term stays on the unknown side and source terms are scaled by
    ``tau**alpha`` by the caller.
    """
    H = np.asarray(history, dtype=float)
    if H.ndim == 1:
        H = H[:, None]
        squeeze = True
    else:
        squeeze = False
    n = H.shape[0]
    if n == 0:
        raise ValueError("history must contain at least U^0")
    if len(weights.w) < n:
        raise ValueError(f"need {n} weights, have {len(weights.w)}")
    w = weights.w
    out = w[:n].sum() * H[0]
    if n > 1:
        out = out - w[n - 1:0:-1] @ H[1:n]
    return out[0] if squeeze else out


# -- Mittag-Leffler -----------------------------------------------------------

_ML_TOL = 1e-15


def _ml_series_double(alpha, z, max_terms=300):
    total, k = 0.0, 0
    while k < max_terms:
        term = z**k * rgamma(alpha * k + 1.0)
        total += term
        if k > 2 and abs(term) < _ML_TOL * abs(total):
            return total
        k += 1
    raise MittagLefflerConvergenceError(f"series did not converge for alpha={alpha}, z={z}")


def _series_peak(alpha, x):
    """Index and log10-size of the largest Taylor term ``x^k / Gamma(alpha k + 1)``."""
    k = max(0.0, (x ** (1.0 / alpha) - 1.0) / alpha)
    ks = np.unique(np.clip(np.round(k + np.arange(-3, 4)), 0, None))
    logs = ks * math.log(x) - gammaln(alpha * ks + 1.0)
    return float(k), max(0.0, float(np.max(logs)) / math.log(10.0))


def _ml_series_mp(alpha, z):
    # Taylor series in extended precision: working precision is set from the
    # size of the largest term so that cancellation leaves ~25 good digits.
    x = abs(z)
    _, peak = _series_peak(alpha, max(x, 1e-300))
    with mpmath.workdps(int(peak) + 30):
        a, zz = mpmath.mpf(alpha), mpmath.mpf(z)
        total = mpmath.mpf(0)
        eps = mpmath.mpf(10) ** (-25)
        k = 0
        while True:
            term = zz**k / mpmath.gamma(a * k + 1)
            total += term
            if k > 5 and abs(term) < eps * abs(total):
                return float(total)
            k += 1
            if k > 100000:
                raise MittagLefflerConvergenceError(f"series stalled for alpha={alpha}, z={z}")


def _ml_integral(alpha, x):
    """``E_a(-x)`` from its completely monotone integral representation,
    ``sin(a pi)/(a pi) int_0^inf exp(-x^(1/a) s^(1/a)) / (s^2 + 2 s cos(a pi) + 1) ds``."""
    t = x ** (1.0 / alpha)
    c = math.cos(alpha * math.pi)
    inv = 1.0 / alpha

    def f(s):
        return math.exp(-t * s**inv) / (s * s + 2.0 * s * c + 1.0)

    with warnings.catch_warnings():
        warnings.simplefilter("error", IntegrationWarning)
        try:
            v1 = quad(f, 0.0, 2.0, epsabs=0.0, epsrel=1e-13, limit=500, points=[1.0])[0]
            v2 = quad(f, 2.0, math.inf, epsabs=0.0, epsrel=1e-13, limit=500)[0]
        except IntegrationWarning as exc:
            raise MittagLefflerConvergenceError(
                f"quadrature failed for alpha={alpha}, z={-x}: {exc}") from None
    return math.sin(alpha * math.pi) / (alpha * math.pi) * (v1 + v2)


def _ml_asymptotic(alpha, x, max_terms=60):
    """``E_a(-x) ~ sum_{k>=1} (-1)^{k+1} x^{-k} / Gamma(1 - a k)`` truncated at the
    smallest term.  Returns ``(value, error_estimate)``."""
    total, best = 0.0, math.inf
    for k in range(1, max_terms + 1):
        term = (-1.0) ** (k + 1) * x ** (-k) * rgamma(1.0 - alpha * k)
        if term == 0.0:
            continue
        mag = abs(term)
        if mag > best:
            break
        total += term
        best = mag
    return total, best


def _ml_middle(alpha, x):
    k_peak, _ = _series_peak(alpha, x)
    if k_peak < 2000:
        return _ml_series_mp(alpha, -x)
    return _ml_integral(alpha, x)


@lru_cache(maxsize=256)
def ml_switch_point(alpha: float, tol: float = 1e-13) -> float:
    """Smallest ``x`` on a geometric sweep from which the asymptotic branch agrees
    with the reference branch to ``tol`` (relative)."""
    if alpha >= 1.0:
        return math.inf
    for x in np.geomspace(1.0, 2000.0, 100):
        val, err = _ml_asymptotic(alpha, x)
        if val == 0.0 or err > tol * abs(val):
            continue
        ref = _ml_middle(alpha, x)
        if abs(val - ref) <= tol * abs(ref):
            return float(x)
    return math.inf


def mittag_leffler(alpha: float, z) -> float | np.ndarray:
    """One-parameter Mittag-Leffler function ``E_alpha(z)`` for real ``z``.

    Taylor series for ``|z| <= 1`` (extended precision for ``z > 1``); for more
    negative ``z`` the asymptotic expansion once it is accurate, otherwise an
    extended-precision series or the integral representation, whichever is
    cheaper.
    """
    _check_alpha(alpha)
    if np.ndim(z) > 0:
        return np.array([mittag_leffler(alpha, float(v)) for v in np.ravel(z)]).reshape(np.shape(z))
    z = float(z)
    if alpha == 1.0:
        return math.exp(z)
    if z == 0.0:
        return 1.0
    if -1.0 <= z <= 1.0:
        return float(_ml_series_double(alpha, z))
    if z > 1.0:
        if _series_peak(alpha, z)[0] > 2000:
            raise MittagLefflerConvergenceError(f"E_{alpha}({z}) is beyond the series range")
        return float(_ml_series_mp(alpha, z))
    x = -z
    if x >= ml_switch_point(alpha):
        val, err = _ml_asymptotic(alpha, x)
        if err <= 1e-13 * abs(val):
            return float(val)
    return float(_ml_middle(alpha, x))


# -- Riemann-Liouville derivatives ---------------------------------------------

def rl_monomial(l: int, alpha: float, t):
    """``D^alpha t^l = Gamma(l+1) t^(l-alpha) / Gamma(l+1-alpha)`` (from 0).

    At a pole of ``Gamma(l+1-alpha)`` the reciprocal vanishes and so does the
    result (e.g. ``l = 0``, ``alpha = 1``).
    """
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise ValueError("rl_monomial needs t > 0")
    out = math.factorial(l) * rgamma(l + 1.0 - alpha) * t ** (l - alpha)
    return float(out) if out.ndim == 0 else out


_CB_COEF = (1.0, -4.0, 6.0, -4.0, 1.0)


def _rl_bspline_coeffs(m: int, grid: Grid):
    """Split ``B_m`` (for ``x >= x_0``) into a cubic in ``s = x - x_0`` plus
    truncated powers ``c_j (x - t_j)_+^3`` anchored at knots ``t_j >= x_0``.

    Uses ``h^3 B_m(x) = sum_j c_j (x - x_{m-2+j})_+^3``.
    """
    h = grid.h
    poly = np.zeros(4)
    truncated = []
    for j, c in enumerate(_CB_COEF):
        idx = m - 2 + j
        if idx < 0:
            d = -idx * h  # x_0 - t_j
            poly += c * np.array([d**3, 3 * d**2, 3 * d, 1.0])
        else:
            truncated.append((c, grid.knot(idx)))
    return poly / h**3, [(c / h**3, t) for c, t in truncated]


def rl_bspline_deriv(m: int, beta: float, x, grid: Grid):
    """``beta``-order Riemann-Liouville derivative (lower terminal ``x_0``) of the
    unmodified cubic B-spline ``B_m`` at ``x`` in ``(x_0, x_M]``.

    For ``2 <= m <= M+1`` only truncated powers ``(x - x_j)_+^(3-beta)`` with
    weights 6, -24, 36, -24, 6 appear.  The boundary members ``m = -1, 0, 1``
    add ``(x-x_0)^(-beta)``, ``(x-x_0)^(1-beta)`` and ``(x-x_0)^(2-beta)`` terms.
    """
    if not 1.0 < beta <= 2.0:
        raise ValueError(f"spatial order beta must lie in (1, 2], got {beta}")
    if not -1 <= m <= grid.M + 1:
        raise IndexError(f"basis index {m} outside -1..{grid.M + 1}")
    poly, truncated = _rl_bspline_coeffs(m, grid)
    scalar = np.ndim(x) == 0
    xa = np.atleast_1d(np.asarray(x, dtype=float))
    s = xa - grid.a
    out = np.zeros_like(xa)
    for p in range(4):
        coef = poly[p]
        if coef == 0.0:
            continue
        scale = math.factorial(p) * rgamma(p + 1.0 - beta)
        if scale == 0.0:
            continue
        if p - beta < 0 and np.any(s <= 0):
            raise FractionalSingularityError(
                f"D^{beta} B_{m} is singular at x_0 (term s^{p - beta:g})")
        expo = p - beta
        powered = np.where(s > 0, np.where(s > 0, s, 1.0) ** expo, 1.0 if expo == 0 else 0.0)
        out += coef * scale * powered
    g = 6.0 * rgamma(4.0 - beta)
    tol = 1e-13 * grid.h
    for c, t in truncated:
        r = xa - t
        out += c * g * np.where(r > tol, r, 0.0) ** (3.0 - beta)
    return float(out[0]) if scalar else out


def rl_modified_bspline_deriv(k: int, beta: float, x, grid: Grid):
    """RL derivative of the end-corrected basis ``MB_k`` (``k = 0..M``)."""
    return sum(c * rl_bspline_deriv(m, beta, x, grid) for m, c in modification_rule(k, grid.M))

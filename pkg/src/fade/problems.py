"""Benchmark problems with exact solutions and manufactured sources, plus the
error norms used to score a run."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Callable, Optional

import numpy as np
from scipy.special import gamma

from .frac_calculus import mittag_leffler


class UnknownProblemError(KeyError):
    pass


@dataclass(frozen=True)
class ProblemSpec:
    """A time-fractional or space-fractional advection-diffusion problem.

    Callables take ``(x, t)`` in 1D and ``(x, y, t)`` in 2D and broadcast over
    arrays; ``psi`` omits ``t``.  ``boundary`` supplies Dirichlet values and may
    be evaluated anywhere on the closed domain.
    """

    id: str
    domain: tuple
    alpha: float = 1.0
    beta: tuple = (2.0, 2.0)
    kappa: tuple = (0.0, 0.0)
    eps: tuple = (1.0, 1.0)
    psi: Callable = None
    boundary: Callable = None
    source: Optional[Callable] = None
    exact: Optional[Callable] = None
    scheme: str = "frac-implicit"
    weights: str = "gl1"
    basis: str = "ctb"
    t_end: float = 1.0
    nonlinear: Optional[float] = None
    complex_valued: bool = False
    per_unit_length: bool = False
    defaults: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return len(self.domain) // 2

    def cells(self, M: int, axis: int = 0) -> int:
        """Cell count along ``axis`` for grid parameter ``M``; problems flagged
        ``per_unit_length`` read ``M`` as cells per unit length."""
        if not self.per_unit_length:
            return int(M)
        length = self.domain[2 * axis + 1] - self.domain[2 * axis]
        return int(round(M * length))

    @property
    def space_fractional(self) -> bool:
        return self.scheme == "cn-fracspace"

    def with_(self, **kw) -> "ProblemSpec":
        return replace(self, **kw)


@dataclass
class ErrorReport:
    e2: float
    einf: float
    eN: Optional[float]
    sizes: tuple
    rate_e2: Optional[float] = None
    rate_einf: Optional[float] = None

    def as_dict(self) -> dict:
        return {"e2": self.e2, "einf": self.einf, "eN": self.eN, "sizes": list(self.sizes),
                "rate_e2": self.rate_e2, "rate_einf": self.rate_einf}


def error_norms(numeric, exact, sizes, initial=None) -> ErrorReport:
    """Interior-point error norms.

    ``numeric``/``exact`` hold interior values only (``M-1`` entries in 1D,
    ``(Mx-1)(My-1)`` in 2D).  ``e2`` is normalised by ``M`` (``Mx*My``),
    ``eN`` by the interior norm of ``initial``; it is ``None`` when that norm
    vanishes.
    """
    err = np.abs(np.asarray(numeric) - np.asarray(exact)).ravel()
    sizes = tuple(int(s) for s in np.atleast_1d(sizes))
    expected = int(np.prod([s - 1 for s in sizes]))
    if err.shape[0] != expected:
        raise ValueError(f"expected {expected} interior values, got {err.shape[0]}")
    e2 = math.sqrt(float(np.sum(err**2)) / float(np.prod(sizes)))
    einf = float(np.max(err)) if err.size else 0.0
    eN = None
    if initial is not None:
        d = float(np.sum(np.abs(np.asarray(initial)) ** 2))
        eN = math.sqrt(float(np.sum(err**2)) / d) if d > 0 else None
    return ErrorReport(e2, einf, eN, sizes)


def convergence_rates(reports) -> list:
    """Fill ``rate_*`` fields with ``log2(e(M)/e(2M))``-style observed orders.

    Uses the actual refinement ratio between successive grids.
    """
    reports = list(reports)
    for prev, cur in zip(reports, reports[1:]):
        ratio = math.log(cur.sizes[0] / prev.sizes[0])
        if prev.e2 > 0 and cur.e2 > 0:
            cur.rate_e2 = math.log(prev.e2 / cur.e2) / ratio
        if prev.einf > 0 and cur.einf > 0:
            cur.rate_einf = math.log(prev.einf / cur.einf) / ratio
    return reports


# -- ex61 ----------------------------------------------------------------------

def _ex61(alpha=0.5, **_):
    E = np.vectorize(lambda t: mittag_leffler(alpha, t**alpha) if t > 0 else 1.0)

    def exact(x, t):
        return np.exp(x) * E(t)

    return ProblemSpec(
        "ex61", (0.0, 1.0), alpha=alpha, kappa=(1.0, 0.0), eps=(2.0, 0.0),
        psi=lambda x: np.exp(x), boundary=exact, source=None, exact=exact,
        scheme="frac-implicit", weights="gl1", basis="ctb", t_end=0.1,
        defaults={"tau": 1e-5, "M": 8})


# -- ex62 ----------------------------------------------------------------------

@lru_cache(maxsize=64)
def _ex62_modes(alpha, t, K_terms):
    k = np.arange(1, 2 * K_terms, 2)  # odd k only; even terms vanish
    if t == 0.0:
        E = np.ones(len(k))
    else:
        E = np.array([mittag_leffler(alpha, -(kk**2) * math.pi**2 * t**alpha) for kk in k])
    return k, 32.0 / math.pi**3 * E / k**3


def truncated_series_solution_ex62(alpha, x, t, K_terms=200):
    """Partial sum over the first ``K_terms`` odd modes of
    ``16/pi^3 sum_k E_a(-k^2 pi^2 t^a) (1-(-1)^k) sin(k pi x) / k^3``."""
    if K_terms < 1:
        raise ValueError("K_terms must be >= 1")
    k, c = _ex62_modes(float(alpha), float(t), int(K_terms))
    x = np.asarray(x, dtype=float)
    return np.tensordot(np.sin(np.multiply.outer(x, k * math.pi)), c, axes=([-1], [0]))


def _ex62(alpha=0.5, K_terms=200, **_):
    def exact(x, t):
        t = float(np.max(t))
        return truncated_series_solution_ex62(alpha, x, t, K_terms)

    return ProblemSpec(
        "ex62", (0.0, 1.0), alpha=alpha, kappa=(0.0, 0.0), eps=(1.0, 0.0),
        psi=lambda x: 4.0 * x * (1.0 - x), boundary=lambda x, t: np.zeros_like(np.asarray(x, dtype=float)),
        source=None, exact=exact, scheme="frac-implicit", weights="ho3", basis="ctb",
        t_end=1.0, defaults={"tau": 1e-4, "M": 8})


# -- ex63 ----------------------------------------------------------------------

def _ex63(alpha=0.3, **_):
    def exact(x, t):
        return t**2 * np.sin(2 * math.pi * x)

    def source(x, t):
        s = np.sin(2 * math.pi * x)
        return 2.0 * t ** (2 - alpha) * s / gamma(3 - alpha) + 4 * math.pi**2 * t**2 * s

    return ProblemSpec(
        "ex63", (0.0, 1.0), alpha=alpha, kappa=(0.0, 0.0), eps=(1.0, 0.0),
        psi=lambda x: np.zeros_like(np.asarray(x, dtype=float)), boundary=exact, source=source,
        exact=exact, scheme="frac-implicit", weights="ho3", basis="ctb", t_end=1.0,
        defaults={"tau": 5e-3, "M": 16})


# -- ex64 ----------------------------------------------------------------------

def _ex64(alpha=0.5, **_):
    # grid parameter M means h = 1/M, so [-1, 1] carries 2M cells per axis
    c = 20.0

    def exact(x, y, t):
        return (1 + t**2) * np.tanh(c * x) * np.tanh(c * y)

    def source(x, y, t):
        # Caputo of (1 + t^2) is 2 t^(2-a) / Gamma(3-a); (tanh(cx))'' = -2c^2 tanh sech^2
        tx, ty = np.tanh(c * x), np.tanh(c * y)
        sx, sy = 1 - tx**2, 1 - ty**2
        lap = -2 * c**2 * tx * sx * ty - 2 * c**2 * ty * sy * tx
        dt = 2.0 * t ** (2 - alpha) / gamma(3 - alpha) if t > 0 else 0.0
        return dt * tx * ty - (1 + t**2) * lap

    return ProblemSpec(
        "ex64", (-1.0, 1.0, -1.0, 1.0), alpha=alpha, kappa=(0.0, 0.0), eps=(1.0, 1.0),
        psi=lambda x, y: exact(x, y, 0.0), boundary=exact, source=source, exact=exact,
        scheme="frac-implicit", weights="ho3", basis="ctb", t_end=0.5,
        per_unit_length=True, defaults={"tau": 1e-2, "M": 24})


# -- ex65 ----------------------------------------------------------------------

def soliton_exact(x, t):
    """Mobile soliton ``sech(x - 4t) exp(i(2x - 3t))`` (alpha = 1, beta = 2)."""
    return np.exp(1j * (2 * x - 3 * t)) / np.cosh(x - 4 * t)


def _ex65(alpha=1.0, beta_nl=2.0, initial="soliton", a=-10.0, b=10.0,
          centres=(-6.0, 6.0), p=(2.0, -2.0), **_):
    if initial == "soliton":
        psi = lambda x: soliton_exact(x, 0.0)
        exact = soliton_exact if (alpha == 1.0 and beta_nl == 2.0) else None
    elif initial == "collision":
        def psi(x):
            return sum(np.exp(1j * pj * (x - xj)) / np.cosh(x - xj) for xj, pj in zip(centres, p))
        exact = None
    else:
        raise ValueError(f"unknown NLS initial profile {initial!r}")
    return ProblemSpec(
        "ex65", (a, b), alpha=alpha, kappa=(0.0, 0.0), eps=(1.0, 0.0), psi=psi,
        boundary=lambda x, t: np.zeros_like(np.asarray(x, dtype=float)), source=None,
        exact=exact, scheme="frac-implicit", weights="gl1", basis="ctb", t_end=0.1,
        nonlinear=beta_nl, complex_valued=True,
        defaults={"tau": 2e-3, "M": 100, "initial": initial})


# -- ex66 ----------------------------------------------------------------------

def _ex66(kappa=0.8, eps=0.01, **_):
    kx = ky = kappa
    ex = ey = eps

    def exact(x, y, t):
        s = 1 + 4 * t
        return np.exp(-((x - kx * t - 0.5) ** 2) / (ex * s) - ((y - ky * t - 0.5) ** 2) / (ey * s)) / s

    return ProblemSpec(
        "ex66", (0.0, 2.0, 0.0, 2.0), alpha=1.0, kappa=(kx, ky), eps=(ex, ey),
        psi=lambda x, y: exact(x, y, 0.0), boundary=exact, source=None, exact=exact,
        scheme="rk-gill", weights="gl1", basis="ctb", t_end=1.25,
        defaults={"tau": 6.25e-3, "M": 80})


# -- ex67 ----------------------------------------------------------------------

def _ex67(beta1=1.1, beta2=1.3, **_):
    def exact(x, y, t):
        return np.exp(-t) * x**2 * (1 - x) ** 2 * y**2 * (1 - y) ** 2

    def _frac(z, b):
        return 2 * z ** (2 - b) / gamma(3 - b) * (1 - 6 * z / (3 - b) + 12 * z**2 / ((3 - b) * (4 - b)))

    def source(x, y, t):
        e = np.exp(-t)
        X = x**2 * (1 - x) ** 2
        Y = y**2 * (1 - y) ** 2
        return -e * X * Y - e * _frac(x, beta1) * Y - e * X * _frac(y, beta2)

    return ProblemSpec(
        "ex67", (0.0, 1.0, 0.0, 1.0), alpha=1.0, beta=(beta1, beta2), kappa=(0.0, 0.0),
        eps=(1.0, 1.0), psi=lambda x, y: exact(x, y, 0.0),
        boundary=lambda x, y, t: np.zeros(np.broadcast(np.asarray(x), np.asarray(y)).shape),
        source=source, exact=exact, scheme="cn-fracspace", weights="gl1", basis="cubicb",
        t_end=0.2, defaults={"tau": 2.5e-4, "M": 10})


_REGISTRY = {"ex61": _ex61, "ex62": _ex62, "ex63": _ex63, "ex64": _ex64,
             "ex65": _ex65, "ex66": _ex66, "ex67": _ex67}

PROBLEM_IDS = tuple(_REGISTRY)


def make_problem(problem_id: str, **params) -> ProblemSpec:
    """Build one of the benchmark problems ``ex61`` .. ``ex67``.

    Recognised parameters: ``alpha`` (61-65), ``beta1``/``beta2`` (67),
    ``beta_nl``/``initial``/``a``/``b`` (65), ``kappa``/``eps`` (66),
    ``K_terms`` (62).  ``None`` values fall back to the defaults.
    """
    try:
        factory = _REGISTRY[problem_id]
    except KeyError:
        raise UnknownProblemError(f"unknown problem id {problem_id!r}; choose from {PROBLEM_IDS}") from None
    return factory(**{k: v for k, v in params.items() if v is not None})

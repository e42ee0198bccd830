"""Time integration.

Four steppers share one mutable ``SolverState``:

* ``step_fractional``  implicit Caputo scheme ``(w0 I + tau^a K) U^n = hist + tau^a G^n``
* ``rk_gill_step``     explicit four-stage Gill method (alpha = 1)
* ``cn_step_fractional_space``  Crank-Nicolson for the space-fractional operator
* ``newton_nls_step``  the implicit scheme on the coupled real/imaginary NLS system

``run`` wires a ``ProblemSpec`` to one of them and scores the result.
"""
from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.linalg import LinAlgWarning, lu_factor, lu_solve, schur
from scipy.linalg.lapack import dtrsyl

from .dq_weights import first_order_weights, fractional_weights, higher_order_weights
from .frac_calculus import TemporalWeights, caputo_residual_rhs, temporal_weights
from .operators import SpatialOperator, assemble_frac_L_2d, assemble_K_1d, assemble_K_2d
from .problems import ProblemSpec, error_norms
from .splines import Grid, Grid2D

SCHEMES = ("frac-implicit", "rk-gill", "cn-fracspace")

SQ2 = math.sqrt(2.0)


class SingularSystemError(np.linalg.LinAlgError):
    pass


class DivergenceError(ArithmeticError):
    pass


class NewtonConvergenceError(ArithmeticError):
    def __init__(self, msg, residual=float("nan"), iterations=0):
        super().__init__(msg)
        self.residual = residual
        self.iterations = iterations


class IncompatibleSchemeError(ValueError):
    pass


# -- state ----------------------------------------------------------------------

@dataclass
class SolverState:
    """Solution levels ``U^0..U^n`` (rows of ``history``) plus what each stepper
    needs.  With ``keep_history=False`` only the latest level is kept, which is
    enough for the one-step methods."""

    history: np.ndarray
    tau: float
    alpha: float = 1.0
    weights: Optional[TemporalWeights] = None
    factor: Optional[tuple] = None
    n: int = 0
    keep_history: bool = True
    coupling: Optional[np.ndarray] = None   # NLS: interior W2 block
    h: float = 1.0                          # NLS: spacing for the residual norm
    newton_log: list = field(default_factory=list)
    initial: Optional[np.ndarray] = None

    @classmethod
    def start(cls, u0, tau, n_steps=0, keep_history=True, **kw) -> "SolverState":
        u0 = np.asarray(u0, dtype=float).ravel()
        rows = n_steps + 1 if keep_history else 1
        H = np.empty((max(rows, 1), u0.shape[0]))
        H[0] = u0
        return cls(H, float(tau), keep_history=keep_history, initial=u0.copy(), **kw)

    @property
    def size(self) -> int:
        return self.history.shape[1]

    @property
    def current(self) -> np.ndarray:
        return self.history[self.n if self.keep_history else 0]

    @property
    def levels(self) -> np.ndarray:
        """Stored levels, oldest first (a view)."""
        return self.history[: self.n + 1] if self.keep_history else self.history[:1]

    def push(self, u) -> None:
        if not np.all(np.isfinite(u)):
            raise DivergenceError(f"non-finite values at step {self.n + 1}")
        if not self.keep_history:
            self.history[0] = u
        else:
            if self.n + 1 >= self.history.shape[0]:
                grown = np.empty((2 * self.history.shape[0], self.size))
                grown[: self.n + 1] = self.history[: self.n + 1]
                self.history = grown
            self.history[self.n + 1] = u
        self.n += 1


def factorize(A) -> tuple:
    """LU factors of a dense matrix; singular or non-finite systems raise."""
    A = np.asarray(A, dtype=float)
    if not np.all(np.isfinite(A)):
        raise SingularSystemError("system matrix has non-finite entries")
    with warnings.catch_warnings():
        warnings.simplefilter("error", LinAlgWarning)
        try:
            lu, piv = lu_factor(A, check_finite=False)
        except (LinAlgWarning, ValueError) as exc:
            raise SingularSystemError(f"factorisation failed: {exc}") from None
    d = np.abs(np.diag(lu))
    if d.size and d.min() <= np.finfo(float).eps * d.max() * d.size:
        raise SingularSystemError("system matrix is numerically singular")
    return lu, piv


# dense factorisation above this many unknowns would not fit a desk machine
DENSE_LIMIT = 12000


class KroneckerSolver:
    """Direct solve of ``(shift I + scale (I_y(x)Bx + By(x)I_x)) u = r``.

    Written as the Sylvester equation ``(s By + c/2) U + U (s Bx^T + c/2) = R``
    and solved by Bartels-Stewart with real Schur forms computed once.
    """

    def __init__(self, op: SpatialOperator, shift: float, scale: float):
        if op.ny is None:
            raise ValueError("KroneckerSolver needs a 2D operator")
        self.shape = (op.ny, op.nx)
        A = scale * op.blocks["y"] + 0.5 * shift * np.eye(op.ny)
        B = scale * op.blocks["x"].T + 0.5 * shift * np.eye(op.nx)
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(B))):
            raise SingularSystemError("system blocks have non-finite entries")
        self.R, self.Q = schur(A, output="real")
        self.S, self.Z = schur(B, output="real")
        ea = np.linalg.eigvals(self.R)
        eb = np.linalg.eigvals(self.S)
        gap = np.min(np.abs(ea[:, None] + eb[None, :]))
        if gap <= np.finfo(float).eps * (np.abs(ea).max() + np.abs(eb).max()):
            raise SingularSystemError("Kronecker system is singular")

    def solve(self, rhs) -> np.ndarray:
        F = self.Q.T @ np.asarray(rhs, dtype=float).reshape(self.shape) @ self.Z
        Y, sc, info = dtrsyl(self.R, self.S, F)
        if info < 0:
            raise SingularSystemError(f"trsyl failed (info={info})")
        return (self.Q @ (sc * Y) @ self.Z.T).ravel()


def make_solver(K, shift, scale, method="auto"):
    """Factor ``shift I + scale K``: dense LU, or the Kronecker solver for large
    2D operators (``method`` is ``"auto"``, ``"dense"`` or ``"kron"``)."""
    two_d = isinstance(K, SpatialOperator) and K.ny is not None
    if method == "kron" or (method == "auto" and two_d and K.size > DENSE_LIMIT):
        return KroneckerSolver(K, shift, scale)
    return factorize(_as_dense(K, shift, scale))


def solve_factored(factor, rhs) -> np.ndarray:
    if isinstance(factor, KroneckerSolver):
        return factor.solve(rhs)
    return lu_solve(factor, rhs, check_finite=False)


def _as_dense(K, shift, scale):
    if isinstance(K, SpatialOperator):
        return K.shifted_dense(shift, scale)
    K = np.atleast_2d(np.asarray(K, dtype=float))
    return shift * np.eye(K.shape[0]) + scale * K


def _apply(K, u):
    return K.apply(u) if isinstance(K, SpatialOperator) else np.asarray(K) @ u


# -- fractional implicit scheme ------------------------------------------------------

def fractional_state(K, u0, tau, alpha, weights: TemporalWeights, n_steps=None,
                     solver="auto") -> SolverState:
    """Factor ``w0 I + tau^a K`` once and seed the history with ``u0``."""
    n_steps = len(weights.w) - 1 if n_steps is None else n_steps
    if len(weights.w) < n_steps + 1:
        raise ValueError(f"need {n_steps + 1} temporal weights, have {len(weights.w)}")
    factor = make_solver(K, weights.w[0], tau**alpha, solver)
    return SolverState.start(u0, tau, n_steps, alpha=alpha, weights=weights, factor=factor)


def step_fractional(state: SolverState, K, G) -> SolverState:
    """One level of the implicit Caputo scheme; ``G`` is a LoadVector or array."""
    if state.factor is None or state.weights is None:
        raise ValueError("state has no factorised system; build it with fractional_state")
    g = np.asarray(getattr(G, "values", G), dtype=float).ravel()
    rhs = caputo_residual_rhs(state.levels, state.weights) + state.tau**state.alpha * g
    state.push(solve_factored(state.factor, rhs))
    return state


# -- Runge-Kutta Gill ---------------------------------------------------------------

def rk_gill_step(state: SolverState, F: Callable, t: float) -> SolverState:
    """Advance ``u' = F(t, u)`` from ``t`` by ``state.tau`` with Gill's coefficients."""
    tau = state.tau
    u = state.current
    k1 = tau * F(t, u)
    k2 = tau * F(t + 0.5 * tau, u + 0.5 * k1)
    k3 = tau * F(t + 0.5 * tau, u + 0.5 * (SQ2 - 1.0) * k1 + 0.5 * (2.0 - SQ2) * k2)
    k4 = tau * F(t + tau, u - 0.5 * SQ2 * k2 + 0.5 * (2.0 + SQ2) * k3)
    state.push(u + (k1 + (2.0 - SQ2) * k2 + (2.0 + SQ2) * k3 + k4) / 6.0)
    return state


# -- Crank-Nicolson for the space-fractional problem ----------------------------------

def cn_state(L, u0, tau, n_steps=0, keep_history=True, solver="auto") -> SolverState:
    factor = make_solver(L, 1.0, -0.5 * tau, solver)
    st = SolverState.start(u0, tau, n_steps, keep_history=keep_history, factor=factor)
    return st


def cn_step_fractional_space(state: SolverState, L, f_mid) -> SolverState:
    """``(I - tau/2 L) U^n = (I + tau/2 L) U^{n-1} + tau f^{n-1/2}``."""
    f = np.asarray(getattr(f_mid, "values", f_mid), dtype=float).ravel()
    u = state.current
    rhs = u + 0.5 * state.tau * _apply(L, u) + state.tau * f
    state.push(solve_factored(state.factor, rhs))
    return state


# -- Newton for the coupled NLS system --------------------------------------------------

@dataclass(frozen=True)
class NewtonConfig:
    tolerance: float = 1e-12
    max_iterations: int = 50
    damping: float = 0.5
    min_step: float = 2.0**-20

    def __post_init__(self):
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if not 0.0 < self.damping < 1.0:
            raise ValueError("damping must lie in (0, 1)")


def nls_state(W2, u0, v0, tau, alpha, weights: TemporalWeights, h, n_steps=None) -> SolverState:
    """State for the stacked unknown ``z = [U; V]`` on interior points."""
    W2 = np.asarray(W2, dtype=float)
    n_steps = len(weights.w) - 1 if n_steps is None else n_steps
    z0 = np.concatenate([np.ravel(u0), np.ravel(v0)])
    return SolverState.start(z0, tau, n_steps, alpha=alpha, weights=weights, coupling=W2, h=h)


def nls_rhs(W2, beta_nl):
    """``z' = F(t, z)`` for the NLS system at alpha = 1 (homogeneous Dirichlet)."""
    n = W2.shape[0]

    def F(t, z):
        U, V = z[:n], z[n:]
        s = beta_nl * (U * U + V * V)
        return np.concatenate([-(W2 @ V) - s * V, W2 @ U + s * U])

    return F


def newton_nls_step(state: SolverState, config: NewtonConfig, beta_nl: float,
                    alpha: Optional[float] = None) -> SolverState:
    """Solve one implicit level of
    ``D^a U + W2 V + b|u|^2 V = 0``, ``D^a V - W2 U - b|u|^2 U = 0``
    by damped Newton, starting from the previous level.

    An iteration is one residual check plus, if needed, one Jacobian solve with
    backtracking; the count stops as soon as a residual below tolerance is seen.
    """
    alpha = state.alpha if alpha is None else alpha
    W2 = state.coupling
    if W2 is None or state.weights is None:
        raise ValueError("state lacks the NLS coupling block or temporal weights")
    n = W2.shape[0]
    w0 = state.weights.w[0]
    ta = state.tau**alpha
    hist = caputo_residual_rhs(state.levels, state.weights)
    sqh = math.sqrt(state.h)

    def residual(z):
        U, V = z[:n], z[n:]
        s = beta_nl * (U * U + V * V)
        return w0 * z + ta * np.concatenate([W2 @ V + s * V, -(W2 @ U) - s * U]) - hist

    def norm(r):
        return sqh * float(np.linalg.norm(r))

    z = state.current.copy()
    r = residual(z)
    rn = norm(r)
    for it in range(1, config.max_iterations + 1):
        if rn < config.tolerance:
            break
        U, V = z[:n], z[n:]
        J = np.empty((2 * n, 2 * n))
        J[:n, :n] = np.diag(ta * beta_nl * 2 * U * V)
        J[:n, n:] = ta * W2 + np.diag(ta * beta_nl * (U * U + 3 * V * V))
        J[n:, :n] = -ta * W2 + np.diag(ta * beta_nl * (-3 * U * U - V * V))
        J[n:, n:] = np.diag(ta * beta_nl * (-2 * U * V))
        J[np.diag_indices_from(J)] += w0
        try:
            dz = np.linalg.solve(J, -r)
        except np.linalg.LinAlgError as exc:
            raise SingularSystemError(f"singular Newton Jacobian: {exc}") from None
        lam = 1.0
        while True:
            z_try = z + lam * dz
            r_try = residual(z_try)
            rn_try = norm(r_try)
            if np.isfinite(rn_try) and rn_try < rn:
                break
            lam *= config.damping
            if lam < config.min_step:
                if rn_try <= rn and np.isfinite(rn_try):
                    break
                raise DivergenceError(f"Newton line search stalled at residual {rn:.3e}")
        z, r, rn = z_try, r_try, rn_try
        if rn < config.tolerance:
            break
    else:
        raise NewtonConvergenceError(
            f"Newton did not reach {config.tolerance:g} in {config.max_iterations} iterations "
            f"(residual {rn:.3e})", rn, config.max_iterations)
    state.newton_log.append((it, rn))
    state.push(z)
    return state


# -- driver -----------------------------------------------------------------------

@dataclass
class Trajectory:
    problem: ProblemSpec
    scheme: str
    grid: object                   # Grid or Grid2D
    times: np.ndarray
    states: np.ndarray             # rows are interior vectors (NLS: [U; V])
    runtime: float
    errors: dict = field(default_factory=dict)
    newton_iterations: list = field(default_factory=list)
    config: dict = field(default_factory=dict)

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    def field(self, k: int = -1) -> np.ndarray:
        """Full-grid field at stored level ``k`` with boundary values filled in
        (complex for the NLS problem)."""
        t = float(self.times[k])
        z = self.states[k]
        if self.problem.complex_valued:
            g = self.grid
            n = g.M - 1
            out = np.zeros(g.M + 1, dtype=complex)
            out[1:-1] = z[:n] + 1j * z[n:]
            return out
        full = _sample(self.problem.boundary, self.grid, t).astype(float)
        if isinstance(self.grid, Grid):
            full[1:-1] = z
        else:
            full[1:-1, 1:-1] = z.reshape(self.grid.interior_shape)
        return full


def _sample(func, grid, t=None):
    if isinstance(grid, Grid2D):
        X, Y = grid.mesh()
        v = func(X, Y) if t is None else func(X, Y, t)
        return np.broadcast_to(np.asarray(v), X.shape).copy()
    x = grid.x
    v = func(x) if t is None else func(x, t)
    return np.broadcast_to(np.asarray(v), x.shape).copy()


def _interior(full):
    full = np.asarray(full)
    return full[1:-1] if full.ndim == 1 else full[1:-1, 1:-1].ravel()


def check_compatible(problem: ProblemSpec, scheme: str) -> None:
    if scheme not in SCHEMES:
        raise IncompatibleSchemeError(f"unknown scheme {scheme!r}; choose from {SCHEMES}")
    if problem.space_fractional != (scheme == "cn-fracspace"):
        raise IncompatibleSchemeError(
            f"problem {problem.id} needs the {problem.scheme!r} scheme, not {scheme!r}")
    if scheme == "rk-gill" and problem.alpha != 1.0:
        raise IncompatibleSchemeError("rk-gill applies only to integer-order time derivatives (alpha = 1)")


def step_count(tau: float, t_end: float) -> int:
    if not tau > 0:
        raise ValueError("tau must be positive")
    if t_end < 0:
        raise ValueError("t_end must be non-negative")
    N = int(round(t_end / tau))
    if abs(N * tau - t_end) > 1e-9 * max(1.0, t_end):
        raise ValueError(f"t_end={t_end} is not an integer multiple of tau={tau}")
    return N


def _make_grid(problem, M, Mx, My):
    if problem.dim == 1:
        return Grid(problem.domain[0], problem.domain[1], problem.cells(M))
    a, b, c, d = problem.domain
    mx = Mx if Mx is not None else M
    my = My if My is not None else mx
    if mx is None:
        raise ValueError("grid size M (or Mx/My) is required")
    return Grid2D(Grid(a, b, problem.cells(mx, 0)), Grid(c, d, problem.cells(my, 1)))


def _integer_operator(problem, grid):
    kind = problem.basis
    if isinstance(grid, Grid):
        W1 = first_order_weights(kind, grid)
        return assemble_K_1d(problem.kappa[0], problem.eps[0], W1, higher_order_weights(W1, 2))
    W1x = first_order_weights(kind, grid.gx, "x")
    W1y = first_order_weights(kind, grid.gy, "y")
    return assemble_K_2d(problem.kappa[0], problem.kappa[1], problem.eps[0], problem.eps[1],
                         W1x, higher_order_weights(W1x, 2), W1y, higher_order_weights(W1y, 2))


def _load(problem, grid, op, t, sign=-1.0):
    """Interior load ``f + sign * (boundary part of op g)`` at time ``t``."""
    g = _sample(problem.boundary, grid, t)
    f = 0.0 if problem.source is None else _interior(_sample(problem.source, grid, t))
    return f + sign * op.boundary_apply(g)


def run(problem: ProblemSpec, M=None, Mx=None, My=None, tau=None, t_end=None, scheme=None,
        weights=None, store: str = "all", newton: Optional[NewtonConfig] = None,
        reference=None, solver: str = "auto") -> Trajectory:
    """Integrate ``problem`` to ``t_end`` and score it against the exact solution.

    ``reference`` (full-grid final field) replaces a missing exact solution.
    ``store`` is ``"all"`` or ``"final"``; the fractional schemes always keep
    the full history internally.  ``solver`` picks the linear solve for the
    implicit schemes (see ``make_solver``).
    """
    d = problem.defaults
    M = M if M is not None else d.get("M")
    tau = float(tau if tau is not None else d["tau"])
    t_end = float(problem.t_end if t_end is None else t_end)
    scheme = scheme or problem.scheme
    family = weights or problem.weights
    check_compatible(problem, scheme)
    N = step_count(tau, t_end)
    grid = _make_grid(problem, M, Mx, My)
    cfg = dict(problem=problem.id, scheme=scheme, weights=family, tau=tau, t_end=t_end, N=N,
               M=grid.M if isinstance(grid, Grid) else (grid.gx.M, grid.gy.M))
    keep = store == "all"

    t0 = time.perf_counter()
    if problem.complex_valued:
        st, nit = _run_nls(problem, grid, tau, N, scheme, family, newton)
    elif scheme == "cn-fracspace":
        st, nit = _run_cn(problem, grid, tau, N, keep, solver), []
    elif scheme == "rk-gill":
        st, nit = _run_rk(problem, grid, tau, N, keep), []
    else:
        st, nit = _run_fractional(problem, grid, tau, N, family, solver), []
    runtime = time.perf_counter() - t0

    if keep:
        states = st.levels.copy()
        times = tau * np.arange(states.shape[0])
    else:
        states = st.current[None, :].copy()
        times = np.array([tau * st.n])
    traj = Trajectory(problem, scheme, grid, times, states, runtime, {}, nit, cfg)
    traj.errors = _score(traj, st, reference)
    return traj


def _run_fractional(problem, grid, tau, N, family, solver="auto"):
    op = _integer_operator(problem, grid)
    w = temporal_weights(family, problem.alpha, N)
    u0 = _interior(_sample(problem.psi, grid))
    st = fractional_state(op, u0, tau, problem.alpha, w, N, solver)
    for n in range(1, N + 1):
        step_fractional(st, op, _load(problem, grid, op, n * tau))
    return st


def _run_rk(problem, grid, tau, N, keep):
    op = _integer_operator(problem, grid)

    def F(t, u):
        return -op.apply(u) + _load(problem, grid, op, t)

    st = SolverState.start(_interior(_sample(problem.psi, grid)), tau, N, keep_history=keep)
    for n in range(N):
        rk_gill_step(st, F, n * tau)
    return st


def _run_cn(problem, grid, tau, N, keep, solver="auto"):
    kind = problem.basis
    Wbx = fractional_weights(problem.beta[0], grid.gx, kind, "x")
    Wby = fractional_weights(problem.beta[1], grid.gy, kind, "y")
    L = assemble_frac_L_2d(problem.eps[0], problem.eps[1], Wbx, Wby)
    st = cn_state(L, _interior(_sample(problem.psi, grid)), tau, N, keep, solver)
    for n in range(N):
        cn_step_fractional_space(st, L, _load(problem, grid, L, (n + 0.5) * tau, sign=+1.0))
    return st


def _nls_block(problem, grid):
    W1 = first_order_weights(problem.basis, grid)
    return higher_order_weights(W1, 2).interior()


def _run_nls(problem, grid, tau, N, scheme, family, newton):
    if scheme == "cn-fracspace":
        raise IncompatibleSchemeError("the NLS problem has no space-fractional form")
    W2 = _nls_block(problem, grid)
    psi = _interior(_sample(problem.psi, grid))
    beta_nl = problem.nonlinear
    if scheme == "rk-gill":
        st = SolverState.start(np.concatenate([psi.real, psi.imag]), tau, N)
        F = nls_rhs(W2, beta_nl)
        for n in range(N):
            rk_gill_step(st, F, n * tau)
        return st, []
    w = temporal_weights(family, problem.alpha, N)
    st = nls_state(W2, psi.real, psi.imag, tau, problem.alpha, w, grid.h, N)
    cfg = newton or NewtonConfig()
    for _ in range(N):
        newton_nls_step(st, cfg, beta_nl, problem.alpha)
    return st, [it for it, _ in st.newton_log]


def _score(traj: Trajectory, st: SolverState, reference) -> dict:
    problem, grid = traj.problem, traj.grid
    t = float(traj.times[-1])
    sizes = (grid.M,) if isinstance(grid, Grid) else (grid.gx.M, grid.gy.M)
    if reference is not None:
        ref = _interior(np.asarray(reference))
    elif problem.exact is not None:
        ref = _interior(_sample(problem.exact, grid, t))
    else:
        return {}
    num = traj.final
    initial = st.initial if isinstance(grid, Grid) else None
    if problem.complex_valued:
        n = grid.M - 1
        ref = np.asarray(ref, dtype=complex)
        return {"real": error_norms(num[:n], ref.real, sizes, None if initial is None else initial[:n]),
                "imag": error_norms(num[n:], ref.imag, sizes, None if initial is None else initial[n:])}
    return {"u": error_norms(num, ref, sizes, initial)}


def nls_reference_solution(alpha, initial="soliton", M=400, tau=2.5e-4, t_end=0.1,
                           a=-10.0, b=10.0, beta_nl=2.0) -> np.ndarray:
    """Fine-lattice reference for fractional NLS runs (third-order weights).

    Returns the complex full-grid field at ``t_end``; a coarse grid whose cell
    count divides ``M`` samples it with ``ref[::M // Mc]``.
    """
    from .problems import make_problem

    p = make_problem("ex65", alpha=alpha, initial=initial, a=a, b=b, beta_nl=beta_nl)
    traj = run(p, M=M, tau=tau, t_end=t_end, weights="ho3", store="final")
    return traj.field(-1)

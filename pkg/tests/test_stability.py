import numpy as np
import pytest

from oracles import inverse_two_norm

from fade.dq_weights import WeightMatrix, first_order_weights, higher_order_weights
from fade.splines import CTB, Grid
from fade.stability import (DEFAULTS, StabilityReport, assumption_sweep, composed_spectrum_2d,
                            imag_residue, operator_for, resolvent_norm, stability_report,
                            weight_spectrum)


def _axis(M, L=1.0, axis="x"):
    W1 = first_order_weights(CTB, Grid(0.0, L, M), axis)
    return W1, higher_order_weights(W1, 2)


def test_resolvent_zero_operator():
    assert resolvent_norm(np.zeros((4, 4)), 1e-3, 0.5) == 1.0


def test_resolvent_diagonal():
    d = np.array([0.5, 2.0, 7.0])
    tau, alpha = 0.1, 0.5
    assert resolvent_norm(np.diag(d), tau, alpha) == pytest.approx(1 / (1 + tau**alpha * 0.5), rel=1e-9)


def test_resolvent_operating_point_vs_svd():
    K, _, _ = operator_for(dict(DEFAULTS, kappa=0.0, eps=1.0))
    r = resolvent_norm(K, 1e-3, 0.5)
    ref = inverse_two_norm(np.eye(K.size) + 1e-3**0.5 * K.dense)
    assert r <= 1.0
    assert r == pytest.approx(ref, rel=1e-9)


@pytest.mark.parametrize("kappa,eps,tau", [(10.0, 1.0, 1e-3), (40.0, 1.0, 1e-10), (500.0, 1.0, 1e-3),
                                           (1.0, 0.1, 1e-2)])
def test_resolvent_matches_svd_nonnormal(kappa, eps, tau):
    K, _, _ = operator_for(dict(DEFAULTS, kappa=kappa, eps=eps))
    ref = inverse_two_norm(np.eye(K.size) + tau**0.5 * K.dense)
    assert resolvent_norm(K, tau, 0.5) == pytest.approx(ref, rel=1e-9)


def test_resolvent_singular():
    with pytest.raises(np.linalg.LinAlgError):
        resolvent_norm(-np.eye(3), 1.0, 1.0)


def test_weight_spectrum_examples():
    assert np.allclose(weight_spectrum(np.array([[3.5]])), [3.5])
    _, W2 = _axis(10, 2.0)
    ev = weight_spectrum(W2)
    assert ev.shape == (9,)
    assert imag_residue(ev) < 1e-8
    assert np.all(ev.real < 0)
    W1, _ = _axis(10)
    ev1 = weight_spectrum(W1)
    assert np.max(np.abs(ev1.real)) < 0.1 * np.max(np.abs(ev1.imag))
    with pytest.raises(ValueError):
        weight_spectrum(np.zeros((2, 3)))


def test_composed_spectrum_zero():
    Wx1, Wx2 = _axis(5)
    Wy1, Wy2 = _axis(5, axis="y")
    s = composed_spectrum_2d(Wx1, Wx2, Wy1, Wy2, (0, 0, 0, 0))
    assert s.shape == (16,) and not np.any(s)


def _multiset_close(a, b, tol):
    a = np.sort_complex(np.round(a, 12))
    b = np.sort_complex(np.round(b, 12))
    return np.max(np.abs(a - b)) < tol


def test_composed_spectrum_diffusion_only():
    p = dict(DEFAULTS, kappa=0.0, eps=1.0)
    K, Ws, coefs = operator_for(p)
    assert _multiset_close(composed_spectrum_2d(*Ws, coefs), np.linalg.eigvals(-K.dense), 1e-8)


def test_composed_spectrum_pure_x_advection():
    Wx1, Wx2 = _axis(5)
    Wy1, Wy2 = _axis(5, axis="y")
    s = composed_spectrum_2d(Wx1, Wx2, Wy1, Wy2, dict(kappa_x=2.0))
    ref = -2.0 * np.tile(np.linalg.eigvals(Wx1.interior()), 4)
    assert _multiset_close(s, ref, 1e-10)


def test_composed_spectrum_random_coefficients():
    rng = np.random.default_rng(4)
    for _ in range(10):
        kx, ky, ex, ey = rng.uniform(0, 3, 4)
        K, Ws, coefs = operator_for(dict(DEFAULTS, M=4, kappa_x=kx, kappa_y=ky, eps_x=ex, eps_y=ey))
        direct = np.linalg.eigvals(-K.dense)
        composed = composed_spectrum_2d(*Ws, coefs)
        # multiset match: each composed eigenvalue pairs with a distinct direct one
        used = np.zeros(direct.size, bool)
        for lam in composed:
            d = np.where(used, np.inf, np.abs(direct - lam))
            j = int(np.argmin(d))
            assert d[j] < 1e-8 * max(1.0, abs(lam))
            used[j] = True


def test_report_fields():
    r = stability_report(kappa=0.0)
    assert isinstance(r, StabilityReport)
    assert r.resolvent_norm >= 0 and r.spectrum.size == 16
    assert r.params["tau"] == 1e-3 and r.params["alpha"] == 0.5 and r.params["M"] == 5
    assert r.max_real < 0


def test_diffusion_dominant_sweep():
    for eps in (1.0, 2.0, 5.0):
        for kappa in (0.0, 0.5, 1.0):
            if kappa > eps:
                continue
            r = stability_report(kappa=kappa, eps=eps)
            assert r.resolvent_norm <= 1.0
            assert r.max_real <= 0.0


def test_eps_sweep_monotone():
    norms = [r.resolvent_norm for r in assumption_sweep("eps", [0.5, 1, 2, 5, 10, 20, 50, 100], dict(kappa=10.0))]
    assert all(b < a for a, b in zip(norms, norms[1:]))
    assert norms[-1] < 0.05


def test_M_sweep_monotone():
    reps = assumption_sweep("M", [3, 5, 8, 12, 20], dict(kappa=500.0, eps=1.0))
    norms = [r.resolvent_norm for r in reps]
    assert all(b < a for a, b in zip(norms, norms[1:]))
    assert [r.spectrum.size for r in reps] == [4, 16, 49, 121, 361]


def test_sweep_order_and_axis_check():
    reps = assumption_sweep("tau", [1e-2, 1e-4], dict(kappa=0.0))
    assert [r.params["tau"] for r in reps] == [1e-2, 1e-4]
    with pytest.raises(ValueError):
        assumption_sweep("alpha", [0.5])


def test_domain_extent_sweep_runs():
    reps = assumption_sweep("domain_extent", [0.5, 1.0, 2.0], dict(kappa=1.0, eps=1.0))
    assert all(0 < r.resolvent_norm <= 1.0 for r in reps)


def test_weight_matrix_input_types():
    W1, _ = _axis(4)
    assert isinstance(W1, WeightMatrix)
    assert np.allclose(np.sort_complex(weight_spectrum(W1)), np.sort_complex(np.linalg.eigvals(W1.interior())))

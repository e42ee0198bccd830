# # Nonlinear Schrodinger solitons and stability sweeps

from fade.problems import make_problem
from fade.stability import assumption_sweep, critical_ratio
from fade.steppers import run

p = make_problem("ex65", alpha=1.0)
for scheme in ("frac-implicit", "rk-gill"):
    tr = run(p, M=100, tau=2e-3, t_end=0.1, scheme=scheme, store="final")
    print(f"{scheme:14s} e2(re)={tr.errors['real'].e2:.3e}  e2(im)={tr.errors['imag'].e2:.3e}")

# resolvent norm of the implicit step as diffusion grows
for eps, r in zip([0.1, 1, 10, 100], assumption_sweep("eps", [0.1, 1, 10, 100])):
    print(f"eps={eps:<6}  ||A^-1||={r.resolvent_norm:.4f}")

print("critical kappa/eps:", round(critical_ratio(fixed=dict(tau=1e-10, eps=1.0)), 2))

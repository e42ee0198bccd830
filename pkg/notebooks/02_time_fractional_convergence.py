# # Spatial convergence for a time-fractional diffusion problem
#
# Caputo derivative in time (GL1 weights), CTB collocation in space.
# Halving h should cut the error by about four.

from fade.problems import convergence_rates, make_problem
from fade.steppers import run

p = make_problem("ex63", alpha=0.3)
reps = convergence_rates([run(p, M=M, tau=5e-3, t_end=1.0, store="final").errors["u"]
                          for M in (8, 16, 32, 64)])
for M, r in zip((8, 16, 32, 64), reps):
    print(f"M={M:3d}  e2={r.e2:.4e}  einf={r.einf:.4e}  rate={r.rate_e2}")

# third-order temporal weights on the same problem
tr = run(p, M=32, tau=5e-3, t_end=1.0, weights="ho3", store="final")
print("HO3, M=32:", tr.errors["u"].e2)

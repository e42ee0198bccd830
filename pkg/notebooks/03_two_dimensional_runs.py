# # Two-dimensional problems
#
# A 2D time-fractional problem solved with the Kronecker-structured
# operator, and a translating Gaussian pulse advanced with RK-Gill.

import numpy as np

from fade.problems import make_problem
from fade.steppers import run

p = make_problem("ex64", alpha=0.5)
for M in (12, 24, 48):
    tr = run(p, M=M, tau=1e-2, t_end=0.5, store="final")
    print(f"ex64 label {M}: einf={tr.errors['u'].einf:.4e}  ({tr.runtime:.2f}s)")

tr = run(make_problem("ex66"), M=80, tau=6.25e-3, t_end=1.25, scheme="rk-gill", store="final")
f = tr.field()
X, Y = tr.grid.mesh()
k = np.argmax(f)
print(f"pulse peak {f.ravel()[k]:.5f} at ({X.ravel()[k]:.3f}, {Y.ravel()[k]:.3f}), "
      f"einf={tr.errors['u'].einf:.3e}")

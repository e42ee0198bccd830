# # Spline differential quadrature weights
#
# Build first, second and fractional derivative matrices on a uniform grid
# and apply them to a smooth test function.

import numpy as np
from scipy.special import gamma

from fade.dq_weights import first_order_weights, fractional_weights, second_order_weights_direct
from fade.splines import CTB, CUBIC_B, Grid

g = Grid(0.0, 1.0, 32)
x = g.x
u = np.sin(np.pi * x)

# first derivative on the CTB basis
W1 = first_order_weights(CTB, g)
err1 = np.max(np.abs(W1.apply(u) - np.pi * np.cos(np.pi * x)))
print(f"W1 max error on sin(pi x): {err1:.2e}")

# second derivative by direct collocation (cubic B).  sin(pi x) has zero
# end curvature so the boundary rows are accurate too
W2 = second_order_weights_direct(CUBIC_B, g)
err2 = np.max(np.abs(W2.apply(u) + np.pi**2 * u))
print(f"W2 max error on sin(pi x): {err2:.2e}")

# fractional rows against the closed form D^beta x^2 = 2 x^(2-beta) / Gamma(3-beta).
# x^2 has nonzero curvature at the left end, which the modified basis cannot
# represent, so the error is large in the first rows and decays geometrically.
for beta in (1.2, 1.5, 2.0):
    F = fractional_weights(beta, g)
    err = np.abs(F.interior_rows() @ x**2 - 2 * x[1:-1] ** (2 - beta) / gamma(3 - beta))
    head = " ".join(f"{e:.1e}" for e in err[:5])
    print(f"beta={beta}: first rows {head}  "
          f"rows 8..-8 max {err[8:-8].max():.1e}")

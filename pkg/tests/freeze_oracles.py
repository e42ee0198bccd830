"""Regenerate tests/data/oracle_values.json from the independent oracles.

    python3 tests/freeze_oracles.py
"""
import json
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).parent))
import oracles  # noqa: E402

OUT = Path(__file__).parent / "data" / "oracle_values.json"


def main():
    rng = np.random.default_rng(20240611)
    data = {}

    data["gl"] = {str(a): oracles.gl_binomial(a, 12) for a in (0.1, 0.5, 0.9, 1.0)}

    ho3 = {}
    for a in (0.3, 0.5, 1.0):
        w, im = oracles.ho3_triple_sum(a, 10)
        ho3[str(a)] = {"w": w, "imag": im}
    data["ho3"] = ho3

    ml = []
    for a, z in [(0.2, -0.5), (0.3, -3.0), (0.5, -1.0), (0.5, -7.5), (0.7, 0.9), (0.8, -12.0),
                 (0.9, -20.0), (0.95, -4.0), (0.5, 0.31622776601683794), (0.2, 0.6309573444801932)]:
        ml.append([a, z, oracles.ml_series(a, z, dps=120)])
    for z in (-30.0, -200.0, -4000.0):
        ml.append([0.5, z, oracles.ml_half(z)])
    data["mittag_leffler"] = ml

    # RL derivatives of cubic B-splines, h = 0.1 on [0, 1]
    a, M = 0.0, 10
    h = 1.0 / M
    rl = []
    while len(rl) < 200:
        m = int(rng.integers(-1, M + 2))
        beta = float(rng.uniform(1.05, 1.95))
        x = float(rng.uniform(a + 0.02, 1.0))
        rl.append([m, beta, x, oracles.rl_quadrature(m, beta, x, a, h)])
    data["rl_bspline"] = {"a": a, "M": M, "samples": rl}
    data["rl_spot"] = [3, 1.5, 1.0, 0.25, oracles.rl_quadrature(3, 1.5, 1.0, 0.0, 0.25)]

    cb = []
    for _ in range(50):
        m = int(rng.integers(-1, 9))
        x = float(rng.uniform(-0.3, 1.3))
        cb.append([m, x, float(oracles.cubic_b(m, x, 0.0, 0.125)[0]),
                   float(oracles.cubic_b_deriv(m, x, 0.0, 0.125, 1)[0]),
                   float(oracles.cubic_b_deriv(m, x, 0.0, 0.125, 2)[0])])
    data["cubic_b"] = {"a": 0.0, "M": 8, "samples": cb}

    data["heat_alpha1"] = {"x": 0.5, "t": 1.0, "u": oracles.heat_series_numeric(0.5, 1.0)}

    OUT.parent.mkdir(exist_ok=True)
    OUT.write_text(json.dumps(data, indent=1))
    print(f"wrote {OUT}")


if __name__ == "__main__":
    main()

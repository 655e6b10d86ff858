"""Print normalized correlation curves for the singlet and sign models, plus spin 1 and 2.

    python3 scripts/correlation_curves.py [--events N] [--step-deg D] [--seed S]
"""
import argparse
import math

import numpy as np

from spincorr import ModelSpec, correlation_curve

MODELS = [ModelSpec.qm(), ModelSpec.lhv(), ModelSpec.conservation(2), ModelSpec.conservation(4, "adjacent")]


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--events", type=int, default=100_000)
    p.add_argument("--step-deg", type=float, default=15.0)
    p.add_argument("--seed", type=int, default=1)
    args = p.parse_args()

    thetas = np.radians(np.arange(0.0, 180.0 + 1e-9, args.step_deg))
    curves = {m.descriptor + f"/2S={m.spin.two_s}": correlation_curve(m, thetas, args.events, args.seed) for m in MODELS}
    print("theta_deg," + ",".join(f"{k},{k}_analytic" for k in curves))
    for i, t in enumerate(thetas):
        cells = [f"{c[i].estimate:+.4f},{c[i].analytic:+.4f}" for c in curves.values()]
        print(f"{math.degrees(t):g}," + ",".join(cells))


if __name__ == "__main__":
    main()

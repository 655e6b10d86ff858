"""Per-group conservation residuals (in units of S) across a 15 degree grid."""
import argparse
import math

from spincorr import AccumulatorState, ModelSpec, conservation_residual
from spincorr.simulate import simulate_angles

MODELS = [ModelSpec.qm(), ModelSpec.lhv(), ModelSpec.conservation(2), ModelSpec.conservation(3, "adjacent")]


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--events", type=int, default=1_000_000)
    p.add_argument("--seed", type=int, default=3)
    args = p.parse_args()

    for k, model in enumerate(MODELS):
        worst, ok = 0.0, True
        for i in range(13):
            t = math.radians(15 * i)
            batch = simulate_angles(model, 0.0, t, args.events, args.seed, stream=100 * k + i)
            audit = conservation_residual(AccumulatorState.from_batch(batch), t, normalized=True)
            worst = max(worst, audit.max_abs)
            ok &= audit.consistent()
        label = f"{model.descriptor} 2S={model.spin.two_s}"
        print(f"{label:28s} max |r| = {worst:.5f}   {'conserved' if ok else 'violated'} on average")


if __name__ == "__main__":
    main()

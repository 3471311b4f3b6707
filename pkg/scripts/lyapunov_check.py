"""Monte Carlo check that the logged Lyapunov function never increases.

Draws random stable plants and valid gains with constant uncertainty and
reports the largest one-step increase of V and the largest logged Vdot.
"""
import argparse
import time

import numpy as np

from diw_mrac import config_from_dict, run_closed_loop


def random_config(rng, t_end):
    b2, b6 = rng.uniform(-3, -0.5), rng.uniform(-4, -0.5)
    b3, b7 = (rng.choice([-1, 1]) * rng.uniform(0.5, 2) for _ in range(2))
    pole1, pole3 = rng.uniform(-10, -0.5, size=2)
    return config_from_dict({
        "model": {"beta": [rng.uniform(-2, 2), b2, b3, rng.uniform(-2, 2), rng.uniform(-2, 2), b6, b7]},
        "controller": {
            "k1": (b2 - pole1) / b3, "k3": (b6 - pole3) / b7,
            "gamma1": rng.uniform(1, 100), "gamma3": rng.uniform(1, 100),
        },
        "uncertainty": {"d1": rng.uniform(-1, 1), "d3": rng.uniform(-1, 1)},
        "initial": {"v1": rng.uniform(-1, 1), "u3": rng.uniform(-1, 1)},
        "simulation": {"t_end": t_end},
    })


def main():
    ap = argparse.ArgumentParser(description="Lyapunov monotonicity Monte Carlo")
    ap.add_argument("-n", type=int, default=100)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--t-end", type=float, default=5.0)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    start = time.perf_counter()
    dv, rate = [], []
    for _ in range(args.n):
        traj = run_closed_loop(random_config(rng, args.t_end))
        dv.append(np.max(np.diff(traj["V"])))
        rate.append(np.max(traj["Vdot"]))
    print(f"configs={args.n}  max dV/step={max(dv):.3e}  max Vdot={max(rate):.3e}  "
          f"elapsed={time.perf_counter() - start:.1f}s")


if __name__ == "__main__":
    main()

"""Global RK4 error against the exact affine solution as dt halves."""
import argparse

import numpy as np
from scipy.linalg import expm

from diw_mrac import config_from_dict, run_closed_loop
from diw_mrac.sim import ClosedLoop, _Exogenous, initial_state

STATE = ("v1", "u3", "vr1", "ur3", "dhat1", "dhat3")
BASE = {
    "model": {"beta": [1, -2, 1, 1, 1, -3, 1]},
    "uncertainty": {"d1": 0.5, "d3": -0.4},
    "commands": {"r1": 2.0, "r3": 1.0, "pd1": 0.3},
    "initial": {"v1": 1.5, "u3": -1.0, "vr1": 0.2, "ur3": 0.7, "dhat1": -0.3, "dhat3": 0.6},
}


def exact(cfg, times):
    loop = ClosedLoop(cfg)
    ex = _Exogenous(cfg)(0.0)
    c = loop.derivative(np.zeros(6), ex)
    M = np.zeros((7, 7))
    M[:6, :6] = np.column_stack([loop.derivative(np.eye(6)[j], ex) - c for j in range(6)])
    M[:6, 6] = c
    z0 = np.append(initial_state(cfg, ex), 1.0)
    return np.array([(expm(M * t) @ z0)[:6] for t in times])


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--dt", type=float, default=0.02)
    ap.add_argument("--halvings", type=int, default=4)
    ap.add_argument("--t-end", type=float, default=1.0)
    args = ap.parse_args()

    prev = None
    for k in range(args.halvings + 1):
        dt = args.dt / 2 ** k
        cfg = config_from_dict({**BASE, "simulation": {"dt": dt, "t_end": args.t_end}})
        traj = run_closed_loop(cfg)
        sim = np.column_stack([traj[s] for s in STATE])
        err = float(np.max(np.abs(sim - exact(cfg, traj.t))))
        ratio = "" if prev is None else f"  ratio={prev / err:.2f}"
        print(f"dt={dt:.6g}  max error={err:.3e}{ratio}")
        prev = err


if __name__ == "__main__":
    main()

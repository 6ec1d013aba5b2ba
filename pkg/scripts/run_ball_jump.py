#!/usr/bin/env python3
"""Ramp-shrinking experiment: which systems tolerate a control jump?

Both built-in mechanical models are started at rest and driven by a smooth
ramp that moves the control from 0 to a target over a shrinking time tau.
For the ball on the turntable the final state converges as tau -> 0, so the
response to an outright jump is well defined; for the Roller Racer the free
momentum grows without bound, so no jump limit exists.
"""

import argparse

import numpy as np

from nonholo import ControlSignal, IntegratorConfig, build_model, integrate


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--target", type=float, default=0.4, help="control value after the ramp")
    ap.add_argument(
        "--tau", type=float, nargs="+", default=[2e-3, 1e-3, 5e-4], help="ramp durations"
    )
    args = ap.parse_args()

    taus = sorted(args.tau, reverse=True)
    t1 = 2.0 * taus[0]

    for name in ("rolling-ball", "roller-racer"):
        model = build_model(name)
        print(f"== {name}: ramp 0 -> {args.target} over tau, rest start ==")
        prev = None
        for tau in taus:
            ramp = ControlSignal.ramp(0.0, args.target, 0.0, tau)
            traj = integrate(
                model.spec,
                model.default_q0,
                np.zeros(model.spec.dim),
                ramp,
                (0.0, t1),
                IntegratorConfig(dt=tau / 50.0),
            )
            line = f"tau={tau:.1e}  |p_I(T)|={float(np.abs(traj.p_I[-1]).max()):.4e}"
            if model.extract_closed is not None:
                xi = model.extract_closed(traj.q[-1], traj.p_I[-1])[3]
                line += f"  xi(T)={xi:.6f}"
            if prev is not None:
                gap = max(
                    float(np.abs(traj.q[-1] - prev.q[-1]).max()),
                    float(np.abs(traj.p_I[-1] - prev.p_I[-1]).max()),
                )
                line += f"  endpoint gap vs previous tau: {gap:.4e}"
            print(line)
            prev = traj
        print()
    print("A shrinking gap means the jump response converges; a growing one means it cannot.")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())

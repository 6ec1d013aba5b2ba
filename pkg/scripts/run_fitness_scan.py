#!/usr/bin/env python3
"""Sampled jump-fitness scan for one built-in model.

Runs the two equivalent quadratic-form scans (unit control rates, and unit
covectors on the drive coprojection image), prints each report with its worst
witness, and — when the model ships a constancy basis — the structural
conditions that would imply fitness outright.
"""

import argparse

from nonholo import (
    BoxSampler,
    build_model,
    model_names,
    psi_scan,
    sufficiency_check,
    theta_on_III_scan,
)


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--model", default="rolling-ball", choices=model_names())
    ap.add_argument("--samples", type=int, default=500)
    ap.add_argument("--tol", type=float, default=1e-7)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    model = build_model(args.model)
    psi = psi_scan(
        model.spec,
        BoxSampler(model.sample_box, seed=args.seed),
        n_samples=args.samples,
        tol=args.tol,
    )
    theta = theta_on_III_scan(
        model.spec,
        BoxSampler(model.sample_box, seed=args.seed + 1),
        n_samples=args.samples,
        tol=args.tol,
    )
    print(psi.to_text())
    print(theta.to_text())

    if model.constancy_basis is not None:
        structural = sufficiency_check(
            model.spec,
            model.constancy_basis,
            BoxSampler(model.sample_box, seed=args.seed + 2),
            declared_flat=model.declared_flat,
        )
        print(structural.to_text())

    if psi.verdict != theta.verdict:
        print("the two scans disagree — tighten tolerances or add samples")
        return 5
    if psi.verdict == "fit":
        return 0
    return 4 if psi.verdict == "not-fit" else 5


if __name__ == "__main__":
    raise SystemExit(main())

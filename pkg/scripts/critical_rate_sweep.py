#!/usr/bin/env python3
"""Locate the critical loss rate of the scalar single-sensor model.

Probes a sweep of loss rates with the exact expected-trace engine and
bisects the stability boundary, which for a scalar gain a sits at 1/a^2.
"""
import argparse
import time

import numpy as np

from lossysched import (
    expected_trace_growth,
    map_region,
    probe_oracle,
    uniform_loss_builder,
)

import _models


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--a", type=float, default=2.0, help="plant gain")
    ap.add_argument("--tol", type=float, default=0.01, help="bracket width")
    ap.add_argument("--T", type=int, default=10_000)
    args = ap.parse_args()

    plant, base_net = _models.scalar_single_sensor(a=args.a)
    builder = uniform_loss_builder(base_net)
    critical = 1.0 / (args.a * args.a)
    print(f"analytic critical rate: {critical:.4f}")

    print(f"{'lambda':>8}  {'verdict':>12}  {'final log E[trace]':>20}")
    for lam in np.linspace(0.05, 0.95 * min(1.0, 2.5 * critical), 7):
        out = expected_trace_growth(plant, builder(np.array([lam])), T=args.T)
        print(
            f"{lam:>8.3f}  {out.verdict.value:>12}  "
            f"{out.log_expected_trace[-1]:>20.3f}"
        )

    t0 = time.perf_counter()
    oracle = probe_oracle(plant, builder, T=args.T, replications=20)
    region = map_region(oracle, [[1.0]], tol=args.tol)
    b = region.boundaries[0]
    print(
        f"bisected bracket: [{b.stable_scale:.4f}, {b.unstable_scale:.4f}] "
        f"in {time.perf_counter() - t0:.0f}s"
    )


if __name__ == "__main__":
    main()

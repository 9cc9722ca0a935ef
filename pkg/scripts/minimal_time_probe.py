#!/usr/bin/env python3
"""Probe the synthesis as the horizon approaches the threshold time.

The minimal horizon for the employed construction is
2*pi*(1/|c| + 1/|1-c| + 1/|1+c|).  Whether a smaller horizon could work is
left open here; this script records how the constraint-system conditioning
and the minimum control norm behave as T walks down toward (and below) the
threshold.
"""

import argparse

import numpy as np

from memwave.model import FourierField, ModelParams, minimal_control_time
from memwave.moment_control import (
    SynthesisConditioningError,
    moment_rhs,
    synthesize_least_norm,
)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--M", type=float, default=1.0)
    parser.add_argument("--c", type=float, default=2.0)
    parser.add_argument("--N", type=int, default=6)
    args = parser.parse_args()

    t0 = minimal_control_time(args.c)
    print(f"threshold horizon: {t0:.6f}")
    print(f"{'T':>10} {'T/T0':>8} {'norm':>14} {'note'}")
    for factor in (1.20, 1.10, 1.05, 1.02, 1.01, 1.001, 0.999, 0.98, 0.9, 0.7):
        T = t0 * factor
        p = ModelParams(M=args.M, c=args.c, T=T, omega0=((0.0, np.pi / 2),),
                        N=args.N)
        y0 = FourierField.from_coeffs({1: 0.1, -1: 0.1}, p.N)
        md = moment_rhs(y0, FourierField.zero(p.N), p, p.N)
        import warnings

        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                u = synthesize_least_norm(p, md)
            print(f"{T:10.4f} {factor:8.3f} {u.l2_norm():14.6f}")
        except SynthesisConditioningError as exc:
            print(f"{T:10.4f} {factor:8.3f} {'-':>14} singular "
                  f"(cond ~ {exc.condition_number:.2e})")


if __name__ == "__main__":
    main()

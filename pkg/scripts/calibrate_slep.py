"""Calibrate the query-envelope constants of the linear-system solver.

``C_M`` and ``C_b`` follow from the phase-register width alone:
``U_M = 2 (2^t - 1)`` with ``t <= log2(2 (8 kappa/3)^2 alpha_M / eps) + 4``
gives ``U_M < 32 * 2 * (64/9) alpha_M kappa^2 / eps`` and ``U_b = 2 U_M + 1``.
``C_A`` also absorbs the inverse polynomial's degree, which has no closed form
here, so it is measured over a grid and frozen with 25% headroom.

Counts come from ``predicted_query_counts``; the test suite checks those
predictions against measured counter deltas.

Usage: python scripts/calibrate_slep.py [--quick]
"""
from __future__ import annotations

import argparse
import itertools
import math
import time

from qslep.slep import C_A, C_B, C_M, _log_term, predicted_query_counts

KAPPAS = (1.0, 1.5, 2.0, 3.0, 4.0, 6.0, 8.0)
ALPHAS = (0.25, 0.5, 1.0, 1.5, 2.0, 4.0)
EPSILONS = (0.025, 0.05, 0.1, 0.2)
HEADROOM = 1.25


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--quick", action="store_true", help="kappa <= 4 only")
    args = parser.parse_args()
    kappas = [k for k in KAPPAS if k <= 4] if args.quick else KAPPAS
    start = time.perf_counter()
    worst = {"U_M": (0.0, None), "U_b": (0.0, None), "U_A": (0.0, None)}
    for kappa, alpha_m, eps in itertools.product(kappas, ALPHAS, EPSILONS):
        if eps > alpha_m:
            continue
        counts = predicted_query_counts(alpha_m, kappa, eps)
        base = alpha_m * kappa**2 / eps
        ratios = {
            "U_M": counts["U_M"] / base,
            "U_b": counts["U_b"] / base,
            "U_A": counts["U_A"] / (base * kappa * _log_term(alpha_m, kappa, eps)),
        }
        for key, r in ratios.items():
            if r > worst[key][0]:
                worst[key] = (r, (kappa, alpha_m, eps))
    print(f"grid: kappa {kappas}, alpha_M {ALPHAS}, eps {EPSILONS} ({time.perf_counter() - start:.0f}s)")
    for key, frozen in (("U_M", C_M), ("U_b", C_B), ("U_A", C_A)):
        ratio, where = worst[key]
        print(
            f"{key}: max count/envelope-shape {ratio:9.1f} at (kappa, alpha_M, eps) = {where}; "
            f"suggested {math.ceil(HEADROOM * ratio) if key == 'U_A' else math.ceil(ratio)}; frozen {frozen}"
        )


if __name__ == "__main__":
    main()

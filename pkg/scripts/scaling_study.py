"""Query-count scaling of the estimators (writes a CSV table to stdout or --out).

Rows: (experiment, parameter, eps, oracle, queries). Covers
  * the block-access estimator's U_M count over eps and alpha_M,
  * the solver's U_M / U_b / U_A counts over eps and kappa,
  * the reduction's f-query count over eps and d.
Each block ends with the fitted log-log slope against 1/eps.

These are counts of *these* estimators; they illustrate, not prove, the
lower-bound envelopes.
"""
from __future__ import annotations

import argparse
import csv
import sys

import numpy as np

from qslep.blockenc import dilate_exact
from qslep.cli import fit_scaling
from qslep.estimate import bevhm
from qslep.oracle import QueryCountedUnitary
from qslep.reduce import am_instance, end_to_end_plan
from qslep.simkern import make_rng, random_hermitian, random_unitary
from qslep.slep import predicted_query_counts

EPS = (0.2, 0.1, 0.05, 0.025)


def bevhm_rows(rng):
    m = random_hermitian(4, rng, 1.0)
    v = random_unitary(4, rng)
    for alpha in (0.5, 1.0, 2.0):
        for eps in EPS:
            block = dilate_exact(alpha * m, alpha)
            res = bevhm(2, block, eps, QueryCountedUnitary.primitive("V", v), 0)
            yield "bevhm", f"alpha_M={alpha}", eps, "U_M", res.query_counts["U_M"]


def slep_rows():
    for kappa in (1.0, 2.0, 4.0):
        counts = {eps: predicted_query_counts(1.0, kappa, eps) for eps in EPS}
        for oracle in ("U_M", "U_b", "U_A"):
            for eps in EPS:
                yield "slep", f"kappa={kappa}", eps, oracle, counts[eps][oracle]


def reduction_rows(rng):
    for n, d in ((2, 2), (3, 4)):
        values = rng.uniform(0, 1, d << (n - 1))
        for eps in EPS:
            res = end_to_end_plan(am_instance(values, eps), n, d).run(0)
            yield "reduce", f"n={n},d={d}", eps, "f", res.query_counts["f"]


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--out", help="CSV path (default stdout)")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()
    rng = make_rng(args.seed, 0)
    rows = [*bevhm_rows(rng), *slep_rows(), *reduction_rows(rng)]
    out = open(args.out, "w", newline="", encoding="utf-8") if args.out else sys.stdout
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["experiment", "parameter", "eps", "oracle", "queries", "slope"])
    groups: dict[tuple, list] = {}
    for row in rows:
        writer.writerow(row + ("",))
        groups.setdefault(row[:2] + row[3:4], []).append((row[2], row[4]))
    for (experiment, parameter, oracle), points in groups.items():
        slope = fit_scaling(points).slope
        writer.writerow([experiment, parameter, "", oracle, "", f"{slope:.4f}"])
    if args.out:
        out.close()


if __name__ == "__main__":
    np.set_printoptions(precision=4)
    main()

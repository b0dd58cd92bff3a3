"""Sweep beta across the critical line alpha d/2 + beta = 1 and report the verdicts.

The default factors straddle the critical beta symmetrically; pass --factors
for a finer scan.
"""
import argparse
import os

from inls_lab.harness.experiments import named, threshold_axis
from inls_lab.harness.runner import emit_plot_csv, summary_table, sweep


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--factors", type=float, nargs="+", default=[0.9, 0.95, 1.0, 1.05, 1.1])
    ap.add_argument("--alpha", type=float, default=1.2)
    ap.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    ap.add_argument("--out", default="results")
    args = ap.parse_args()

    template = named("threshold").with_value("params.alpha", args.alpha)
    axis = threshold_axis(args.factors, alpha=args.alpha)
    records = sweep(template, axis, workers=args.workers, base_dir=args.out)
    crit = 1 - args.alpha / 2
    for beta, rec in zip(axis[0][1], records):
        side = "at" if abs(beta - crit) < 1e-12 else ("below" if beta < crit else "above")
        print(f"beta={beta:.4f} ({side} critical)  slope={rec['slope']:.4f}  {rec['verdict']}")
    print()
    print(summary_table(records))
    path = os.path.join(args.out, "threshold_potential.csv")
    emit_plot_csv(records, "potential_sup", path)
    print(f"wrote {path}")


if __name__ == "__main__":
    main()

"""Run registered experiments, persist records and write plot data.

    python3 scripts/run_named.py P1 radial2d P3 --out results
"""
import argparse
import os

from inls_lab.harness.experiments import REGISTRY, named
from inls_lab.harness.runner import emit_plot_csv, run_experiment, summary_table


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("names", nargs="*", default=["P1", "radial2d", "P3", "inverse_square", "free"],
                    choices=sorted(REGISTRY))
    ap.add_argument("--out", default="results")
    args = ap.parse_args()

    records = []
    for name in args.names:
        rec = run_experiment(named(name), base_dir=args.out)
        records.append(rec)
        print(f"{name:16} {rec['verdict']}")
    print()
    print(summary_table(records))
    for quantity in ("err_corrected", "err_ablated"):
        path = os.path.join(args.out, f"{quantity}.csv")
        emit_plot_csv([r for r in records if r.get("series")], quantity, path)
        print(f"wrote {path}")


if __name__ == "__main__":
    main()

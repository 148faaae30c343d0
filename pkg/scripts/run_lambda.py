"""Reconstruction-weight sweep: HSIC, reconstruction error and NMI per lambda.

    python3 scripts/run_lambda.py --config configs/spirals.json --lambdas 1 1e-2 1e-4 1e-6 1e-8 0

Thin wrapper over ``knet sweep-lambda`` that prints the sweep as a table.
"""

import argparse
import csv
import sys
from pathlib import Path

from knet.cli import main as knet_main


def main():
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--config", required=True)
    p.add_argument("--lambdas", nargs="+", default=None)
    p.add_argument("--out", default="out/lambda")
    args = p.parse_args()
    argv = ["--config", args.config, "--out", args.out, "--quiet", "sweep-lambda"]
    if args.lambdas:
        argv += ["--lambdas", ",".join(args.lambdas)]
    code = knet_main(argv)
    if code:
        sys.exit(code)
    with open(Path(args.out) / "sweep.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    print(f"{'lambda':>8s} {'hsic':>12s} {'recon':>12s} {'nmi_eig':>8s} {'nmi_sma':>8s}")
    for r in rows:
        print(f"{float(r['lambda']):8.0e} {float(r['hsic']):12.5g} {float(r['recon_error']):12.5g} "
              f"{float(r['nmi_eig']):8.4f} {float(r['nmi_sma']):8.4f}")


if __name__ == "__main__":
    main()

"""Out-of-sample runs: train on a uniform subsample, predict the full set.

    python3 scripts/run_oos.py --config configs/spirals.json --fraction 0.1 --subsample-seeds 0 1 2

The subsample seed is varied independently of the training seed so the
sensitivity to which rows are drawn is visible.
"""

import argparse
import math
from dataclasses import replace
from pathlib import Path

from knet.cli import RunConfig
from knet.cluster_eval import nmi
from knet.data import LabeledDataset, pca_reduce, standardize, subsample
from knet.trainer import fit, predict


def main():
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--config", required=True)
    p.add_argument("--fraction", type=float)
    p.add_argument("--mode", default="nearest_center", choices=["nearest_center", "kmeans_refit"])
    p.add_argument("--subsample-seeds", nargs="+", type=int, default=[0])
    args = p.parse_args()
    run = RunConfig.load(args.config)
    fraction = args.fraction or run.subsample_fraction
    raw = run.dataset.load(Path(args.config).parent)
    X = raw.X if run.dataset.pca_dim is None else pca_reduce(raw.X, run.dataset.pca_dim)[0]
    if X.shape[0] < run.knet.c * 2 * math.ceil(1 / fraction):
        raise SystemExit("dataset too small for this fraction")
    print("subsample_seed nmi_train nmi_full")
    for s in args.subsample_seeds:
        sub, _ = subsample(LabeledDataset(X, raw.labels), fraction, seed=s, n_clusters=run.knet.c)
        Xs, scaler = standardize(sub.X)
        model = fit(Xs, replace(run.knet))
        full = predict(model, scaler.transform(X), args.mode)
        print(f"{s:14d} {nmi(sub.labels, model.labels):9.4f} {nmi(raw.labels, full):8.4f}")


if __name__ == "__main__":
    main()

"""NMI of KNet (EIG and SMA) and plain spectral clustering per dataset config.

    python3 scripts/run_table2.py --seeds 0 1 2 --configs configs/moons.json configs/spirals.json

Prints mean, std and min NMI over the seeds and writes one JSON row per run to
``--out`` (default out/table2.jsonl).
"""

import argparse
import json
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from knet.cli import RunConfig, prepare
from knet.cluster_eval import kmeans, nmi
from knet.spectral import spectral_embedding
from knet.trainer import fit, resolve_sigma

ROOT = Path(__file__).resolve().parents[1]


def run_one(path, seed):
    run = RunConfig.load(path)
    if run.dataset.generator is not None:
        run.dataset.params["seed"] = seed
    ds = prepare(run.dataset.load(Path(path).parent), run.dataset)
    rows = []
    for mode in ("EIG", "SMA"):
        t = time.perf_counter()
        model = fit(ds.X, replace(run.knet, seed=seed, u_update=mode))
        rows.append({"method": f"KNet_{mode}", "nmi": nmi(ds.labels, model.labels),
                     "seconds": time.perf_counter() - t})
    t = time.perf_counter()
    U = spectral_embedding(ds.X, resolve_sigma(ds.X, run.knet), run.knet.c)
    labels, _ = kmeans(U, run.knet.c, run.knet.kmeans_restarts, seed=seed)
    rows.append({"method": "SC", "nmi": nmi(ds.labels, labels), "seconds": time.perf_counter() - t})
    for r in rows:
        r.update(dataset=Path(path).stem, seed=seed)
    return rows


def main():
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--configs", nargs="+", default=[str(ROOT / "configs" / f"{n}.json")
                                                    for n in ("moons", "spirals", "wine")])
    p.add_argument("--seeds", nargs="+", type=int, default=[0])
    p.add_argument("--out", default="out/table2.jsonl")
    args = p.parse_args()
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    rows = []
    with out.open("w") as fh:
        for path in args.configs:
            for seed in args.seeds:
                for row in run_one(path, seed):
                    fh.write(json.dumps(row) + "\n")
                    fh.flush()
                    rows.append(row)
    print(f"{'dataset':10s} {'method':10s} {'mean':>7s} {'std':>7s} {'min':>7s}")
    for name in dict.fromkeys(r["dataset"] for r in rows):
        for method in ("KNet_EIG", "KNet_SMA", "SC"):
            v = np.array([r["nmi"] for r in rows if r["dataset"] == name and r["method"] == method])
            print(f"{name:10s} {method:10s} {v.mean():7.4f} {v.std():7.4f} {v.min():7.4f}")


if __name__ == "__main__":
    main()

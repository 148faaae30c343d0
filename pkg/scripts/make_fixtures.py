"""Write the real-data CSV fixtures under data/.

Wine (178 x 13, 3 cultivars) is the UCI table bundled with scikit-learn, so
this script needs scikit-learn but the package itself does not. The original
683-row Wisconsin breast cancer table is not bundled anywhere offline; drop a
CSV with a ``label`` column at data/cancer.csv to enable that soft target.
"""

import argparse
from pathlib import Path

import numpy as np

from knet.data import LabeledDataset


def write_wine(path):
    from sklearn.datasets import load_wine

    bunch = load_wine()
    names = [n.replace("/", "_") for n in bunch.feature_names]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(names + ["label"]) + "\n")
        for row, lab in zip(bunch.data, bunch.target):
            fh.write(",".join(repr(float(v)) for v in row) + f",{int(lab)}\n")
    return LabeledDataset(bunch.data, bunch.target, "wine")


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--out", default=str(Path(__file__).resolve().parents[1] / "data"))
    args = p.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ds = write_wine(out / "wine.csv")
    print(f"wrote {out / 'wine.csv'}: N={ds.X.shape[0]} d={ds.X.shape[1]} c={len(np.unique(ds.labels))}")


if __name__ == "__main__":
    main()

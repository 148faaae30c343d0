"""Command-line entry point.

    knet gen moons --n 1000 --seed 7 --out moon.csv
    knet --config run.json --out results/ fit
    knet --config run.json oos --fraction 0.25 --mode nearest_center
    knet --config run.json sweep-lambda --lambdas 1,1e-8,0
    knet --config run.json baseline-sc

A run config is a JSON object; see ``RunConfig`` for the keys.
"""

import argparse
import csv
import json
import logging
import math
import sys
import time
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .cluster_eval import kmeans, nmi
from .data import (LabeledDataset, gen_blobs, gen_moons, gen_spirals, load_csv, pca_reduce,
                   standardize, subsample, write_csv)
from .errors import KNetError, ParameterError
from .kernel import degree_matrix, gaussian_kernel, median_sigma
from .spectral import laplacian, spectral_embedding, top_eigenpairs
from .trainer import KNetConfig, fit, learned_kernel, predict, resolve_sigma

log = logging.getLogger("knet")

GENERATORS = {"moons": gen_moons, "spirals": gen_spirals, "blobs": gen_blobs}


@dataclass
class DatasetSpec:
    """Either a generator name with its keyword arguments or a CSV path."""

    generator: Optional[str] = None
    params: dict = field(default_factory=dict)
    csv: Optional[str] = None
    label_column: Optional[str] = "label"
    pca_dim: Optional[int] = None
    standardize: bool = True

    def __post_init__(self):
        if (self.generator is None) == (self.csv is None):
            raise ParameterError("dataset needs exactly one of 'generator' or 'csv'")
        if self.generator is not None and self.generator not in GENERATORS:
            raise ParameterError(f"unknown generator {self.generator!r}; "
                                 f"choose from {sorted(GENERATORS)}")

    def load(self, base_dir=Path(".")):
        if self.generator is not None:
            try:
                return GENERATORS[self.generator](**self.params)
            except TypeError as exc:
                raise ParameterError(f"bad parameters for {self.generator}: {exc}") from None
        path = Path(self.csv)
        if not path.is_absolute():
            path = base_dir / path
        return load_csv(path, self.label_column)


@dataclass
class RunConfig:
    """Everything a command needs.

    Keys: ``dataset`` (DatasetSpec fields), ``knet`` (KNetConfig fields),
    ``output_dir`` (default "out"), ``subsample_fraction`` (default 0.25, used by
    oos), ``oos_mode`` (nearest_center or kmeans_refit), ``u_update`` (overrides
    knet.u_update when set), ``lambdas`` (for sweep-lambda) and
    ``write_kernel`` (default true).
    """

    dataset: DatasetSpec
    knet: KNetConfig = field(default_factory=KNetConfig)
    output_dir: str = "out"
    subsample_fraction: float = 0.25
    oos_mode: str = "nearest_center"
    u_update: Optional[str] = None
    lambdas: list = field(default_factory=lambda: [1.0, 1e-2, 1e-4, 1e-6, 1e-8, 0.0])
    write_kernel: bool = True

    @classmethod
    def from_dict(cls, doc):
        if not isinstance(doc, dict):
            raise ParameterError("run config must be a JSON object")
        _reject_unknown(cls, doc, "run config")
        if "dataset" not in doc:
            raise ParameterError("run config needs a 'dataset' entry")
        _reject_unknown(DatasetSpec, doc["dataset"], "dataset")
        kw = dict(doc)
        kw["dataset"] = DatasetSpec(**doc["dataset"])
        kw["knet"] = KNetConfig.from_dict(doc.get("knet", {}))
        run = cls(**kw)
        if run.u_update is not None:
            run.knet = replace(run.knet, u_update=run.u_update)
        if run.oos_mode not in ("nearest_center", "kmeans_refit"):
            raise ParameterError(f"unknown oos_mode {run.oos_mode!r}")
        return run

    @classmethod
    def load(cls, path):
        path = Path(path)
        try:
            doc = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ParameterError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from None
        return cls.from_dict(doc)


def _reject_unknown(cls, doc, what):
    if not isinstance(doc, dict):
        raise ParameterError(f"{what} must be a JSON object")
    unknown = set(doc) - {f.name for f in fields(cls)}
    if unknown:
        raise ParameterError(f"unknown {what} keys: {sorted(unknown)}")


def prepare(ds, spec):
    """Apply the configured PCA and standardization to a loaded dataset."""
    X = ds.X
    if spec.pca_dim is not None:
        X, _ = pca_reduce(X, spec.pca_dim)
    if spec.standardize:
        X, _ = standardize(X)
    return LabeledDataset(X, ds.labels, ds.name)


def _load_run(args):
    if args.config is None:
        raise ParameterError("this command needs --config")
    run = RunConfig.load(args.config)
    if args.seed is not None:
        run.knet = replace(run.knet, seed=args.seed)
    out = Path(args.out or run.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    ds = run.dataset.load(Path(args.config).parent)
    return run, ds, out


def _write_json(path, doc):
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _write_matrix(path, header, rows):
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _fmt(v):
    return "%.10g" % v


def write_history(path, history):
    cols = ["iteration", "hsic", "recon_error", "conv_metric"]
    _write_matrix(path, cols, [[h["iteration"]] + [_fmt(h[k]) for k in cols[1:]]
                               for h in history])


def write_embedding(path, Z, labels):
    header = [f"z{i}" for i in range(Z.shape[1])] + (["label"] if labels is not None else [])
    rows = []
    for i, z in enumerate(Z):
        row = [_fmt(v) for v in z]
        if labels is not None:
            row.append(int(labels[i]))
        rows.append(row)
    _write_matrix(path, header, rows)


def write_kernel(path, K, order):
    """Kernel with rows and columns permuted by ``order``; header lists original row ids."""
    Ko = K[np.ix_(order, order)]
    _write_matrix(path, [str(i) for i in order], ([_fmt(v) for v in row] for row in Ko))


def _fit_metrics(model, ds):
    h = model.history[-1]
    doc = {
        "n": int(ds.X.shape[0]),
        "d": int(ds.X.shape[1]),
        "c": model.config.c,
        "u_update": model.config.u_update,
        "lambda": model.config.lam,
        "seed": model.config.seed,
        "sigma": model.sigma,
        "spectral_sigma": model.spectral_sigma,
        "outer_iterations": model.outer_iterations,
        "warmup_epochs": model.warmup_epochs,
        "converged": model.converged,
        "hsic": h["hsic"],
        "recon_error": h["recon_error"],
        "prep_seconds": model.timings["prep_seconds"],
        "run_seconds": model.timings["run_seconds"],
    }
    if ds.labels is not None:
        doc["nmi"] = nmi(ds.labels, model.labels)
    return doc


def cmd_gen(args):
    kw = {"n": args.n, "seed": args.seed if args.seed is not None else 0}
    if args.noise is not None:
        kw["noise_std" if args.dataset != "blobs" else "std"] = args.noise
    if args.dataset == "spirals":
        kw["arms"] = args.arms
    ds = GENERATORS[args.dataset](**kw)
    if args.out is None:
        raise ParameterError("gen needs --out FILE")
    path = Path(args.out)
    try:
        write_csv(path, ds)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror}") from None
    print(f"N={ds.X.shape[0]} c={ds.n_clusters} d={ds.X.shape[1]}")


def cmd_fit(args):
    run, raw, out = _load_run(args)
    ds = prepare(raw, run.dataset)
    model = fit(ds.X, run.knet)
    metrics = _fit_metrics(model, ds)
    model.save(out / "model.json")
    _write_json(out / "metrics.json", metrics)
    write_history(out / "history.csv", model.history)
    write_embedding(out / "embedding.csv", model.embedding, ds.labels)
    if run.write_kernel:
        key = ds.labels if ds.labels is not None else model.labels
        order = np.argsort(key, kind="stable")
        write_kernel(out / "kernel.csv", learned_kernel(model), order)
    _report(args, metrics)
    return metrics


def _spectrum_gap(X_sub, X_full, sigma, c):
    """l-inf gap between the top-c Laplacian eigenvalues of the subset and the full set."""
    def top(X):
        K = gaussian_kernel(X, sigma)
        return top_eigenpairs(laplacian(K, degree_matrix(K)), c)[0]
    return float(np.max(np.abs(top(X_sub) - top(X_full))))


def cmd_oos(args):
    run, raw, out = _load_run(args)
    fraction = args.fraction if args.fraction is not None else run.subsample_fraction
    mode = args.mode or run.oos_mode
    c = run.knet.c
    if raw.X.shape[0] < c * 2 * math.ceil(1.0 / fraction):
        raise ParameterError(f"{raw.X.shape[0]} rows are too few for fraction {fraction}")
    X = raw.X
    if run.dataset.pca_dim is not None:
        X, _ = pca_reduce(X, run.dataset.pca_dim)
    full = LabeledDataset(X, raw.labels, raw.name)
    sub, _ = subsample(full, fraction, seed=run.knet.seed, n_clusters=c)
    if run.dataset.standardize:
        Xs, scaler = standardize(sub.X)
        sub = LabeledDataset(Xs, sub.labels, sub.name)
        full = LabeledDataset(scaler.transform(full.X), full.labels, full.name)
    model = fit(sub.X, run.knet)
    t = time.perf_counter()
    labels = predict(model, full.X, mode)
    predict_seconds = time.perf_counter() - t
    metrics = _fit_metrics(model, sub)
    metrics.pop("nmi", None)
    metrics.update({
        "fraction": fraction,
        "mode": mode,
        "n_train": int(sub.X.shape[0]),
        "n_full": int(full.X.shape[0]),
        "predict_seconds": predict_seconds,
        "spectrum_gap": _spectrum_gap(sub.X, full.X, resolve_sigma(sub.X, run.knet), c),
    })
    if full.labels is not None:
        metrics["nmi"] = nmi(full.labels, labels)
        metrics["nmi_train"] = nmi(sub.labels, model.labels)
    model.save(out / "model.json")
    _write_json(out / "metrics.json", metrics)
    _report(args, metrics)
    return metrics


def cmd_sweep_lambda(args):
    run, raw, out = _load_run(args)
    if raw.labels is None:
        raise ParameterError("sweep-lambda needs a labeled dataset")
    ds = prepare(raw, run.dataset)
    lambdas = run.lambdas if args.lambdas is None else [float(v) for v in args.lambdas.split(",")]
    rows = []
    for lam in lambdas:
        got = {}
        for mode in ("EIG", "SMA"):
            model = fit(ds.X, replace(run.knet, lam=lam, u_update=mode))
            got[mode] = model
        eig = got["EIG"].history[-1]
        row = {
            "hsic": eig["hsic"],
            "recon_error": eig["recon_error"],
            "nmi_eig": nmi(ds.labels, got["EIG"].labels),
            "nmi_sma": nmi(ds.labels, got["SMA"].labels),
            "lambda": lam,
        }
        log.info("lambda=%g nmi_eig=%.4f nmi_sma=%.4f", lam, row["nmi_eig"], row["nmi_sma"])
        rows.append(row)
    cols = ["hsic", "recon_error", "nmi_eig", "nmi_sma", "lambda"]
    _write_matrix(out / "sweep.csv", cols, [[_fmt(r[k]) for k in cols] for r in rows])
    if not args.quiet:
        for r in rows:
            print(" ".join(f"{k}={_fmt(r[k])}" for k in cols))
    return rows


def cmd_baseline_sc(args):
    run, raw, out = _load_run(args)
    if raw.labels is None:
        raise ParameterError("baseline-sc needs a labeled dataset")
    ds = prepare(raw, run.dataset)
    t = time.perf_counter()
    sigma = resolve_sigma(ds.X, run.knet)
    U = spectral_embedding(ds.X, sigma, run.knet.c)
    labels, _ = kmeans(U, run.knet.c, run.knet.kmeans_restarts, seed=run.knet.seed)
    metrics = {
        "n": int(ds.X.shape[0]),
        "c": run.knet.c,
        "sigma": sigma,
        "median_sigma": median_sigma(ds.X),
        "nmi": nmi(ds.labels, labels),
        "run_seconds": time.perf_counter() - t,
    }
    _write_json(out / "metrics.json", metrics)
    _report(args, metrics)
    return metrics


def _report(args, metrics):
    if not args.quiet:
        keys = [k for k in ("nmi", "outer_iterations", "prep_seconds", "run_seconds") if k in metrics]
        print(" ".join(f"{k}={metrics[k]:.4g}" if isinstance(metrics[k], float) else
                       f"{k}={metrics[k]}" for k in keys))


def build_parser():
    p = argparse.ArgumentParser(prog="knet", description="Deep-kernel spectral clustering.")
    p.add_argument("--config", help="JSON run config")
    p.add_argument("--seed", type=int, help="overrides the training (or generator) seed")
    p.add_argument("--out", help="output directory (gen: output file)")
    p.add_argument("--quiet", action="store_true", help="only errors on stderr, no summary")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="write a synthetic labeled CSV")
    g.add_argument("dataset", choices=sorted(GENERATORS))
    g.add_argument("--n", type=int, default=1000)
    g.add_argument("--noise", type=float, help="noise std (generator default if omitted)")
    g.add_argument("--arms", type=int, default=3, help="spiral arms")
    g.set_defaults(func=cmd_gen)

    sub.add_parser("fit", help="train and cluster").set_defaults(func=cmd_fit)

    o = sub.add_parser("oos", help="train on a subsample, predict the full set")
    o.add_argument("--fraction", type=float)
    o.add_argument("--mode", choices=["nearest_center", "kmeans_refit"])
    o.set_defaults(func=cmd_oos)

    s = sub.add_parser("sweep-lambda", help="fit EIG and SMA over a list of lambdas")
    s.add_argument("--lambdas", help="comma-separated values, e.g. 1,1e-8,0")
    s.set_defaults(func=cmd_sweep_lambda)

    sub.add_parser("baseline-sc", help="plain spectral clustering").set_defaults(func=cmd_baseline_sc)
    return p


def _subcommand_flags_first(argv):
    # allow the global flags after the subcommand too: ``knet fit --config x``
    globals_ = {"--config", "--seed", "--out"}
    head, tail, i = [], [], 0
    while i < len(argv):
        a = argv[i]
        key = a.split("=", 1)[0]
        if key in globals_:
            head.append(a)
            if "=" not in a and i + 1 < len(argv):
                head.append(argv[i + 1])
                i += 1
        elif a == "--quiet":
            head.append(a)
        else:
            tail.append(a)
        i += 1
    return head + tail


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(_subcommand_flags_first(argv))
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        args.func(args)
    except (KNetError, OSError, ValueError, ArithmeticError) as exc:
        msg = " ".join(str(exc).split())
        print(f"error: {type(exc).__name__}: {msg}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())

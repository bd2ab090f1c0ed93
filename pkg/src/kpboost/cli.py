"""Command-line front end: cross-validation grids, training, prediction,
disjunct profiling and mu-based selection.

Reports are UTF-8 JSON lines with a fixed key order, so identical runs give
byte-identical files.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from itertools import product
from pathlib import Path

import numpy as np

from . import __version__, kernels, metrics, multiclass
from .boosting import STEP_GRID, BoostParams, first_round, minority_class
from .dataio import Dataset, Scaler, load_csv, normalize, normalize_whole, stratified_kfold
from .disjuncts import find_disjuncts, kappa_delta_curve
from .errors import ConfigError, DataError, KPBoostError, MetricUndefinedError, SelectionError
from .kernels import SIGMA_GRID
from .roi import THETA_GRID, RoiParams
from .svm import COST_GRID

ALGOS = ("svm", "kpboost", "kproi")
DECOMPS = ("auto", "ovo", "ova")


@dataclass
class RunConfig:
    command: str
    data: str | None = None
    algo: str = "kpboost"
    decomp: str = "auto"
    sigma: list = field(default_factory=lambda: list(SIGMA_GRID))
    cost: list = field(default_factory=lambda: list(COST_GRID))
    step: list = field(default_factory=lambda: list(STEP_GRID))
    theta: list = field(default_factory=lambda: list(THETA_GRID))
    rounds: int = 10
    folds: int = 10
    seed: int | None = None
    out: str | None = None
    kappa: int | None = None
    model: str | None = None
    reports: list = field(default_factory=list)
    jobs: int = 1

    def validate(self) -> None:
        if self.algo not in ALGOS:
            raise ConfigError(f"--algo must be one of {ALGOS}")
        if self.decomp not in DECOMPS:
            raise ConfigError(f"--decomp must be one of {DECOMPS}")
        for name in ("sigma", "cost", "step", "theta"):
            grid = getattr(self, name)
            if not grid:
                raise ConfigError(f"--{name} grid is empty")
            if any(not v > 0 for v in grid):
                raise ConfigError(f"--{name} values must be positive")
        if self.rounds < 1:
            raise ConfigError("--rounds must be at least 1")
        if self.folds < 2:
            raise ConfigError("--folds must be at least 2")
        if self.command == "cv" and self.seed is None:
            raise ConfigError("cv needs an explicit --seed")
        if self.command in ("cv", "train", "predict", "disjuncts") and not self.data:
            raise ConfigError(f"{self.command} needs --data")
        if self.command == "predict" and not self.model:
            raise ConfigError("predict needs --model")
        if self.kappa is not None and self.kappa < 1:
            raise ConfigError("--kappa must be a positive integer")

    def cells(self) -> list[dict]:
        """Hyperparameter tuples in a fixed order; unused axes are None."""
        steps = [None] if self.algo == "svm" else self.step
        thetas = self.theta if self.algo == "kproi" else [None]
        rounds = 1 if self.algo == "svm" else self.rounds
        return [{"sigma": float(s), "C": float(c), "step": None if st is None else float(st),
                 "theta": None if th is None else float(th), "rounds": rounds}
                for s, c, st, th in product(self.sigma, self.cost, steps, thetas)]


def make_params(algo: str, cell: dict):
    """Parameters object for one grid cell; plain SVM is a single unperturbed round."""
    if algo == "svm":
        return BoostParams(rounds=1, sigma=cell["sigma"], C=cell["C"])
    base = BoostParams(rounds=cell["rounds"], step=cell["step"], sigma=cell["sigma"], C=cell["C"])
    if algo == "kproi":
        return RoiParams(base, cell["theta"])
    return base


def _partition(cfg: RunConfig, ds: Dataset):
    whole = normalize_whole(ds)
    if cfg.kappa is not None:
        return find_disjuncts(whole, cfg.kappa), None
    curve = kappa_delta_curve(whole)
    return curve.knee_partition, curve


def _fold_metrics(test: Dataset, pred, partition, test_idx) -> dict:
    conf = metrics.ConfusionMatrix.from_labels(test.labels, pred, test.n_classes)
    out = {"gmean": metrics.gmean(conf), "auc": metrics.auc(conf), "gsdi": None}
    if partition is not None:
        try:
            out["gsdi"] = metrics.gsdi(partition, test.labels == pred, test_idx)
        except MetricUndefinedError:
            pass
    out["recalls"] = [float(r) for r in conf.recalls()]
    return out


def _run_fold(args) -> list[dict]:
    """Evaluate every cell on one fold. Kernel and round 1 are shared across steps."""
    cfg, ds, fold, tr_idx, te_idx, partition, cells = args
    train, test = normalize(ds.subset(tr_idx), ds.subset(te_idx))
    decomp = multiclass.resolve_decomposition(ds.n_classes, cfg.decomp)
    shared: dict = {}
    results = []
    for cell in cells:
        try:
            K0 = round1 = None
            if decomp == "binary":
                key = (cell["sigma"], cell["C"])
                if key not in shared:
                    K0 = kernels.gram(train.features, cell["sigma"])
                    base = BoostParams(rounds=1, sigma=cell["sigma"], C=cell["C"])
                    shared[key] = (K0, first_round(train, base, minority_class(train), K0))
                K0, round1 = shared[key]
            model = multiclass.fit_auto(train, make_params(cfg.algo, cell), decomp, K0=K0, round1=round1)
            pred = multiclass.predict_any(model, train, test)
            results.append({"status": "ok", **_fold_metrics(test, pred, partition, te_idx)})
        except KPBoostError as exc:
            results.append({"status": "failed", "error": str(exc)})
    return results


def _record(kind: str, cfg: RunConfig, cell: dict, fold) -> dict:
    return {"record": kind, "algo": cfg.algo, "decomp": cfg.decomp, "sigma": cell["sigma"],
            "C": cell["C"], "step": cell["step"], "theta": cell["theta"], "rounds": cell["rounds"],
            "folds": cfg.folds, "fold": fold, "seed": cfg.seed, "version": __version__}


def _average(cfg: RunConfig, cell: dict, per_fold: list[dict]) -> dict:
    rec = _record("average", cfg, cell, None)
    failed = [r for r in per_fold if r["status"] != "ok"]
    if failed:
        rec.update(status="failed", error=failed[0]["error"], gmean=None, auc=None, gsdi=None, recalls=None)
        return rec
    gs = [r["gsdi"] for r in per_fold]
    rec.update(status="ok",
               gmean=float(np.mean([r["gmean"] for r in per_fold])),
               auc=float(np.mean([r["auc"] for r in per_fold])),
               gsdi=None if any(g is None for g in gs) else float(np.mean(gs)),
               recalls=[float(v) for v in np.mean([r["recalls"] for r in per_fold], axis=0)])
    return rec


def run_cv(cfg: RunConfig) -> list[dict]:
    ds = load_csv(cfg.data)
    plan = stratified_kfold(ds, cfg.folds, cfg.seed)
    partition, _ = _partition(cfg, ds)
    cells = cfg.cells()
    tasks = [(cfg, ds, f, tr, te, partition, cells) for f, (tr, te) in enumerate(plan.folds)]
    if cfg.jobs > 1:
        with ProcessPoolExecutor(cfg.jobs) as pool:
            by_fold = list(pool.map(_run_fold, tasks))
    else:
        by_fold = [_run_fold(t) for t in tasks]
    records = []
    for c, cell in enumerate(cells):
        per_fold = [by_fold[f][c] for f in range(len(tasks))]
        for f, res in enumerate(per_fold):
            rec = _record("fold", cfg, cell, f)
            rec.update(res)
            records.append(rec)
        records.append(_average(cfg, cell, per_fold))
    return records


def select_from_records(records: list[dict]) -> list[dict]:
    """Best cell per algorithm by mu over the cell-average class recalls."""
    by_algo: dict[str, list] = {}
    for rec in records:
        if rec.get("record") == "average" and rec.get("status") == "ok":
            by_algo.setdefault(rec["algo"], []).append(rec)
    if not by_algo:
        raise SelectionError("no successful average records to select from")
    winners = []
    for algo in sorted(by_algo):
        rows = by_algo[algo]
        if len(rows) < 2:
            raise SelectionError(f"{algo}: need at least two cells, found {len(rows)}")
        mu = metrics.mu_scores(np.array([r["recalls"] for r in rows]))
        best = int(np.argmax(mu))
        winners.append({**rows[best], "record": "selected", "mu": float(mu[best]), "candidates": len(rows)})
    return winners


def _write_lines(records, out) -> None:
    text = "".join(json.dumps(r) + "\n" for r in records)
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _single_cell(cfg: RunConfig) -> dict:
    cells = cfg.cells()
    if len(cells) != 1:
        raise ConfigError(f"{cfg.command} needs exactly one value per hyperparameter, got {len(cells)} cells")
    return cells[0]


def cmd_cv(cfg: RunConfig) -> int:
    _write_lines(run_cv(cfg), cfg.out)
    return 0


def cmd_train(cfg: RunConfig) -> int:
    if not cfg.out:
        raise ConfigError("train needs --out for the model file")
    cell = _single_cell(cfg)
    ds = load_csv(cfg.data)
    scaler = Scaler.fit(ds.features)
    train = ds.with_features(scaler.transform(ds.features))
    model = multiclass.fit_auto(train, make_params(cfg.algo, cell), cfg.decomp)
    bundle = {
        "version": __version__,
        "algo": cfg.algo,
        "cell": cell,
        "scaler": {"mean": scaler.mean.tolist(), "std": scaler.std.tolist()},
        "class_names": list(ds.class_names),
        "train_features": train.features.tolist(),
        "train_labels": train.labels.tolist(),
        "model": multiclass.to_manifest(model),
    }
    Path(cfg.out).write_text(json.dumps(bundle), encoding="utf-8")
    return 0


def cmd_predict(cfg: RunConfig) -> int:
    bundle = json.loads(Path(cfg.model).read_text(encoding="utf-8"))
    names = bundle["class_names"]
    train = Dataset(np.array(bundle["train_features"]), np.array(bundle["train_labels"]), tuple(names))
    scaler = Scaler(np.array(bundle["scaler"]["mean"]), np.array(bundle["scaler"]["std"]))
    raw = load_csv(cfg.data)
    if raw.d != train.d:
        raise DataError(f"model expects {train.d} features, data has {raw.d}")
    unknown = [c for c in raw.class_names if c not in names]
    if unknown:
        raise DataError(f"labels not seen in training: {unknown}")
    remap = np.array([names.index(c) for c in raw.class_names])
    test = Dataset(scaler.transform(raw.features), remap[raw.labels], tuple(names))
    model = multiclass.load_manifest(bundle["model"])
    pred = multiclass.predict_any(model, train, test)
    conf = metrics.ConfusionMatrix.from_labels(test.labels, pred, len(names))
    lines = ["prediction,label"] + [f"{names[p]},{names[t]}" for p, t in zip(pred, test.labels)]
    text = "\n".join(lines) + "\n"
    if cfg.out:
        Path(cfg.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    summary = {"gmean": None, "auc": None, "accuracy": float(np.trace(conf.counts) / conf.total)}
    if np.all(conf.support > 0):
        summary.update(gmean=metrics.gmean(conf), auc=metrics.auc(conf))
    sys.stderr.write(json.dumps(summary) + "\n")
    return 0


def cmd_disjuncts(cfg: RunConfig) -> int:
    ds = load_csv(cfg.data)
    partition, curve = _partition(cfg, ds)
    out = Path(cfg.out) if cfg.out else None
    knee = curve.knee if curve is not None else cfg.kappa
    info = {"knee": knee, "delta": partition.delta_total, "deltas": partition.deltas,
            "neighbors": partition.neighbor_mode, "traversal": partition.traversal}
    if out is None:
        if curve is not None:
            sys.stdout.write(curve.to_text())
        sys.stdout.write(json.dumps(info) + "\n")
        return 0
    out.mkdir(parents=True, exist_ok=True)
    if curve is not None:
        (out / "curve.txt").write_text(curve.to_text(), encoding="utf-8")
    (out / "partition.csv").write_text(partition.to_text(), encoding="utf-8")
    (out / "knee.json").write_text(json.dumps(info) + "\n", encoding="utf-8")
    return 0


def cmd_select(cfg: RunConfig) -> int:
    records = []
    for path in cfg.reports:
        for line in Path(path).read_text(encoding="utf-8").splitlines():
            if line.strip():
                records.append(json.loads(line))
    _write_lines(select_from_records(records), cfg.out)
    return 0


COMMANDS = {"cv": cmd_cv, "train": cmd_train, "predict": cmd_predict,
            "disjuncts": cmd_disjuncts, "select": cmd_select}


def _floats(text: str) -> list:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="kpboost", description="Kernel-perturbation boosting of SVMs for imbalanced data.")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("reports", nargs="*", help="report files (select only)")
    p.add_argument("--data")
    p.add_argument("--algo", default="kpboost", choices=ALGOS)
    p.add_argument("--decomp", default="auto", choices=DECOMPS)
    p.add_argument("--sigma", type=_floats, default=list(SIGMA_GRID), help="comma-separated grid")
    p.add_argument("--cost", type=_floats, default=list(COST_GRID))
    p.add_argument("--step", type=_floats, default=list(STEP_GRID))
    p.add_argument("--theta", type=_floats, default=list(THETA_GRID))
    p.add_argument("--rounds", type=int, default=10)
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.add_argument("--kappa", type=int, help="fixed neighbourhood size instead of the knee")
    p.add_argument("--model", help="model file written by train")
    p.add_argument("--jobs", type=int, default=1, help="worker processes for cv")
    return p


def parse_config(argv=None) -> RunConfig:
    ns = build_parser().parse_args(argv)
    cfg = RunConfig(**vars(ns))
    cfg.validate()
    return cfg


def main(argv=None) -> int:
    try:
        cfg = parse_config(argv)
        return COMMANDS[cfg.command](cfg)
    except KPBoostError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return exc.exit_code
    except OSError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return DataError.exit_code


if __name__ == "__main__":
    sys.exit(main())

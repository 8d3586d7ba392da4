"""Command-line front end: ``packscope <command> [options]``.

Every report command prints a human-readable table and, with ``--out``,
writes the same content as JSON records. Outputs are written atomically;
on failure nothing is left behind and the exit status is 1.
"""

from __future__ import annotations

import argparse
import json
import os
import shutil
import sys
import tempfile
import warnings
from dataclasses import replace
from pathlib import Path

import numpy as np

from packscope import corpus
from packscope.classifiers import (
    FAMILIES, TRAINABLE, AlgoConfig, Dataset, expand_grid, fit, grid_search, load_model,
    pick_best, preset, save_model,
)
from packscope.errors import BadConfig, MalformedPe, PackscopeError
from packscope.evaluation import (
    NA, NotReached, chronological_eval, compute_metrics, format_table, metric_records,
)
from packscope.features import extract_all
from packscope.labeling import (
    NOT_PACKED, PACKED, group_votes, heuristic_detect, majority_vote, read_votes, write_votes,
)
from packscope.pe import parse_pe
from packscope.preprocess import PREPROCESS_MODES
from packscope.store import (
    FeatureStore, ManifestRecord, _write_atomic, load_store, parse_time_range, read_manifest,
    save_store, write_manifest,
)

# small default grids for `tune`; --grid replaces them
TUNE_AXES = {
    "KNN": {"k": [1, 4, 8, 16]},
    "GNBC": {},
    "BNBC": {},
    "LR": {"loss": ["hinge", "squared_hinge"]},
    "LSVM": {"loss": ["hinge", "squared_hinge"]},
    "DT": {"criterion": ["gini", "entropy"], "max_depth": [4, 6, 8]},
    "RF": {"n_estimators": [10, 20], "max_depth": [6, 8]},
    "GBDT": {"n_estimators": [10, 20], "max_depth": [3, 6]},
    "MLP": {"activation": ["relu", "logistic"]},
    "KSVM": {"kernel": ["linear", "rbf"]},
}


class CliError(Exception):
    pass


def _value(text: str):
    try:
        v = json.loads(text)
    except json.JSONDecodeError:
        return text
    return tuple(v) if isinstance(v, list) else v


def _params(items) -> dict:
    out = {}
    for item in items or ():
        if "=" not in item:
            raise CliError(f"expected NAME=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        out[k.strip()] = _value(v.strip())
    return out


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _ints(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def _families(text: str) -> list[str]:
    if text.lower() == "all":
        return list(TRAINABLE)
    fams = [f.strip().upper() for f in text.split(",") if f.strip()]
    for f in fams:
        if f not in FAMILIES:
            raise CliError(f"unknown algorithm {f!r}; choose from {', '.join(FAMILIES)}")
    return fams


def _config(args, family: str | None = None, use_pca: bool = True) -> AlgoConfig:
    """Preset for the family unless --defaults; --preprocess, --param and --pca override."""
    family = family or _families(args.algo)[0]
    if getattr(args, "defaults", False):
        cfg = AlgoConfig(family, seed=args.seed)
    else:
        cfg = preset(family, args.seed)
    if getattr(args, "preprocess", None):
        cfg = replace(cfg, preprocessing=args.preprocess)
    extra = _params(getattr(args, "param", None))
    if extra:
        cfg = cfg.with_params(**extra)
    if use_pca and getattr(args, "pca", None):
        cfg = replace(cfg, pca_k=int(args.pca))
    return cfg


def _dataset(path) -> Dataset:
    return Dataset.from_store(load_store(path))


def _json_default(o):
    if isinstance(o, NotReached):
        return NA
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, tuple):
        return list(o)
    return str(o)


def _emit(args, doc: dict, table: str) -> None:
    print(table)
    if args.out:
        _write_atomic(Path(args.out), json.dumps(doc, indent=1, sort_keys=True, default=_json_default) + "\n")


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_synth(args) -> None:
    if not args.out:
        raise CliError("synth needs --out DIR")
    out = Path(args.out)
    if out.exists() and any(out.iterdir()):
        raise CliError(f"{out} exists and is not empty")
    specs = corpus.SCENARIOS[args.scenario](args.size) if args.size else corpus.SCENARIOS[args.scenario]()
    out.parent.mkdir(parents=True, exist_ok=True)
    tmp = Path(tempfile.mkdtemp(dir=out.parent, prefix=out.name + ".", suffix=".tmp"))
    try:
        records, votes = [], []
        rng = np.random.default_rng([args.seed, 99])
        for spec in specs:
            d = tmp / spec.name
            d.mkdir()
            samples = corpus.generate_dataset(spec, args.seed)
            for s in samples:
                (d / f"{s.name}.exe").write_bytes(s.data)
                votes += corpus.simulate_votes(s, rng, error_rate=corpus.VOTE_ERROR[args.scenario])
            records.append(ManifestRecord(
                spec.name, args.seed, dict(spec.family_weights or {}), spec.start, spec.end, len(samples),
                {"n_plain": spec.n_plain, "n_packed": spec.n_packed, "plain_drift": spec.plain_drift,
                 "scenario": args.scenario},
            ))
            print(f"{spec.name}: {len(samples)} samples ({spec.start}..{spec.end})")
        write_manifest(records, tmp / "manifest.jsonl")
        write_votes(votes, tmp / "votes.tsv")
        if out.exists():
            out.rmdir()
        os.replace(tmp, out)
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise


def _pe_files(root: Path) -> list[Path]:
    if root.is_file():
        return [root]
    if not root.is_dir():
        raise CliError(f"{root} does not exist")
    return sorted(p for p in root.rglob("*") if p.is_file() and p.suffix.lower() in (".exe", ".dll", ".bin", ".sys", ""))


def cmd_extract(args) -> None:
    if not args.out:
        raise CliError("extract needs --out STORE")
    vectors, seen, bad = [], set(), 0
    for path in _pe_files(Path(args.input)):
        try:
            v = extract_all(parse_pe(path.read_bytes()))
        except MalformedPe as exc:
            bad += 1
            print(f"skipped {path}: {exc}", file=sys.stderr)
            continue
        if v.sample_digest in seen:
            continue
        seen.add(v.sample_digest)
        vectors.append(v)
    if not vectors:
        raise CliError("no parseable PE files found")
    save_store(FeatureStore.from_vectors(vectors), args.out)
    print(f"extracted {len(vectors)} samples ({bad} unparseable) -> {args.out}")


def cmd_label(args) -> None:
    if not args.out:
        raise CliError("label needs --out STORE")
    store = load_store(args.store)
    votes = []
    for path in args.votes or ():
        votes += read_votes(path)
    if args.pe_dir:
        for path in _pe_files(Path(args.pe_dir)):
            try:
                pe = parse_pe(path.read_bytes())
            except MalformedPe:
                continue
            votes.append(heuristic_detect(pe, extract_all(pe)))
    by_sample = group_votes(votes)
    rows, counts, dropped = [], {PACKED: 0, NOT_PACKED: 0}, 0
    threshold = int(args.threshold) if args.threshold is not None else None
    for r in store.rows:
        vs = by_sample.get(r.digest)
        if not vs:
            dropped += 1
            continue
        gt = majority_vote(vs, threshold)
        counts[gt.label] += 1
        rows.append(replace(r, label=1 if gt.is_packed else 0))
    if not rows:
        raise CliError("no store row has any vote")
    save_store(FeatureStore(rows), args.out)
    print(f"labeled {len(rows)} samples: {counts[PACKED]} packed, {counts[NOT_PACKED]} not packed; "
          f"{dropped} without votes dropped -> {args.out}")


def _grid_axes(args, family: str) -> dict:
    if args.grid:
        axes = {}
        for item in args.grid:
            name, vals = item.split("=", 1)
            axes[name.strip()] = [_value(v) for v in vals.split(",")]
        return axes
    return TUNE_AXES.get(family, {})


def cmd_tune(args) -> None:
    data = _dataset(args.store)
    family = _families(args.algo)[0]
    modes = args.preprocess_list or list(PREPROCESS_MODES)
    grid = expand_grid(family, modes, args.seed, **_grid_axes(args, family))
    best, cells = grid_search(grid, data, args.folds, args.seed)
    rows, records = [], []
    for c in cells:
        rows.append([c.config.preprocessing, json.dumps(c.config.params, sort_keys=True, default=_json_default),
                     NA if c.failed else c.accuracy, NA if c.failed else c.train_seconds, c.error])
        records.append({"config": c.config.to_dict(), "accuracy": c.accuracy, "train_seconds": c.train_seconds,
                        "fold_accuracies": list(c.fold_accuracies), "error": c.error})
    table = format_table(["preprocessing", "params", "accuracy", "train s", "error"], rows)
    if best is not None:
        table += f"\nbest: {json.dumps(best.to_dict(), sort_keys=True, default=_json_default)}"
    cell = pick_best(cells)
    _emit(args, {"family": family, "folds": args.folds, "seed": args.seed, "cells": records,
                 "best": best.to_dict() if best else None, "best_accuracy": cell.accuracy if cell else None}, table)


def cmd_train(args) -> None:
    if not args.out:
        raise CliError("train needs --out MODEL")
    data = _dataset(args.store)
    cfg = _config(args)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        model = fit(cfg, data)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    save_model(model, args.out)
    rec = {"family": model.family, "config": cfg.to_dict(), "n_train": model.n_train,
           "train_seconds": model.train_seconds, "out_of_grid": list(model.out_of_grid)}
    print(format_table(["family", "preprocessing", "n_train", "train s", "out of grid"],
                       [[model.family, cfg.preprocessing, model.n_train, model.train_seconds,
                         ",".join(model.out_of_grid) or "-"]]))
    if args.record:
        _write_atomic(Path(args.record), json.dumps(rec, indent=1, sort_keys=True, default=_json_default) + "\n")


def cmd_predict(args) -> None:
    model = load_model(args.model)
    store = load_store(args.store)
    pred = model.predict_batch(store.matrix())
    lines = [f"{d}\t{PACKED if p else NOT_PACKED}\n" for d, p in zip(store.digests(), pred)]
    if args.out:
        _write_atomic(Path(args.out), "".join(lines))
    else:
        sys.stdout.write("".join(lines))
    print(f"{int(pred.sum())} of {len(pred)} predicted packed", file=sys.stderr)


def _metrics_rows(reports: dict) -> tuple[list[list], list[str]]:
    names = list(next(iter(reports.values())).cells())
    return [[label] + [rep.cells()[n] for n in names] for label, rep in reports.items()], names


def cmd_evaluate(args) -> None:
    model = load_model(args.model)
    data = _dataset(args.store)
    rep = compute_metrics(model.predict_batch(data.matrix), data.labels)
    rows, names = _metrics_rows({model.family: rep})
    records = [r.as_dict() for r in metric_records(args.run_id, model.family, Path(args.store).stem, rep)]
    doc = {"records": records, "counts": {"tp": rep.tp, "fp": rep.fp, "tn": rep.tn, "fn": rep.fn},
           "undefined": list(rep.undefined)}
    _emit(args, doc, format_table(["classifier"] + names, rows))


def cmd_select(args) -> None:
    from packscope.feature_analysis import iterative_selection, select_by_threshold

    data = _dataset(args.store)
    cfg = _config(args)
    if args.method == "iterative":
        reports = [iterative_selection(cfg, data, _ints(args.schedule), args.folds, args.seed)]
    else:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            model = fit(cfg, data)
        reports = select_by_threshold(model, data, _floats(args.threshold or "0"), args.max_drop,
                                      args.folds, args.seed)
    rows = [[r.family, r.method, r.n_features, r.old_accuracy, r.new_accuracy, r.old_seconds, r.new_seconds,
             str(r.ratio)] for r in reports]
    table = format_table(["classifier", "selection", "# features", "old acc", "new acc", "old s", "new s",
                          "ratio"], rows)
    _emit(args, {"reports": [r.as_dict() for r in reports]}, table)


def cmd_pca_sweep(args) -> None:
    from packscope.feature_analysis import pca_sweep

    data = _dataset(args.store)
    cfg = _config(args, use_pca=False)
    if not args.pca:
        raise CliError("pca-sweep needs --pca K[,K...]")
    sweep = pca_sweep(cfg, data, _ints(args.pca), args.folds, args.seed)
    rows = [[r.k, sweep.old_accuracy, r.accuracy, sweep.old_seconds, r.seconds, str(r.ratio)] for r in sweep.rows]
    table = format_table(["k", "old acc", "new acc", "old s", "new s", "ratio"], rows)
    if sweep.best:
        table += f"\nbest k: {sweep.best.k}"
    doc = {"family": sweep.family, "old_accuracy": sweep.old_accuracy, "old_seconds": sweep.old_seconds,
           "rows": [{"k": r.k, "accuracy": r.accuracy, "seconds": r.seconds, "ratio": str(r.ratio)}
                    for r in sweep.rows],
           "best_k": sweep.best.k if sweep.best else None}
    _emit(args, doc, table)


def _period_arg(item: str) -> tuple[str, str]:
    if "=" in item:
        name, path = item.split("=", 1)
        return name, path
    return Path(item).stem, item


def cmd_drift(args) -> None:
    train = _dataset(args.train)
    baseline = _dataset(args.baseline)
    periods = [(name, _dataset(path)) for name, path in map(_period_arg, args.period or ())]
    if not periods:
        raise CliError("drift needs at least one --period NAME=STORE")
    ranges = {}
    if args.manifest:
        for rec in read_manifest(args.manifest):
            ranges[rec.name] = parse_time_range(rec.time_range)
    thresholds = _floats(args.threshold or "0.92,0.95,0.97")
    rows4, rows5, records = [], [], []
    for fam in _families(args.algo):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            model = fit(_config(args, fam), train)
        rep = chronological_eval(model, baseline, periods, thresholds, time_ranges=ranges or None,
                                 metric=args.metric, abscissa=args.abscissa)
        pts = rep.points()
        rows4.append([fam] + [v for _, v in pts])
        rows5.append([fam] + [rep.uptimes.get(t, NA) for t in thresholds] + [rep.train_seconds]
                     + [rep.ratios.get(t, NA) for t in thresholds])
        records.append({
            "family": fam, "metric": args.metric, "abscissa": args.abscissa,
            "points": [[t, v] for t, v in pts], "periods": [p.period_id for p in rep.periods],
            "coeffs": list(rep.coeffs) if rep.coeffs else None,
            "uptimes": {str(t): rep.uptimes.get(t, NA) for t in thresholds},
            "ratios": {str(t): rep.ratios.get(t, NA) for t in thresholds},
            "train_seconds": rep.train_seconds,
        })
    names = [p.period_id for p in rep.periods]
    t4 = format_table(["classifier", "baseline"] + names, rows4)
    t5 = format_table(["classifier"] + [f"uptime {t}" for t in thresholds] + ["train s"]
                      + [f"ratio {t}" for t in thresholds], rows5)
    _emit(args, {"reports": records}, t4 + "\n\n" + t5)


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _common(p: argparse.ArgumentParser, algo: bool = False, folds: bool = False) -> None:
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="output path")
    if folds:
        p.add_argument("--folds", type=int, default=10)
    if algo:
        p.add_argument("--algo", default="KNN", help="classifier family (or a comma list / 'all' for drift)")
        p.add_argument("--preset", action="store_true", help="start from the family's tuned preset (default)")
        p.add_argument("--defaults", action="store_true", help="start from library defaults instead of the preset")
        p.add_argument("--preprocess", choices=PREPROCESS_MODES)
        p.add_argument("--param", action="append", metavar="NAME=VALUE", help="hyperparameter override (JSON value)")
        p.add_argument("--pca", help="principal components to keep")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="packscope", description="Static packing detection toolkit.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic PE corpus, manifest and detector votes")
    _common(p)
    p.add_argument("--scenario", choices=sorted(corpus.SCENARIOS), default="default")
    p.add_argument("--size", type=int, help="default: samples per class; drift: training size; hard: total")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("extract", help="extract features from a PE file or directory into a feature store")
    p.add_argument("input")
    _common(p)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("label", help="label a feature store by majority vote")
    p.add_argument("store")
    p.add_argument("--votes", action="append", help="vote file (detector<TAB>digest<TAB>verdict)")
    p.add_argument("--pe-dir", help="also run the built-in heuristic detector over these PE files")
    p.add_argument("--threshold", type=int, help="votes needed for 'packed' (default: half the voters, rounded up)")
    _common(p)
    p.set_defaults(func=cmd_label)

    p = sub.add_parser("tune", help="cross-validated grid search")
    p.add_argument("store")
    p.add_argument("--grid", action="append", metavar="NAME=V1,V2", help="grid axis (replaces the default axes)")
    p.add_argument("--preprocess", dest="preprocess_list", action="append", choices=PREPROCESS_MODES)
    p.add_argument("--algo", default="KNN")
    _common(p, folds=True)
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("train", help="train and serialize a model")
    p.add_argument("store")
    p.add_argument("--record", help="write the train-time record here")
    _common(p, algo=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="predict every row of a feature store")
    p.add_argument("model")
    p.add_argument("store")
    _common(p)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="metrics of a model on a labeled store")
    p.add_argument("model")
    p.add_argument("store")
    p.add_argument("--run-id", default="run")
    _common(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("select", help="feature selection by importance threshold or iteration")
    p.add_argument("store")
    p.add_argument("--method", choices=("threshold", "iterative"), default="threshold")
    p.add_argument("--threshold", help="comma list of importance thresholds")
    p.add_argument("--schedule", default="110,90,70,50", help="comma list of k values")
    p.add_argument("--max-drop", type=float, default=0.05, help="largest relative accuracy drop kept")
    _common(p, algo=True, folds=True)
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("pca-sweep", help="accuracy and train time per number of components")
    p.add_argument("store")
    _common(p, algo=True, folds=True)
    p.set_defaults(func=cmd_pca_sweep)

    p = sub.add_parser("drift", help="chronological evaluation, decay fit, uptime and economics")
    p.add_argument("--train", required=True)
    p.add_argument("--baseline", required=True)
    p.add_argument("--period", action="append", metavar="NAME=STORE")
    p.add_argument("--manifest", help="take period time ranges from a synth manifest")
    p.add_argument("--threshold", help="comma list of F-score targets")
    p.add_argument("--metric", choices=("fscore_wa", "accuracy"), default="fscore_wa")
    p.add_argument("--abscissa", choices=("midpoint", "period_end"), default="midpoint")
    _common(p, algo=True)
    p.set_defaults(func=cmd_drift)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except (PackscopeError, CliError, BadConfig, ValueError, OSError, KeyError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())

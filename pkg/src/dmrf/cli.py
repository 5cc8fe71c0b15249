"""Command-line entry point: ``dmrf <subcommand> ...``.

Every run writes ``config.json`` into its output directory; ``dmrf replay
config.json`` re-executes it with the same resolved settings.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .data import CLASSIFICATION, DataError, EvalProtocol, encode_rows, load_csv, make_partitions, normalize_task, read_table
from .datasets import REGISTRY, DatasetUnavailable
from .datasets import load as load_named
from .evaluation import benchmark, consistency
from .evaluation.stats import accuracy, mean_squared_error
from .forest import ModelFormatError, load_model_file, save_model, train_forest
from .params import VARIANTS, HyperParams

log = logging.getLogger("dmrf")

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2
CONFIG_NAME = "config.json"

# flag dest -> HyperParams field
PARAM_FLAGS = {
    "trees": "M", "p": "p", "qn": "q_n", "kn": "k_n", "b1": "B1", "b2": "B2", "ratio": "ratio",
    "m": "m", "lam": "lam", "p1": "p1", "p2": "p2", "variant": "variant",
}


class UsageError(ValueError):
    pass


def _add_params(p: argparse.ArgumentParser, variant=True):
    g = p.add_argument_group("forest hyperparameters (defaults are the reference settings)")
    g.add_argument("--trees", type=int, help="number of trees M (100)")
    g.add_argument("--p", type=float, help="probability of the optimal-split path (0.5)")
    g.add_argument("--qn", type=float, help="Bernoulli bootstrap inclusion probability (1-1/e)")
    g.add_argument("--kn", type=int, help="minimum node size k_n (5)")
    g.add_argument("--b1", type=float, help="feature softmax temperature B1 (5)")
    g.add_argument("--b2", type=float, help="threshold softmax temperature B2 (5)")
    g.add_argument("--ratio", type=float, help="structure share for (SE) baselines (0.5)")
    g.add_argument("--m", type=int, help="Denil14 preselected points per node (100)")
    g.add_argument("--lambda", dest="lam", type=float, help="Denil14 Poisson rate (0.5)")
    g.add_argument("--p1", type=float, help="BRF subspace-size coin (0.05)")
    g.add_argument("--p2", type=float, help="BRF uniform-threshold coin (0.05)")
    g.add_argument("--unweighted-mse", action="store_true",
                   help="use the unweighted MSE reduction for regression splits")
    if variant:
        g.add_argument("--model", "--variant", dest="variant", choices=VARIANTS, help="forest variant (dmrf)")


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--seed", type=int, default=0, help="master seed (0)")
    p.add_argument("--workers", type=int, default=1, help="parallel workers; results do not depend on it")
    p.add_argument("--out-dir", default=".", help="directory for outputs and the config echo")


def _add_data(p: argparse.ArgumentParser, nargs=None):
    p.add_argument("data", nargs=nargs, help="CSV path (header row) or a registered dataset name")
    p.add_argument("--label-col", default="-1", help="label column index or name (-1 = last)")
    p.add_argument("--task", choices=("class", "reg"), help="task kind for CSV paths (class)")
    p.add_argument("--data-dir", help="directory holding registered datasets that are not bundled")


def _add_protocol(p: argparse.ArgumentParser):
    p.add_argument("--repeats", type=int, default=10, help="random train/test repeats (10)")
    p.add_argument("--test-fraction", type=float, default=0.2, help="test share per repeat (0.2)")
    p.add_argument("--no-stratify", action="store_true", help="unstratified test draws for classification")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dmrf", description="Multinomial random forests and baselines.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a forest and save the model document")
    _add_data(p)
    _add_common(p)
    _add_params(p)
    p.add_argument("--output", help="model document path (OUT_DIR/model.json)")
    p.add_argument("--stamp", action="store_true", help="record the build time (breaks byte identity)")

    p = sub.add_parser("predict", help="predict with a saved model")
    p.add_argument("data", help="CSV path; a label column, if present, is ignored")
    p.add_argument("--model", required=True, help="model document to load")
    p.add_argument("--output", help="predictions path (OUT_DIR/predictions.csv)")
    _add_common(p)

    p = sub.add_parser("evaluate", help="score a saved model, or a variant over repeated splits")
    _add_data(p)
    _add_common(p)
    _add_params(p)
    _add_protocol(p)
    p.add_argument("--model-file", help="score this saved model on DATA instead of running the protocol")

    p = sub.add_parser("benchmark", help="compare variants over datasets with significance tests")
    _add_data(p, nargs="+")
    _add_common(p)
    _add_params(p, variant=False)
    _add_protocol(p)
    p.add_argument("--models", "--variants", dest="variants", default="dmrf,brieman",
                   help=f"comma-separated variants from: {', '.join(VARIANTS)}")

    p = sub.add_parser("sweep", help="DMRF metric over a two-parameter grid")
    _add_data(p)
    _add_common(p)
    _add_params(p, variant=False)
    _add_protocol(p)
    p.add_argument("--grid", choices=("pq", "b"), default="pq", help="pq: (p, q_n); b: (B1, B2)")

    p = sub.add_parser("consistency", help="risk curve on a synthetic task with known optimum")
    p.add_argument("--task", choices=("class", "reg"), default="class")
    p.add_argument("--schedule", default="500,2000,8000,32000", help="comma-separated sample sizes")
    p.add_argument("--noise-sd", type=float, default=0.0, help="regression noise sd (0)")
    p.add_argument("--n-test", type=int, default=100_000, help="fresh test draw size")
    _add_common(p)
    _add_params(p, variant=False)

    p = sub.add_parser("replay", help="re-run the command recorded in a config echo")
    p.add_argument("config", help="config.json written by an earlier run")
    p.add_argument("--out-dir", help="override the recorded output directory")
    return parser


def resolve_params(args) -> HyperParams:
    changes = {"seed": args.seed}
    for flag, name in PARAM_FLAGS.items():
        v = getattr(args, flag, None)
        if v is not None:
            changes[name] = v
    if getattr(args, "unweighted_mse", False):
        changes["weighted_mse_reduction"] = False
    try:
        return HyperParams(**changes)
    except ValueError as e:
        raise UsageError(str(e)) from None


def resolve_protocol(args) -> EvalProtocol:
    try:
        return EvalProtocol(args.repeats, args.test_fraction, not args.no_stratify, args.seed)
    except ValueError as e:
        raise UsageError(str(e)) from None


def _label_col(text: str):
    try:
        return int(text)
    except ValueError:
        return text


def load_data(spec: str, args):
    """Dataset from a CSV path, or from the registry when ``spec`` names one."""
    path = Path(spec)
    if not path.exists() and spec in REGISTRY:
        return REGISTRY[spec].name, load_named(spec, getattr(args, "data_dir", None))
    if not path.exists():
        raise FileNotFoundError(f"dataset not found: {spec}")
    task = normalize_task(args.task) if args.task else CLASSIFICATION
    return path.stem, load_csv(path, _label_col(args.label_col), task)


def _out_dir(args) -> Path:
    d = Path(args.out_dir)
    d.mkdir(parents=True, exist_ok=True)
    return d


def write_config(args, out: Path, **resolved) -> Path:
    recorded = {k: v for k, v in vars(args).items() if k not in ("func", "verbose")}
    doc = {"dmrf_version": __version__, "args": recorded}
    doc.update(resolved)
    path = out / CONFIG_NAME
    path.write_text(json.dumps(doc, sort_keys=True, indent=1) + "\n", encoding="utf-8")
    return path


def _write(path: Path, text: str):
    path.write_text(text, encoding="utf-8")
    log.info("wrote %s", path)


def cmd_train(args) -> int:
    params = resolve_params(args)
    name, ds = load_data(args.data, args)
    out = _out_dir(args)
    model = train_forest(ds, params, args.workers, stamp=args.stamp)
    model_path = Path(args.output) if args.output else out / "model.json"
    save_model(model, model_path)
    train_metric = (accuracy(model.predict_class(ds.features), ds.labels) if ds.is_classification
                    else mean_squared_error(model.predict_value(ds.features), ds.labels))
    summary = {
        "dataset": name,
        "n_samples": ds.n_samples,
        "n_features": ds.n_features,
        "task": ds.task,
        "variant": params.variant,
        "train_metric": "accuracy" if ds.is_classification else "mse",
        "train_value": train_metric,
        "n_leaves": int(sum(t.leaves().size for t in model.trees)),
        "counters": dict(sorted(model.train_counters.items())),
    }
    _write(out / "summary.json", json.dumps(summary, sort_keys=True, indent=1) + "\n")
    write_config(args, out, params=params.to_dict())
    print(f"trained {params.M} {params.variant} trees on {name} ({ds.n_samples}x{ds.n_features}); "
          f"train {summary['train_metric']} {train_metric:.4f}; model -> {model_path}")
    return EXIT_OK


def _prediction_features(path: Path, model):
    """Feature matrix of ``path`` encoded with the model's schema.

    Returns ``None`` for an empty file or a header with no rows.
    """
    if path.stat().st_size == 0:
        return None
    header, rows = read_table(path)
    if not rows:
        return None
    schema = model.schema
    if schema is not None and schema.label_name in header:
        j = header.index(schema.label_name)
        header = header[:j] + header[j + 1:]
        rows = [r[:j] + r[j + 1:] for r in rows]
    if len(header) != model.n_features:
        raise DataError(f"model expects {model.n_features} features, {path} has {len(header)}")
    if schema is None:
        return np.array([[float(c) for c in r] for r in rows])
    dummy = schema.classes[0] if schema.classes else "0"
    ds = encode_rows(header + [schema.label_name], [r + [dummy] for r in rows], len(header), schema.task, schema)
    return ds.features


def cmd_predict(args) -> int:
    path = Path(args.data)
    if not path.exists():
        raise FileNotFoundError(f"dataset not found: {path}")
    model = load_model_file(args.model)
    out = _out_dir(args)
    dest = Path(args.output) if args.output else out / "predictions.csv"
    X = _prediction_features(path, model)
    write_config(args, out)
    if X is None:
        dest.write_text("", encoding="utf-8")
        print(f"{path} has no rows; wrote empty {dest}")
        return EXIT_OK
    with open(dest, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        if model.is_classification:
            pred = model.predict_class(X)
            gamma = model.predict_proba(X)
            names = model.schema.classes if model.schema else [str(k) for k in range(model.n_classes)]
            w.writerow(["prediction"] + [f"gamma_{c}" for c in names])
            for k, g in zip(pred, gamma):
                w.writerow([names[k]] + [repr(float(v)) for v in g])
        else:
            w.writerow(["prediction"])
            for v in model.predict_value(X):
                w.writerow([repr(float(v))])
    print(f"wrote {X.shape[0]} predictions to {dest}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    name, ds = load_data(args.data, args)
    out = _out_dir(args)
    metric = "accuracy" if ds.is_classification else "mse"
    if args.model_file:
        model = load_model_file(args.model_file)
        value = (accuracy(model.predict_class(ds.features), ds.labels) if ds.is_classification
                 else mean_squared_error(model.predict_value(ds.features), ds.labels))
        result = {"dataset": name, "model": args.model_file, "metric": metric, "value": value}
        write_config(args, out)
        print(f"{name}: {metric} {value:.4f}")
    else:
        params = resolve_params(args)
        proto = resolve_protocol(args)
        scores = [benchmark.score(ds, tr, te, params.replace(
            seed=benchmark.cell_seed(proto.master_seed, name, params.variant, r)))
            for r, (tr, te) in enumerate(make_partitions(ds, proto))]
        result = {"dataset": name, "variant": params.variant, "metric": metric, "scores": scores,
                  "mean": float(np.mean(scores)), "std": float(np.std(scores, ddof=1)) if len(scores) > 1 else 0.0}
        write_config(args, out, params=params.to_dict(), protocol=proto.__dict__)
        print(f"{name} {params.variant}: {metric} {result['mean']:.4f} +/- {result['std']:.4f} "
              f"over {len(scores)} repeats")
    _write(out / "evaluation.json", json.dumps(result, sort_keys=True, indent=1) + "\n")
    return EXIT_OK


def cmd_benchmark(args) -> int:
    params = resolve_params(args)
    proto = resolve_protocol(args)
    variants = [v.strip() for v in args.variants.split(",") if v.strip()]
    bad = [v for v in variants if v not in VARIANTS]
    if bad or not variants:
        raise UsageError(f"unknown variants {bad}; choose from {', '.join(VARIANTS)}")
    datasets = dict(load_data(d, args) for d in args.data)
    out = _out_dir(args)
    report = benchmark.run_benchmark(datasets, variants, proto, params, args.workers)
    _write(out / "report.csv", report.to_csv())
    _write(out / "tests.csv", report.tests_csv())
    _write(out / "report.json", report.to_json())
    text = report.to_text()
    _write(out / "report.txt", text)
    write_config(args, out, params=params.to_dict(), protocol=proto.__dict__)
    print(text, end="")
    return EXIT_OK


def cmd_sweep(args) -> int:
    params = resolve_params(args)
    proto = resolve_protocol(args)
    name, ds = load_data(args.data, args)
    out = _out_dir(args)
    rows = benchmark.parameter_sweep(ds, args.grid, params, proto, args.workers, name=name)
    _write(out / f"sweep_{args.grid}.csv", benchmark.sweep_csv(rows))
    write_config(args, out, params=params.to_dict(), protocol=proto.__dict__)
    best = (max if ds.is_classification else min)(rows, key=lambda r: r.mean)
    print(f"{len(rows)} grid cells; best {best.param1}={best.value1:g}, {best.param2}={best.value2:g}: {best.mean:.4f}")
    return EXIT_OK


def _schedule(text: str) -> list[int]:
    try:
        values = [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise UsageError(f"schedule must be comma-separated integers, got {text!r}") from None
    if not values or min(values) < 2:
        raise UsageError("schedule needs sample sizes >= 2")
    return values


def cmd_consistency(args) -> int:
    params = resolve_params(args)
    schedule = _schedule(args.schedule)
    task = normalize_task(args.task)
    out = _out_dir(args)
    curve = consistency.consistency_experiment(task, schedule, params, args.n_test, args.noise_sd,
                                               args.seed, args.workers)
    _write(out / "curve.csv", curve.to_csv())
    write_config(args, out, params=params.to_dict())
    for pt in curve.points:
        print(f"n={pt.n:>7} k_n={pt.k_n:>4} risk={pt.risk:.5f} gap={pt.gap:.5f}")
    return EXIT_OK


def cmd_replay(args) -> int:
    doc = json.loads(Path(args.config).read_text(encoding="utf-8"))
    recorded = doc["args"]
    if args.out_dir:
        recorded["out_dir"] = args.out_dir
    ns = argparse.Namespace(verbose=False, **recorded)
    return COMMANDS[ns.command](ns)


COMMANDS = {
    "train": cmd_train,
    "predict": cmd_predict,
    "evaluate": cmd_evaluate,
    "benchmark": cmd_benchmark,
    "sweep": cmd_sweep,
    "consistency": cmd_consistency,
    "replay": cmd_replay,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as e:
        print(f"dmrf {args.command}: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (FileNotFoundError, DatasetUnavailable, DataError, ModelFormatError, ValueError, TypeError, OSError) as e:
        print(f"dmrf {args.command}: error: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())

"""Impute missing tabular data and run the evaluation experiments.

Subcommands: impute, eval, sweep, ablate, downstream, replay.

Every run writes a JSON manifest next to its output; ``segan replay
MANIFEST`` re-executes it with the recorded configuration.
"""
from __future__ import annotations

import argparse
import datetime as _dt
import json
import logging
import sys
from dataclasses import replace

import numpy as np

from . import __version__, kernels
from .data import decode, encode, load_csv, write_csv
from .errors import ConfigError, SeganError
from .evaluation import (
    DEFAULT_RATES,
    METHODS,
    downstream_compare,
    evaluate_dataset,
    resolve_for_dataset,
    run_ablation,
    sweep_missing_rate,
)
from .model import save_model
from .training import TrainConfig, impute, predict_labels, train

log = logging.getLogger("segan")

# flag name -> TrainConfig field
HYPER_FLAGS = {
    "lr": "learning_rate",
    "epochs": "epochs",
    "batch": "batch_size",
    "dropout": "dropout_rate",
    "hint_rate": "hint_rate",
    "label_rate": "label_rate",
    "alpha": "alpha",
    "beta": "beta",
    "threshold": "pseudo_label_threshold",
    "warmup": "warmup_epochs",
    "hidden": "hidden",
}


def _float_list(text):
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _int_list(text):
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _method_list(text):
    methods = [t.strip() for t in text.split(",") if t.strip()]
    bad = [m for m in methods if m not in METHODS]
    if bad:
        raise argparse.ArgumentTypeError(f"unknown method(s) {bad}; choose from {METHODS}")
    return methods


def _common(p, experiment=True):
    p.add_argument("--input", required=True, help="input CSV")
    p.add_argument("--label-col", default=None, help="label / target column name")
    p.add_argument("--config", default=None, help="flat JSON file of TrainConfig fields")
    p.add_argument("--out", required=True, help="output path")
    p.add_argument("--jobs", type=int, default=1)
    if experiment:
        p.add_argument("--seeds", type=_int_list, default=[0, 1, 2, 3, 4])
        p.add_argument("--missing-rate", type=float, default=None,
                       help="inject MCAR at this rate before the holdout split")
    else:
        p.add_argument("--seed", type=int, default=0)
    g = p.add_argument_group("hyperparameters")
    g.add_argument("--lr", type=float)
    g.add_argument("--epochs", type=int)
    g.add_argument("--batch", type=int)
    g.add_argument("--dropout", type=float)
    g.add_argument("--hint-rate", type=float)
    g.add_argument("--label-rate", type=float)
    g.add_argument("--alpha", type=float)
    g.add_argument("--beta", type=float)
    g.add_argument("--threshold", type=float)
    g.add_argument("--warmup", type=int)
    g.add_argument("--hidden", type=int)


def build_parser():
    parser = argparse.ArgumentParser(prog="segan", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("impute", help="train on a CSV and write the completed CSV")
    _common(p, experiment=False)
    p.add_argument("--model-out", default=None, help="model file (default: OUT.model)")

    p = sub.add_parser("eval", help="holdout RMSE over seeds")
    _common(p)
    p.add_argument("--methods", type=_method_list, default=["segan"])

    p = sub.add_parser("sweep", help="holdout RMSE across MCAR rates")
    _common(p)
    p.add_argument("--rates", type=_float_list, default=list(DEFAULT_RATES))
    p.add_argument("--methods", type=_method_list, default=["segan"])

    p = sub.add_parser("ablate", help="full model vs the three ablations")
    _common(p)

    p = sub.add_parser("downstream", help="post-imputation prediction quality")
    _common(p)
    p.add_argument("--task", choices=["classification", "regression"], default="classification")
    p.add_argument("--methods", type=_method_list, default=["segan", "mean"])

    p = sub.add_parser("replay", help="re-run a command from its manifest")
    p.add_argument("manifest")
    p.add_argument("--out", default=None, help="write outputs here instead of the recorded path")
    return parser


def resolve_config(args) -> TrainConfig:
    """defaults < config file < command-line flags."""
    values = {}
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            loaded = json.load(fh)
        if not isinstance(loaded, dict):
            raise ConfigError(f"{args.config}: expected a flat JSON object")
        values.update(loaded)
    for flag, name in HYPER_FLAGS.items():
        value = getattr(args, flag, None)
        if value is not None:
            values[name] = value
    return TrainConfig.from_dict(values)


def _options(args) -> dict:
    keys = ["input", "label_col", "out", "jobs", "seeds", "seed", "missing_rate", "rates",
            "methods", "task", "model_out"]
    return {k: getattr(args, k) for k in keys if hasattr(args, k)}


def _now():
    return _dt.datetime.now(_dt.timezone.utc).isoformat()


def _write_jsonl(path, records):
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def _manifest_path(out):
    return f"{out}.manifest.json"


def _record(command, cfg, seed, metric, value, **extra):
    return {"command": command, "config": cfg, "seed": seed, "metric": metric,
            "value": value, "status": "ok", **extra}


def _failed(command, cfg, seed, error, **extra):
    return {"command": command, "config": cfg, "seed": seed, "status": "failed",
            "error": error, **extra}


def _eval_records(command, result, cfg, **extra):
    records = [_record(command, cfg, s, "rmse", v, **extra)
               for s, v in zip(result.seeds, result.per_seed)]
    records += [_failed(command, cfg, s, err, **extra) for s, err in result.failures.items()]
    return records


def _summary_line(label, result):
    return f"{label:<24} rmse mean={result.rmse:.6f} std={result.std:.6f} n={len(result.per_seed)}"


def cmd_impute(opts, config: TrainConfig):
    table, schema = load_csv(opts["input"], opts["label_col"])
    dataset = encode(table, schema)
    config = replace(resolve_for_dataset(config, dataset), seed=opts["seed"])
    model, report = train(dataset, config)
    completed = impute(model, dataset, opts["seed"])
    labels = None
    if table.labels is not None and model.clf_head is not None:
        predicted = predict_labels(model, completed)
        labels = [c if c is not None else schema.label_classes[predicted[i]]
                  for i, c in enumerate(table.labels)]
    write_csv(opts["out"], table, decode(completed, schema), labels)
    model_path = opts.get("model_out") or f"{opts['out']}.model"
    save_model(model, model_path)
    last = report.epochs[-1]
    print(f"imputed {int((dataset.mask == 0).sum())} cells over {dataset.n} rows; "
          f"final L_G={last.generator_loss:.6f} L_D={last.discriminator_loss} "
          f"L_C={last.classifier_loss}")
    return [opts["out"], model_path], 0, config


def cmd_eval(opts, config):
    dataset = _load(opts)
    cfg = config.to_dict()
    records, failed = [], False
    for method in opts["methods"]:
        res = evaluate_dataset(dataset, config, opts["seeds"], method, opts["missing_rate"],
                               opts["jobs"])
        records += _eval_records("eval", res, cfg, method=method,
                                 missing_rate=opts["missing_rate"])
        failed |= bool(res.failures)
        print(_summary_line(method, res))
    _write_jsonl(opts["out"], records)
    return [opts["out"]], int(failed), config


def cmd_sweep(opts, config):
    dataset = _load(opts)
    cfg = config.to_dict()
    records, failed = [], False
    for method in opts["methods"]:
        for rate, res in sweep_missing_rate(dataset, config, opts["rates"], opts["seeds"],
                                            method, opts["jobs"]):
            records += _eval_records("sweep", res, cfg, method=method, missing_rate=rate)
            failed |= bool(res.failures)
            print(_summary_line(f"{method} @ {rate:g}", res))
    _write_jsonl(opts["out"], records)
    return [opts["out"]], int(failed), config


def cmd_ablate(opts, config):
    dataset = _load(opts)
    records, failed = [], False
    table = run_ablation(dataset, config, opts["seeds"], opts["missing_rate"], opts["jobs"])
    for variant, res in table.items():
        records += _eval_records("ablate", res, res.config, variant=variant,
                                 missing_rate=opts["missing_rate"])
        failed |= bool(res.failures)
        print(_summary_line(variant, res))
    _write_jsonl(opts["out"], records)
    return [opts["out"]], int(failed), config


def cmd_downstream(opts, config):
    if opts["label_col"] is None:
        raise ConfigError("downstream requires --label-col (the prediction target)")
    table, schema = load_csv(opts["input"], opts["label_col"])
    dataset = encode(table, schema)
    if any(c is None for c in table.labels):
        raise ConfigError("downstream requires a target value on every row")
    if opts["task"] == "regression":
        target = np.array([float(c) for c in table.labels])
        dataset.labels[:] = -1
        dataset.n_classes = 0
    else:
        target = dataset.labels.copy()
    cfg = config.to_dict()
    records = []
    metric = "auc" if opts["task"] == "classification" else "mae"
    for method in opts["methods"]:
        res = downstream_compare(dataset, target, opts["task"], config, opts["seeds"], method,
                                 opts["missing_rate"])
        values = res.per_seed_auc if metric == "auc" else res.per_seed_mae
        records += [_record("downstream", cfg, s, metric, v, method=method, task=opts["task"],
                            missing_rate=opts["missing_rate"])
                    for s, v in zip(res.seeds, values)]
        mean = res.auc if metric == "auc" else res.mae
        print(f"{method:<24} {metric} mean={mean:.6f} n={len(values)}")
    _write_jsonl(opts["out"], records)
    return [opts["out"]], 0, config


def _load(opts):
    table, schema = load_csv(opts["input"], opts["label_col"])
    return encode(table, schema)


COMMANDS = {
    "impute": cmd_impute,
    "eval": cmd_eval,
    "sweep": cmd_sweep,
    "ablate": cmd_ablate,
    "downstream": cmd_downstream,
}


def execute(command, opts, config, argv=None):
    """Run one command and write its manifest; returns the exit status."""
    started = _now()
    outputs, status, used = COMMANDS[command](opts, config)
    manifest = {
        "command": command,
        "argv": argv,
        "config": used.to_dict(),
        "options": opts,
        "outputs": outputs,
        "version": __version__,
        "kernel_backend": kernels.BACKEND,
        "started": started,
        "finished": _now(),
        "exit_status": status,
    }
    with open(_manifest_path(opts["out"]), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return status


def replay(manifest_path, out=None):
    with open(manifest_path, encoding="utf-8") as fh:
        manifest = json.load(fh)
    opts = dict(manifest["options"])
    if out is not None:
        opts["out"] = out
        if opts.get("model_out"):
            opts["model_out"] = f"{out}.model"
    config = TrainConfig.from_dict(manifest["config"])
    return execute(manifest["command"], opts, config, manifest.get("argv"))


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "replay":
            return replay(args.manifest, args.out)
        config = resolve_config(args)
        return execute(args.command, _options(args), config, argv)
    except (SeganError, OSError) as exc:
        print(f"segan {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

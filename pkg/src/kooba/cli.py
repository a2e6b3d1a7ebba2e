"""Benchmark harness: train, evaluate, and report over datasets.

Subcommands: train (fit + report), eval (rescore a saved model), bench
(train + eval per dataset, one consolidated table). Reports are versioned
JSON plus flat CSV; wall time is measured around the fit call only and the
memory column is an allocator high-water estimate, not device-resident bytes.

Exit codes: 0 success, 2 bad configuration or input, 3 training aborted on a
non-finite loss, 4 I/O failure. KOOBA_LOG sets the log level.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import time
import tracemalloc
from dataclasses import asdict, fields, replace
from importlib import resources
from pathlib import Path
from statistics import mean, pstdev

import numpy as np

from . import model as model_mod
from .data import LorenzParams, gen_lorenz, load_csv, normalize, split_controls
from .errors import (ConfigError, InputError, KoobaError, NumericalError,
                     TrainingAbortedError)
from .model import ModelConfig

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_TRAINING = 3
EXIT_IO = 4

# CLI flag -> ModelConfig field
_FLAG_FIELDS = {
    "method": "method",
    "order": "order",
    "omega": "omega",
    "dt": "dt_basis",
    "controls": "controls",
    "seq_len": "seq_len",
    "horizon": "horizon",
    "epochs": "epochs",
    "lr": "learning_rate",
    "batch_size": "batch_size",
    "stride": "stride",
    "seed": "seed",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kooba",
                                     description="forecasting benchmark harness")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser, multi_dataset: bool) -> None:
        p.add_argument("--dataset", action="append", required=True,
                       metavar="lorenz|csv:PATH",
                       help="dataset spec" + ("; repeat for several" if multi_dataset else ""))
        p.add_argument("--method", choices=["legt", "legs"])
        p.add_argument("--order", type=int)
        p.add_argument("--omega", type=float)
        p.add_argument("--dt", type=float, help="projection step size")
        p.add_argument("--controls", type=int)
        p.add_argument("--seq-len", dest="seq_len", type=int)
        p.add_argument("--horizon", type=int)
        p.add_argument("--epochs", type=int)
        p.add_argument("--lr", type=float)
        p.add_argument("--batch-size", dest="batch_size", type=int)
        p.add_argument("--stride", type=int)
        p.add_argument("--repeats", type=int, default=1)
        p.add_argument("--seed", type=int)
        p.add_argument("--out", default="kooba-out", help="output directory")
        p.add_argument("--config", help="JSON config file (flags win over it)")

    p_train = sub.add_parser("train", help="fit a model and write report + model file")
    add_common(p_train, multi_dataset=False)

    p_eval = sub.add_parser("eval", help="rescore a saved model on a dataset")
    add_common(p_eval, multi_dataset=False)
    p_eval.add_argument("--model", required=True, help="saved model file")

    p_bench = sub.add_parser("bench", help="train + eval per dataset, one table")
    add_common(p_bench, multi_dataset=True)
    return parser


def make_config(ns: argparse.Namespace) -> ModelConfig:
    """defaults < config file < explicit flags."""
    values: dict = {}
    if ns.config:
        with open(ns.config, encoding="utf-8") as fh:
            try:
                file_cfg = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"config file {ns.config} is not valid JSON: {exc}") from exc
        known = {f.name for f in fields(ModelConfig)}
        unknown = set(file_cfg) - known
        if unknown:
            raise ConfigError(f"unknown config file keys: {sorted(unknown)}")
        values.update(file_cfg)
    for flag, field_name in _FLAG_FIELDS.items():
        flag_value = getattr(ns, flag, None)
        if flag_value is not None:
            values[field_name] = flag_value
    try:
        return ModelConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def load_dataset(spec: str) -> tuple[str, list[str], np.ndarray]:
    """Resolve a dataset spec into (tag, column names, raw table)."""
    if spec == "lorenz":
        return "lorenz", ["x", "y", "z"], gen_lorenz(LorenzParams())
    if spec.startswith("csv:"):
        path = spec[4:]
        names, table = load_csv(path)
        return Path(path).stem, names, table
    raise ConfigError(f"unknown dataset spec {spec!r}; expected 'lorenz' or 'csv:PATH'")


def config_echo(config: ModelConfig) -> dict:
    doc = asdict(config)
    doc["omega_effective"] = config.eff_omega
    doc["dt_basis_effective"] = config.eff_dt_basis
    doc["dt_system_effective"] = config.eff_dt_system
    doc["stride_effective"] = config.eff_stride
    return doc


def run_dataset(config: ModelConfig, spec: str, repeats: int) -> tuple[dict, model_mod.FlightKoobaModel]:
    """Train (with repeats), evaluate on the test split, and shape the report."""
    if repeats < 1:
        raise ConfigError(f"repeats must be positive, got {repeats}")
    tag, names, table = load_dataset(spec)
    dataset = normalize(names, table)
    states, controls = split_controls(dataset, config.controls)
    split = dataset.split_index

    times_ms: list[float] = []
    peaks: list[int] = []
    repeat_mse: list[float] = []
    first_model = None
    first_eval = None
    for i in range(repeats):
        run_config = replace(config, seed=config.seed + i)
        tracemalloc.start()
        t0 = time.perf_counter()
        fitted = model_mod.fit(run_config, states[:split], controls[:split])
        elapsed_ms = (time.perf_counter() - t0) * 1e3
        _, peak = tracemalloc.get_traced_memory()
        tracemalloc.stop()
        scores = model_mod.evaluate(fitted, states[split:], controls[split:])
        times_ms.append(elapsed_ms)
        peaks.append(int(peak))
        repeat_mse.append(scores["mean"])
        if i == 0:
            first_model, first_eval = fitted, scores

    m = config.controls
    total = first_model.parameter_count
    report = {
        "schema": SCHEMA_VERSION,
        "command": "train",
        "dataset": tag,
        "seed": config.seed,
        "config": config_echo(config),
        "mse": {"per_feature": first_eval["per_feature"], "mean": first_eval["mean"]},
        "parameters": {"controls": m, "total": total, "format": f"{m} / {total}"},
        "train_time_ms": mean(times_ms),
        "train_time_ms_stats": {"min": min(times_ms), "mean": mean(times_ms),
                                "stddev": pstdev(times_ms)},
        "memory_bytes_estimate": max(peaks),
        "loss_curve": [float(v) for v in first_model.loss_history],
        "skipped_windows": first_model.skipped_windows + first_eval["skipped_windows"],
    }
    if repeats > 1:
        report["repeats"] = {"count": repeats, "mse_means": repeat_mse,
                             "mean": mean(repeat_mse), "stddev": pstdev(repeat_mse)}
    return report, first_model


def _write_json(path: Path, doc: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def _write_loss_csv(path: Path, losses: list[float]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "loss"])
        for i, v in enumerate(losses):
            writer.writerow([i, repr(float(v))])


def cmd_train(ns: argparse.Namespace) -> int:
    config = make_config(ns)
    if len(ns.dataset) != 1:
        raise ConfigError("train takes exactly one --dataset")
    report, fitted = run_dataset(config, ns.dataset[0], ns.repeats)
    out = Path(ns.out)
    out.mkdir(parents=True, exist_ok=True)
    model_mod.save_model(fitted, out / "model.json")
    _write_json(out / "report.json", report)
    _write_loss_csv(out / "loss_curve.csv", report["loss_curve"])
    print(f"train {report['dataset']}: mean test MSE {report['mse']['mean']:.6g}, "
          f"{report['train_time_ms']:.1f} ms, parameters {report['parameters']['format']}")
    return EXIT_OK


def cmd_eval(ns: argparse.Namespace) -> int:
    if len(ns.dataset) != 1:
        raise ConfigError("eval takes exactly one --dataset")
    loaded = model_mod.load_model(ns.model)
    config = loaded.config
    if ns.horizon is not None:
        config = replace(config, horizon=ns.horizon)
        loaded = replace(loaded, config=config)
    tag, names, table = load_dataset(ns.dataset[0])
    dataset = normalize(names, table)
    states, controls = split_controls(dataset, config.controls)
    split = dataset.split_index
    t0 = time.perf_counter()
    scores = model_mod.evaluate(loaded, states[split:], controls[split:])
    eval_ms = (time.perf_counter() - t0) * 1e3
    m = config.controls
    total = loaded.parameter_count
    report = {
        "schema": SCHEMA_VERSION,
        "command": "eval",
        "dataset": tag,
        "seed": config.seed,
        "config": config_echo(config),
        "mse": {"per_feature": scores["per_feature"], "mean": scores["mean"]},
        "parameters": {"controls": m, "total": total, "format": f"{m} / {total}"},
        "eval_time_ms": eval_ms,
        "loss_curve": [float(v) for v in loaded.loss_history],
        "skipped_windows": scores["skipped_windows"],
    }
    out = Path(ns.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "eval_report.json", report)
    print(f"eval {tag}: mean test MSE {report['mse']['mean']:.6g}")
    return EXIT_OK


def cmd_bench(ns: argparse.Namespace) -> int:
    config = make_config(ns)
    rows = []
    models = {}
    succeeded = 0
    last_error_code = EXIT_CONFIG
    for spec in ns.dataset:
        try:
            report, fitted = run_dataset(config, spec, ns.repeats)
            rows.append({
                "dataset": report["dataset"],
                "mse_mean": report["mse"]["mean"],
                "train_time_ms": report["train_time_ms"],
                "memory_bytes_estimate": report["memory_bytes_estimate"],
                "parameters": report["parameters"]["format"],
                "seed": report["seed"],
            })
            models[report["dataset"]] = fitted
            succeeded += 1
        except KoobaError as exc:
            log.error("dataset %s failed: %s", spec, exc)
            rows.append({"dataset": spec, "error": str(exc)})
            last_error_code = _exit_code_for(exc)
        except OSError as exc:
            log.error("dataset %s failed: %s", spec, exc)
            rows.append({"dataset": spec, "error": str(exc)})
            last_error_code = EXIT_IO
    doc = {
        "schema": SCHEMA_VERSION,
        "command": "bench",
        "seed": config.seed,
        "config": config_echo(config),
        "rows": rows,
    }
    out = Path(ns.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "bench_report.json", doc)
    with open(out / "bench_report.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        header = ["dataset", "mse_mean", "train_time_ms", "memory_bytes_estimate",
                  "parameters", "seed", "error"]
        writer.writerow(header)
        for row in rows:
            writer.writerow([row.get(k, "") for k in header])
    for tag, fitted in models.items():
        model_mod.save_model(fitted, out / f"{tag}_model.json")
    for row in rows:
        if "error" in row:
            print(f"bench {row['dataset']}: FAILED ({row['error']})")
        else:
            print(f"bench {row['dataset']}: mean test MSE {row['mse_mean']:.6g}, "
                  f"{row['train_time_ms']:.1f} ms, parameters {row['parameters']}")
    return EXIT_OK if succeeded else last_error_code


def validate_report(doc: dict) -> list[str]:
    """Check a report document against the shipped schema; returns problems."""
    schema = json.loads(resources.files("kooba").joinpath(
        "schemas/bench_report_v1.json").read_text(encoding="utf-8"))
    problems: list[str] = []

    def expect(value, kind: str, where: str) -> None:
        ok = True
        if kind == "int":
            ok = isinstance(value, int) and not isinstance(value, bool)
        elif kind == "str":
            ok = isinstance(value, str)
        elif kind == "dict":
            ok = isinstance(value, dict)
        elif kind == "number":
            ok = isinstance(value, (int, float)) and not isinstance(value, bool)
        elif kind == "positive_number":
            ok = isinstance(value, (int, float)) and not isinstance(value, bool) and value > 0
        elif kind == "positive_int":
            ok = isinstance(value, int) and not isinstance(value, bool) and value > 0
        elif kind == "list[number]":
            ok = isinstance(value, list) and all(
                isinstance(v, (int, float)) and not isinstance(v, bool) for v in value)
        if not ok:
            problems.append(f"{where}: expected {kind}, got {value!r}")

    for key, kind in schema["report"]["required"].items():
        if key not in doc:
            problems.append(f"missing field {key}")
        else:
            expect(doc[key], kind, key)
    if doc.get("schema") != schema["schema"]:
        problems.append(f"schema version {doc.get('schema')!r} != {schema['schema']}")

    if doc.get("command") in ("train", "eval"):
        extras = dict(schema["report"]["train_extra"])
        if doc.get("command") == "eval":
            extras.pop("train_time_ms")
            extras.pop("memory_bytes_estimate")
        for key, kind in extras.items():
            if key not in doc:
                problems.append(f"missing field {key}")
            else:
                expect(doc[key], kind, key)
        if "mse" in doc and isinstance(doc["mse"], dict):
            for key, kind in schema["mse"]["required"].items():
                expect(doc["mse"].get(key), kind, f"mse.{key}")
        if "parameters" in doc and isinstance(doc["parameters"], dict):
            for key, kind in schema["parameters"]["required"].items():
                expect(doc["parameters"].get(key), kind, f"parameters.{key}")
    elif doc.get("command") == "bench":
        rows = doc.get("rows")
        if not isinstance(rows, list):
            problems.append("rows: expected a list")
            rows = []
        for i, row in enumerate(rows):
            if not isinstance(row, dict):
                problems.append(f"rows[{i}]: expected an object")
                continue
            expect(row.get("dataset"), "str", f"rows[{i}].dataset")
            branch = "failure" if "error" in row else "success"
            for key, kind in schema["row"][branch].items():
                expect(row.get(key), kind, f"rows[{i}].{key}")
    return problems


def _exit_code_for(exc: Exception) -> int:
    if isinstance(exc, TrainingAbortedError):
        return EXIT_TRAINING
    if isinstance(exc, NumericalError):
        return EXIT_TRAINING
    if isinstance(exc, (ConfigError, InputError, KoobaError)):
        return EXIT_CONFIG
    if isinstance(exc, OSError):
        return EXIT_IO
    raise exc


def main(argv: list[str] | None = None) -> int:
    level = os.environ.get("KOOBA_LOG", "warning").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    ns = parser.parse_args(argv)
    handlers = {"train": cmd_train, "eval": cmd_eval, "bench": cmd_bench}
    try:
        return handlers[ns.command](ns)
    except (KoobaError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _exit_code_for(exc)


if __name__ == "__main__":
    sys.exit(main())

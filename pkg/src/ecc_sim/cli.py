"""Experiment runner: `ecc-sim run|sweep-delta|ablate --config <path>`.

Reports are plain CSV (header row, cost constants embedded as a leading `#`
comment line) plus a JSON manifest holding the fully resolved configuration,
so a manifest + seed reproduces every output byte-identically.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import traceback

import numpy as np

from ecc_sim.config import ExperimentConfig, load_config
from ecc_sim.continual import EdgeArch, LifecycleResult, TrainConfig, run_lifecycle, setup_stage
from ecc_sim.data import Dataset, generate_blobs, load_csv, make_task_stream
from ecc_sim.exceptions import ConfigError
from ecc_sim.filtering import FilterConfig
from ecc_sim.metrics import avg_accuracy
from ecc_sim.nn import PerfectOracle, train_ann
from ecc_sim.snn import LifConfig


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_csv(path, header: list[str], rows: list[list], constants=None) -> None:
    """RFC-4180-style CSV with an optional `#`-prefixed constants line."""
    lines = []
    if constants is not None:
        pairs = ",".join(f"{k}={_fmt(v)}" for k, v in constants.items())
        lines.append(f"# costs: {pairs}")
    lines.append(",".join(header))
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_csv(path):
    """Read back a report CSV; returns (header, rows-of-strings)."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = [l.rstrip("\n") for l in fh if not l.startswith("#")]
    header = lines[0].split(",")
    return header, [l.split(",") for l in lines[1:]]


def build_dataset(config: ExperimentConfig) -> Dataset:
    d = config.data
    if d.source == "blobs":
        return generate_blobs(config.train.seed, d.n_classes, d.dim,
                              d.n_per_class, d.spread)
    if d.source == "csv":
        if not d.path:
            raise ConfigError("csv data source requires data.path")
        return load_csv(d.path)
    raise ConfigError(f"unknown data source {d.source!r}")


def build_cloud(config: ExperimentConfig, dataset: Dataset, stream):
    if config.cloud.perfect_oracle:
        return PerfectOracle(dataset.n_classes)
    # trained on every class from the start, using only train-split samples
    train_feats = np.concatenate([s.train.features for s in stream.splits])
    train_labels = np.concatenate([s.train.labels for s in stream.splits])
    train_set = Dataset(train_feats, train_labels, dataset.n_classes,
                        name=f"{dataset.name}-cloud-train")
    return train_ann(train_set, list(config.cloud.hidden) + [dataset.n_classes],
                     config.cloud.epochs, config.train.seed,
                     lr=config.cloud.lr, batch_size=config.cloud.batch_size,
                     feature_tap_index=config.cloud.feature_tap_index)


def build_train_config(config: ExperimentConfig) -> TrainConfig:
    t = config.train
    return TrainConfig(epochs=t.epochs, batch_size=t.batch_size, lr=t.lr,
                       momentum=t.momentum, update_epochs=t.update_epochs,
                       update_lr=t.update_lr, seed=t.seed,
                       weights=config.losses)


def build_edge_arch(config: ExperimentConfig) -> EdgeArch:
    e = config.edge
    lif = LifConfig(tau=e.tau, v_threshold=e.v_threshold, v_reset=e.v_reset,
                    surrogate_width=e.surrogate_width, n_steps=e.n_steps,
                    surrogate_mode=e.surrogate_mode)
    return EdgeArch(hidden=tuple(e.hidden), lif=lif,
                    tap_layer_index=e.tap_layer_index)


def run_single_lifecycle(config: ExperimentConfig, delta: float,
                         dataset=None, stream=None, cloud=None) -> LifecycleResult:
    dataset = dataset if dataset is not None else build_dataset(config)
    stream = stream if stream is not None else make_task_stream(
        dataset, config.data.u, config.data.v, config.data.test_fraction,
        config.train.seed)
    cloud = cloud if cloud is not None else build_cloud(config, dataset, stream)
    return run_lifecycle(stream, cloud, FilterConfig(delta), config.costs,
                         build_train_config(config), build_edge_arch(config))


def _write_manifest(config: ExperimentConfig, out_dir: str) -> None:
    manifest = {"config": config.resolved(), "seed": config.train.seed}
    with open(os.path.join(out_dir, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_lifecycle_reports(result: LifecycleResult, config: ExperimentConfig,
                             out_dir: str) -> None:
    constants = config.costs.as_dict()
    n_tasks = len(result.reports)

    rows = []
    for n in range(1, n_tasks + 1):
        row = [n] + [result.matrix.get(n, m) for m in range(1, n + 1)]
        row += [""] * (n_tasks - n)
        rows.append(row)
    header = ["task"] + [f"a_m{m}" for m in range(1, n_tasks + 1)]
    write_csv(os.path.join(out_dir, "accuracy_matrix.csv"), header, rows,
              constants)

    rows = []
    for n, report in enumerate(result.reports, start=1):
        rows.append([n, report.accuracy, report.cur, report.mean_energy_mj,
                     report.mean_latency_ms, report.buffer_size,
                     avg_accuracy(result.matrix, n)])
    write_csv(os.path.join(out_dir, "per_task_report.csv"),
              ["task", "accuracy", "cur", "mean_energy_mJ", "mean_latency_ms",
               "buffer_size", "avg_accuracy"], rows, constants)

    for n, report in enumerate(result.reports, start=1):
        rows = []
        for i, o in enumerate(report.outcomes):
            rows.append([i, o.route.value, o.score, o.prediction, o.label,
                         o.cost.total_energy_mj, o.cost.total_latency_ms])
        write_csv(os.path.join(out_dir, f"outcomes_task{n}.csv"),
                  ["index", "route", "score", "prediction", "label",
                   "energy_mJ", "latency_ms"], rows, constants)


def _frontier_rows(config: ExperimentConfig, deltas):
    dataset = build_dataset(config)
    stream = make_task_stream(dataset, config.data.u, config.data.v,
                              config.data.test_fraction, config.train.seed)
    cloud = build_cloud(config, dataset, stream)
    rows = []
    results = {}
    for delta in deltas:
        result = run_single_lifecycle(config, delta, dataset, stream, cloud)
        outcomes = [o for r in result.reports for o in r.outcomes]
        accuracy = sum(o.correct for o in outcomes) / len(outcomes)
        upload = sum(o.route.value == "cloud" for o in outcomes) / len(outcomes)
        energy = sum(o.cost.total_energy_mj for o in outcomes) / len(outcomes)
        latency = sum(o.cost.total_latency_ms for o in outcomes) / len(outcomes)
        rows.append([delta, accuracy, upload, energy, latency])
        results[delta] = result
    return rows, results


def cmd_run(config: ExperimentConfig, out_dir: str) -> None:
    os.makedirs(out_dir, exist_ok=True)
    _write_manifest(config, out_dir)
    if config.filter.is_sweep:
        rows, results = _frontier_rows(config, config.filter.deltas)
        write_csv(os.path.join(out_dir, "frontier.csv"),
                  ["delta", "accuracy", "cur", "mean_energy_mJ",
                   "mean_latency_ms"], rows, config.costs.as_dict())
        # per-task reports for the first configured delta
        _write_lifecycle_reports(results[config.filter.deltas[0]], config,
                                 out_dir)
    else:
        result = run_single_lifecycle(config, config.filter.deltas[0])
        _write_lifecycle_reports(result, config, out_dir)


def cmd_sweep_delta(config: ExperimentConfig, out_dir: str) -> None:
    os.makedirs(out_dir, exist_ok=True)
    _write_manifest(config, out_dir)
    rows, _ = _frontier_rows(config, config.filter.deltas)
    write_csv(os.path.join(out_dir, "frontier.csv"),
              ["delta", "accuracy", "cur", "mean_energy_mJ", "mean_latency_ms"],
              rows, config.costs.as_dict())


def cmd_ablate(config: ExperimentConfig, out_dir: str) -> None:
    """Setup-stage ablation over {lambda1 on/off} x {lambda2 on/off}.

    Always trains a real cloud model: the feature-alignment arms need teacher
    features, which a perfect-oracle stand-in does not expose.
    """
    from dataclasses import replace

    os.makedirs(out_dir, exist_ok=True)
    if config.cloud.perfect_oracle:
        config = replace(config, cloud=replace(config.cloud,
                                               perfect_oracle=False))
    _write_manifest(config, out_dir)
    base_weights = config.losses
    arms = [(0.0, 0.0), (base_weights.lambda1 or 1.0, 0.0),
            (0.0, base_weights.lambda2 or 0.5),
            (base_weights.lambda1 or 1.0, base_weights.lambda2 or 0.5)]
    rows = []
    for seed in range(config.train.seed,
                      config.train.seed + config.train.ablate_seeds):
        seeded = _with_seed(config, seed)
        dataset = build_dataset(seeded)
        stream = make_task_stream(dataset, seeded.data.u, seeded.data.v,
                                  seeded.data.test_fraction, seed)
        cloud = build_cloud(seeded, dataset, stream)
        for lam1, lam2 in arms:
            weights = _weights_with(base_weights, lam1, lam2)
            tcfg = TrainConfig(epochs=seeded.train.epochs,
                               batch_size=seeded.train.batch_size,
                               lr=seeded.train.lr,
                               momentum=seeded.train.momentum,
                               seed=seed, weights=weights)
            edge = setup_stage(stream.splits[0], cloud,
                               build_edge_arch(seeded), tcfg)
            acc = _task1_accuracy(edge, stream)
            rows.append([seed, lam1, lam2, acc])
    write_csv(os.path.join(out_dir, "ablation.csv"),
              ["seed", "lambda1", "lambda2", "task1_accuracy"], rows,
              config.costs.as_dict())


def _task1_accuracy(edge, stream) -> float:
    from ecc_sim.snn import snn_forward

    task1 = stream.splits[0]
    label_map = {int(c): i for i, c in enumerate(task1.class_ids)}
    logits, _ = snn_forward(edge, task1.test.features)
    truth = np.asarray([label_map[int(l)] for l in task1.test.labels])
    return float((logits.argmax(axis=1) == truth).mean())


def _with_seed(config: ExperimentConfig, seed: int) -> ExperimentConfig:
    from dataclasses import replace

    return replace(config, train=replace(config.train, seed=seed))


def _weights_with(base, lam1: float, lam2: float):
    from dataclasses import replace

    return replace(base, lambda1=lam1, lambda2=lam2)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="ecc-sim",
        description="Edge-cloud collaborative SNN lifecycle simulator")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("run", "sweep-delta", "ablate"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="YAML config path")
        p.add_argument("--seed", type=int, default=None,
                       help="override train.seed")
        p.add_argument("--out", default=None,
                       help="output directory (default: config output.dir or "
                            "$ECC_SIM_OUT)")
    args = parser.parse_args(argv)

    try:
        config = load_config(args.config)
        if args.seed is not None:
            config = _with_seed(config, args.seed)
    except (ConfigError, OSError) as exc:
        print(f"ecc-sim: config error: {exc}", file=sys.stderr)
        return 2

    out_dir = args.out or os.environ.get("ECC_SIM_OUT") or config.output.dir
    try:
        if args.command == "run":
            cmd_run(config, out_dir)
        elif args.command == "sweep-delta":
            cmd_sweep_delta(config, out_dir)
        else:
            cmd_ablate(config, out_dir)
    except Exception as exc:  # runtime failure -> exit 1
        traceback.print_exc()
        print(f"ecc-sim: runtime error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())

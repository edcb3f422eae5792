"""Experiment runner and report renderer.

Config files are plain ``[section]`` / ``key = value`` text (see the bundled
files under ``configs/``). Lists are comma separated, ``#`` starts a
comment. The normalized form of the parsed config is embedded into every
report for provenance, and re-serializing a parsed config always yields that
normalized form.

Exit codes: 0 ok, 1 config error, 2 data error, 3 runtime failure.

Grammar, by example::

    [dataset]
    kind = stagger              # stagger | csv
    n_instances = 70000
    drift_points = 17500, 35000, 52500
    concepts = 1, 1i, 2, 3      # concept id, trailing "i" inverts it
    noise_rate = 0.0
    seed = 42
    # csv instead: kind = csv, path = ..., label_column = ...

    [run]
    batch_size = 1000
    strategies = Base, Replacement, WU-all, WU-latest, Add-New
    metric = accuracy           # accuracy | normalized_auc
    seed = 42

    [budget]
    max_candidates = 16
    validation_fraction = 0.33
    # max_seconds = 600         # optional wall-clock cap (non-deterministic)

    [detector]
    window = 25
    delta = 1e-7

    [ensemble]
    rounds = 50
"""

from __future__ import annotations

import argparse
import math
import os
import sys
import time
from dataclasses import dataclass
from typing import Optional

from .data import Batch, DataError, load_csv, split_stream
from .drift import DEFAULT_DELTA, DEFAULT_WINDOW, FhddmState
from .lifelong import RunReport, Strategy, run_lifelong
from .metrics import METRICS
from .search import SearchBudget
from .stagger import StaggerConfig, generate_stagger

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_DATA = 2
EXIT_RUNTIME = 3


class ConfigError(Exception):
    """Malformed experiment configuration (message carries the line)."""


@dataclass
class ExperimentConfig:
    dataset_kind: str = "stagger"
    csv_path: str = ""
    label_column: str = ""
    n_instances: int = 70_000
    drift_points: tuple[int, ...] = (17_500, 35_000, 52_500)
    concepts: tuple[tuple[int, bool], ...] = ((1, False), (1, True), (2, False), (3, False))
    noise_rate: float = 0.0
    dataset_seed: int = 42
    batch_size: int = 1_000
    strategies: tuple[Strategy, ...] = (Strategy.BASE,)
    metric: str = "accuracy"
    run_seed: int = 42
    max_candidates: int = 16
    validation_fraction: float = 0.33
    max_seconds: Optional[float] = None
    detector_window: int = DEFAULT_WINDOW
    detector_delta: float = DEFAULT_DELTA
    ensemble_rounds: int = 50

    def normalized_text(self) -> str:
        lines = ["[dataset]", f"kind = {self.dataset_kind}"]
        if self.dataset_kind == "csv":
            lines += [f"path = {self.csv_path}", f"label_column = {self.label_column}"]
        else:
            concepts = ", ".join(
                f"{cid}i" if inv else str(cid) for cid, inv in self.concepts
            )
            lines += [
                f"n_instances = {self.n_instances}",
                f"drift_points = {', '.join(str(p) for p in self.drift_points)}",
                f"concepts = {concepts}",
                f"noise_rate = {self.noise_rate!r}",
                f"seed = {self.dataset_seed}",
            ]
        lines += [
            "",
            "[run]",
            f"batch_size = {self.batch_size}",
            f"strategies = {', '.join(s.value for s in self.strategies)}",
            f"metric = {self.metric}",
            f"seed = {self.run_seed}",
            "",
            "[budget]",
            f"max_candidates = {self.max_candidates}",
            f"validation_fraction = {self.validation_fraction!r}",
        ]
        if self.max_seconds is not None:
            lines.append(f"max_seconds = {self.max_seconds!r}")
        lines += [
            "",
            "[detector]",
            f"window = {self.detector_window}",
            f"delta = {self.detector_delta!r}",
            "",
            "[ensemble]",
            f"rounds = {self.ensemble_rounds}",
        ]
        return "\n".join(lines) + "\n"


def _parse_sections(text: str) -> dict[str, dict[str, tuple[str, int]]]:
    sections: dict[str, dict[str, tuple[str, int]]] = {}
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1].strip()
            sections.setdefault(current, {})
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        if current is None:
            raise ConfigError(f"line {lineno}: key outside any [section]")
        sections[current][key.strip()] = (value.strip(), lineno)
    return sections


def _take(sections, section, key, convert, default=None, required=False):
    entry = sections.get(section, {}).get(key)
    if entry is None:
        if required:
            raise ConfigError(f"missing required key {key!r} in [{section}]")
        return default
    value, lineno = entry
    try:
        return convert(value)
    except (ValueError, KeyError) as exc:
        raise ConfigError(f"line {lineno}: bad value for {key!r}: {exc}") from exc


def _csv_list(value: str) -> list[str]:
    return [v.strip() for v in value.split(",") if v.strip()]


def _parse_concepts(value: str) -> tuple[tuple[int, bool], ...]:
    out = []
    for token in _csv_list(value):
        inverted = token.endswith("i")
        cid = int(token[:-1] if inverted else token)
        out.append((cid, inverted))
    return tuple(out)


def parse_config(text: str) -> ExperimentConfig:
    sections = _parse_sections(text)
    known = {"dataset", "run", "budget", "detector", "ensemble"}
    unknown = set(sections) - known
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")

    cfg = ExperimentConfig()
    cfg.dataset_kind = _take(sections, "dataset", "kind", str, required=True)
    if cfg.dataset_kind not in ("stagger", "csv"):
        raise ConfigError(f"dataset kind must be stagger or csv, got {cfg.dataset_kind!r}")
    if cfg.dataset_kind == "csv":
        cfg.csv_path = _take(sections, "dataset", "path", str, required=True)
        cfg.label_column = _take(sections, "dataset", "label_column", str, required=True)
    else:
        cfg.n_instances = _take(sections, "dataset", "n_instances", int, cfg.n_instances)
        cfg.drift_points = _take(
            sections, "dataset", "drift_points",
            lambda v: tuple(int(x) for x in _csv_list(v)), cfg.drift_points,
        )
        cfg.concepts = _take(sections, "dataset", "concepts", _parse_concepts, cfg.concepts)
        cfg.noise_rate = _take(sections, "dataset", "noise_rate", float, cfg.noise_rate)
        cfg.dataset_seed = _take(sections, "dataset", "seed", int, cfg.dataset_seed)

    cfg.batch_size = _take(sections, "run", "batch_size", int, cfg.batch_size)
    cfg.strategies = _take(
        sections, "run", "strategies",
        lambda v: tuple(Strategy.parse(s) for s in _csv_list(v)),
        cfg.strategies,
    )
    cfg.metric = _take(sections, "run", "metric", str, cfg.metric)
    if cfg.metric not in METRICS:
        raise ConfigError(f"metric must be one of {METRICS}, got {cfg.metric!r}")
    cfg.run_seed = _take(sections, "run", "seed", int, cfg.run_seed)

    cfg.max_candidates = _take(sections, "budget", "max_candidates", int, cfg.max_candidates)
    cfg.validation_fraction = _take(
        sections, "budget", "validation_fraction", float, cfg.validation_fraction
    )
    cfg.max_seconds = _take(sections, "budget", "max_seconds", float, cfg.max_seconds)

    cfg.detector_window = _take(sections, "detector", "window", int, cfg.detector_window)
    cfg.detector_delta = _take(sections, "detector", "delta", float, cfg.detector_delta)
    cfg.ensemble_rounds = _take(sections, "ensemble", "rounds", int, cfg.ensemble_rounds)

    if cfg.batch_size < 1:
        raise ConfigError("batch_size must be >= 1")
    if len(set(cfg.strategies)) != len(cfg.strategies):
        raise ConfigError("duplicate strategies configured")
    return cfg


def load_dataset(cfg: ExperimentConfig) -> Batch:
    if cfg.dataset_kind == "csv":
        _, batch = load_csv(cfg.csv_path, cfg.label_column)
        return batch
    return generate_stagger(
        StaggerConfig(
            n_instances=cfg.n_instances,
            drift_points=cfg.drift_points,
            concept_schedule=cfg.concepts,
            noise_rate=cfg.noise_rate,
            seed=cfg.dataset_seed,
        )
    )


def _comment_block(text: str) -> str:
    return "".join(f"# {line}\n" for line in text.rstrip("\n").split("\n"))


def _midranks(values: list[float]) -> list[float]:
    """Rank positions (1 = best/highest value), ties get the average rank."""
    order = sorted(range(len(values)), key=lambda i: (-values[i], i))
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        avg = (i + 1 + j + 1) / 2.0
        for k in range(i, j + 1):
            ranks[order[k]] = avg
        i = j + 1
    return ranks


def run_experiment(cfg: ExperimentConfig, out_dir: str) -> list[RunReport]:
    """Execute every configured strategy and write the report files."""
    data = load_dataset(cfg)
    batches = split_stream(data, cfg.batch_size)
    if len(batches) < 1:
        raise DataError("dataset produced no batches")
    train, test = batches[0], batches[1:]

    budget = SearchBudget(
        max_candidates=cfg.max_candidates,
        max_seconds=cfg.max_seconds,
        validation_fraction=cfg.validation_fraction,
        seed=cfg.run_seed,
    )
    detector = FhddmState(cfg.detector_window, cfg.detector_delta)

    os.makedirs(out_dir, exist_ok=True)
    normalized = cfg.normalized_text()
    with open(os.path.join(out_dir, "config.normalized.txt"), "w") as fh:
        fh.write(normalized)

    reports = []
    log_lines = []
    for strategy in cfg.strategies:
        started = time.perf_counter()
        report = run_lifelong(
            train, test, strategy, cfg.metric, budget, detector,
            ensemble_rounds=cfg.ensemble_rounds,
        )
        elapsed = time.perf_counter() - started
        reports.append(report)
        path = os.path.join(out_dir, f"report_{strategy.value}.tsv")
        with open(path, "w") as fh:
            fh.write(_comment_block(normalized))
            fh.write(f"# strategy = {strategy.value}\n")
            mean = "nan" if math.isnan(report.mean_metric) else f"{report.mean_metric:.6f}"
            fh.write(f"# mean_{report.metric} = {mean}\n")
            fh.write("\n".join(report.table_lines()) + "\n")
        log_lines.append(
            f"{strategy.value}: {elapsed:.1f}s total, timings={report.timings}, "
            f"drift_events={list(report.drift_events)}, "
            f"adapt_events={list(report.adapt_events)}"
        )

    means = [r.mean_metric for r in reports]
    ranks = _midranks([(-math.inf if math.isnan(m) else m) for m in means])
    with open(os.path.join(out_dir, "comparison.tsv"), "w") as fh:
        fh.write(_comment_block(normalized))
        fh.write(f"strategy\tmean_{cfg.metric}\trank\n")
        for report, rank in zip(reports, ranks):
            mean = "nan" if math.isnan(report.mean_metric) else f"{report.mean_metric:.6f}"
            fh.write(f"{report.strategy}\t{mean}\t{rank:.1f}\n")

    # wall-clock details are real measurements: they live outside the
    # deterministic tables
    with open(os.path.join(out_dir, "run_log.txt"), "w") as fh:
        fh.write("\n".join(log_lines) + "\n")
    return reports


def read_report_table(path: str) -> list[float]:
    per_batch = []
    with open(path) as fh:
        for line in fh:
            if line.startswith("#") or line.startswith("batch\t"):
                continue
            cells = line.rstrip("\n").split("\t")
            if len(cells) >= 2:
                per_batch.append(float(cells[1]))
    return per_batch


def render_deltas(report_dir: str) -> str:
    """Per-batch improvement over the Base arm as a plottable table."""
    base_path = os.path.join(report_dir, "report_Base.tsv")
    if not os.path.exists(base_path):
        raise DataError(f"missing Base report: {base_path}")
    base = read_report_table(base_path)

    others = sorted(
        name[len("report_") : -len(".tsv")]
        for name in os.listdir(report_dir)
        if name.startswith("report_") and name.endswith(".tsv") and name != "report_Base.tsv"
    )
    if not others:  # Base against itself: an all-zero series
        others = ["Base"]
    columns = {}
    for name in others:
        series = read_report_table(os.path.join(report_dir, f"report_{name}.tsv"))
        if len(series) != len(base):
            raise DataError(f"report {name} has {len(series)} rows, Base has {len(base)}")
        columns[name] = [s - b for s, b in zip(series, base)]

    lines = ["batch\t" + "\t".join(others)]
    for i in range(len(base)):
        row = [str(i)] + [f"{columns[name][i]:.6f}" for name in others]
        lines.append("\t".join(row))
    return "\n".join(lines) + "\n"


def cmd_run(config_path: str, seed: Optional[int], out_dir: Optional[str]) -> int:
    try:
        with open(config_path) as fh:
            cfg = parse_config(fh.read())
        if seed is not None:
            cfg.run_seed = seed
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    out = out_dir or os.path.splitext(os.path.basename(config_path))[0] + "_out"
    try:
        reports = run_experiment(cfg, out)
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    for report in reports:
        mean = "nan" if math.isnan(report.mean_metric) else f"{report.mean_metric:.4f}"
        print(f"{report.strategy}: mean {report.metric} = {mean} "
              f"({len(report.drift_events)} drift events)")
    print(f"reports written to {out}/")
    return EXIT_OK


def cmd_report(report_dir: str) -> int:
    try:
        table = render_deltas(report_dir)
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    out_path = os.path.join(report_dir, "deltas_vs_base.tsv")
    with open(out_path, "w") as fh:
        fh.write(table)
    print(table, end="")
    print(f"# written to {out_path}", file=sys.stderr)
    return EXIT_OK


def main(argv: Optional[list[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="driftml",
        description="Drift-aware AutoML experiment runner",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="execute a strategy comparison from a config file")
    p_run.add_argument("config")
    p_run.add_argument("--seed", type=int, default=None, help="override [run] seed")
    p_run.add_argument("--out", default=None, help="output directory")
    p_rep = sub.add_parser("report", help="render per-batch deltas against the Base arm")
    p_rep.add_argument("report_dir")
    args = parser.parse_args(argv)
    if args.command == "run":
        return cmd_run(args.config, args.seed, args.out)
    return cmd_report(args.report_dir)


if __name__ == "__main__":
    sys.exit(main())

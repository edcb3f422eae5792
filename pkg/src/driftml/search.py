"""Budgeted pipeline search that keeps every evaluated model.

Candidates come from a fixed portfolio first, then from seeded random draws
over the configuration space. Each successful fit is retained in a
``ModelLibrary`` together with its holdout predictions, because ensemble
selection and the weight-update adaptation strategies need those
predictions later. Failed fits are logged and skipped, never fatal.

With ``max_seconds`` unset, results are bit-deterministic under a fixed
seed; candidate evaluations are independent and assembled by candidate
index, so a parallel executor could not change the outcome.
"""

from __future__ import annotations

import logging
import pickle
import time
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .data import Batch, DataError
from .metrics import ACCURACY, score
from .pipeline import (
    DecisionTreeConfig,
    KnnConfig,
    LogisticSgdConfig,
    NaiveBayesConfig,
    PipelineConfig,
    TopKMutualInfoConfig,
    TrainedPipeline,
    VarianceThresholdConfig,
    config_to_text,
    fit,
)

log = logging.getLogger(__name__)

LIBRARY_FORMAT_VERSION = 1


class SearchError(Exception):
    """Unusable training data or a budget that produced no model."""


@dataclass(frozen=True)
class SearchBudget:
    max_candidates: int = 16
    max_seconds: Optional[float] = None
    validation_fraction: float = 0.33
    seed: int = 0

    def __post_init__(self):
        if self.max_candidates < 1:
            raise SearchError("max_candidates must be >= 1")
        if not 0.0 < self.validation_fraction < 1.0:
            raise SearchError("validation_fraction must lie in (0, 1)")


@dataclass(frozen=True)
class LibraryMember:
    pipeline: Optional[TrainedPipeline]
    validation_proba: np.ndarray
    validation_score: float


@dataclass(frozen=True)
class ModelLibrary:
    members: tuple[LibraryMember, ...]
    validation_set: Batch
    train_set: Batch
    metric: str = ACCURACY

    def __len__(self) -> int:
        return len(self.members)

    @property
    def best_index(self) -> int:
        scores = [m.validation_score for m in self.members]
        return int(np.argmax(scores))

    @property
    def best_score(self) -> float:
        return self.members[self.best_index].validation_score

    def manifest(self) -> str:
        """Human-readable text summary: one member per line."""
        lines = [f"# model library: {len(self.members)} members, metric={self.metric}"]
        for i, m in enumerate(self.members):
            cfg = "<stub>" if m.pipeline is None else config_to_text(m.pipeline.config)
            lines.append(f"{i}\t{m.validation_score:.6f}\t{cfg}")
        return "\n".join(lines) + "\n"


def stratified_split(batch: Batch, fraction: float, rng: np.random.Generator
                     ) -> tuple[np.ndarray, np.ndarray]:
    """Per-class holdout indices: (fit_rows, validation_rows), both sorted.

    Every class with at least two instances contributes at least one
    instance to each side; singleton classes stay in the fit part.
    """
    y = batch.y
    fit_rows, val_rows = [], []
    for c in np.unique(y):
        rows = np.nonzero(y == c)[0]
        if rows.size < 2:
            fit_rows.append(rows)
            continue
        perm = rng.permutation(rows.size)
        n_val = int(np.clip(round(rows.size * fraction), 1, rows.size - 1))
        val_rows.append(rows[perm[:n_val]])
        fit_rows.append(rows[perm[n_val:]])
    fit_idx = np.sort(np.concatenate(fit_rows))
    val_idx = np.sort(np.concatenate(val_rows)) if val_rows else np.empty(0, np.int64)
    return fit_idx, val_idx


def sample_config(rng: np.random.Generator) -> PipelineConfig:
    """Uniform family choice, then per-hyperparameter uniform or log-uniform
    draws inside the declared bounds."""

    def log_uniform(lo, hi):
        return float(np.exp(rng.uniform(np.log(lo), np.log(hi))))

    family = rng.integers(0, 4)
    if family == 0:
        classifier = DecisionTreeConfig(
            max_depth=int(rng.integers(1, 33)),
            min_leaf=int(np.round(log_uniform(1, 64))),
            split_criterion=("gini", "entropy")[rng.integers(0, 2)],
        )
    elif family == 1:
        classifier = NaiveBayesConfig(laplace_alpha=log_uniform(1e-3, 10.0))
    elif family == 2:
        classifier = LogisticSgdConfig(
            learning_rate=log_uniform(1e-3, 1.0),
            l2=log_uniform(1e-6, 1e-1),
            epochs=int(rng.integers(5, 51)),
        )
    else:
        classifier = KnnConfig(
            k=int(rng.integers(0, 13)) * 2 + 1,
            max_reference_points=(512, 1024, 2048)[rng.integers(0, 3)],
        )

    sel_kind = rng.integers(0, 3)
    if sel_kind == 0:
        selector = None
    elif sel_kind == 1:
        selector = VarianceThresholdConfig(tau=log_uniform(1e-4, 1e-1))
    else:
        selector = TopKMutualInfoConfig(k=int(rng.integers(1, 65)))

    return PipelineConfig(
        standardize=bool(rng.integers(0, 2)),
        imputation=("mean", "mode")[rng.integers(0, 2)],
        one_hot=bool(rng.integers(0, 2)),
        selector=selector,
        classifier=classifier,
    ).validate()


def evaluate_candidate(config: PipelineConfig, fit_batch: Batch, val_batch: Batch,
              metric: str, seed: int) -> LibraryMember:
    model = fit(config, fit_batch, seed)
    proba = model.predict_proba(val_batch)
    proba.setflags(write=False)
    return LibraryMember(model, proba, score(metric, val_batch.y, proba))


def run_search(
    train: Batch,
    budget: SearchBudget,
    portfolio: Sequence[PipelineConfig],
    metric: str = ACCURACY,
) -> ModelLibrary:
    """Evaluate candidates under the budget and return the full library.

    The labeled input is split once (seeded, stratified) into fit and
    validation parts; every candidate trains on the fit part and is scored
    on the validation part with ``metric``.
    """
    if len(train) < 10:
        raise SearchError(f"need at least 10 training instances, got {len(train)}")
    if not train.fully_labeled:
        raise SearchError("training batch must be fully labeled")
    if np.unique(train.y).size < 2:
        raise SearchError("training data holds a single class")

    rng = np.random.default_rng(budget.seed)
    fit_idx, val_idx = stratified_split(train, budget.validation_fraction, rng)
    fit_batch = Batch(train.schema, train.X[fit_idx], train.y[fit_idx])
    val_batch = Batch(train.schema, train.X[val_idx], train.y[val_idx])

    started = time.perf_counter()
    members = []
    for i in range(budget.max_candidates):
        if budget.max_seconds is not None and members \
                and time.perf_counter() - started >= budget.max_seconds:
            break
        config = portfolio[i] if i < len(portfolio) else sample_config(rng)
        try:
            members.append(evaluate_candidate(config, fit_batch, val_batch, metric, seed=budget.seed + i))
        except Exception as exc:  # candidate failures are logged, not fatal
            log.warning("candidate %d failed: %s", i, exc)
    if not members:
        raise SearchError("search budget exhausted with zero successful fits")
    return ModelLibrary(tuple(members), val_batch, train, metric)


def rescore_library(lib: ModelLibrary, new_validation: Batch) -> ModelLibrary:
    """Recompute every member's holdout predictions against a new labeled
    batch; fitted models are untouched."""
    if len(new_validation) == 0:
        raise DataError("cannot rescore against an empty batch")
    if not new_validation.fully_labeled:
        raise DataError("rescoring batch must be fully labeled")
    if not new_validation.schema.compatible_with(lib.validation_set.schema):
        raise DataError("rescoring batch schema incompatible with the library")
    members = []
    for m in lib.members:
        proba = m.pipeline.predict_proba(new_validation)
        proba.setflags(write=False)
        members.append(
            LibraryMember(m.pipeline, proba, score(lib.metric, new_validation.y, proba))
        )
    return replace(lib, members=tuple(members), validation_set=new_validation)


def save_library(lib: ModelLibrary, path: str) -> None:
    """Persist fitted models in the internal binary format (pickle wrapped
    with a format version; stable within a minor release only)."""
    with open(path, "wb") as fh:
        pickle.dump({"format_version": LIBRARY_FORMAT_VERSION, "library": lib}, fh)


def load_library(path: str) -> ModelLibrary:
    with open(path, "rb") as fh:
        payload = pickle.load(fh)
    if payload.get("format_version") != LIBRARY_FORMAT_VERSION:
        raise SearchError(
            f"library format {payload.get('format_version')!r} not supported"
        )
    return payload["library"]

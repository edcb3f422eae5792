"""Batch-stream evaluation loop: predict, diagnose, adapt.

Each test batch is scored with the current ensemble before its labels touch
anything else, then the revealed labels feed the drift detector as
per-instance correctness in arrival order. When the detector fires (at most
once per batch; remaining instances of that batch are not fed), the chosen
strategy adapts the model after the batch is fully scored, and the detector
is reset. Every processed batch joins the stored data, which never shrinks.

Strategies
----------
Base          control arm; never adapts.
Replacement   full new search over all stored data plus the current batch.
WU-all        re-run ensemble selection with library scores recomputed on a
              capped stratified sample of all stored data; no retraining.
WU-latest     same, but validation is the current batch only.
Add-New       fit a small fresh candidate pool on all stored data, extend
              the library, rescore everything on a fresh holdout, reselect.
"""

from __future__ import annotations

import enum
import logging
import math
import time
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .data import Batch, DataError, concat_batches
from .drift import FhddmState, fhddm_reset, fhddm_step
from .ensemble import EnsembleModel, ensemble_predict_proba, select_ensemble
from .metrics import score
from .pipeline import PipelineConfig, default_config_portfolio
from .search import ModelLibrary, SearchBudget, SearchError, run_search, rescore_library, stratified_split

log = logging.getLogger(__name__)

WU_VALIDATION_CAP = 10_000  # rescoring stays bounded as stored data grows
ADD_NEW_POOL_SIZE = 8


class Strategy(enum.Enum):
    BASE = "Base"
    REPLACEMENT = "Replacement"
    WU_ALL = "WU-all"
    WU_LATEST = "WU-latest"
    ADD_NEW = "Add-New"

    @staticmethod
    def parse(name: str) -> "Strategy":
        key = name.strip().lower().replace("_", "-")
        aliases = {
            "base": Strategy.BASE,
            "replacement": Strategy.REPLACEMENT,
            "wu-all": Strategy.WU_ALL,
            "wu-latest": Strategy.WU_LATEST,
            "wu-batch": Strategy.WU_LATEST,  # synonym used in comparisons
            "add-new": Strategy.ADD_NEW,
            "addnew": Strategy.ADD_NEW,
        }
        if key not in aliases:
            raise ValueError(f"unknown strategy {name!r}")
        return aliases[key]


@dataclass
class RunState:
    library: ModelLibrary
    ensemble: EnsembleModel
    detector: FhddmState
    stored: list[Batch]
    metrics_per_batch: list[float] = field(default_factory=list)
    drift_events: list[tuple[int, int]] = field(default_factory=list)
    adapt_events: list[tuple[int, str, str]] = field(default_factory=list)

    def stored_with(self, batch: Batch) -> Batch:
        return concat_batches(self.stored + [batch])


@dataclass(frozen=True)
class RunReport:
    strategy: str
    metric: str
    per_batch: tuple[float, ...]
    mean_metric: float
    drift_events: tuple[tuple[int, int], ...]
    adapt_events: tuple[tuple[int, str, str], ...]
    excluded_batches: tuple[int, ...]
    timings: dict = field(compare=False)  # wall clock: excluded from equality

    def table_lines(self) -> list[str]:
        """Deterministic per-batch table: index, metric, drift flag, adapted
        flag. Wall-clock numbers stay out so reruns are byte-identical."""
        drift_at = {b for b, _ in self.drift_events}
        adapted_at = {b for b, kind, _ in self.adapt_events if kind != "degraded"}
        lines = ["batch\tmetric\tdrift\tadapted"]
        for i, m in enumerate(self.per_batch):
            val = "nan" if math.isnan(m) else f"{m:.6f}"
            lines.append(
                f"{i}\t{val}\t{1 if i in drift_at else 0}\t{1 if i in adapted_at else 0}"
            )
        return lines


def _mean_excluding_nan(values: Sequence[float]) -> tuple[float, tuple[int, ...]]:
    vals = np.asarray(values, dtype=np.float64)
    excluded = tuple(int(i) for i in np.nonzero(np.isnan(vals))[0])
    kept = vals[~np.isnan(vals)]
    return (float(kept.mean()) if kept.size else float("nan")), excluded


def stratified_sample(data: Batch, cap: int, rng: np.random.Generator) -> Batch:
    """Seeded per-class proportional subsample of at most ``cap`` instances
    (every present class keeps at least one); preserves row order."""
    n = len(data)
    if n <= cap:
        return data
    y = data.y
    take = []
    for c in np.unique(y):
        rows = np.nonzero(y == c)[0]
        quota = max(1, int(round(cap * rows.size / n)))
        quota = min(quota, rows.size)
        take.append(rng.choice(rows, size=quota, replace=False))
    idx = np.sort(np.concatenate(take))
    return Batch(data.schema, data.X[idx], data.y[idx])


def _adapt_seed(run_seed: int, batch_index: int) -> int:
    mixed = np.random.SeedSequence([run_seed, batch_index]).generate_state(1)[0]
    return int(mixed)


def adapt_replacement(
    state: RunState,
    current_batch: Batch,
    *,
    budget: SearchBudget,
    portfolio: Sequence[PipelineConfig],
    rounds: int,
    metric: str,
    seed: int,
    event_index: Optional[int] = None,
) -> None:
    """Throw the model away: fresh search over all stored data."""
    at = current_batch.index if event_index is None else event_index
    data = state.stored_with(current_batch)
    try:
        lib = run_search(data, replace(budget, seed=seed), portfolio, metric)
    except SearchError as exc:
        state.adapt_events.append((at, "degraded", f"replacement: {exc}"))
        return
    state.library = lib
    state.ensemble = select_ensemble(lib, rounds, metric)
    state.adapt_events.append((at, "replacement", f"library={len(lib)}"))


def adapt_weight_update(
    state: RunState,
    current_batch: Batch,
    scope: str,
    *,
    rounds: int,
    metric: str,
    seed: int,
    validation_cap: int = WU_VALIDATION_CAP,
    event_index: Optional[int] = None,
) -> None:
    """Reweight the existing library (no member is ever retrained)."""
    at = current_batch.index if event_index is None else event_index
    if scope == "latest":
        validation = current_batch
    elif scope == "all":
        rng = np.random.default_rng(seed)
        validation = stratified_sample(state.stored_with(current_batch), validation_cap, rng)
    else:
        raise ValueError(f"unknown weight-update scope {scope!r}")
    if np.unique(validation.y[validation.y >= 0]).size < 2:
        state.adapt_events.append((at, "degraded", f"wu-{scope}: single-class validation"))
        return
    state.library = rescore_library(state.library, validation)
    state.ensemble = select_ensemble(state.library, rounds, metric)
    state.adapt_events.append((at, f"wu-{scope}", f"validation={len(validation)}"))


def adapt_add_new(
    state: RunState,
    current_batch: Batch,
    *,
    budget: SearchBudget,
    portfolio: Sequence[PipelineConfig],
    pool_size: int,
    rounds: int,
    metric: str,
    seed: int,
    validation_cap: int = WU_VALIDATION_CAP,
    event_index: Optional[int] = None,
) -> None:
    """Enlarge the library with fresh fits on all stored data, rescore
    everything on a fresh holdout, reselect. Falls back to a pure weight
    update when every new fit fails."""
    from .search import evaluate_candidate  # local import avoids a cycle

    at = current_batch.index if event_index is None else event_index
    data = state.stored_with(current_batch)
    rng = np.random.default_rng(seed)
    fit_idx, val_idx = stratified_split(data, budget.validation_fraction, rng)
    if val_idx.size == 0:
        state.adapt_events.append((at, "degraded", "add-new: no holdout"))
        return
    fit_batch = Batch(data.schema, data.X[fit_idx], data.y[fit_idx])
    val_batch = stratified_sample(
        Batch(data.schema, data.X[val_idx], data.y[val_idx]), validation_cap, rng
    )

    new_members = []
    for i, config in enumerate(portfolio[:pool_size]):
        try:
            new_members.append(evaluate_candidate(config, fit_batch, val_batch, metric, seed=seed + i))
        except Exception as exc:
            log.warning("add-new candidate %d failed: %s", i, exc)
    try:
        rescored = rescore_library(state.library, val_batch)
    except DataError as exc:
        state.adapt_events.append((at, "degraded", f"add-new: {exc}"))
        return
    members = rescored.members + tuple(new_members)
    state.library = replace(rescored, members=members)
    state.ensemble = select_ensemble(state.library, rounds, metric)
    kind = "add-new" if new_members else "wu-all"
    state.adapt_events.append(
        (at, kind, f"new={len(new_members)} library={len(members)}")
    )


def run_lifelong(
    train: Batch,
    test_batches: Sequence[Batch],
    strategy: Strategy,
    metric: str,
    budget: SearchBudget,
    detector: Optional[FhddmState] = None,
    *,
    portfolio: Optional[Sequence[PipelineConfig]] = None,
    ensemble_rounds: int = 50,
    add_new_pool: int = ADD_NEW_POOL_SIZE,
    wu_validation_cap: int = WU_VALIDATION_CAP,
    phase_hook: Optional[Callable[[str, int], None]] = None,
) -> RunReport:
    """Run one strategy over the batch stream and report per-batch scores.

    Scores are recorded strictly before the batch's labels reach the
    detector or any adaptation. The mean excludes NaN-scored batches (these
    are listed in the report).
    """
    if not train.fully_labeled:
        raise DataError("training batch must be fully labeled")
    for b in test_batches:
        if not b.fully_labeled:
            raise DataError(f"test batch {b.index} is not fully labeled")

    hook = phase_hook or (lambda phase, index: None)
    portfolio = list(portfolio) if portfolio is not None else default_config_portfolio()
    detector = detector if detector is not None else FhddmState()
    timings = {"search": 0.0, "predict": 0.0, "detect": 0.0, "adapt": 0.0}

    t0 = time.perf_counter()
    library = run_search(train, budget, portfolio, metric)
    ensemble = select_ensemble(library, ensemble_rounds, metric)
    timings["search"] = time.perf_counter() - t0

    state = RunState(library, ensemble, detector, stored=[train])

    for t, batch in enumerate(test_batches):
        if not batch.schema.compatible_with(train.schema):
            raise DataError(f"schema drift at batch {t}: incompatible with training schema")

        hook("predict", t)
        t0 = time.perf_counter()
        proba = ensemble_predict_proba(state.ensemble, state.library, batch)
        y_pred = proba.argmax(axis=1)
        timings["predict"] += time.perf_counter() - t0

        hook("score", t)
        state.metrics_per_batch.append(score(metric, batch.y, proba))

        hook("reveal", t)
        t0 = time.perf_counter()
        fired_at = None
        det = state.detector
        for j, correct in enumerate(y_pred == batch.y):
            det, signal = fhddm_step(det, bool(correct))
            if signal.drift:
                fired_at = j
                break  # one adaptation per batch; rest of the batch unfed
        state.detector = det
        timings["detect"] += time.perf_counter() - t0

        if fired_at is not None:
            state.drift_events.append((t, fired_at))
            if strategy is not Strategy.BASE:
                hook("adapt", t)
                t0 = time.perf_counter()
                seed = _adapt_seed(budget.seed, t)
                if strategy is Strategy.REPLACEMENT:
                    adapt_replacement(
                        state, batch, budget=budget, portfolio=portfolio,
                        rounds=ensemble_rounds, metric=metric, seed=seed,
                        event_index=t,
                    )
                elif strategy is Strategy.WU_ALL:
                    adapt_weight_update(
                        state, batch, "all", rounds=ensemble_rounds, metric=metric,
                        seed=seed, validation_cap=wu_validation_cap, event_index=t,
                    )
                elif strategy is Strategy.WU_LATEST:
                    adapt_weight_update(
                        state, batch, "latest", rounds=ensemble_rounds, metric=metric,
                        seed=seed, validation_cap=wu_validation_cap, event_index=t,
                    )
                else:
                    adapt_add_new(
                        state, batch, budget=budget, portfolio=portfolio,
                        pool_size=add_new_pool, rounds=ensemble_rounds,
                        metric=metric, seed=seed, validation_cap=wu_validation_cap,
                        event_index=t,
                    )
                state.detector = fhddm_reset(state.detector)
                timings["adapt"] += time.perf_counter() - t0

        hook("store", t)
        state.stored.append(batch)

    mean, excluded = _mean_excluding_nan(state.metrics_per_batch)
    return RunReport(
        strategy=strategy.value,
        metric=metric,
        per_batch=tuple(state.metrics_per_batch),
        mean_metric=mean,
        drift_events=tuple(state.drift_events),
        adapt_events=tuple(state.adapt_events),
        excluded_batches=excluded,
        timings=timings,
    )

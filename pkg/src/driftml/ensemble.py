"""Greedy ensemble selection over a model library, and weighted prediction.

Selection is forward, with replacement: every round adds the library member
whose inclusion maximizes the validation metric of the uniform average of
all picks so far (ties go to the lower library index). The returned ensemble
is the best-scoring prefix of that trace, which makes the guarantee exact:
its validation metric is at least the best single member's, because the
first pick alone is the best single member.

Member weights are selection frequencies within the kept prefix, so they are
positive, sum to one, and can be reconstructed from the trace.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import Batch
from .metrics import score
from .search import ModelLibrary


class EnsembleError(Exception):
    """Empty library or dangling member references."""


@dataclass(frozen=True)
class EnsembleModel:
    member_refs: tuple[int, ...]     # library indices, ascending
    weights: tuple[float, ...]       # aligned to member_refs, > 0, sum 1
    rounds: int                      # length of the kept prefix
    selection_trace: tuple[int, ...]
    validation_score: float = float("nan")

    def __post_init__(self):
        if len(self.member_refs) != len(self.weights):
            raise EnsembleError("weights not aligned to member refs")
        if len(self.selection_trace) != self.rounds:
            raise EnsembleError("trace length must equal rounds")
        if self.rounds > 0 and abs(sum(self.weights) - 1.0) > 1e-9:
            raise EnsembleError("weights must sum to 1")


def select_ensemble(lib: ModelLibrary, rounds: int = 50, metric: str | None = None
                    ) -> EnsembleModel:
    """Greedy forward selection with replacement over the library.

    ``metric`` defaults to the library's own scoring metric. A NaN candidate
    score (e.g. a single-class validation set under normalized AUC) ranks
    below every real score.
    """
    if len(lib) == 0:
        raise EnsembleError("cannot select from an empty library")
    if rounds < 1:
        raise EnsembleError("rounds must be >= 1")
    metric = lib.metric if metric is None else metric
    y = lib.validation_set.y
    probas = [np.asarray(m.validation_proba, dtype=np.float64) for m in lib.members]

    trace: list[int] = []
    prefix_scores: list[float] = []
    running = np.zeros_like(probas[0])
    for r in range(1, rounds + 1):
        best_idx = -1
        best_score = -math.inf
        for i, p in enumerate(probas):
            s = score(metric, y, (running + p) / r)
            if not math.isnan(s) and s > best_score:
                best_idx, best_score = i, s
        if best_idx < 0:  # every candidate scored NaN; keep the lowest index
            best_idx, best_score = 0, float("nan")
        trace.append(best_idx)
        prefix_scores.append(best_score)
        running += probas[best_idx]

    finite = [(s if not math.isnan(s) else -math.inf) for s in prefix_scores]
    best_len = int(np.argmax(finite)) + 1  # earliest best prefix
    kept = trace[:best_len]
    refs = sorted(set(kept))
    weights = tuple(kept.count(i) / best_len for i in refs)
    return EnsembleModel(
        member_refs=tuple(refs),
        weights=weights,
        rounds=best_len,
        selection_trace=tuple(kept),
        validation_score=prefix_scores[best_len - 1],
    )


def ensemble_validation_proba(ens: EnsembleModel, lib: ModelLibrary) -> np.ndarray:
    """Weighted average of the stored holdout predictions."""
    _check_refs(ens, lib)
    out = np.zeros_like(np.asarray(lib.members[ens.member_refs[0]].validation_proba))
    for ref, w in zip(ens.member_refs, ens.weights):
        out += w * np.asarray(lib.members[ref].validation_proba)
    return out


def ensemble_predict_proba(ens: EnsembleModel, lib: ModelLibrary, batch: Batch
                           ) -> np.ndarray:
    """Weighted average of member probabilities on a new batch."""
    _check_refs(ens, lib)
    out = None
    for ref, w in zip(ens.member_refs, ens.weights):
        p = lib.members[ref].pipeline.predict_proba(batch)
        out = w * p if out is None else out + w * p
    return out


def ensemble_predict(ens: EnsembleModel, lib: ModelLibrary, batch: Batch) -> np.ndarray:
    """Hard labels: argmax with ties to the lowest class index."""
    return ensemble_predict_proba(ens, lib, batch).argmax(axis=1)


def _check_refs(ens: EnsembleModel, lib: ModelLibrary) -> None:
    if not ens.member_refs:
        raise EnsembleError("ensemble references no members")
    if max(ens.member_refs) >= len(lib) or min(ens.member_refs) < 0:
        raise EnsembleError("ensemble references members outside the library")

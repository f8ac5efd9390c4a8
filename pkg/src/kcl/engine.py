"""The iterative completion loop.

Each step scores the remaining test samples, absorbs the confident ones
with pseudo-labels, optionally re-searches the completion-term weights
on a validation split, and re-estimates the logits of what is left. The
loop stops when nothing remains, the step budget runs out, a step
produces no picks, or every class has reached its per-class cap.

Absorbed samples keep their pseudo-labels; everything still remaining
at the end is predicted by the row argmax of the last-round matrix.
"""
from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Iterable, Sequence

import numpy as np

from .core import Bundle, CompletionState, HyperParams, one_hot
from .errors import EmptyGrid, LengthMismatch, MissingLabels, ValidationError
from .selection import SelectionResult, SelectionRule, absorb, select
from .similarity import ModalityMask, masked_logits

logger = logging.getLogger(__name__)


class Mode(str, Enum):
    ZERO_SHOT = "zero-shot"
    FEW_SHOT = "few-shot"


class HpMode(str, Enum):
    FIXED = "fixed"
    VALIDATION_SEARCH = "validation-search"


@dataclass(frozen=True)
class RunConfig:
    mode: Mode = Mode.ZERO_SHOT
    rule: SelectionRule = field(default_factory=SelectionRule)
    hp: HyperParams = field(default_factory=HyperParams)
    hp_mode: HpMode = HpMode.FIXED
    modality: ModalityMask = field(default_factory=ModalityMask)
    budget: int | None = None  # per-class cap; overrides hp.per_class_budget
    threads: int = 1

    def __post_init__(self):
        if self.threads < 1:
            raise ValidationError(f"threads must be >= 1, got {self.threads}")
        if self.budget is not None and self.budget < 0:
            raise ValidationError("budget must be >= 0 (0 disables absorption)")

    @property
    def per_class_budget(self) -> int | None:
        return self.budget if self.budget is not None else self.hp.per_class_budget


@dataclass(frozen=True)
class StepRecord:
    step: int
    picked_count: int
    d_size: int
    lam: float
    mu: float

    def to_dict(self) -> dict:
        return {
            "step": self.step,
            "picked_count": self.picked_count,
            "d_size": self.d_size,
            "lambda": self.lam,
            "mu": self.mu,
        }


@dataclass(frozen=True)
class RunReport:
    predictions: tuple[int, ...]
    accuracy: float | None
    per_step: tuple[StepRecord, ...]
    converged_at: int
    wall_time: float
    stop_reason: str

    def to_dict(self) -> dict:
        out: dict = {"predictions": list(self.predictions)}
        if self.accuracy is not None:
            out["accuracy"] = self.accuracy
        out["per_step"] = [s.to_dict() for s in self.per_step]
        out["converged_at"] = self.converged_at
        out["wall_time"] = self.wall_time
        out["stop_reason"] = self.stop_reason
        return out


def accuracy(predictions: Sequence[int], truth: Sequence[int]) -> float:
    """Fraction of positions where the two label sequences agree."""
    p = np.asarray(predictions).reshape(-1)
    t = np.asarray(truth).reshape(-1)
    if p.size != t.size:
        raise LengthMismatch(f"{p.size} predictions vs {t.size} labels")
    return float(np.mean(p == t)) if p.size else 0.0


def _grid_best(
    candidates: list[tuple[float, float]],
    score: Callable[[tuple[float, float]], float],
    threads: int,
) -> tuple[float, float]:
    # Reduce in grid order regardless of completion order, so ties always
    # fall to the earliest candidate.
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            scores = list(pool.map(score, candidates))
    else:
        scores = [score(c) for c in candidates]
    best_i = 0
    for i in range(1, len(scores)):
        if scores[i] > scores[best_i]:
            best_i = i
    return candidates[best_i]


def _val_accuracy(
    bundle: Bundle,
    d: np.ndarray,
    l_d: np.ndarray,
    hp: HyperParams,
    mask: ModalityMask,
) -> float:
    logits = masked_logits(
        bundle.val_features,
        bundle.weights,
        bundle.cache_features,
        bundle.cache_labels,
        d,
        l_d,
        hp,
        mask,
    )
    return accuracy(np.argmax(logits, axis=1), bundle.val_labels)


def search_lambda_mu(
    bundle: Bundle,
    d: np.ndarray,
    l_d: np.ndarray,
    val_features: np.ndarray,
    val_labels: np.ndarray,
    lambda_grid: Iterable[float],
    mu_grid: Iterable[float],
    *,
    alpha: float = 1.0,
    beta: float = 1.0,
    mask: ModalityMask = ModalityMask(),
    threads: int = 1,
) -> tuple[float, float]:
    """Pick the completion-term weights maximizing validation accuracy.

    The grid is scanned lambda-major in the given order; ties keep the
    first candidate. An empty completion set short-circuits to the fixed
    defaults (1.0, 1.0) since the term is identically zero there.
    """
    lambdas = list(lambda_grid)
    mus = list(mu_grid)
    if not lambdas:
        raise EmptyGrid("lambda_grid")
    if not mus:
        raise EmptyGrid("mu_grid")
    if val_features is None or val_labels is None or len(val_features) == 0:
        raise MissingLabels("lambda/mu search needs a non-empty validation split")
    if d.shape[0] == 0:
        return 1.0, 1.0

    eval_bundle = Bundle(
        features=bundle.features,
        weights=bundle.weights,
        cache_features=bundle.cache_features,
        cache_labels=bundle.cache_labels,
        val_features=np.asarray(val_features, dtype=np.float64),
        val_labels=np.asarray(val_labels, dtype=np.int64),
    )
    candidates = [(lam, mu) for lam in lambdas for mu in mus]

    def score(cand: tuple[float, float]) -> float:
        lam, mu = cand
        hp = HyperParams(alpha=alpha, beta=beta, lam=lam, mu=mu)
        return _val_accuracy(eval_bundle, d, l_d, hp, mask)

    return _grid_best(candidates, score, threads)


def _search_alpha_beta(
    bundle: Bundle, hp: HyperParams, mask: ModalityMask, threads: int
) -> tuple[float, float]:
    alphas = list(hp.alpha_grid)
    betas = list(hp.beta_grid)
    if not alphas:
        raise EmptyGrid("alpha_grid")
    if not betas:
        raise EmptyGrid("beta_grid")
    empty_d = np.zeros((0, bundle.dim))
    empty_l = one_hot([], bundle.num_classes)
    candidates = [(a, b) for a in alphas for b in betas]

    def score(cand: tuple[float, float]) -> float:
        a, b = cand
        return _val_accuracy(
            bundle, empty_d, empty_l, hp.replace(alpha=a, beta=b), mask
        )

    return _grid_best(candidates, score, threads)


def _apply_budget(
    result: SelectionResult,
    state: CompletionState,
    budget: int | None,
    a: np.ndarray,
    remaining: tuple[int, ...],
) -> SelectionResult:
    """Drop picks that would push a class past its per-class cap.

    Within a class the highest-scoring picks survive (ties: lower test
    index), so a partial allowance keeps the most confident samples.
    """
    if budget is None:
        return result
    num_classes = len(result.per_class_counts)
    absorbed_counts = [0] * num_classes
    for _, i in state.absorbed:
        absorbed_counts[i] += 1
    row_of = {j: pos for pos, j in enumerate(remaining)}
    kept: list[tuple[int, int]] = []
    for i in range(num_classes):
        allowance = budget - absorbed_counts[i]
        if allowance <= 0:
            continue
        mine = [j for j, c in result.picks if c == i]
        mine.sort(key=lambda j: (-float(a[row_of[j], i]), j))
        kept.extend((j, i) for j in mine[:allowance])
    kept.sort(key=lambda p: (p[1], p[0]))
    counts = [0] * num_classes
    for _, i in kept:
        counts[i] += 1
    return SelectionResult(picks=tuple(kept), per_class_counts=tuple(counts))


def _validate(bundle: Bundle, config: RunConfig) -> None:
    if config.mode is Mode.FEW_SHOT and not bundle.has_cache:
        raise MissingLabels("few-shot mode needs cache features and labels")
    if config.hp_mode is HpMode.VALIDATION_SEARCH and bundle.val_features is None:
        raise MissingLabels("validation search needs a labeled validation split")


def run(
    bundle: Bundle,
    config: RunConfig,
    on_step: Callable[[CompletionState], None] | None = None,
) -> RunReport:
    """Execute the full completion loop and assemble the report.

    ``on_step`` (if given) observes the completion state after every
    absorption; it exists for instrumentation and invariant checks.
    """
    t0 = time.perf_counter()
    _validate(bundle, config)

    hp = config.hp
    mask = config.modality
    budget = config.per_class_budget
    few_shot = config.mode is Mode.FEW_SHOT
    cache_f = bundle.cache_features if few_shot else None
    cache_l = bundle.cache_labels if few_shot else None
    # Zero-shot ignores any cache the bundle happens to carry; the search
    # helpers read the cache off the bundle, so hand them a stripped view.
    search_bundle = bundle
    if not few_shot and bundle.has_cache:
        search_bundle = Bundle(
            features=bundle.features,
            weights=bundle.weights,
            test_labels=bundle.test_labels,
            val_features=bundle.val_features,
            val_labels=bundle.val_labels,
        )

    if config.hp_mode is HpMode.VALIDATION_SEARCH and few_shot:
        alpha, beta = _search_alpha_beta(bundle, hp, mask, config.threads)
        logger.info("fixed cache weights from validation: alpha=%g beta=%g", alpha, beta)
        hp = hp.replace(alpha=alpha, beta=beta)

    state = CompletionState.initial(bundle.n)
    d = np.zeros((0, bundle.dim))
    l_d = one_hot([], bundle.num_classes)
    a = masked_logits(bundle.features, bundle.weights, cache_f, cache_l, d, l_d, hp, mask)

    per_step: list[StepRecord] = []
    stop_reason = "max_steps"
    for step in range(1, hp.max_steps + 1):
        raw = select(a, config.rule, remaining=state.remaining)
        result = _apply_budget(raw, state, budget, a, state.remaining)
        state, d, l_d = absorb(state, result, bundle.features)
        if config.hp_mode is HpMode.VALIDATION_SEARCH:
            lam, mu = search_lambda_mu(
                search_bundle,
                d,
                l_d,
                bundle.val_features,
                bundle.val_labels,
                hp.lambda_grid,
                hp.mu_grid,
                alpha=hp.alpha,
                beta=hp.beta,
                mask=mask,
                threads=config.threads,
            )
            hp = hp.replace(lam=lam, mu=mu)
        rows = np.asarray(state.remaining, dtype=np.int64)
        a = masked_logits(
            bundle.features[rows], bundle.weights, cache_f, cache_l, d, l_d, hp, mask
        )
        per_step.append(
            StepRecord(step, len(result), len(state.absorbed), hp.lam, hp.mu)
        )
        logger.debug(
            "step %d: picked %d, absorbed %d/%d", step, len(result),
            len(state.absorbed), bundle.n,
        )
        if on_step is not None:
            on_step(state)
        if not state.remaining:
            stop_reason = "exhausted"
            break
        if len(result) == 0:
            stop_reason = "budget" if len(raw) > 0 else "no_picks"
            break
        if budget is not None and l_d.size:
            if bool((l_d.sum(axis=0) >= budget).all()):
                stop_reason = "budget"
                break

    predictions = np.empty(bundle.n, dtype=np.int64)
    for j, i in state.absorbed:
        predictions[j] = i
    if state.remaining:
        predictions[list(state.remaining)] = np.argmax(a, axis=1)

    acc = None
    if bundle.test_labels is not None:
        acc = accuracy(predictions, bundle.test_labels)

    return RunReport(
        predictions=tuple(int(p) for p in predictions),
        accuracy=acc,
        per_step=tuple(per_step),
        converged_at=len(per_step),
        wall_time=time.perf_counter() - t0,
        stop_reason=stop_reason,
    )

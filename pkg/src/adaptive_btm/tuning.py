"""Parallel searches for the topic count and the version window size.

Scoring is a pure map over candidate values with seeds fixed by candidate
identity, so the result never depends on worker count or scheduling; the
reduce step is an argmax with ties broken toward the smaller value.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable

from .corpus import Corpus
from .evaluation import RefStats, pmi_score_model
from .gibbs import HyperParams
from .online import run_aobtm


@dataclass
class SearchConfig:
    """Candidate topic counts plus execution settings for the K search."""

    candidates: list[int]
    iter_reps: int = 1
    span: int | None = None  # None resolves to workers - 1
    workers: int = 1
    seed: int = 1

    def __post_init__(self):
        deduped: list[int] = []
        for c in self.candidates:
            if c not in deduped:
                deduped.append(int(c))
        if not deduped:
            raise ValueError("candidates must be nonempty")
        if any(c < 1 for c in deduped):
            raise ValueError("candidates must be >= 1")
        self.candidates = deduped
        if self.iter_reps < 1:
            raise ValueError("iter_reps must be >= 1")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if self.span is not None and self.span < 0:
            raise ValueError("span must be >= 0")

    @property
    def resolved_span(self) -> int:
        return max(self.workers - 1, 0) if self.span is None else self.span


@dataclass
class CandidateScore:
    value: int
    mean_score: float
    scores: list[float]
    seeds: list[int]


@dataclass
class SearchResult:
    best_value: int
    best_score: float
    trace: list[CandidateScore] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "best_value": self.best_value,
            "best_score": self.best_score,
            "trace": [
                {
                    "value": c.value,
                    "mean_score": c.mean_score,
                    "scores": c.scores,
                    "seeds": c.seeds,
                }
                for c in self.trace
            ],
        }


def candidate_base_seed(seed: int, value: int, iter_reps: int) -> int:
    """Seed block start for one candidate; repetitions use consecutive
    offsets, so every (candidate, repetition) pair is schedule-independent."""
    return seed + value * iter_reps


def evaluate_candidate_k(
    k: int,
    iter_reps: int,
    corpus: Corpus,
    win: int,
    ref: RefStats,
    base_seed: int,
    *,
    hp: HyperParams | None = None,
    top_t: int = 10,
    eps_pair: float = 1.0,
) -> CandidateScore:
    """Mean final-slice coherence over iter_reps adaptive runs.

    Repetition r runs with seed base_seed + r; the score of each run is
    pmi_score_model on the last slice's topics.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if iter_reps < 1:
        raise ValueError("iter_reps must be >= 1")
    template = hp if hp is not None else HyperParams(k=k)
    terms = corpus.vocabulary.id_to_term
    scores: list[float] = []
    seeds: list[int] = []
    for rep in range(iter_reps):
        seed = base_seed + rep
        results = run_aobtm(corpus, replace(template, k=k, seed=seed), win)
        scores.append(
            pmi_score_model(results[-1].phi, terms, top_t, ref, eps_pair=eps_pair)
        )
        seeds.append(seed)
    return CandidateScore(k, sum(scores) / len(scores), scores, seeds)


def _score_values(
    values: list[int], score: Callable[[int], CandidateScore], workers: int
) -> list[CandidateScore]:
    if workers <= 1 or len(values) <= 1:
        return [score(v) for v in values]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(score, values))


def _best(trace: list[CandidateScore]) -> CandidateScore:
    return min(trace, key=lambda c: (-c.mean_score, c.value))


def search_topic_num(
    cfg: SearchConfig,
    corpus: Corpus,
    win: int,
    ref: RefStats,
    *,
    hp: HyperParams | None = None,
    top_t: int = 10,
    eps_pair: float = 1.0,
) -> SearchResult:
    """Two-phase topic count search.

    Phase 1 scores every candidate; phase 2 scores the integers within
    ceil(span/2) of the phase-1 winner, clamped to >= 1. Values already
    scored are skipped, never rescored, so the trace holds each probed
    value exactly once. The overall argmax wins, smaller value on ties.
    """

    def score(k: int) -> CandidateScore:
        return evaluate_candidate_k(
            k,
            cfg.iter_reps,
            corpus,
            win,
            ref,
            candidate_base_seed(cfg.seed, k, cfg.iter_reps),
            hp=hp,
            top_t=top_t,
            eps_pair=eps_pair,
        )

    trace = _score_values(cfg.candidates, score, cfg.workers)
    opt = _best(trace).value
    half = math.ceil(cfg.resolved_span / 2)
    seen = {c.value for c in trace}
    extra = [v for v in range(opt - half, opt + half + 1) if v >= 1 and v not in seen]
    trace = trace + _score_values(extra, score, cfg.workers)
    best = _best(trace)
    return SearchResult(best.value, best.mean_score, trace)


def search_win(
    corpus: Corpus,
    iter_reps: int,
    hp: HyperParams,
    ref: RefStats,
    *,
    workers: int = 1,
    seed: int = 1,
    top_t: int = 10,
    eps_pair: float = 1.0,
) -> SearchResult:
    """Score every window size 1 .. v-1 on the full slice chain.

    Each window value gets iter_reps adaptive runs (same seed discipline
    as the K search) scored on the final slice; argmax wins, smaller
    window on ties.
    """
    v = len(corpus.slices)
    if v < 2:
        raise ValueError("window search needs at least 2 slices")
    if iter_reps < 1:
        raise ValueError("iter_reps must be >= 1")
    terms = corpus.vocabulary.id_to_term

    def score(win: int) -> CandidateScore:
        base = candidate_base_seed(seed, win, iter_reps)
        scores: list[float] = []
        seeds: list[int] = []
        for rep in range(iter_reps):
            run_seed = base + rep
            results = run_aobtm(corpus, replace(hp, seed=run_seed), win)
            scores.append(
                pmi_score_model(results[-1].phi, terms, top_t, ref, eps_pair=eps_pair)
            )
            seeds.append(run_seed)
        return CandidateScore(win, sum(scores) / len(scores), scores, seeds)

    trace = _score_values(list(range(1, v)), score, workers)
    best = _best(trace)
    return SearchResult(best.value, best.mean_score, trace)

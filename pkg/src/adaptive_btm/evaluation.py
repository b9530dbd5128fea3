"""Topic quality metrics: reference-corpus PMI and JS-divergence spread."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, Sequence

import numpy as np

DEFAULT_PAIR_SMOOTHING = 1.0


@dataclass
class RefStats:
    """Document frequencies from an external reference corpus.

    Immutable once built; used only for scoring, never for inference.
    pair_df keys are canonical (a < b) term pairs.
    """

    d: int
    word_df: dict[str, int] = field(default_factory=dict)
    pair_df: dict[tuple[str, str], int] = field(default_factory=dict)


def build_ref_stats(docs: Iterable[Sequence[str]]) -> RefStats:
    """Count, per document, the distinct terms and distinct term pairs.

    word_df counts documents containing the term at least once (document
    frequency, not token count); pair_df counts documents containing both
    terms of the pair.
    """
    d = 0
    word_df: Counter[str] = Counter()
    pair_df: Counter[tuple[str, str]] = Counter()
    for doc in docs:
        d += 1
        terms = sorted(set(doc))
        word_df.update(terms)
        pair_df.update(combinations(terms, 2))
    return RefStats(d=d, word_df=dict(word_df), pair_df=dict(pair_df))


def save_ref_stats(stats: RefStats, path) -> None:
    """TSV layout: one "D" header line, then "W" term rows, then "P" pair rows."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"D\t{stats.d}\n")
        for term in sorted(stats.word_df):
            fh.write(f"W\t{term}\t{stats.word_df[term]}\n")
        for (a, b) in sorted(stats.pair_df):
            fh.write(f"P\t{a}\t{b}\t{stats.pair_df[(a, b)]}\n")


def load_ref_stats(path) -> RefStats:
    d = None
    word_df: dict[str, int] = {}
    pair_df: dict[tuple[str, str], int] = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            tag = parts[0]
            try:
                if tag == "D" and len(parts) == 2:
                    d = int(parts[1])
                elif tag == "W" and len(parts) == 3:
                    word_df[parts[1]] = int(parts[2])
                elif tag == "P" and len(parts) == 4:
                    a, b = parts[1], parts[2]
                    if b < a:
                        a, b = b, a
                    pair_df[(a, b)] = int(parts[3])
                else:
                    raise ValueError(f"line {line_no}: unrecognized row {tag!r}")
            except ValueError as exc:
                raise ValueError(f"bad reference stats at line {line_no}: {exc}") from exc
    if d is None:
        raise ValueError("reference stats missing the D header line")
    return RefStats(d=d, word_df=word_df, pair_df=pair_df)


def _marginal_count(term: str, ref: RefStats, eps_pair: float) -> float:
    """Document count backing P(term).

    Direct document frequency when the term is present. A phrase term
    ("a_b") absent from the reference falls back to the co-document count
    of its constituents when both are present. A term still unresolved
    counts eps_pair documents when smoothing is on, and is an error when
    smoothing is disabled.
    """
    df = ref.word_df.get(term, 0)
    if df > 0:
        return float(df)
    parts = term.split("_")
    if len(parts) == 2:
        a, b = sorted(parts)
        if ref.word_df.get(a, 0) > 0 and ref.word_df.get(b, 0) > 0:
            pdf = ref.pair_df.get((a, b), 0)
            if pdf > 0:
                return float(pdf)
    if eps_pair > 0:
        return float(eps_pair)
    raise ValueError(f"term {term!r} absent from reference and smoothing disabled")


def pmi_score_topic(
    words: Sequence[str], ref: RefStats, *, eps_pair: float = DEFAULT_PAIR_SMOOTHING
) -> float:
    """Average pairwise association of a topic's top words (natural log).

    Sums log[P(wi, wj) / (P(wi) P(wj))] over unordered pairs i < j and
    divides by T(T-1). Pair counts get +eps_pair smoothing; word marginals
    stay unsmoothed apart from the absent-term fallback in
    _marginal_count.
    """
    if ref.d < 1:
        raise ValueError("reference stats cover no documents")
    words = list(words)
    if len(words) < 2:
        raise ValueError("need at least two top words")
    if len(set(words)) != len(words):
        raise ValueError("top words must be distinct")
    d = float(ref.d)
    total = 0.0
    for i in range(len(words)):
        for j in range(i + 1, len(words)):
            a, b = words[i], words[j]
            key = (a, b) if a < b else (b, a)
            joint_count = ref.pair_df.get(key, 0) + eps_pair
            if joint_count <= 0:
                raise ValueError(
                    f"pair {key!r} never co-occurs and smoothing is disabled"
                )
            p_joint = joint_count / d
            p_a = _marginal_count(a, ref, eps_pair) / d
            p_b = _marginal_count(b, ref, eps_pair) / d
            total += math.log(p_joint / (p_a * p_b))
    t = len(words)
    return total / (t * (t - 1))


def top_word_ids(phi_row: np.ndarray, top_t: int) -> np.ndarray:
    """Ids of the top_t highest-probability terms; ties break toward
    smaller id so reports are reproducible byte for byte."""
    row = np.asarray(phi_row, dtype=np.float64)
    order = np.lexsort((np.arange(row.shape[0]), -row))
    return order[:top_t]


def top_words(phi_row: np.ndarray, terms: Sequence[str], top_t: int) -> list[str]:
    return [terms[i] for i in top_word_ids(phi_row, top_t)]


def pmi_score_model(
    phi: np.ndarray,
    terms: Sequence[str],
    top_t: int,
    ref: RefStats,
    *,
    eps_pair: float = DEFAULT_PAIR_SMOOTHING,
) -> float:
    """Arithmetic mean of the per-topic scores over the top_t words of
    every row of phi."""
    if top_t < 2:
        raise ValueError("top_t must be >= 2")
    phi = np.asarray(phi, dtype=np.float64)
    scores = [
        pmi_score_topic(top_words(row, terms, top_t), ref, eps_pair=eps_pair)
        for row in phi
    ]
    return float(sum(scores) / len(scores))


def kl_divergence(p: np.ndarray, q: np.ndarray) -> float:
    """sum_i P(i) log[P(i)/Q(i)] with natural log; P(i)=0 terms contribute 0."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape:
        raise ValueError("distributions must have equal length")
    mask = p > 0
    if np.any(q[mask] == 0):
        raise ValueError("KL undefined: Q is zero where P has mass")
    return float(np.sum(p[mask] * np.log(p[mask] / q[mask])))


def js_divergence(p: np.ndarray, q: np.ndarray) -> float:
    """Symmetric divergence in [0, ln 2]: average KL to the midpoint."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    m = 0.5 * (p + q)
    return 0.5 * kl_divergence(p, m) + 0.5 * kl_divergence(q, m)


def dis_score(phi: np.ndarray) -> float:
    """Mean pairwise JS divergence between topic rows.

    For each topic the divergences to the other K-1 rows are summed and
    divided by K (not K-1), and the per-topic values are averaged over K.
    A single topic scores 0.
    """
    phi = np.asarray(phi, dtype=np.float64)
    k = phi.shape[0]
    if k < 2:
        return 0.0
    total = 0.0
    for a in range(k):
        inner = 0.0
        for b in range(k):
            if b != a:
                inner += js_divergence(phi[a], phi[b])
        total += inner / k
    return total / k

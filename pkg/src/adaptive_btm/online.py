"""Slice chaining: prior propagation for online and adaptive-online runs."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .corpus import Corpus
from .gibbs import HyperParams, SliceModel, run_slice

DEFAULT_BETA_FLOOR = 1e-9


def _pad_columns(mat: np.ndarray, width: int, fill: float) -> np.ndarray:
    """Zero-based right padding of a (k, w) matrix up to w = width."""
    k, w = mat.shape
    if w == width:
        return mat
    if w > width:
        raise ValueError("matrix wider than target width")
    out = np.full((k, width), fill, dtype=np.float64)
    out[:, :w] = mat
    return out


@dataclass
class PhiEntry:
    t: int
    phi: np.ndarray  # (k, W_t) topic-word matrix of slice t
    beta: np.ndarray  # (k, W_t) word prior the slice was sampled under


@dataclass
class PhiHistory:
    """Per-slice topic matrices, newest last; retain=None keeps all.

    retain=win gives the bounded-memory mode where only the matrices the
    adaptive update can actually touch are held.
    """

    entries: list[PhiEntry] = field(default_factory=list)
    retain: int | None = None

    def append(self, t: int, phi: np.ndarray, beta: np.ndarray) -> None:
        if self.entries and t <= self.entries[-1].t:
            raise ValueError("slice indices must be strictly increasing")
        self.entries.append(PhiEntry(t, phi, beta))
        if self.retain is not None and len(self.entries) > self.retain:
            del self.entries[: len(self.entries) - self.retain]

    def recent(self, win: int) -> list[PhiEntry]:
        """The win newest entries, most recent first."""
        if win < 1:
            raise ValueError("win must be >= 1")
        if len(self.entries) < win:
            raise ValueError(
                f"history holds {len(self.entries)} slices but win={win} requested"
            )
        return self.entries[-win:][::-1]

    def __len__(self) -> int:
        return len(self.entries)


def adaptive_weights(
    k: int, history: PhiHistory, beta_prev_row: np.ndarray, win: int
) -> np.ndarray:
    """Softmax similarity weights for topic k across the win newest slices.

    Similarity is the dot product between each stored phi row (zero-padded
    on the right to the prior row's width) and beta_prev_row. The softmax
    subtracts the max dot product first, so the output is stable under
    adding any constant to all similarities.
    """
    beta_prev_row = np.asarray(beta_prev_row, dtype=np.float64)
    width = beta_prev_row.shape[0]
    entries = history.recent(win)
    dots = np.empty(win, dtype=np.float64)
    for i, entry in enumerate(entries):
        row = entry.phi[k]
        n = min(row.shape[0], width)
        dots[i] = float(row[:n] @ beta_prev_row[:n])
    shifted = np.exp(dots - dots.max())
    return shifted / shifted.sum()


def adapt_beta(
    history: PhiHistory,
    n_wk: np.ndarray,
    win: int,
    *,
    floor: float = DEFAULT_BETA_FLOOR,
    phi_scale: float = 1.0,
    return_weights: bool = False,
):
    """Word-prior rows for the next slice from the finished slice's counts.

    Row k becomes n_wk[k] plus the weight-mixed phi rows of the win newest
    slices (weights from adaptive_weights against the newest stored prior),
    floored elementwise at `floor` so entries with no count or phi mass
    stay strictly positive. phi_scale multiplies the mixed phi term and
    defaults to 1, the plain sum.
    """
    if len(history) == 0:
        raise ValueError("history is empty")
    if win > len(history):
        raise ValueError(f"win={win} exceeds history length {len(history)}")
    n_wk = np.asarray(n_wk, dtype=np.float64)
    k, width = n_wk.shape
    beta_prev = history.entries[-1].beta
    entries = history.recent(win)
    out = np.empty((k, width), dtype=np.float64)
    weights = np.empty((k, win), dtype=np.float64)
    for kk in range(k):
        gamma = adaptive_weights(kk, history, beta_prev[kk], win)
        weights[kk] = gamma
        mix = np.zeros(width, dtype=np.float64)
        for g, entry in zip(gamma, entries):
            row = entry.phi[kk]
            mix[: row.shape[0]] += g * row
        out[kk] = n_wk[kk] + phi_scale * mix
    out = np.maximum(out, floor)
    if return_weights:
        return out, weights
    return out


def update_alpha(alpha: np.ndarray, n_k: np.ndarray) -> np.ndarray:
    """Topic prior for the next slice: elementwise alpha + n_k."""
    alpha = np.asarray(alpha, dtype=np.float64)
    n_k = np.asarray(n_k)
    if alpha.shape != n_k.shape:
        raise ValueError(f"length mismatch: alpha {alpha.shape}, n_k {n_k.shape}")
    return alpha + n_k


@dataclass
class SliceResult:
    """Per-slice output of a chain run."""

    t: int
    label: str
    phi: np.ndarray
    theta: np.ndarray
    model: SliceModel
    sweep_seconds: float
    # weights used to build this slice's word prior; None for slice 1 and
    # for non-adaptive runs
    gamma: np.ndarray | None = None


def run_obtm(corpus: Corpus, hp: HyperParams) -> list[SliceResult]:
    """Online chain: slice 1 uses symmetric priors, then alpha += n_k and
    beta += n_wk slice over slice. Words first seen in a later slice enter
    the prior at beta0."""
    if not corpus.slices:
        raise ValueError("corpus has no slices")
    rng = np.random.default_rng(hp.seed)
    alpha = np.full(hp.k, hp.initial_alpha, dtype=np.float64)
    beta = np.full((hp.k, corpus.slices[0].vocab_size), hp.beta0, dtype=np.float64)
    results: list[SliceResult] = []
    for slice_ in corpus.slices:
        beta = _pad_columns(beta, slice_.vocab_size, fill=hp.beta0)
        model, phi, theta, secs = run_slice(slice_, hp, alpha, beta, rng)
        results.append(SliceResult(slice_.index, slice_.label, phi, theta, model, secs))
        alpha = update_alpha(alpha, model.n_k)
        beta = beta + model.n_wk
    return results


def run_aobtm(
    corpus: Corpus,
    hp: HyperParams,
    win: int,
    *,
    retain_all: bool = True,
    floor: float = DEFAULT_BETA_FLOOR,
    phi_scale: float = 1.0,
) -> list[SliceResult]:
    """Adaptive online chain over all slices of the corpus.

    Slice 1 runs under symmetric priors. Each later slice runs under
    alpha from update_alpha and beta from adapt_beta, where the effective
    window is min(win, finished slices) so early slices never request more
    history than exists. Words first seen in a later slice enter the prior
    at the floor value. retain_all=False keeps only the last win history
    entries (bounded memory) instead of the full chain.
    """
    if win < 1:
        raise ValueError("win must be >= 1")
    if not corpus.slices:
        raise ValueError("corpus has no slices")
    rng = np.random.default_rng(hp.seed)
    history = PhiHistory(retain=None if retain_all else win)
    alpha = np.full(hp.k, hp.initial_alpha, dtype=np.float64)
    beta = np.full((hp.k, corpus.slices[0].vocab_size), hp.beta0, dtype=np.float64)
    prev_model: SliceModel | None = None
    results: list[SliceResult] = []
    for slice_ in corpus.slices:
        gamma = None
        if prev_model is not None:
            eff_win = min(win, len(history))
            nxt, gamma = adapt_beta(
                history,
                prev_model.n_wk,
                eff_win,
                floor=floor,
                phi_scale=phi_scale,
                return_weights=True,
            )
            beta = _pad_columns(nxt, slice_.vocab_size, fill=floor)
            alpha = update_alpha(alpha, prev_model.n_k)
        model, phi, theta, secs = run_slice(slice_, hp, alpha, beta, rng)
        history.append(slice_.index, phi, beta)
        results.append(
            SliceResult(slice_.index, slice_.label, phi, theta, model, secs, gamma)
        )
        prev_model = model
    return results

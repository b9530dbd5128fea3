"""Collapsed Gibbs sampling over a single slice's biterm multiset."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
from numba import njit

from .corpus import TimeSlice


@dataclass
class HyperParams:
    """Sampler settings; alpha0=None resolves to the 50/K heuristic."""

    k: int
    n_iter: int = 100
    alpha0: float | None = None
    beta0: float = 0.01
    seed: int = 1

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.n_iter < 1:
            raise ValueError("n_iter must be >= 1")
        if self.alpha0 is not None and self.alpha0 <= 0:
            raise ValueError("alpha0 must be positive")
        if self.beta0 <= 0:
            raise ValueError("beta0 must be positive")

    @property
    def initial_alpha(self) -> float:
        return 50.0 / self.k if self.alpha0 is None else self.alpha0


@dataclass
class SliceModel:
    """Mutable sampler state for one slice. Single-writer: one sampler
    thread mutates it; independent models may run concurrently."""

    t: int
    k: int
    w: int
    alpha: np.ndarray  # (k,) topic prior
    beta: np.ndarray  # (k, w) word prior rows
    n_k: np.ndarray  # (k,) biterms per topic
    n_wk: np.ndarray  # (k, w) word-slot counts
    z: np.ndarray  # (n_biterms,) assignments
    w1: np.ndarray  # (n_biterms,) smaller term id of each biterm
    w2: np.ndarray  # (n_biterms,) larger term id of each biterm

    @property
    def n_biterms(self) -> int:
        return int(self.z.shape[0])

    def validate_counts(self) -> None:
        """Integer count identities; raises if the state is corrupted."""
        if int(self.n_k.sum()) != self.n_biterms:
            raise ValueError("sum(n_k) does not equal the number of biterms")
        if not np.array_equal(self.n_wk.sum(axis=1), 2 * self.n_k):
            raise ValueError("word-slot counts do not match 2 * n_k")
        if self.n_biterms and not ((self.z >= 0) & (self.z < self.k)).all():
            raise ValueError("topic assignment out of range")
        if not (self.alpha > 0).all() or not (self.beta > 0).all():
            raise ValueError("priors must be strictly positive")


def init_assignments(
    slice_: TimeSlice,
    hp: HyperParams,
    alpha: np.ndarray,
    beta: np.ndarray,
    rng: np.random.Generator,
) -> SliceModel:
    """Uniform random topic per biterm, with counts made consistent."""
    alpha = np.asarray(alpha, dtype=np.float64)
    beta = np.asarray(beta, dtype=np.float64)
    if alpha.shape != (hp.k,):
        raise ValueError(f"alpha must have shape ({hp.k},), got {alpha.shape}")
    if beta.shape != (hp.k, slice_.vocab_size):
        raise ValueError(
            f"beta must have shape ({hp.k}, {slice_.vocab_size}), got {beta.shape}"
        )
    nb = len(slice_.biterms)
    if nb:
        arr = np.asarray(slice_.biterms, dtype=np.int64)
        w1, w2 = np.ascontiguousarray(arr[:, 0]), np.ascontiguousarray(arr[:, 1])
        z = rng.integers(0, hp.k, nb).astype(np.int64)
    else:
        w1 = np.empty(0, dtype=np.int64)
        w2 = np.empty(0, dtype=np.int64)
        z = np.empty(0, dtype=np.int64)
    n_k = np.bincount(z, minlength=hp.k).astype(np.int64)
    n_wk = np.zeros((hp.k, slice_.vocab_size), dtype=np.int64)
    np.add.at(n_wk, (z, w1), 1)
    np.add.at(n_wk, (z, w2), 1)
    return SliceModel(
        t=slice_.index,
        k=hp.k,
        w=slice_.vocab_size,
        alpha=alpha.copy(),
        beta=beta.copy(),
        n_k=n_k,
        n_wk=n_wk,
        z=z,
        w1=w1,
        w2=w2,
    )


def conditional_distribution(
    model: SliceModel, biterm: tuple[int, int], exclude: int | None = None
) -> np.ndarray:
    """Normalized topic probabilities for one biterm given all others.

    score(k) = (n_k + alpha_k) * (n_{w1|k} + beta_{k,w1}) * (n_{w2|k} + beta_{k,w2})
               / [sum_w (n_{w|k} + beta_{k,w})]^2

    With exclude given, that assignment's contribution is removed from the
    counts before scoring, so the formula sees the leave-one-out
    quantities of a collapsed update; without it the counts are taken as
    passed.
    """
    a, b = int(biterm[0]), int(biterm[1])
    n_k = model.n_k.astype(np.float64)
    n_wa = model.n_wk[:, a].astype(np.float64)
    n_wb = model.n_wk[:, b].astype(np.float64)
    rowsum = model.n_wk.sum(axis=1).astype(np.float64)
    if exclude is not None:
        zi = int(model.z[exclude])
        ea, eb = int(model.w1[exclude]), int(model.w2[exclude])
        n_k[zi] -= 1.0
        rowsum[zi] -= 2.0
        for word in (ea, eb):
            if word == a:
                n_wa[zi] -= 1.0
            if word == b:
                n_wb[zi] -= 1.0
    denom = rowsum + model.beta.sum(axis=1)
    scores = (
        (n_k + model.alpha)
        * (n_wa + model.beta[:, a])
        * (n_wb + model.beta[:, b])
        / (denom * denom)
    )
    total = scores.sum()
    if not total > 0:
        raise ValueError("all topic scores are zero; count state is corrupted")
    return scores / total


@njit(cache=True, nogil=True)
def _sweep(w1, w2, z, n_k, n_wk, rowsum, alpha, beta, beta_sums, u):
    nb = w1.shape[0]
    k = n_k.shape[0]
    probs = np.empty(k)
    for i in range(nb):
        a = w1[i]
        b = w2[i]
        old = z[i]
        n_k[old] -= 1
        n_wk[old, a] -= 1
        n_wk[old, b] -= 1
        rowsum[old] -= 2
        total = 0.0
        for kk in range(k):
            denom = rowsum[kk] + beta_sums[kk]
            s = (
                (n_k[kk] + alpha[kk])
                * (n_wk[kk, a] + beta[kk, a])
                * (n_wk[kk, b] + beta[kk, b])
                / (denom * denom)
            )
            probs[kk] = s
            total += s
        r = u[i] * total
        acc = 0.0
        new = k - 1
        for kk in range(k):
            acc += probs[kk]
            if r < acc:
                new = kk
                break
        z[i] = new
        n_k[new] += 1
        n_wk[new, a] += 1
        n_wk[new, b] += 1
        rowsum[new] += 2


def gibbs_sweep(model: SliceModel, rng: np.random.Generator) -> SliceModel:
    """One full pass: every biterm excluded, rescored, and redrawn once.

    The per-biterm uniforms are drawn up front from rng, so a fixed seed
    replays bit-identically; the draw itself is inverse-CDF on the
    normalized conditional.
    """
    if model.n_biterms == 0:
        return model
    u = rng.random(model.n_biterms)
    _sweep(
        model.w1,
        model.w2,
        model.z,
        model.n_k,
        model.n_wk,
        model.n_wk.sum(axis=1),
        model.alpha,
        model.beta,
        model.beta.sum(axis=1),
        u,
    )
    return model


def compute_phi(model: SliceModel) -> np.ndarray:
    """Row-stochastic topic-word matrix: (n_wk + beta) over its row sums."""
    num = model.n_wk + model.beta
    return num / num.sum(axis=1, keepdims=True)


def compute_theta(model: SliceModel, n_biterms: int | None = None) -> np.ndarray:
    """Corpus-topic simplex: (n_k + alpha) / (N_B + sum(alpha))."""
    nb = model.n_biterms if n_biterms is None else n_biterms
    return (model.n_k + model.alpha) / (nb + model.alpha.sum())


def run_slice(
    slice_: TimeSlice,
    hp: HyperParams,
    alpha: np.ndarray,
    beta: np.ndarray,
    rng: np.random.Generator,
) -> tuple[SliceModel, np.ndarray, np.ndarray, float]:
    """Init, n_iter sweeps, then phi/theta. Returns the sweep wall-time too."""
    model = init_assignments(slice_, hp, alpha, beta, rng)
    start = time.perf_counter()
    for _ in range(hp.n_iter):
        gibbs_sweep(model, rng)
    elapsed = time.perf_counter() - start
    return model, compute_phi(model), compute_theta(model), elapsed


def run_btm(
    slice_: TimeSlice, hp: HyperParams
) -> tuple[np.ndarray, np.ndarray, SliceModel]:
    """Batch run over one slice with symmetric initial priors."""
    rng = np.random.default_rng(hp.seed)
    alpha = np.full(hp.k, hp.initial_alpha, dtype=np.float64)
    beta = np.full((hp.k, slice_.vocab_size), hp.beta0, dtype=np.float64)
    model, phi, theta, _ = run_slice(slice_, hp, alpha, beta, rng)
    return phi, theta, model

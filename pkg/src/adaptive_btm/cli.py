"""Command-line driver: train, search-k, search-win, eval, build-ref-stats.

Exit codes: 0 success, 2 malformed input data, 3 configuration violation.
Every command is deterministic given its flags and inputs; rerunning
rewrites artifacts byte for byte except the created_at field of the
manifest.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Any

import numpy as np

from .corpus import (
    Corpus,
    CorpusFormatError,
    RawDocument,
    build_corpus,
    default_stopwords,
    load_stopwords,
    preprocess,
    read_jsonl,
)
from .evaluation import (
    RefStats,
    build_ref_stats,
    dis_score,
    load_ref_stats,
    pmi_score_model,
    pmi_score_topic,
    save_ref_stats,
    top_word_ids,
)
from .gibbs import HyperParams, run_btm
from .online import SliceResult, run_aobtm, run_obtm
from .tuning import SearchConfig, SearchResult, search_topic_num, search_win

EXIT_INPUT = 2
EXIT_CONFIG = 3

MODES = ("btm", "obtm", "aobtm")

DEFAULTS: dict[str, Any] = {
    "mode": "aobtm",
    "win": 1,
    "iters": 100,
    "alpha": None,  # resolves to 50/K
    "beta": 0.01,
    "window_size": 0,
    "phrase_threshold": 24,
    "phrase_pmi": 0.0,
    "top": 10,
    "seed": 1,
    "workers": None,  # resolves to detected cores
    "span": None,  # resolves to workers - 1
    "iter_reps": 1,
    "pair_smoothing": 1.0,
}

_TYPES: dict[str, Any] = {
    "mode": str,
    "k": int,
    "win": int,
    "iters": int,
    "alpha": float,
    "beta": float,
    "window_size": int,
    "phrase_threshold": int,
    "phrase_pmi": float,
    "top": int,
    "seed": int,
    "workers": int,
    "span": int,
    "iter_reps": int,
    "pair_smoothing": float,
    "candidates": str,
    "input": str,
    "stopwords": str,
    "ref_stats": str,
    "out": str,
}


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _read_config_file(path: str) -> dict[str, str]:
    """key=value lines; '#' starts a comment, blank lines ignored."""
    values: dict[str, str] = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise CliError(EXIT_CONFIG, f"cannot read config file: {exc}") from exc
    for line_no, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise CliError(EXIT_CONFIG, f"config line {line_no}: expected key=value")
        key, value = line.split("=", 1)
        values[key.strip().replace("-", "_")] = value.strip()
    return values


@dataclass
class Settings:
    """Flag > config-file > built-in default resolution for one invocation."""

    args: argparse.Namespace
    file_values: dict[str, str]

    def get(self, key: str, default: Any = None) -> Any:
        value = getattr(self.args, key, None)
        if value is not None:
            return value
        if key in self.file_values:
            caster = _TYPES.get(key, str)
            try:
                return caster(self.file_values[key])
            except ValueError as exc:
                raise CliError(
                    EXIT_CONFIG, f"config value for {key!r} is not a {caster.__name__}"
                ) from exc
        if key in DEFAULTS:
            return DEFAULTS[key]
        return default

    def require(self, key: str, flag: str) -> Any:
        value = self.get(key)
        if value is None:
            raise CliError(EXIT_CONFIG, f"{flag} is required")
        return value


def _settings(ns: argparse.Namespace) -> Settings:
    file_values = _read_config_file(ns.config) if getattr(ns, "config", None) else {}
    return Settings(ns, file_values)


def _positive(value, name: str, minimum=1):
    if value < minimum:
        raise CliError(EXIT_CONFIG, f"{name} must be >= {minimum}")
    return value


def _load_input(settings: Settings) -> list[RawDocument]:
    path = settings.require("input", "--input")
    try:
        return read_jsonl(path)
    except OSError as exc:
        raise CliError(EXIT_INPUT, f"cannot read input: {exc}") from exc


def _stopword_set(settings: Settings) -> frozenset[str]:
    path = settings.get("stopwords")
    if path is None:
        return default_stopwords()
    try:
        return load_stopwords(path)
    except OSError as exc:
        raise CliError(EXIT_CONFIG, f"cannot read stopwords: {exc}") from exc


def _build_corpus(settings: Settings, raw_docs: list[RawDocument]) -> Corpus:
    window = settings.get("window_size")
    if window != 0 and window < 2:
        raise CliError(EXIT_CONFIG, "--window-size must be 0 or >= 2")
    return build_corpus(
        raw_docs,
        _stopword_set(settings),
        window=window,
        phrase_freq_threshold=_positive(
            settings.get("phrase_threshold"), "--phrase-threshold"
        ),
        phrase_pmi_cutoff=settings.get("phrase_pmi"),
    )


def _load_ref(settings: Settings, corpus: Corpus | None) -> RefStats | None:
    """Accept either a prebuilt stats TSV or a raw JSONL reference corpus.

    A JSONL reference is preprocessed with the same stopword list and,
    when a trained corpus is at hand, its phrase set, so phrase terms
    resolve directly during scoring.
    """
    path = settings.get("ref_stats")
    if path is None:
        return None
    try:
        with open(path, encoding="utf-8") as fh:
            first = fh.readline()
    except OSError as exc:
        raise CliError(EXIT_CONFIG, f"cannot read reference stats: {exc}") from exc
    if first.startswith("D\t"):
        return load_ref_stats(path)
    raw = read_jsonl(path)
    stops = _stopword_set(settings)
    phrases = corpus.phrases if corpus is not None else set()
    docs = []
    for doc in raw:
        tokens = preprocess(doc, stops)
        if phrases:
            from .corpus import apply_phrases

            tokens = apply_phrases(tokens, phrases)
        if tokens:
            docs.append(tokens)
    return build_ref_stats(docs)


def _write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def _snapshot_dict(
    result: SliceResult, terms: list[str], hp: HyperParams, include_assignments: bool
) -> dict:
    m = result.model
    snap = {
        "t": m.t,
        "label": result.label,
        "K": m.k,
        "W": m.w,
        "alpha": m.alpha.tolist(),
        "beta": m.beta.tolist(),
        "n_k": m.n_k.tolist(),
        "n_wk": m.n_wk.tolist(),
        "phi": result.phi.tolist(),
        "theta": result.theta.tolist(),
        "gamma": None if result.gamma is None else result.gamma.tolist(),
        "terms": terms[: m.w],
        "n_biterms": m.n_biterms,
        "seed": hp.seed,
        "n_iter": hp.n_iter,
    }
    if include_assignments:
        snap["z"] = m.z.tolist()
    return snap


def _topic_entries(
    phi: np.ndarray,
    theta: np.ndarray,
    terms: list[str],
    top_t: int,
    ref: RefStats | None,
    eps_pair: float,
) -> list[dict]:
    topics = []
    for kk in range(phi.shape[0]):
        ids = top_word_ids(phi[kk], top_t)
        entry: dict[str, Any] = {
            "topic": kk,
            "theta": float(theta[kk]),
            "top_terms": [
                {"term": terms[i], "phi": float(phi[kk, i])} for i in ids
            ],
        }
        if ref is not None:
            entry["pmi"] = pmi_score_topic(
                [terms[i] for i in ids], ref, eps_pair=eps_pair
            )
        topics.append(entry)
    return topics


def cmd_train(ns: argparse.Namespace) -> int:
    settings = _settings(ns)
    mode = settings.get("mode")
    if mode not in MODES:
        raise CliError(EXIT_CONFIG, f"--mode must be one of {', '.join(MODES)}")
    k = _positive(settings.require("k", "--k"), "--k")
    win = _positive(settings.get("win"), "--win")
    n_iter = _positive(settings.get("iters"), "--iters")
    top_t = _positive(settings.get("top"), "--top", minimum=2)
    seed = settings.get("seed")
    alpha0 = settings.get("alpha")
    beta0 = settings.get("beta")
    eps_pair = settings.get("pair_smoothing")
    out_dir = Path(settings.require("out", "--out"))
    try:
        hp = HyperParams(k=k, n_iter=n_iter, alpha0=alpha0, beta0=beta0, seed=seed)
    except ValueError as exc:
        raise CliError(EXIT_CONFIG, str(exc)) from exc

    # parse the whole input before any artifact is written, so a malformed
    # line can never leave partial snapshots behind
    raw_docs = _load_input(settings)
    corpus = _build_corpus(settings, raw_docs)
    ref = _load_ref(settings, corpus)

    if mode == "btm":
        batch = corpus.merged_slice()
        phi, theta, model = run_btm(batch, hp)
        results = [SliceResult(batch.index, batch.label, phi, theta, model, 0.0)]
    elif mode == "obtm":
        results = run_obtm(corpus, hp)
    else:
        results = run_aobtm(corpus, hp, win)

    terms = corpus.vocabulary.id_to_term
    slice_paths = []
    for result in results:
        rel = f"slices/{result.t}.json"
        _write_json(
            out_dir / rel,
            _snapshot_dict(result, terms, hp, ns.include_assignments),
        )
        slice_paths.append(
            {
                "t": result.t,
                "label": result.label,
                "path": rel,
                "n_biterms": result.model.n_biterms,
                "W": result.model.w,
            }
        )

    final = results[-1]
    report = {
        "mode": mode,
        "k": k,
        "win": win if mode == "aobtm" else None,
        "seed": seed,
        "n_iter": n_iter,
        "slice": {"t": final.t, "label": final.label},
        "dis_score": dis_score(final.phi),
        "topics": _topic_entries(final.phi, final.theta, terms, top_t, ref, eps_pair),
    }
    if ref is not None:
        report["pmi_score"] = pmi_score_model(
            final.phi, terms, top_t, ref, eps_pair=eps_pair
        )
    _write_json(out_dir / "report.json", report)

    manifest = {
        "created_at": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "mode": mode,
        "k": k,
        "win": win if mode == "aobtm" else None,
        "seed": seed,
        "n_iter": n_iter,
        "input": str(settings.get("input")),
        "slices": slice_paths,
    }
    _write_json(out_dir / "manifest.json", manifest)
    print(f"trained {mode} over {len(results)} slice(s); report at {out_dir/'report.json'}")
    return 0


def _print_table(result: SearchResult, label: str) -> None:
    print(f"{label:>10}  {'mean_pmi':>12}  per-run scores")
    for entry in sorted(result.trace, key=lambda c: c.value):
        runs = ", ".join(f"{s:.6f}" for s in entry.scores)
        print(f"{entry.value:>10}  {entry.mean_score:>12.6f}  {runs}")
    print(f"best {label}: {result.best_value} (mean_pmi {result.best_score:.6f})")


def _search_common(settings: Settings):
    raw_docs = _load_input(settings)
    corpus = _build_corpus(settings, raw_docs)
    ref = _load_ref(settings, corpus)
    if ref is None:
        raise CliError(EXIT_CONFIG, "--ref-stats is required for coherence searches")
    workers = settings.get("workers")
    if workers is None:
        import os

        workers = os.cpu_count() or 1
    _positive(workers, "--workers")
    return corpus, ref, workers


def cmd_search_k(ns: argparse.Namespace) -> int:
    settings = _settings(ns)
    raw = settings.get("candidates")
    if not raw:
        raise CliError(EXIT_CONFIG, "--candidates is required")
    try:
        candidates = [int(part) for part in str(raw).split(",") if part.strip()]
    except ValueError as exc:
        raise CliError(EXIT_CONFIG, "--candidates must be a comma list of integers") from exc
    corpus, ref, workers = _search_common(settings)
    win = _positive(settings.get("win"), "--win")
    try:
        cfg = SearchConfig(
            candidates=candidates,
            iter_reps=settings.get("iter_reps"),
            span=settings.get("span"),
            workers=workers,
            seed=settings.get("seed"),
        )
        hp = HyperParams(
            k=candidates[0],
            n_iter=settings.get("iters"),
            alpha0=settings.get("alpha"),
            beta0=settings.get("beta"),
            seed=settings.get("seed"),
        )
        result = search_topic_num(
            cfg,
            corpus,
            win,
            ref,
            hp=hp,
            top_t=_positive(settings.get("top"), "--top", minimum=2),
            eps_pair=settings.get("pair_smoothing"),
        )
    except ValueError as exc:
        raise CliError(EXIT_CONFIG, str(exc)) from exc
    _print_table(result, "k")
    out = settings.get("out")
    if out is not None:
        _write_json(Path(out) / "search.json", result.as_dict())
    return 0


def cmd_search_win(ns: argparse.Namespace) -> int:
    settings = _settings(ns)
    k = _positive(settings.require("k", "--k"), "--k")
    corpus, ref, workers = _search_common(settings)
    if len(corpus.slices) < 2:
        raise CliError(EXIT_CONFIG, "window search needs at least 2 slices")
    try:
        hp = HyperParams(
            k=k,
            n_iter=settings.get("iters"),
            alpha0=settings.get("alpha"),
            beta0=settings.get("beta"),
            seed=settings.get("seed"),
        )
        result = search_win(
            corpus,
            _positive(settings.get("iter_reps"), "--iter-reps"),
            hp,
            ref,
            workers=workers,
            seed=settings.get("seed"),
            top_t=_positive(settings.get("top"), "--top", minimum=2),
            eps_pair=settings.get("pair_smoothing"),
        )
    except ValueError as exc:
        raise CliError(EXIT_CONFIG, str(exc)) from exc
    _print_table(result, "win")
    out = settings.get("out")
    if out is not None:
        _write_json(Path(out) / "search.json", result.as_dict())
    return 0


def cmd_eval(ns: argparse.Namespace) -> int:
    settings = _settings(ns)
    try:
        snap = json.loads(Path(ns.snapshot).read_text(encoding="utf-8"))
    except OSError as exc:
        raise CliError(EXIT_INPUT, f"cannot read snapshot: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise CliError(EXIT_INPUT, f"snapshot is not valid JSON: {exc}") from exc
    try:
        phi = np.asarray(snap["phi"], dtype=np.float64)
        terms = list(snap["terms"])
        k, w = int(snap["K"]), int(snap["W"])
    except (KeyError, TypeError, ValueError) as exc:
        raise CliError(EXIT_INPUT, f"snapshot missing required field: {exc}") from exc
    if phi.ndim != 2 or phi.shape != (k, w) or len(terms) != w:
        raise CliError(
            EXIT_INPUT,
            f"snapshot shapes disagree: phi {phi.shape}, K={k}, W={w}, terms={len(terms)}",
        )
    ref = _load_ref(settings, None)
    top_t = _positive(settings.get("top"), "--top", minimum=2)
    eps_pair = settings.get("pair_smoothing")
    theta = np.asarray(snap.get("theta", [0.0] * k), dtype=np.float64)
    metrics: dict[str, Any] = {
        "dis_score": dis_score(phi),
        "per_topic": _topic_entries(phi, theta, terms, top_t, ref, eps_pair),
    }
    if ref is not None:
        metrics["pmi_score"] = pmi_score_model(
            phi, terms, top_t, ref, eps_pair=eps_pair
        )
    print(json.dumps(metrics, sort_keys=True, indent=2))
    return 0


def cmd_build_ref_stats(ns: argparse.Namespace) -> int:
    settings = _settings(ns)
    raw = _load_input(settings)
    stops = _stopword_set(settings)
    docs = [tokens for doc in raw if (tokens := preprocess(doc, stops))]
    stats = build_ref_stats(docs)
    out = Path(settings.require("out", "--out"))
    out.parent.mkdir(parents=True, exist_ok=True)
    save_ref_stats(stats, out)
    print(f"reference stats for {stats.d} documents written to {out}")
    return 0


def _add_common(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--input", help="input JSONL file of {slice, text} records")
    sp.add_argument("--stopwords", help="stopword file, one term per line")
    sp.add_argument("--ref-stats", dest="ref_stats", help="stats TSV or reference JSONL")
    sp.add_argument("--out", help="output directory")
    sp.add_argument("--config", help="key=value config file (flags win)")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--top", type=int, help="top terms per topic (default 10)")
    sp.add_argument("--pair-smoothing", dest="pair_smoothing", type=float)
    sp.add_argument("--window-size", dest="window_size", type=int)
    sp.add_argument("--phrase-threshold", dest="phrase_threshold", type=int)
    sp.add_argument("--phrase-pmi", dest="phrase_pmi", type=float)
    sp.add_argument("--iters", type=int, help="Gibbs sweeps per slice (default 100)")
    sp.add_argument("--alpha", type=float, help="initial topic prior (default 50/K)")
    sp.add_argument("--beta", type=float, help="initial word prior (default 0.01)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="adaptive-btm",
        description="Biterm topic models over version-tagged short texts",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    train = sub.add_parser("train", help="fit a model and write snapshots + report")
    _add_common(train)
    train.add_argument("--mode", choices=MODES)
    train.add_argument("--k", type=int, help="number of topics")
    train.add_argument("--win", type=int, help="previous versions to mix (aobtm)")
    train.add_argument(
        "--include-assignments",
        action="store_true",
        help="also store per-biterm topic assignments in snapshots",
    )
    train.set_defaults(func=cmd_train)

    sk = sub.add_parser("search-k", help="two-phase search for the topic count")
    _add_common(sk)
    sk.add_argument("--candidates", help="comma list of candidate topic counts")
    sk.add_argument("--span", type=int, help="fine-tune breadth (default workers-1)")
    sk.add_argument("--iter-reps", dest="iter_reps", type=int, help="runs per candidate")
    sk.add_argument("--win", type=int)
    sk.add_argument("--workers", type=int, help="1 forces sequential")
    sk.set_defaults(func=cmd_search_k)

    sw = sub.add_parser("search-win", help="search the version window size")
    _add_common(sw)
    sw.add_argument("--k", type=int)
    sw.add_argument("--iter-reps", dest="iter_reps", type=int)
    sw.add_argument("--workers", type=int)
    sw.set_defaults(func=cmd_search_win)

    ev = sub.add_parser("eval", help="score a stored slice snapshot")
    _add_common(ev)
    ev.add_argument("--snapshot", required=True, help="slice snapshot JSON")
    ev.set_defaults(func=cmd_eval)

    brs = sub.add_parser("build-ref-stats", help="turn a reference JSONL into a stats TSV")
    brs.add_argument("--input", required=True)
    brs.add_argument("--stopwords")
    brs.add_argument("--out", required=True, help="output TSV path")
    brs.add_argument("--config")
    brs.set_defaults(func=cmd_build_ref_stats)

    return parser


def main(argv: list[str] | None = None) -> int:
    ns = build_parser().parse_args(argv)
    try:
        return ns.func(ns)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except CorpusFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    raise SystemExit(main())

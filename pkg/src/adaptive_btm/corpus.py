"""Corpus ingestion for version-tagged short texts.

Turns raw documents into per-slice biterm collections: tokenization and
cleanup, PMI-based phrase merging, a vocabulary that grows monotonically
across slices, and biterm extraction within a configurable context window.
"""

from __future__ import annotations

import json
import math
import re
from collections import Counter
from dataclasses import dataclass, field
from importlib import resources
from typing import Callable, Iterable, Sequence

DIGIT_TOKEN = "<digit>"

# Letter runs and digit runs are separate tokens. Underscores and
# punctuation never survive tokenization, so underscore-joined phrase
# terms can only be introduced by apply_phrases.
_TOKEN_RE = re.compile(r"[^\W\d_]+|\d+")

# Optional hook for lemmatization / name replacement; receives and
# returns a token list. Identity by default.
Normalizer = Callable[[list[str]], list[str]]


class CorpusFormatError(ValueError):
    """Malformed input record; carries the 1-based line number when known."""

    def __init__(self, message: str, line_no: int | None = None):
        super().__init__(message)
        self.line_no = line_no


@dataclass(frozen=True)
class RawDocument:
    slice_label: str
    text: str


def default_stopwords() -> frozenset[str]:
    """English stopword list shipped with the package."""
    data = resources.files("adaptive_btm").joinpath("data/stopwords_en.txt")
    return frozenset(
        line.strip() for line in data.read_text("utf-8").splitlines() if line.strip()
    )


def load_stopwords(path) -> frozenset[str]:
    """One term per line; blank lines ignored."""
    with open(path, encoding="utf-8") as fh:
        return frozenset(line.strip() for line in fh if line.strip())


def tokenize(text: str) -> list[str]:
    """Lowercase and split; every maximal digit run becomes DIGIT_TOKEN."""
    return [
        DIGIT_TOKEN if tok[0].isdigit() else tok
        for tok in _TOKEN_RE.findall(text.lower())
    ]


def preprocess(
    doc: RawDocument | str,
    stopwords: frozenset[str] | set[str],
    normalizer: Normalizer | None = None,
) -> list[str]:
    """Token sequence for one document.

    An output of <=1 token signals that the caller should drop the
    document; duplicate removal is a slice-level concern and happens in
    build_corpus.
    """
    text = doc.text if isinstance(doc, RawDocument) else doc
    tokens = tokenize(text)
    if normalizer is not None:
        tokens = list(normalizer(tokens))
    return [t for t in tokens if t not in stopwords]


def read_jsonl(path) -> list[RawDocument]:
    """Parse a JSON-lines input file: {"slice": <label>, "text": <string>}."""
    docs: list[RawDocument] = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusFormatError(
                    f"line {line_no}: invalid JSON ({exc.msg})", line_no
                ) from exc
            if not isinstance(obj, dict) or "slice" not in obj or "text" not in obj:
                raise CorpusFormatError(
                    f'line {line_no}: expected an object with "slice" and "text" keys',
                    line_no,
                )
            text = str(obj["text"])
            if not text.strip():
                raise CorpusFormatError(f"line {line_no}: empty text", line_no)
            docs.append(RawDocument(slice_label=str(obj["slice"]), text=text))
    return docs


@dataclass
class Vocabulary:
    """Bidirectional term<->id map; ids are dense and never reassigned."""

    term_to_id: dict[str, int] = field(default_factory=dict)
    id_to_term: list[str] = field(default_factory=list)
    phrase_set: set[str] = field(default_factory=set)

    def add(self, term: str) -> int:
        tid = self.term_to_id.get(term)
        if tid is None:
            tid = len(self.id_to_term)
            self.term_to_id[term] = tid
            self.id_to_term.append(term)
            if "_" in term:
                self.phrase_set.add(term)
        return tid

    def id_of(self, term: str) -> int:
        return self.term_to_id[term]

    def term_of(self, tid: int) -> str:
        return self.id_to_term[tid]

    def __contains__(self, term: str) -> bool:
        return term in self.term_to_id

    def __len__(self) -> int:
        return len(self.id_to_term)


def extract_phrases(
    docs: Iterable[Sequence[str]],
    freq_threshold: int = 24,
    pmi_cutoff: float = 0.0,
) -> set[str]:
    """Adjacent bigrams that are frequent and positively associated.

    A bigram (a, b) qualifies when its corpus count is at least
    freq_threshold and log[P(a,b) / (P(a) P(b))] >= pmi_cutoff, with the
    joint estimated over adjacent-pair positions and the marginals over
    token positions. Qualifying bigrams are reported as "a_b" terms.
    """
    if freq_threshold < 1:
        raise ValueError("freq_threshold must be >= 1")
    unigrams: Counter[str] = Counter()
    bigrams: Counter[tuple[str, str]] = Counter()
    for doc in docs:
        unigrams.update(doc)
        bigrams.update(zip(doc, doc[1:]))
    n_tokens = sum(unigrams.values())
    n_pairs = sum(bigrams.values())
    phrases: set[str] = set()
    for (a, b), count in bigrams.items():
        if count < freq_threshold or a == b:
            continue
        pmi = math.log(
            (count / n_pairs) / ((unigrams[a] / n_tokens) * (unigrams[b] / n_tokens))
        )
        if pmi >= pmi_cutoff:
            phrases.add(f"{a}_{b}")
    return phrases


def apply_phrases(tokens: Sequence[str], phrases: set[str]) -> list[str]:
    """Greedy left-to-right replacement of registered adjacent pairs.

    Constituent words outside an identified phrase occurrence stay
    ordinary terms.
    """
    if not phrases:
        return list(tokens)
    out: list[str] = []
    i = 0
    while i < len(tokens):
        if i + 1 < len(tokens):
            joined = f"{tokens[i]}_{tokens[i + 1]}"
            if joined in phrases:
                out.append(joined)
                i += 2
                continue
        out.append(tokens[i])
        i += 1
    return out


def extract_biterms(token_ids: Sequence[int], window: int = 0) -> list[tuple[int, int]]:
    """All canonical (lo, hi) pairs of distinct ids within the context window.

    window=0 treats the whole document as one context; otherwise a pair of
    positions (i, j), i < j, qualifies when j - i < window. Pairs of equal
    ids are dropped; duplicates keep their multiplicity.
    """
    if window != 0 and window < 2:
        raise ValueError("window must be 0 (whole document) or >= 2")
    n = len(token_ids)
    pairs: list[tuple[int, int]] = []
    for i in range(n):
        jmax = n if window == 0 else min(n, i + window)
        for j in range(i + 1, jmax):
            a, b = token_ids[i], token_ids[j]
            if a == b:
                continue
            pairs.append((a, b) if a < b else (b, a))
    return pairs


@dataclass
class TimeSlice:
    """One sealed version/time-slice: documents as id sequences plus biterms."""

    index: int  # 1-based position in the slice ordering
    label: str
    docs: list[list[int]]
    biterms: list[tuple[int, int]]
    vocab_size: int  # W at the time the slice was sealed

    @property
    def n_biterms(self) -> int:
        return len(self.biterms)


@dataclass
class Corpus:
    vocabulary: Vocabulary
    slices: list[TimeSlice]
    window: int
    phrases: set[str]

    def merged_slice(self) -> TimeSlice:
        """All documents as a single batch context, for plain BTM runs."""
        docs = [d for s in self.slices for d in s.docs]
        biterms = [b for s in self.slices for b in s.biterms]
        return TimeSlice(1, "all", docs, biterms, len(self.vocabulary))


def build_corpus(
    raw_docs: Iterable[RawDocument],
    stopwords: frozenset[str] | set[str],
    *,
    window: int = 0,
    phrase_freq_threshold: int = 24,
    phrase_pmi_cutoff: float = 0.0,
    normalizer: Normalizer | None = None,
) -> Corpus:
    """Preprocess, slice, merge phrases, and seal the vocabulary.

    Slices are ordered by first appearance of their label. Within a slice,
    documents that preprocess to <=1 token and exact duplicates are
    dropped. Phrase statistics are computed once over the whole surviving
    corpus so phrase identity is stable across slices; documents shrunk to
    <=1 token by phrase merging are dropped as well. A slice whose
    documents were all dropped is kept as an empty slice so the version
    sequence is preserved.
    """
    labels: list[str] = []
    buckets: dict[str, list[list[str]]] = {}
    for doc in raw_docs:
        if doc.slice_label not in buckets:
            labels.append(doc.slice_label)
            buckets[doc.slice_label] = []
        buckets[doc.slice_label].append(preprocess(doc, stopwords, normalizer))

    for label in labels:
        kept: list[list[str]] = []
        seen: set[tuple[str, ...]] = set()
        for tokens in buckets[label]:
            key = tuple(tokens)
            if len(tokens) <= 1 or key in seen:
                continue
            seen.add(key)
            kept.append(tokens)
        buckets[label] = kept

    phrases = extract_phrases(
        (tokens for label in labels for tokens in buckets[label]),
        phrase_freq_threshold,
        phrase_pmi_cutoff,
    )

    vocab = Vocabulary()
    slices: list[TimeSlice] = []
    for index, label in enumerate(labels, start=1):
        docs_ids: list[list[int]] = []
        biterms: list[tuple[int, int]] = []
        for tokens in buckets[label]:
            merged = apply_phrases(tokens, phrases)
            if len(merged) <= 1:
                continue
            ids = [vocab.add(t) for t in merged]
            docs_ids.append(ids)
            biterms.extend(extract_biterms(ids, window))
        slices.append(TimeSlice(index, label, docs_ids, biterms, len(vocab)))
    return Corpus(vocab, slices, window, phrases)

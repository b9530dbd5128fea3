"""Biterm topic models for version-tagged short texts.

Batch, online, and adaptive-online inference over biterm collections,
PMI-based phrase preprocessing, coherence and discreteness scoring
against a reference corpus, and deterministic parallel searches for the
topic count and the version window.
"""

from .corpus import (
    Corpus,
    CorpusFormatError,
    RawDocument,
    TimeSlice,
    Vocabulary,
    apply_phrases,
    build_corpus,
    default_stopwords,
    extract_biterms,
    extract_phrases,
    load_stopwords,
    preprocess,
    read_jsonl,
    tokenize,
)
from .evaluation import (
    RefStats,
    build_ref_stats,
    dis_score,
    js_divergence,
    kl_divergence,
    load_ref_stats,
    pmi_score_model,
    pmi_score_topic,
    save_ref_stats,
    top_word_ids,
    top_words,
)
from .gibbs import (
    HyperParams,
    SliceModel,
    compute_phi,
    compute_theta,
    conditional_distribution,
    gibbs_sweep,
    init_assignments,
    run_btm,
)
from .online import (
    PhiHistory,
    SliceResult,
    adapt_beta,
    adaptive_weights,
    run_aobtm,
    run_obtm,
    update_alpha,
)
from .tuning import (
    CandidateScore,
    SearchConfig,
    SearchResult,
    evaluate_candidate_k,
    search_topic_num,
    search_win,
)

__version__ = "0.1.0"

"""qagkit: question-answer generation, evaluation, and search toolkit."""

from .types import (
    DecodingParams,
    HighlightedInput,
    Paragraph,
    QAPair,
    QAPairSet,
    make_answer_highlight,
    make_sentence_highlight,
    strip_highlight,
)
from .dataset import DatasetRecord, DatasetSplit, group_by_paragraph, load_dataset, pairs_per_paragraph, write_dataset
from .metrics import bleu4, embedding_f1, exact_match, get_base_metric, lexical_overlap_score, rouge_l
from .qaaligned import QAAlignedScore, corpus_qaaligned, pair_similarity, qaaligned_score, serialize_pair
from .pipeline import QAGResult, extract_answers, generate_qa, generate_question, http_backend, stub_backend
from .gridsearch import SearchResult, SearchSpace, TrialState, resume, run_search
from .textproc import longest_common_substring_len, split_sentences, tokenize_for_metrics

__version__ = "0.1.0"

__all__ = [
    "DecodingParams",
    "HighlightedInput",
    "Paragraph",
    "QAPair",
    "QAPairSet",
    "QAAlignedScore",
    "QAGResult",
    "DatasetRecord",
    "DatasetSplit",
    "SearchResult",
    "SearchSpace",
    "TrialState",
    "bleu4",
    "corpus_qaaligned",
    "embedding_f1",
    "exact_match",
    "extract_answers",
    "generate_qa",
    "generate_question",
    "get_base_metric",
    "group_by_paragraph",
    "http_backend",
    "lexical_overlap_score",
    "load_dataset",
    "longest_common_substring_len",
    "make_answer_highlight",
    "make_sentence_highlight",
    "pair_similarity",
    "pairs_per_paragraph",
    "qaaligned_score",
    "resume",
    "rouge_l",
    "run_search",
    "serialize_pair",
    "split_sentences",
    "strip_highlight",
    "stub_backend",
    "tokenize_for_metrics",
    "write_dataset",
]

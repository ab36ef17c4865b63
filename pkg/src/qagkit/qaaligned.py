"""Set-to-set QA evaluation: align each pair on one side to its best match
on the other under a base metric, then report F1/precision/recall.

Note on naming: recall averages the per-*generated*-pair maxima and
precision the per-*gold*-pair maxima. That is the reverse of the usual
precision/recall convention, but it is the established definition for this
score, so it is implemented verbatim rather than "corrected".
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from .metrics import BaseMetricFn
from .types import QAPair, QAPairSet


class DuplicateContextId(ValueError):
    """Two groups on the same side share a context_id."""


@dataclass(frozen=True)
class QAAlignedScore:
    f1: float
    precision: float
    recall: float
    base_metric: str = "custom"
    per_paragraph: tuple[tuple[str, float, float, float], ...] | None = field(
        default=None, compare=False
    )


def serialize_pair(pair: QAPair) -> str:
    """Render a pair as "question: {q}, answer: {a}" for the base metric."""
    return f"question: {pair.question}, answer: {pair.answer}"


def pair_similarity(gold: QAPair, generated: QAPair, s: BaseMetricFn) -> float:
    """Base-metric similarity between the serializations of two pairs."""
    return s(serialize_pair(gold), serialize_pair(generated))


def _metric_name(s: BaseMetricFn, override: str | None) -> str:
    if override is not None:
        return override
    name = getattr(s, "__name__", "custom")
    return "custom" if name == "<lambda>" else name


def qaaligned_score(
    gold: QAPairSet,
    generated: QAPairSet,
    s: BaseMetricFn,
    metric_name: str | None = None,
) -> QAAlignedScore:
    """Score one paragraph's generated pairs against its gold pairs.

    Recall: mean over generated pairs of the max similarity to any gold
    pair. Precision: mean over gold pairs of the max similarity to any
    generated pair. F1: harmonic mean, 0 when P + R == 0. Both sets empty
    scores (1, 1, 1) — producing nothing for a pair-free context is not an
    error; exactly one empty side scores (0, 0, 0).

    Exactly |gold| * |generated| base-metric evaluations are made. Sums use
    math.fsum, so results are bit-identical under any permutation of either
    set.
    """
    name = _metric_name(s, metric_name)
    if not gold.pairs and not generated.pairs:
        return QAAlignedScore(1.0, 1.0, 1.0, name)
    if not gold.pairs or not generated.pairs:
        return QAAlignedScore(0.0, 0.0, 0.0, name)
    gold_texts = [serialize_pair(pair) for pair in gold.pairs]
    gen_texts = [serialize_pair(pair) for pair in generated.pairs]
    d = [[s(g, t) for t in gen_texts] for g in gold_texts]
    recall = math.fsum(max(row[j] for row in d) for j in range(len(gen_texts))) / len(gen_texts)
    precision = math.fsum(max(row) for row in d) / len(gold_texts)
    if precision + recall == 0.0:
        f1 = 0.0
    else:
        f1 = 2.0 * precision * recall / (precision + recall)
    return QAAlignedScore(f1, precision, recall, name)


def _index_by_context(groups: list[QAPairSet], side: str) -> dict[str, QAPairSet]:
    by_id: dict[str, QAPairSet] = {}
    for group in groups:
        if group.context_id in by_id:
            raise DuplicateContextId(f"duplicate context_id {group.context_id!r} in {side} groups")
        by_id[group.context_id] = group
    return by_id


def corpus_qaaligned(
    groups_gold: list[QAPairSet],
    groups_generated: list[QAPairSet],
    s: BaseMetricFn,
    metric_name: str | None = None,
) -> QAAlignedScore:
    """Macro-average per-paragraph scores over a corpus.

    Groups are matched by context_id; a gold context with no generated group
    is scored against the empty set. Reported F1/P/R are unweighted means of
    the per-paragraph values (macro, not micro); the per-paragraph breakdown
    is retained for re-aggregation.
    """
    name = _metric_name(s, metric_name)
    gold_by_id = _index_by_context(groups_gold, "gold")
    gen_by_id = _index_by_context(groups_generated, "generated")
    per_paragraph = []
    for context_id, gold in gold_by_id.items():
        generated = gen_by_id.get(context_id, QAPairSet((), context_id))
        score = qaaligned_score(gold, generated, s, metric_name=name)
        per_paragraph.append((context_id, score.f1, score.precision, score.recall))
    if not per_paragraph:
        return QAAlignedScore(1.0, 1.0, 1.0, name, per_paragraph=())
    n = len(per_paragraph)
    return QAAlignedScore(
        f1=math.fsum(row[1] for row in per_paragraph) / n,
        precision=math.fsum(row[2] for row in per_paragraph) / n,
        recall=math.fsum(row[3] for row in per_paragraph) / n,
        base_metric=name,
        per_paragraph=tuple(per_paragraph),
    )

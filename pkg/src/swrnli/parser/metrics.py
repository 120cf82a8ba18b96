from __future__ import annotations

from typing import Sequence

from ..data import DepSentence
from ..exceptions import ContractError


def attachment_scores(pred_heads: Sequence[int], pred_labels: Sequence[str] | None,
                      gold: DepSentence) -> tuple[float, float]:
    """Unlabeled and labeled attachment score of one sentence."""
    if len(pred_heads) != len(gold.heads) or (pred_labels is not None and len(pred_labels) != len(gold.heads)):
        raise ContractError(
            f"prediction length {len(pred_heads)} does not match gold length {len(gold.heads)}")
    n = len(gold.heads)
    head_ok = [p == g for p, g in zip(pred_heads, gold.heads)]
    if pred_labels is None:
        pred_labels = [None] * n
    both_ok = [h and p == g for h, p, g in zip(head_ok, pred_labels, gold.deprels)]
    return sum(head_ok) / n, sum(both_ok) / n


def corpus_attachment_scores(predictions, gold: Sequence[DepSentence]) -> tuple[float, float]:
    """Token-weighted UAS/LAS over ``(heads, labels)`` predictions."""
    tokens = heads_ok = labels_ok = 0
    for (heads, labels), sent in zip(predictions, gold, strict=True):
        if len(heads) != len(sent):
            raise ContractError("prediction length does not match gold length")
        for h, lab, gh, glab in zip(heads, labels, sent.heads, sent.deprels):
            heads_ok += h == gh
            labels_ok += h == gh and lab == glab
        tokens += len(sent)
    return heads_ok / tokens, labels_ok / tokens

"""Metric suite: call success rate, keyword hit rate, rejection rate,
corpus BLEU@4, and box/mask IoU.

Percentages are reported to two decimals with round-half-up. Keyword and
rejection-lexicon matching is case-insensitive whole-word matching with no
stemming; each eligible case contributes its own fraction and cases are
macro-averaged. BLEU@4 uses uniform 1..4-gram weights, the standard brevity
penalty, lowercase/punctuation-stripped whitespace tokenization, and
substitutes 1/(2 * ngram_count) for any zero modified precision.
"""

from __future__ import annotations

import math
import re
import string
from collections import Counter
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path
from typing import Sequence

from surgassist.functions.types import SegmentationMask
from surgassist.orchestrator.turns import DispatchTrace

from .cases import EvalCase

DEFAULT_REJECTION_LEXICON = (
    "no",
    "not present",
    "not visible",
    "cannot find",
    "could not find",
    "absent",
    "not detected",
    "unable to locate",
    "does not appear",
)


def round2(value: float) -> float:
    """Two decimals, round-half-up (2 of 3 correct -> 66.67)."""
    return float(Decimal(repr(value)).quantize(Decimal("0.01"), rounding=ROUND_HALF_UP))


def load_rejection_lexicon(path: str | Path) -> tuple[str, ...]:
    """Plain text config: one phrase per line, '#' starts a comment."""
    phrases = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            phrases.append(line)
    return tuple(phrases)


def save_rejection_lexicon(path: str | Path, phrases: Sequence[str]) -> None:
    Path(path).write_text(
        "# rejection lexicon: one phrase per line\n" + "\n".join(phrases) + "\n",
        encoding="utf-8",
    )


_WORD_BOUNDARY = r"(?<![A-Za-z0-9]){}(?![A-Za-z0-9])"


def phrase_in_text(phrase: str, text: str) -> bool:
    """Case-insensitive whole-word (or whole-phrase) containment."""
    pattern = _WORD_BOUNDARY.format(re.escape(phrase.strip()))
    return re.search(pattern, text, flags=re.IGNORECASE) is not None


def _check_counts(cases: Sequence, other: Sequence, what: str) -> None:
    if len(cases) != len(other):
        raise ValueError(f"{len(cases)} cases but {len(other)} {what}")


def case_success(case: EvalCase, trace: DispatchTrace) -> tuple[bool, str | None]:
    """Success plus the failure category (one of exactly three kinds)."""
    executed = trace.executed_call.api_name if trace.executed_call else None
    if case.expect_call is None:
        if executed is None:
            return True, None
        return False, "false_positive_call"
    if executed is None:
        return False, "missed_call"
    if executed != case.expect_call:
        return False, "wrong_function"
    return True, None


def eval_sr(
    cases: Sequence[EvalCase], traces: Sequence[DispatchTrace]
) -> tuple[float, dict[str, int]]:
    """Successful function-calling rate and its failure breakdown."""
    _check_counts(cases, traces, "traces")
    if not cases:
        raise ValueError("eval_sr needs at least one case")
    breakdown = {"false_positive_call": 0, "wrong_function": 0, "missed_call": 0}
    successes = 0
    for case, trace in zip(cases, traces):
        ok, category = case_success(case, trace)
        if ok:
            successes += 1
        else:
            breakdown[category] += 1
    return round2(100.0 * successes / len(cases)), breakdown


def keyhit_fraction(keywords: Sequence[str], reply: str) -> float:
    if not keywords:
        raise ValueError("keyhit needs a non-empty keyword list")
    hits = sum(1 for kw in keywords if phrase_in_text(kw, reply))
    return hits / len(keywords)


def eval_keyhit(
    cases: Sequence[EvalCase], final_replies: Sequence[str]
) -> float | None:
    """Macro-averaged keyword hit rate; None when no case has keywords."""
    _check_counts(cases, final_replies, "replies")
    fractions = [
        keyhit_fraction(case.keywords, reply)
        for case, reply in zip(cases, final_replies)
        if case.keywords
    ]
    if not fractions:
        return None
    return round2(100.0 * sum(fractions) / len(fractions))


def is_rejection(
    trace: DispatchTrace, reply: str, lexicon: Sequence[str] = DEFAULT_REJECTION_LEXICON
) -> bool:
    """Empty function evidence AND a rejection-lexicon match in the reply."""
    if trace.function_result is not None and not trace.function_result.is_empty():
        return False
    return any(phrase_in_text(phrase, reply) for phrase in lexicon)


def eval_rej(
    cases: Sequence[EvalCase],
    traces: Sequence[DispatchTrace],
    final_replies: Sequence[str],
    lexicon: Sequence[str] = DEFAULT_REJECTION_LEXICON,
) -> float | None:
    """Share of negative cases correctly rejected; None without negatives."""
    _check_counts(cases, traces, "traces")
    _check_counts(cases, final_replies, "replies")
    negatives = [
        (trace, reply)
        for case, trace, reply in zip(cases, traces, final_replies)
        if case.is_negative
    ]
    if not negatives:
        return None
    rejected = sum(1 for trace, reply in negatives if is_rejection(trace, reply, lexicon))
    return round2(100.0 * rejected / len(negatives))


# --- BLEU@4 ------------------------------------------------------------------

_PUNCT_TABLE = str.maketrans("", "", string.punctuation)


def bleu_tokenize(text: str) -> list[str]:
    return text.lower().translate(_PUNCT_TABLE).split()


def _ngrams(tokens: list[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def bleu4(candidates: Sequence[str], references: Sequence[str]) -> float:
    """Corpus-level BLEU@4 in [0, 100]; full precision (not rounded)."""
    if not candidates:
        raise ValueError("empty corpus")
    if len(candidates) != len(references):
        raise ValueError(
            f"{len(candidates)} candidates but {len(references)} references"
        )
    cand_tokens = [bleu_tokenize(c) for c in candidates]
    ref_tokens = [bleu_tokenize(r) for r in references]
    cand_len = sum(len(t) for t in cand_tokens)
    ref_len = sum(len(t) for t in ref_tokens)
    if cand_len == 0:
        return 0.0

    log_sum = 0.0
    for n in range(1, 5):
        matched = 0
        total = 0
        for cand, ref in zip(cand_tokens, ref_tokens):
            counts = _ngrams(cand, n)
            ref_counts = _ngrams(ref, n)
            total += sum(counts.values())
            matched += sum(min(c, ref_counts[g]) for g, c in counts.items())
        if matched > 0:
            precision = matched / total
        else:
            precision = 1.0 / (2.0 * max(1, total))
        log_sum += 0.25 * math.log(precision)

    brevity = 1.0 if cand_len > ref_len else math.exp(1.0 - ref_len / cand_len)
    return brevity * math.exp(log_sum) * 100.0


# --- IoU ---------------------------------------------------------------------


def iou_box(a: Sequence[float], b: Sequence[float]) -> float:
    ax1, ay1, ax2, ay2 = a
    bx1, by1, bx2, by2 = b
    if ax1 >= ax2 or ay1 >= ay2 or bx1 >= bx2 or by1 >= by2:
        raise ValueError("boxes must satisfy x1 < x2 and y1 < y2")
    inter_w = max(0.0, min(ax2, bx2) - max(ax1, bx1))
    inter_h = max(0.0, min(ay2, by2) - max(ay1, by1))
    inter = inter_w * inter_h
    union = (ax2 - ax1) * (ay2 - ay1) + (bx2 - bx1) * (by2 - by1) - inter
    return inter / union


def iou_mask(a: SegmentationMask, b: SegmentationMask) -> float:
    """Pixel IoU; two empty masks agree perfectly (IoU = 1)."""
    if (a.width, a.height) != (b.width, b.height):
        raise ValueError(
            f"mask dimensions differ: {(a.width, a.height)} vs {(b.width, b.height)}"
        )
    from surgassist.functions.rle import rle_decode

    bits_a = rle_decode(a).astype(bool)
    bits_b = rle_decode(b).astype(bool)
    union = int((bits_a | bits_b).sum())
    if union == 0:
        return 1.0
    inter = int((bits_a & bits_b).sum())
    return inter / union


def mean_iou(pairs: Sequence[float]) -> float:
    """Mean of per-pair IoU fractions, as a percentage."""
    if not pairs:
        raise ValueError("mean_iou needs at least one pair")
    return round2(100.0 * sum(pairs) / len(pairs))

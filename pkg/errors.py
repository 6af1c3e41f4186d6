import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Dict, Hashable, Iterable, List, Optional, Sequence, Tuple

from align import Alignment, OpKind

"""
Reading-error extraction from prompt alignments and loose-criterion scoring:
an error counts as detected when its kind and its prompt-relative location
both match a ground-truth error, whatever the tokens involved.
"""

logger = logging.getLogger(__name__)

ERROR_KINDS = (OpKind.INS, OpKind.SUB, OpKind.DEL)
ALL = "all"


class NoTrueErrors(Exception):
    def __init__(self, message="There are no true errors, the Error Ratio is undefined"):
        super().__init__(message)
        self.message = message


@dataclass(frozen=True)
class ErrorPair:
    """
    One reading error. For substitutions and deletions `location` is the prompt token
    index; for insertions it is a gap index g meaning "inserted before prompt token g"
    (g == prompt length for trailing insertions).

    Only the lower bound of `location` is checked here, the pair does not know the prompt length.
    `check_location` validates it against a prompt.
    """
    kind: OpKind
    location: int
    ref_token: Optional[str] = None
    hyp_token: Optional[str] = None

    def __post_init__(self):
        if self.kind not in ERROR_KINDS:
            raise ValueError(f"{self.kind} is not an error kind")
        if self.location < 0:
            raise ValueError(f"Negative error location {self.location}")
        if self.kind == OpKind.DEL and self.hyp_token is not None:
            raise ValueError("A deletion has no hypothesis token")
        if self.kind == OpKind.INS and self.ref_token is not None:
            raise ValueError("An insertion has no prompt token")
        if self.kind == OpKind.INS and not self.hyp_token:
            raise ValueError("An insertion needs a hypothesis token")

    @property
    def key(self) -> Tuple[str, int]:
        return self.kind.value, self.location

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "location": self.location,
            "ref_token": self.ref_token,
            "hyp_token": self.hyp_token,
        }

    @classmethod
    def from_dict(cls, data: dict):
        return cls(OpKind(data['kind']), data['location'], data.get('ref_token'), data.get('hyp_token'))

    def check_location(self, prompt_len: int):
        # gaps run up to the prompt length, token positions stop one short
        limit = prompt_len if self.kind == OpKind.INS else prompt_len - 1
        if self.location > limit:
            raise ValueError(f"{self.kind.value} at {self.location} lies outside a prompt of {prompt_len} words")


@dataclass(frozen=True)
class PRF:
    precision: float
    recall: float
    f1: float

    def to_dict(self) -> dict:
        return {"precision": self.precision, "recall": self.recall, "f1": self.f1}


@dataclass(frozen=True)
class MatchResult:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    matched: Tuple[Tuple[str, int], ...] = field(default=(), compare=False)

    def __add__(self, other):
        return MatchResult(self.tp + other.tp, self.fp + other.fp, self.fn + other.fn,
                           self.matched + other.matched)

    @property
    def predicted(self) -> int:
        return self.tp + self.fp

    @property
    def truth(self) -> int:
        return self.tp + self.fn

    def prf(self) -> PRF:
        return prf(self.tp, self.fp, self.fn)

    def to_dict(self) -> dict:
        return {"tp": self.tp, "fp": self.fp, "fn": self.fn, **self.prf().to_dict()}


def extract_error_pairs(a: Alignment) -> List[ErrorPair]:
    """
    Reads the errors off a prompt-vs-transcript alignment (reference side = prompt).

    :param a: alignment with the prompt as reference
    :return: one ErrorPair per non-match operation, in alignment order
    """
    pairs = []
    for position, op in enumerate(a.ops):
        if op.kind == OpKind.MATCH:
            continue
        if op.kind == OpKind.INS:
            # anchor to the next prompt position consumed after this insertion
            gap = next((later.ref_index for later in a.ops[position + 1:] if later.ref_index is not None),
                       a.ref_len)
            pairs.append(ErrorPair(OpKind.INS, gap, None, a.hyp_token(op)))
        else:
            pairs.append(ErrorPair(op.kind, op.ref_index, a.ref_token(op), a.hyp_token(op)))
    return pairs


def error_ratio(predicted: int, truth: int) -> float:
    if truth == 0:
        raise NoTrueErrors()
    return predicted / truth


def match_loose(predicted: Iterable, truth: Iterable, key: Callable = lambda e: e.key) -> MatchResult:
    """
    Multiset matching on (kind, location): every key contributes min(predicted count, true count)
    true positives. Token content is ignored.

    :param predicted: predicted errors
    :param truth: ground-truth errors
    :param key: key function, the loose (kind, location) key by default
    :return: MatchResult
    """
    predicted_keys = Counter(key(e) for e in predicted)
    truth_keys = Counter(key(e) for e in truth)
    overlap = predicted_keys & truth_keys
    tp = sum(overlap.values())
    return MatchResult(
        tp=tp,
        fp=sum(predicted_keys.values()) - tp,
        fn=sum(truth_keys.values()) - tp,
        matched=tuple(sorted(overlap.elements(), key=repr)),
    )


def f1_score(precision: float, recall: float) -> float:
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def prf(tp: int, fp: int, fn: int) -> PRF:
    """
    Precision, recall and F1 from counts. A zero denominator gives 0.0, except that
    nothing predicted and nothing to find (tp = fp = fn = 0) scores a perfect 1.0.
    """
    if tp == 0 and fp == 0 and fn == 0:
        return PRF(1.0, 1.0, 1.0)
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    return PRF(precision, recall, f1_score(precision, recall))


def match_by_category(predicted: Sequence, truth: Sequence, categories: Sequence[Hashable],
                      category: Callable = lambda e: e.kind.value,
                      key: Callable = lambda e: e.key) -> Dict[str, MatchResult]:
    """
    Loose matching restricted to each category in turn, plus the "all" aggregate.
    Category names become the keys of the returned dict.
    """
    results = {}
    for name in categories:
        results[name] = match_loose([e for e in predicted if category(e) == name],
                                    [e for e in truth if category(e) == name], key)
    results[ALL] = match_loose(predicted, truth, key)
    return results


def merge_results(results: Iterable[Dict[str, MatchResult]]) -> Dict[str, MatchResult]:
    """
    Micro-averaging: per-category sums of tp/fp/fn over records.
    """
    merged = {}
    for result in results:
        for name, counts in result.items():
            merged[name] = merged[name] + counts if name in merged else counts
    return merged


def category_shares(truth: Sequence, categories: Sequence[str],
                    category: Callable = lambda e: e.kind.value) -> Dict[str, float]:
    """
    Percentage of true errors falling in each category, rounded to 0.1.
    """
    counts = Counter(category(e) for e in truth)
    total = sum(counts[name] for name in categories)
    if total == 0:
        return {name: 0.0 for name in categories}
    return {name: round(100.0 * counts[name] / total, 1) for name in categories}

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, List, Optional, Tuple

import numpy as np

from normalize import PhonemeSeq, WordSeq

logger = logging.getLogger(__name__)


class AlignmentException(Exception):
    def __init__(self, message):
        super().__init__(message)
        self.message = message


class EmptyReference(AlignmentException):
    def __init__(self, message="Reference length is 0, the edit rate is undefined"):
        super().__init__(message)


class CostConfigError(AlignmentException):
    pass


class OpKind(str, Enum):
    MATCH = "match"
    SUB = "sub"
    DEL = "del"
    INS = "ins"


@dataclass(frozen=True)
class AlignedOp:
    kind: OpKind
    ref_index: Optional[int] = None
    hyp_index: Optional[int] = None

    def __post_init__(self):
        has_ref = self.ref_index is not None
        has_hyp = self.hyp_index is not None
        if self.kind in (OpKind.MATCH, OpKind.SUB):
            ok = has_ref and has_hyp
        elif self.kind == OpKind.DEL:
            ok = has_ref and not has_hyp
        else:
            ok = has_hyp and not has_ref
        if not ok:
            raise ValueError(f"Inconsistent indices for {self.kind.value}: ref={self.ref_index} hyp={self.hyp_index}")


@dataclass(frozen=True)
class CostConfig:
    """
    Edit weights for the aligner. Matches always cost 0.
    The defaults are SCTK's word-alignment weights.
    """
    sub_cost: int = 4
    ins_cost: int = 3
    del_cost: int = 3

    match_cost = 0

    def __post_init__(self):
        for name in ("sub_cost", "ins_cost", "del_cost"):
            value = getattr(self, name)
            if not isinstance(value, int) or isinstance(value, bool) or value < 0:
                raise CostConfigError(f"{name} must be a non-negative integer, got {value!r}")
        if self.sub_cost >= self.ins_cost + self.del_cost:
            raise CostConfigError("sub_cost must be lower than ins_cost + del_cost")

    @classmethod
    def from_dict(cls, data: Optional[dict]):
        data = data or {}
        return cls(
            sub_cost=data.get('sub', cls.sub_cost),
            ins_cost=data.get('ins', cls.ins_cost),
            del_cost=data.get('del', cls.del_cost),
        )


DEFAULT_COSTS = CostConfig()


@dataclass(frozen=True)
class EditCounts:
    matches: int = 0
    subs: int = 0
    dels: int = 0
    inss: int = 0

    @property
    def errors(self) -> int:
        return self.subs + self.dels + self.inss

    @property
    def ref_len(self) -> int:
        return self.matches + self.subs + self.dels

    @property
    def hyp_len(self) -> int:
        return self.matches + self.subs + self.inss

    def __add__(self, other):
        return EditCounts(self.matches + other.matches, self.subs + other.subs,
                          self.dels + other.dels, self.inss + other.inss)

    def to_dict(self) -> dict:
        return {"matches": self.matches, "subs": self.subs, "dels": self.dels, "inss": self.inss}


@dataclass(frozen=True)
class Alignment:
    ops: Tuple[AlignedOp, ...]
    ref: Tuple[str, ...]
    hyp: Tuple[str, ...]

    def __post_init__(self):
        ref_seen = [op.ref_index for op in self.ops if op.ref_index is not None]
        hyp_seen = [op.hyp_index for op in self.ops if op.hyp_index is not None]
        if ref_seen != list(range(len(self.ref))) or hyp_seen != list(range(len(self.hyp))):
            raise ValueError("Alignment must cover every reference and hypothesis index once, in order")

    @property
    def ref_len(self) -> int:
        return len(self.ref)

    @property
    def hyp_len(self) -> int:
        return len(self.hyp)

    def counts(self) -> EditCounts:
        return edit_counts(self)

    def ref_token(self, op: AlignedOp) -> Optional[str]:
        return self.ref[op.ref_index] if op.ref_index is not None else None

    def hyp_token(self, op: AlignedOp) -> Optional[str]:
        return self.hyp[op.hyp_index] if op.hyp_index is not None else None

    def op_for_ref(self, ref_index: int) -> int:
        """
        Position in ops of the operation consuming a given reference token
        """
        for position, op in enumerate(self.ops):
            if op.ref_index == ref_index:
                return position
        raise IndexError(f"Reference index {ref_index} out of range")

    def to_records(self) -> List[dict]:
        return [
            {
                "kind": op.kind.value,
                "ref_index": op.ref_index,
                "hyp_index": op.hyp_index,
                "ref_token": self.ref_token(op),
                "hyp_token": self.hyp_token(op),
            }
            for op in self.ops
        ]


def as_symbols(seq) -> Tuple[str, ...]:
    if isinstance(seq, WordSeq):
        return tuple(seq.norms())
    if isinstance(seq, PhonemeSeq):
        return seq.symbols
    return tuple(seq)


def _trellis(ref, hyp, cost):
    """
    Fills the cumulative cost trellis row by row. Within a row, the insertion
    recurrence cur[j] = min(tmp[j], cur[j-1] + ins) is a running minimum, so it is
    computed with np.minimum.accumulate instead of a Python loop.
    """
    n, m = len(ref), len(hyp)
    trellis = np.zeros((n + 1, m + 1), dtype=np.int64)
    trellis[0, :] = np.arange(m + 1) * cost.ins_cost
    trellis[:, 0] = np.arange(n + 1) * cost.del_cost
    if n == 0 or m == 0:
        return trellis, np.zeros((n, m), dtype=np.int64)

    hyp_arr = np.array(hyp, dtype=object)
    sub = np.array([hyp_arr != r for r in ref], dtype=bool).astype(np.int64) * cost.sub_cost
    ramp = np.arange(m + 1, dtype=np.int64) * cost.ins_cost
    for i in range(1, n + 1):
        prev = trellis[i - 1]
        tmp = np.empty(m + 1, dtype=np.int64)
        tmp[0] = prev[0] + cost.del_cost
        tmp[1:] = np.minimum(prev[:-1] + sub[i - 1], prev[1:] + cost.del_cost)
        trellis[i] = np.minimum.accumulate(tmp - ramp) + ramp
    return trellis, sub


def align(ref, hyp, cost: CostConfig = DEFAULT_COSTS) -> Alignment:
    """
    Minimum-cost monotone alignment of a reference and a hypothesis token sequence.

    Ties are resolved during the backtrace (from the sequence ends toward the starts)
    preferring the diagonal (match/substitution), then deletion, then insertion.

    :param ref: WordSeq, PhonemeSeq or sequence of normalized strings
    :param hyp: same kinds as ref
    :param cost: edit weights
    :return: Alignment
    """
    ref = as_symbols(ref)
    hyp = as_symbols(hyp)
    trellis, sub = _trellis(ref, hyp, cost)

    ops = []
    i, j = len(ref), len(hyp)
    while i > 0 or j > 0:
        here = trellis[i, j]
        if i > 0 and j > 0 and here == trellis[i - 1, j - 1] + sub[i - 1, j - 1]:
            kind = OpKind.MATCH if ref[i - 1] == hyp[j - 1] else OpKind.SUB
            ops.append(AlignedOp(kind, i - 1, j - 1))
            i, j = i - 1, j - 1
        elif i > 0 and here == trellis[i - 1, j] + cost.del_cost:
            ops.append(AlignedOp(OpKind.DEL, ref_index=i - 1))
            i -= 1
        else:
            ops.append(AlignedOp(OpKind.INS, hyp_index=j - 1))
            j -= 1
    ops.reverse()
    return Alignment(tuple(ops), ref, hyp)


def edit_counts(alignment: Alignment) -> EditCounts:
    tally = {kind: 0 for kind in OpKind}
    for op in alignment.ops:
        tally[op.kind] += 1
    return EditCounts(tally[OpKind.MATCH], tally[OpKind.SUB], tally[OpKind.DEL], tally[OpKind.INS])


def alignment_cost(alignment: Alignment, cost: CostConfig = DEFAULT_COSTS) -> int:
    counts = edit_counts(alignment)
    return counts.subs * cost.sub_cost + counts.dels * cost.del_cost + counts.inss * cost.ins_cost


def edit_rate(counts: EditCounts, ref_len: Optional[int] = None) -> float:
    """
    (S + D + I) / N. Used as WER on words and PER on phonemes; may exceed 1.0.

    :param counts: edit counts of one alignment, or pooled counts
    :param ref_len: reference length, defaults to M + S + D
    """
    ref_len = counts.ref_len if ref_len is None else ref_len
    if ref_len == 0:
        raise EmptyReference()
    return counts.errors / ref_len


def corpus_error_rate(counts: Iterable[EditCounts]) -> float:
    pooled = sum(counts, EditCounts())
    return edit_rate(pooled)

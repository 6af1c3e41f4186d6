import logging
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from align import DEFAULT_COSTS, Alignment, CostConfig, OpKind, align
from normalize import Token, WordSeq

"""
Corpus-level analytics over alignments: confusion tables and per-symbol recognition accuracy
(with a top-k comparison between two models or corpora), recognition accuracy per
reading-attempt category and the typology of falsely recognized incorrect attempts.
"""

logger = logging.getLogger(__name__)

DEFAULT_TOP_K = 10


class LabelCountMismatch(Exception):
    def __init__(self, labels, tokens):
        self.message = f"{labels} attempt labels for {tokens} reference tokens"
        super().__init__(self.message)
        self.labels = labels
        self.tokens = tokens


class AttemptLabel(str, Enum):
    CORRECT = "CorrectWord"
    PART = "PartOfWord"
    INCORRECT = "IncorrectWord"
    OTHER = "Other"

    @classmethod
    def from_annotation(cls, value: str):
        return ANNOTATION_LABELS[value]

    @property
    def annotation(self) -> str:
        return {v: k for k, v in ANNOTATION_LABELS.items()}[self]


ANNOTATION_LABELS = {
    "correct": AttemptLabel.CORRECT,
    "part": AttemptLabel.PART,
    "incorrect": AttemptLabel.INCORRECT,
    "other": AttemptLabel.OTHER,
}

# "other" attempts get no accuracy figure
SCORED_ATTEMPTS = (AttemptLabel.CORRECT, AttemptLabel.PART, AttemptLabel.INCORRECT)


class FalseRecognitionType(str, Enum):
    OMITTED = "OmittedAttempt"
    RECTIFIED = "Rectified"
    SINGLE = "SingleWordReplacement"
    MULTI = "MultiWordReplacement"
    MERGED = "MergedWithSubsequent"
    UNCLASSIFIED = "Unclassified"


# types decided by a heuristic rather than by alignment structure alone
HEURISTIC_TYPES = (FalseRecognitionType.MERGED,)


def _sub_label(ref, hyp):
    # "x->G": /x/ was recognized in place of /G/
    return f"{hyp}->{ref}"


def _ranked(counts: Counter, label, k: Optional[int]) -> List[Tuple[str, int]]:
    rows = sorted(((label(key), n) for key, n in counts.items()), key=lambda row: (-row[1], row[0]))
    return rows if k is None else rows[:k]


@dataclass(frozen=True)
class TopConfusions:
    substitutions: Tuple[Tuple[str, int], ...] = ()
    deletions: Tuple[Tuple[str, int], ...] = ()
    insertions: Tuple[Tuple[str, int], ...] = ()

    def sections(self) -> Dict[str, Tuple[Tuple[str, int], ...]]:
        return {"confusion": self.substitutions, "deletion": self.deletions, "insertion": self.insertions}

    def to_dict(self) -> dict:
        return {name: [{"item": item, "count": count} for item, count in rows]
                for name, rows in self.sections().items()}


@dataclass
class ConfusionTable:
    subs: Counter = field(default_factory=Counter)
    dels: Counter = field(default_factory=Counter)
    inss: Counter = field(default_factory=Counter)
    # reference occurrences of each symbol and how many of them were recognized verbatim
    occurrences: Counter = field(default_factory=Counter)
    matched: Counter = field(default_factory=Counter)

    def add_alignment(self, a: Alignment):
        for op in a.ops:
            if op.ref_index is not None:
                self.occurrences[a.ref_token(op)] += 1
            if op.kind == OpKind.MATCH:
                self.matched[a.ref_token(op)] += 1
            elif op.kind == OpKind.SUB:
                self.subs[(a.ref_token(op), a.hyp_token(op))] += 1
            elif op.kind == OpKind.DEL:
                self.dels[a.ref_token(op)] += 1
            elif op.kind == OpKind.INS:
                self.inss[a.hyp_token(op)] += 1
        return self

    def __add__(self, other):
        return ConfusionTable(self.subs + other.subs, self.dels + other.dels, self.inss + other.inss,
                              self.occurrences + other.occurrences, self.matched + other.matched)

    def totals(self) -> Dict[str, int]:
        return {"subs": sum(self.subs.values()), "dels": sum(self.dels.values()),
                "inss": sum(self.inss.values())}

    def accuracy(self) -> Dict[str, float]:
        """
        Recognition accuracy per reference symbol: verbatim matches over reference occurrences.
        Symbols that never occur in a reference are absent.
        """
        return {symbol: self.matched[symbol] / self.occurrences[symbol] for symbol in sorted(self.occurrences)}

    def accuracy_rows(self) -> List[dict]:
        accuracy = self.accuracy()
        return [{"symbol": symbol, "matched": self.matched[symbol], "total": self.occurrences[symbol],
                 "accuracy": accuracy[symbol]} for symbol in accuracy]

    def top(self, k: Optional[int] = DEFAULT_TOP_K) -> TopConfusions:
        return TopConfusions(
            substitutions=tuple(_ranked(self.subs, lambda key: _sub_label(*key), k)),
            deletions=tuple(_ranked(self.dels, str, k)),
            insertions=tuple(_ranked(self.inss, str, k)),
        )


def confusion_tables(alignments: Iterable[Alignment], k: Optional[int] = DEFAULT_TOP_K) -> TopConfusions:
    """
    Aggregates substitution, deletion and insertion tallies over alignments of one token
    domain (phonemes or words) and keeps the k most frequent of each.
    Ties are broken by the lexicographic order of the rendered key.

    :param alignments: reference-vs-hypothesis alignments
    :param k: rows kept per section, None for all
    :return: TopConfusions
    """
    table = ConfusionTable()
    for a in alignments:
        table.add_alignment(a)
    return table.top(k)


def compare_top(first: TopConfusions, second: TopConfusions) -> Dict[str, Tuple[str, ...]]:
    """
    Entries of each section of `first` that are missing from the same section of `second`,
    e.g. the top child-speech confusions no adult-speech confusion shares.

    :param first: top-k view to mark up
    :param second: top-k view it is compared against
    :return: section name -> items of `first` absent from `second`, in `first`'s rank order
    """
    others = second.sections()
    return {name: tuple(item for item, _ in rows if item not in {other for other, _ in others[name]})
            for name, rows in first.sections().items()}


def accuracy_changes(first: ConfusionTable, second: ConfusionTable) -> List[Tuple[str, float]]:
    """
    Drop in recognition accuracy from `first` to `second` for the symbols both tables have seen,
    largest drop first (ties by symbol). Negative values are gains.
    """
    before, after = first.accuracy(), second.accuracy()
    changes = [(symbol, before[symbol] - after[symbol]) for symbol in before if symbol in after]
    return sorted(changes, key=lambda row: (-row[1], row[0]))


@dataclass(frozen=True)
class AttemptTally:
    matched: Tuple[Tuple[AttemptLabel, int], ...] = ()
    total: Tuple[Tuple[AttemptLabel, int], ...] = ()

    @classmethod
    def from_counters(cls, matched: Counter, total: Counter):
        return cls(tuple(sorted(matched.items())), tuple(sorted(total.items())))

    def __add__(self, other):
        return AttemptTally.from_counters(Counter(dict(self.matched)) + Counter(dict(other.matched)),
                                          Counter(dict(self.total)) + Counter(dict(other.total)))

    def accuracy(self) -> Dict[AttemptLabel, Optional[float]]:
        matched, total = dict(self.matched), dict(self.total)
        return {label: (matched.get(label, 0) / total[label] if total.get(label) else None)
                for label in SCORED_ATTEMPTS}

    def to_dict(self) -> dict:
        matched, total = dict(self.matched), dict(self.total)
        accuracy = self.accuracy()
        return {label.value: {"matched": matched.get(label, 0), "total": total.get(label, 0),
                              "accuracy": accuracy[label]}
                for label in SCORED_ATTEMPTS}


def attempt_tally(labels: Sequence[AttemptLabel], ref_hyp: Alignment) -> AttemptTally:
    if len(labels) != ref_hyp.ref_len:
        raise LabelCountMismatch(len(labels), ref_hyp.ref_len)
    matched, total = Counter(), Counter()
    for op in ref_hyp.ops:
        if op.ref_index is None:
            continue
        label = labels[op.ref_index]
        total[label] += 1
        if op.kind == OpKind.MATCH:
            matched[label] += 1
    return AttemptTally.from_counters(matched, total)


def attempt_accuracy(labels: Sequence[AttemptLabel], ref_hyp: Alignment) -> Dict[AttemptLabel, Optional[float]]:
    """
    Share of reference tokens of each attempt category that the hypothesis reproduces verbatim.

    :param labels: one AttemptLabel per reference token
    :param ref_hyp: alignment of the reference transcript (not the prompt) to the hypothesis
    :return: accuracy per scored label, None where a label has no tokens
    """
    return attempt_tally(labels, ref_hyp).accuracy()


def prompt_links(prompt: WordSeq, reference: WordSeq, cost: CostConfig = DEFAULT_COSTS) -> List[Optional[int]]:
    """
    Prompt index each reference token stands for, from the prompt-reference alignment.
    Reference tokens aligned as insertions (fragments, extra words) have no link.
    """
    links: List[Optional[int]] = [None] * len(reference)
    for op in align(prompt, reference, cost).ops:
        if op.kind in (OpKind.MATCH, OpKind.SUB):
            links[op.hyp_index] = op.ref_index
    return links


def _hyp_span(ref_hyp: Alignment, position: int) -> Tuple[int, bool]:
    # the op itself plus neighbouring insertions; anchored when a Match or a sequence end bounds both sides
    ops = ref_hyp.ops
    span, anchored = 1, True
    for step in (-1, 1):
        cursor = position + step
        while 0 <= cursor < len(ops) and ops[cursor].kind == OpKind.INS:
            span += 1
            cursor += step
        if 0 <= cursor < len(ops) and ops[cursor].kind != OpKind.MATCH:
            anchored = False
    return span, anchored


def _fuses(token: str, first: str, second: str) -> bool:
    return len(token) >= len(first) + len(second) and token.startswith(first) and token.endswith(second)


def classify_false_recognition(ref_token: Token, ref_hyp: Alignment,
                               prompt_link: Optional[str] = None) -> FalseRecognitionType:
    """
    Types how the ASR handled an incorrectly read attempt it did not reproduce verbatim.

    :param ref_token: the IncorrectWord token of the reference transcript
    :param ref_hyp: reference-vs-hypothesis alignment
    :param prompt_link: normalized prompt word the attempt targets
    :return: FalseRecognitionType
    """
    position = ref_hyp.op_for_ref(ref_token.index)
    op = ref_hyp.ops[position]
    if op.kind == OpKind.MATCH:
        raise ValueError(f"Reference token {ref_token.index} is recognized verbatim")

    following = ref_token.index + 1
    next_op = ref_hyp.ops[ref_hyp.op_for_ref(following)] if following < ref_hyp.ref_len else None
    if op.kind == OpKind.DEL:
        # attempt and next word written as one token that the next word's substitution carries
        if next_op is not None and next_op.kind == OpKind.SUB \
                and _fuses(ref_hyp.hyp_token(next_op), ref_hyp.ref[ref_token.index], ref_hyp.ref[following]):
            return FalseRecognitionType.MERGED
        return FalseRecognitionType.OMITTED

    hyp = ref_hyp.hyp_token(op)
    if prompt_link is not None and hyp == prompt_link:
        return FalseRecognitionType.RECTIFIED
    if next_op is not None and next_op.kind == OpKind.DEL and len(hyp) > len(ref_hyp.ref[following]) \
            and hyp.endswith(ref_hyp.ref[following]):
        return FalseRecognitionType.MERGED

    span, anchored = _hyp_span(ref_hyp, position)
    if span == 1:
        return FalseRecognitionType.SINGLE
    if anchored:
        return FalseRecognitionType.MULTI
    return FalseRecognitionType.UNCLASSIFIED


def false_recognition_tally(labels: Sequence[AttemptLabel], ref_hyp: Alignment, links: Sequence[Optional[int]],
                            prompt: WordSeq) -> Counter:
    """
    Counts the false-recognition types over every IncorrectWord token the hypothesis does not match.
    """
    if len(labels) != ref_hyp.ref_len:
        raise LabelCountMismatch(len(labels), ref_hyp.ref_len)
    tally = Counter()
    for op in ref_hyp.ops:
        if op.ref_index is None or op.kind == OpKind.MATCH or labels[op.ref_index] != AttemptLabel.INCORRECT:
            continue
        link = links[op.ref_index] if op.ref_index < len(links) else None
        target = prompt[link].norm if link is not None else None
        token = Token(ref_hyp.ref[op.ref_index], ref_hyp.ref[op.ref_index], op.ref_index)
        tally[classify_false_recognition(token, ref_hyp, target)] += 1
    return tally

import logging
import random
from collections import Counter
from dataclasses import dataclass, fields
from typing import Dict, List, Optional, Sequence, Tuple

from align import DEFAULT_COSTS, CostConfig, OpKind, align
from errors import ErrorPair, extract_error_pairs
from miscue import DEFAULT_CLASSIFIER, ClassifiedError, ClassifierConfig, EmbeddingProvider, MiscueLabel, \
    string_cosine
from normalize import DEFAULT_CONFIG, NormalizationConfig, WordSeq
from record import Transcript

"""
Synthetic miscue injection: rewrites a prompt into a transcript carrying a requested number
of miscues of each category, together with the ground truth the detection pipeline must recover.
"""

logger = logging.getLogger(__name__)

RESTART = "restart"
# substitutions draw first, they have the fewest candidate sites
INJECTION_ORDER = (MiscueLabel.OS.value, MiscueLabel.SS.value, MiscueLabel.O.value, RESTART,
                   MiscueLabel.D.value, MiscueLabel.I_M.value)
MIN_SPACING = 2
MAX_DRAWS = 50


class InjectionException(Exception):
    def __init__(self, message):
        super().__init__(message)
        self.message = message


class InsufficientPrompt(InjectionException):
    pass


class NoCandidateWord(InjectionException):
    def __init__(self, category, detail=""):
        super().__init__(f"No candidate word for a {category} injection" + (f" ({detail})" if detail else ""))
        self.category = category


@dataclass(frozen=True)
class InjectionSpec:
    SS: int = 0
    OS: int = 0
    O: int = 0
    I_m: int = 0
    D: int = 0
    restart: int = 0
    seed: int = 0

    def __post_init__(self):
        for name in INJECTION_ORDER:
            if getattr(self, name) < 0:
                raise ValueError(f"Injection count for {name} must be non-negative")

    @property
    def total(self) -> int:
        return sum(getattr(self, name) for name in INJECTION_ORDER)

    def counts(self) -> Dict[str, int]:
        return {name: getattr(self, name) for name in INJECTION_ORDER}

    @classmethod
    def from_dict(cls, data: Optional[dict], seed: Optional[int] = None):
        data = dict(data or {})
        if seed is not None:
            data['seed'] = seed
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"Unknown injection keys: {', '.join(sorted(unknown))}")
        return cls(**data)


class InjectionResources:
    """
    Word sources for injected miscues: embedding neighbours for SS, a word list for the other categories.
    """

    def __init__(self, emb: EmbeddingProvider, lexicon: Optional[Sequence[str]] = None,
                 cfg: ClassifierConfig = DEFAULT_CLASSIFIER):
        self.emb: EmbeddingProvider = emb
        self.lexicon: Tuple[str, ...] = tuple(sorted(set(lexicon if lexicon is not None else emb.words)))
        self.cfg: ClassifierConfig = cfg


class _Candidates:
    def __init__(self, prompt: WordSeq, resources: InjectionResources):
        self.words = prompt.norms()
        self.vocabulary = set(self.words)
        self.resources = resources
        self._cache = {}

    def at(self, category, position) -> List[Optional[str]]:
        key = (category, position)
        if key not in self._cache:
            self._cache[key] = sorted(self._find(category, position), key=lambda w: (w is None, w or ""))
        return self._cache[key]

    def anywhere(self, category) -> bool:
        return any(self.at(category, position) for position in range(len(self.words)))

    def _fresh(self, word):
        return word not in self.vocabulary

    def _find(self, category, position):
        cfg = self.resources.cfg
        emb = self.resources.emb
        target = self.words[position]

        if category == MiscueLabel.D.value:
            neighbours = self.words[max(0, position - 1):position] + self.words[position + 1:position + 2]
            return [None] if target not in neighbours else []

        if category == RESTART:
            prefix = target[:max(1, len(target) // 2)]
            return [prefix] if self._fresh(prefix) else []

        if category == MiscueLabel.I_M.value:
            return [w for w in self.resources.lexicon
                    if self._fresh(w) and not any(w in prompt_word for prompt_word in self.words)]

        if category == MiscueLabel.SS.value:
            return [w for w, score in emb.neighbors(target)
                    if score >= cfg.sem_threshold and self._fresh(w)
                    and string_cosine(target, w, cfg.ngram_order) < cfg.ortho_threshold]

        found = []
        for w in self.resources.lexicon:
            if not self._fresh(w):
                continue
            if cfg.lexicon_gate and w not in emb:
                continue
            ortho = string_cosine(target, w, cfg.ngram_order)
            if category == MiscueLabel.OS.value and ortho >= cfg.ortho_threshold:
                found.append(w)
            elif category == MiscueLabel.O.value and ortho < cfg.ortho_threshold:
                semantic = emb.similarity(target, w)
                if semantic is None or semantic < cfg.sem_threshold:
                    found.append(w)
        return found


def _draw_sites(rng, prompt_len, needed):
    positions = list(range(prompt_len))
    rng.shuffle(positions)
    chosen = []
    for position in positions:
        if all(abs(position - other) >= MIN_SPACING for other in chosen):
            chosen.append(position)
        if len(chosen) == needed:
            break
    return chosen


def _assign(rng, spec, sites, candidates):
    plan = {}
    free = list(sites)
    for category in INJECTION_ORDER:
        for _ in range(getattr(spec, category)):
            site = next((s for s in free if candidates.at(category, s)), None)
            if site is None:
                if not candidates.anywhere(category):
                    raise NoCandidateWord(category)
                return None
            free.remove(site)
            plan[site] = (category, rng.choice(candidates.at(category, site)))
    return plan


def _render(words, plan):
    out = []
    for position, word in enumerate(words):
        category, replacement = plan.get(position, (None, None))
        if category in (RESTART, MiscueLabel.I_M.value):
            out.extend([replacement, word])
        elif category == MiscueLabel.D.value:
            continue
        elif category is not None:
            out.append(replacement)
        else:
            out.append(word)
    return out


def _truth(words, plan, resources) -> List[ClassifiedError]:
    # ground truth comes from the plan itself, the classifier is never consulted
    cfg = resources.cfg
    truth = []
    for site in sorted(plan):
        category, replacement = plan[site]
        target = words[site]
        if category == MiscueLabel.D.value:
            truth.append(ClassifiedError(ErrorPair(OpKind.DEL, site, target), MiscueLabel.D))
        elif category == RESTART:
            truth.append(ClassifiedError(ErrorPair(OpKind.INS, site, None, replacement), MiscueLabel.RESTART))
        elif category == MiscueLabel.I_M.value:
            truth.append(ClassifiedError(ErrorPair(OpKind.INS, site, None, replacement), MiscueLabel.I_M))
        else:
            label = MiscueLabel(category)
            ortho = string_cosine(target, replacement, cfg.ngram_order)
            semantic = None if label == MiscueLabel.OS else resources.emb.similarity(target, replacement)
            truth.append(ClassifiedError(ErrorPair(OpKind.SUB, site, target, replacement), label, ortho, semantic))
    return truth


def inject_miscues(prompt: WordSeq, spec: InjectionSpec, resources: InjectionResources,
                   cost: CostConfig = DEFAULT_COSTS, cfg: NormalizationConfig = DEFAULT_CONFIG
                   ) -> Tuple[Transcript, List[ClassifiedError]]:
    """
    Injects the requested miscues into a prompt. Sites are at least two prompt positions apart;
    insertions go in front of the prompt word at their site. The ground truth is built from the
    placement, not from the classifier. A draw is kept only when aligning the result back against
    the prompt extracts exactly the injected error pairs; other draws are re-drawn.

    :param prompt: normalized prompt
    :param spec: per-category counts and seed
    :param resources: embeddings and word list to draw replacements from
    :param cost: aligner weights used for the check
    :param cfg: normalization applied to the rendered transcript
    :return: the transcript and its ground-truth classified errors (restarts included)
    """
    rng = random.Random(spec.seed)
    words = prompt.norms()
    if spec.total == 0:
        return Transcript.from_text(prompt.text(), cfg), []
    if spec.total > (len(words) + MIN_SPACING - 1) // MIN_SPACING:
        raise InsufficientPrompt(f"A prompt of {len(words)} words cannot host {spec.total} separate injections")

    candidates = _Candidates(prompt, resources)
    for draw in range(1, MAX_DRAWS + 1):
        sites = _draw_sites(rng, len(words), spec.total)
        if len(sites) < spec.total:
            continue
        plan = _assign(rng, spec, sites, candidates)
        if plan is None:
            continue

        spoken = _render(words, plan)
        transcript = Transcript.from_text(" ".join(spoken), cfg)
        truth = _truth(words, plan, resources)
        extracted = extract_error_pairs(align(prompt, transcript.words, cost))
        if Counter(extracted) == Counter(c.error for c in truth):
            logger.debug(f"Injected {spec.total} miscues after {draw} draws")
            return transcript, truth

    raise InsufficientPrompt(f"No placement of {spec.total} injections could be read back after {MAX_DRAWS} draws")

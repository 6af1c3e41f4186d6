import logging
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from typing import Container, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from align import OpKind
from errors import PRF, ErrorPair, MatchResult, match_by_category
from normalize import WordSeq

logger = logging.getLogger(__name__)


class MiscueException(Exception):
    def __init__(self, message):
        super().__init__(message)
        self.message = message


class EmptyWord(MiscueException):
    def __init__(self, a, b):
        super().__init__(f"Cannot compare empty words ({a!r}, {b!r})")
        self.words = (a, b)


class MissingEmbeddings(MiscueException):
    def __init__(self, error):
        super().__init__(f"Substitution '{error.ref_token}' -> '{error.hyp_token}' at {error.location} "
                         f"needs semantic scoring but no embeddings are loaded")
        self.error = error


class MiscueLabel(str, Enum):
    SS = "SS"
    OS = "OS"
    O = "O"
    I_M = "I_m"
    D = "D"
    RESTART = "RestartNotMiscue"


# Table order of the miscue categories; restarts are never scored
MISCUE_LABELS = (MiscueLabel.I_M, MiscueLabel.D, MiscueLabel.OS, MiscueLabel.SS, MiscueLabel.O)


@dataclass(frozen=True)
class ClassifierConfig:
    ortho_threshold: float = 0.8
    sem_threshold: float = 0.7
    restart_window: int = 5
    ngram_order: int = 1
    lexicon_gate: bool = False

    def __post_init__(self):
        for name in ("ortho_threshold", "sem_threshold"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.restart_window < 1:
            raise ValueError("restart_window must be at least 1")
        if self.ngram_order < 1:
            raise ValueError("ngram_order must be at least 1")

    @classmethod
    def from_dict(cls, data: Optional[dict]):
        data = data or {}
        return cls(**{k: data[k] for k in ("ortho_threshold", "sem_threshold", "restart_window",
                                           "ngram_order", "lexicon_gate") if k in data})


DEFAULT_CLASSIFIER = ClassifierConfig()


def _cosine(vec1, vec2) -> float:
    norms = np.linalg.norm(vec1) * np.linalg.norm(vec2)
    if norms == 0:
        return 0.0
    return float(np.dot(vec1, vec2) / norms)


class EmbeddingProvider:
    """
    Read-only word -> vector lookup. Out-of-vocabulary words are absent (None),
    never mapped to a default vector.
    """

    def __init__(self, words: Sequence[str], matrix):
        matrix = np.array(matrix, dtype=np.float64)
        if matrix.ndim != 2 or matrix.shape[0] != len(words):
            raise ValueError("Embedding matrix must have one row per word")
        self.words: Tuple[str, ...] = tuple(words)
        self.dim: int = matrix.shape[1]
        self.matrix = matrix
        self.matrix.setflags(write=False)
        self._index = {word: row for row, word in enumerate(self.words)}

    @classmethod
    def from_dict(cls, vectors: Mapping[str, Sequence[float]]):
        words = list(vectors)
        return cls(words, np.array([vectors[w] for w in words], dtype=np.float64).reshape(len(words), -1))

    def __contains__(self, word) -> bool:
        return word in self._index

    def __len__(self) -> int:
        return len(self.words)

    def lookup(self, word: str) -> Optional[np.ndarray]:
        row = self._index.get(word)
        return None if row is None else self.matrix[row]

    def similarity(self, a: str, b: str) -> Optional[float]:
        va, vb = self.lookup(a), self.lookup(b)
        if va is None or vb is None:
            return None
        return _cosine(va, vb)

    def neighbors(self, word: str, k: Optional[int] = None) -> List[Tuple[str, float]]:
        """
        Vocabulary words ranked by cosine similarity to `word` (ties by word), excluding the word itself.
        """
        vec = self.lookup(word)
        if vec is None:
            return []
        norms = np.linalg.norm(self.matrix, axis=1) * np.linalg.norm(vec)
        with np.errstate(divide="ignore", invalid="ignore"):
            scores = np.where(norms > 0, self.matrix @ vec / norms, 0.0)
        ranked = sorted(((float(s), w) for w, s in zip(self.words, scores) if w != word),
                        key=lambda item: (-item[0], item[1]))
        ranked = [(w, s) for s, w in ranked]
        return ranked if k is None else ranked[:k]


def char_ngrams(word: str, n: int = 1) -> Counter:
    # words shorter than n count as a single gram
    if len(word) < n:
        return Counter([word])
    return Counter(word[i:i + n] for i in range(len(word) - n + 1))


def string_cosine(a: str, b: str, n: int = 1) -> float:
    """
    Orthographic similarity: cosine of the character n-gram frequency vectors of two words.

    :param a: normalized word
    :param b: normalized word
    :param n: n-gram order
    :return: similarity in [0, 1]
    """
    if not a or not b:
        raise EmptyWord(a, b)
    grams_a, grams_b = char_ngrams(a, n), char_ngrams(b, n)
    vocab = sorted(set(grams_a) | set(grams_b))
    vec_a = np.array([grams_a[g] for g in vocab], dtype=np.float64)
    vec_b = np.array([grams_b[g] for g in vocab], dtype=np.float64)
    return min(1.0, _cosine(vec_a, vec_b))


def semantic_similarity(a: str, b: str, emb: Optional[EmbeddingProvider]) -> Optional[float]:
    if emb is None:
        return None
    return emb.similarity(a, b)


def detect_restart(inserted: str, prompt, gap: int, window: int = 5) -> bool:
    """
    True when the inserted word is a substring of one of the `window` prompt words starting at `gap`
    (a restart, or a repetition/lookahead of an upcoming word).
    """
    words = prompt.norms() if isinstance(prompt, WordSeq) else list(prompt)
    return any(inserted in word for word in words[gap:gap + window])


@dataclass(frozen=True)
class ClassifiedError:
    error: ErrorPair
    label: MiscueLabel
    ortho: Optional[float] = None
    semantic: Optional[float] = None

    @property
    def location(self) -> int:
        return self.error.location

    @property
    def key(self) -> Tuple[str, int]:
        return self.label.value, self.error.location

    @property
    def is_miscue(self) -> bool:
        return self.label != MiscueLabel.RESTART

    def to_dict(self) -> dict:
        return {
            "category": self.label.value,
            "location": self.error.location,
            "kind": self.error.kind.value,
            "prompt_token": self.error.ref_token,
            "transcript_token": self.error.hyp_token,
            "ortho_similarity": self.ortho,
            "semantic_similarity": self.semantic,
        }

    @classmethod
    def from_dict(cls, data: dict):
        error = ErrorPair(OpKind(data['kind']), data['location'], data.get('prompt_token'),
                          data.get('transcript_token'))
        return cls(error, MiscueLabel(data['category']), data.get('ortho_similarity'),
                   data.get('semantic_similarity'))


def classify_error(e: ErrorPair, prompt: WordSeq, cfg: ClassifierConfig = DEFAULT_CLASSIFIER,
                   emb: Optional[EmbeddingProvider] = None, lexicon: Optional[Container[str]] = None,
                   strict: bool = False) -> ClassifiedError:
    """
    Labels one extracted error with a miscue category and keeps the scores that decided it.

    Deletions are D. Insertions are restarts when they occur inside one of the next
    `restart_window` prompt words, I_m otherwise. Substitutions are OS when orthographically
    similar, else SS when semantically similar, else O.

    :param e: error extracted against `prompt`
    :param prompt: normalized prompt
    :param cfg: thresholds and window
    :param emb: embeddings for semantic scoring, may be None
    :param lexicon: word list for the lexicon gate, defaults to the embedding vocabulary
    :param strict: raise MissingEmbeddings instead of falling back to O when emb is None
    :return: ClassifiedError
    """
    e.check_location(len(prompt))
    if e.kind == OpKind.DEL:
        return ClassifiedError(e, MiscueLabel.D)

    if e.kind == OpKind.INS:
        if detect_restart(e.hyp_token, prompt, e.location, cfg.restart_window):
            return ClassifiedError(e, MiscueLabel.RESTART)
        return ClassifiedError(e, MiscueLabel.I_M)

    target = e.ref_token if e.ref_token is not None else prompt[e.location].norm
    spoken = e.hyp_token or ""
    ortho = string_cosine(target, spoken, cfg.ngram_order)

    if cfg.lexicon_gate:
        known = lexicon if lexicon is not None else emb
        if known is None or spoken not in known:
            return ClassifiedError(e, MiscueLabel.O, ortho)

    if ortho >= cfg.ortho_threshold:
        return ClassifiedError(e, MiscueLabel.OS, ortho)

    if emb is None:
        if strict:
            raise MissingEmbeddings(e)
        logger.debug(f"No embeddings, '{target}' -> '{spoken}' cannot be SS")
    semantic = semantic_similarity(target, spoken, emb)
    if semantic is not None and semantic >= cfg.sem_threshold:
        return ClassifiedError(e, MiscueLabel.SS, ortho, semantic)
    return ClassifiedError(e, MiscueLabel.O, ortho, semantic)


def classify_miscue(e: ErrorPair, prompt: WordSeq, cfg: ClassifierConfig = DEFAULT_CLASSIFIER,
                    emb: Optional[EmbeddingProvider] = None) -> MiscueLabel:
    return classify_error(e, prompt, cfg, emb).label


def classify_errors(errors: Iterable[ErrorPair], prompt: WordSeq, cfg: ClassifierConfig = DEFAULT_CLASSIFIER,
                    emb: Optional[EmbeddingProvider] = None, strict: bool = False) -> List[ClassifiedError]:
    return [classify_error(e, prompt, cfg, emb, strict=strict) for e in errors]


def miscue_match_results(predicted: Iterable[ClassifiedError],
                         truth: Iterable[ClassifiedError]) -> Dict[str, MatchResult]:
    """
    Per-category loose matching on (miscue label, location) plus the "all" aggregate.
    Restarts are dropped from both sides.
    """
    predicted = [c for c in predicted if c.is_miscue]
    truth = [c for c in truth if c.is_miscue]
    return match_by_category(predicted, truth, [label.value for label in MISCUE_LABELS],
                             category=lambda c: c.label.value, key=lambda c: c.key)


def evaluate_miscues(predicted: Iterable[ClassifiedError], truth: Iterable[ClassifiedError]) -> Dict[str, PRF]:
    return {name: result.prf() for name, result in miscue_match_results(predicted, truth).items()}

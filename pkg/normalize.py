import logging
import re
import string
import unicodedata
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, FrozenSet, Iterator, List, Optional, Tuple, Union

from num2words import num2words

"""
Text and phoneme normalization applied to prompts, reference transcripts and
ASR hypotheses before any alignment is made.
"""

logger = logging.getLogger(__name__)

IPA = "IPA"
CGN = "CGN"
ALPHABETS = (IPA, CGN)

# Phonemic symbol set of the Spoken Dutch Corpus annotations
CGN_SYMBOLS: FrozenSet[str] = frozenset([
    # plosives, fricatives, sonorants
    "p", "b", "t", "d", "k", "g",
    "f", "v", "s", "z", "S", "Z", "x", "G", "h",
    "m", "n", "N", "J", "l", "r", "w", "j",
    # lax and tense vowels, schwa
    "I", "E", "A", "O", "Y",
    "i", "y", "e", "2", "a", "o", "u", "@",
    # diphthongs
    "E+", "Y+", "A+",
    # loan vowels and nasals
    "E:", "Y:", "O:",
    "E~", "A~", "O~", "Y~",
])

DEFAULT_MAPPING_PATH = Path(__file__).resolve().parent / "files" / "ipa_cgn.tsv"

DEFAULT_PUNCTUATION: FrozenSet[str] = frozenset(string.punctuation) | frozenset("«»‘’‚“”„–—…¿¡·")
DEFAULT_CUE_MARKERS: FrozenSet[str] = frozenset(["ggg", "xxx", "mmm"])
DEFAULT_CUE_PREFIXES: Tuple[str, ...] = ("*",)

HYPHENS = "-‐‑–—"
APOSTROPHE = "'"
MAX_NUMERAL = 9999

_DIGITS = re.compile(r"[0-9]+")
_ORDINAL = re.compile(r"[0-9]+(e|ste|de)")


class NormalizationException(Exception):
    def __init__(self, message):
        super().__init__(message)
        self.message = message


class UnknownSymbol(NormalizationException):
    def __init__(self, symbol, position):
        super().__init__(f"No mapping entry for phoneme '{symbol}' at position {position}")
        self.symbol = symbol
        self.position = position


class MappingFormatError(NormalizationException):
    def __init__(self, message, line=None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class AlphabetMismatch(NormalizationException):
    pass


@dataclass(frozen=True)
class Token:
    surface: str
    norm: str
    index: int

    def __post_init__(self):
        if not self.norm or self.norm != self.norm.strip():
            raise ValueError(f"Invalid normalized token {self.norm!r}")


@dataclass(frozen=True)
class WordSeq:
    tokens: Tuple[Token, ...] = ()

    def __post_init__(self):
        for position, token in enumerate(self.tokens):
            if token.index != position:
                raise ValueError(f"Token indices must be consecutive, got {token.index} at {position}")

    def __len__(self):
        return len(self.tokens)

    def __iter__(self) -> Iterator[Token]:
        return iter(self.tokens)

    def __getitem__(self, index) -> Token:
        return self.tokens[index]

    def norms(self) -> List[str]:
        return [token.norm for token in self.tokens]

    def text(self) -> str:
        return " ".join(self.norms())

    @classmethod
    def from_norms(cls, words):
        """
        Builds a sequence from words that are already normalized (surface = norm).
        """
        return cls(tuple(Token(word, word, index) for index, word in enumerate(words)))


@dataclass(frozen=True)
class PhonemeSeq:
    symbols: Tuple[str, ...]
    alphabet: str

    def __post_init__(self):
        if self.alphabet not in ALPHABETS:
            raise ValueError(f"Unknown phoneme alphabet {self.alphabet}")
        # The IPA side is open; coverage is enforced when mapping to CGN
        if self.alphabet == CGN:
            for position, symbol in enumerate(self.symbols):
                if symbol not in CGN_SYMBOLS:
                    raise UnknownSymbol(symbol, position)

    def __len__(self):
        return len(self.symbols)

    def text(self) -> str:
        return " ".join(self.symbols)


@dataclass(frozen=True)
class PhonemeMapping:
    entries: Dict[str, Tuple[str, ...]]
    source: str = IPA
    target: str = CGN

    def __post_init__(self):
        for symbol, targets in self.entries.items():
            if not targets:
                raise MappingFormatError(f"Empty target list for '{symbol}'")


@dataclass(frozen=True)
class NormalizationConfig:
    punctuation: FrozenSet[str] = DEFAULT_PUNCTUATION
    cue_markers: FrozenSet[str] = DEFAULT_CUE_MARKERS
    cue_prefixes: Tuple[str, ...] = DEFAULT_CUE_PREFIXES
    convert_numerals: bool = True
    keep_apostrophes: bool = True

    def __post_init__(self):
        if "" in self.punctuation or "" in self.cue_markers or "" in self.cue_prefixes:
            raise ValueError("Punctuation and cue-marker sets may not contain the empty string")

    @classmethod
    def from_dict(cls, data: Optional[dict]):
        data = data or {}
        default = cls()
        return cls(
            punctuation=frozenset(data['punctuation']) if 'punctuation' in data else default.punctuation,
            cue_markers=frozenset(data['cue_markers']) if 'cue_markers' in data else default.cue_markers,
            cue_prefixes=tuple(data['cue_prefixes']) if 'cue_prefixes' in data else default.cue_prefixes,
            convert_numerals=data.get('convert_numerals', default.convert_numerals),
            keep_apostrophes=data.get('keep_apostrophes', default.keep_apostrophes),
        )


DEFAULT_CONFIG = NormalizationConfig()


def dutch_number_words(number: Union[int, str]) -> List[str]:
    """
    Converts a digit string (or integer) to Dutch number words in compound style ("21" -> "eenentwintig").

    :param number: non-negative integer or string of ASCII digits
    :return: list of words; the digits unchanged when outside 0-9999
    """
    digits = str(number)
    value = int(digits)
    if value > MAX_NUMERAL:
        logger.warning(f"Numeral {digits} is outside 0-{MAX_NUMERAL}, passing it through unchanged.")
        return [digits]
    words = num2words(value, lang="nl")
    return [w for w in re.split(rf"[\s{re.escape(HYPHENS)}]+", words.lower()) if w]


def _normalize_word(surface, cfg):
    word = surface.lower()
    if cfg.keep_apostrophes:
        word = "".join(c for c in word if c == APOSTROPHE or c not in cfg.punctuation)
        # only word-initial and word-internal apostrophes survive ('s, z'n)
        word = word.rstrip(APOSTROPHE)
    else:
        word = "".join(c for c in word if c not in cfg.punctuation)
    word = word.strip()
    if not word:
        return []

    if cfg.convert_numerals:
        if _DIGITS.fullmatch(word):
            return dutch_number_words(word)
        if _ORDINAL.fullmatch(word):
            logger.warning(f"Ordinal {word} is not converted, passing it through unchanged.")
    return [word]


def normalize_tokens(raw: str, cfg: NormalizationConfig = DEFAULT_CONFIG) -> WordSeq:
    """
    Lowercases, strips punctuation and splits raw text into normalized tokens.
    Hyphens split compounds, standalone digit strings become Dutch number words.

    :param raw: text as read from a prompt or transcript
    :param cfg: normalization settings
    :return: WordSeq with consecutive indices
    """
    text = unicodedata.normalize("NFC", raw or "")
    text = text.replace("’", APOSTROPHE).replace("‘", APOSTROPHE)
    for hyphen in HYPHENS:
        text = text.replace(hyphen, " ")

    tokens = []
    for surface in text.split():
        for norm in _normalize_word(surface, cfg):
            tokens.append(Token(surface, norm, len(tokens)))
    return WordSeq(tuple(tokens))


def is_cue(token: Token, cfg: NormalizationConfig = DEFAULT_CONFIG) -> bool:
    if token.norm in cfg.cue_markers or token.surface in cfg.cue_markers:
        return True
    return any(token.surface.startswith(prefix) or token.norm.startswith(prefix) for prefix in cfg.cue_prefixes)


def strip_cues(raw_tokens: WordSeq, cfg: NormalizationConfig = DEFAULT_CONFIG) -> WordSeq:
    kept = [token for token in raw_tokens if not is_cue(token, cfg)]
    return WordSeq(tuple(Token(t.surface, t.norm, index) for index, t in enumerate(kept)))


def normalize_text(raw: str, cfg: NormalizationConfig = DEFAULT_CONFIG) -> WordSeq:
    return strip_cues(normalize_tokens(raw, cfg), cfg)


def parse_phonemes(text: str, alphabet: str, cfg: Optional[NormalizationConfig] = None) -> PhonemeSeq:
    """
    Splits a space-separated phoneme string. When a config is passed, non-verbal cue
    symbols are dropped first (used for the manual CGN transcriptions).
    """
    symbols = unicodedata.normalize("NFC", text or "").split()
    if cfg is not None:
        symbols = [s for s in symbols
                   if s not in cfg.cue_markers and not any(s.startswith(p) for p in cfg.cue_prefixes)]
    return PhonemeSeq(tuple(symbols), alphabet)


def map_phonemes(seq: PhonemeSeq, mapping: PhonemeMapping) -> PhonemeSeq:
    if seq.alphabet != mapping.source:
        raise AlphabetMismatch(f"Sequence is {seq.alphabet} but mapping expects {mapping.source}")
    out = []
    for position, symbol in enumerate(seq.symbols):
        if symbol not in mapping.entries:
            raise UnknownSymbol(symbol, position)
        out.extend(mapping.entries[symbol])
    return PhonemeSeq(tuple(out), mapping.target)


def load_phoneme_mapping(path=DEFAULT_MAPPING_PATH, source: str = IPA, target: str = CGN) -> PhonemeMapping:
    """
    Reads a tab-separated mapping table: `<source>\\t<target> [<target>...]`, `#` starts a comment line.

    :param path: mapping file, defaults to the bundled IPA -> CGN table
    :return: PhonemeMapping
    """
    entries = {}
    with open(path, "r", encoding="utf-8") as inf:
        for line_number, line in enumerate(inf, start=1):
            line = line.rstrip("\r\n")
            if not line.strip() or line.startswith("#"):
                continue
            symbol, tab, rest = line.partition("\t")
            symbol = unicodedata.normalize("NFC", symbol.strip())
            targets = tuple(rest.split())
            if not tab or not symbol:
                raise MappingFormatError("expected '<source>\\t<target>...'", line_number)
            if not targets:
                raise MappingFormatError(f"empty target list for '{symbol}'", line_number)
            if symbol in entries:
                raise MappingFormatError(f"duplicate source symbol '{symbol}'", line_number)
            if target == CGN:
                for t in targets:
                    if t not in CGN_SYMBOLS:
                        raise MappingFormatError(f"'{t}' is not a CGN symbol", line_number)
            entries[symbol] = targets
    return PhonemeMapping(entries, source, target)

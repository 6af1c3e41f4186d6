from typing import Dict, List, Optional

from analysis import AttemptLabel, prompt_links
from normalize import CGN, IPA, DEFAULT_CONFIG, NormalizationConfig, PhonemeMapping, PhonemeSeq, WordSeq, \
    map_phonemes, normalize_text, parse_phonemes


class Transcript:
    def __init__(self, text, words, phonemes=None, attempt_labels=None, prompt_links=None, record_id=None):
        self.text: str = text
        self.words: WordSeq = words
        self.phonemes: Optional[PhonemeSeq] = phonemes
        self.attempt_labels: Optional[List[AttemptLabel]] = list(attempt_labels) if attempt_labels is not None else None
        self.prompt_links: Optional[List[Optional[int]]] = list(prompt_links) if prompt_links is not None else None

        if self.attempt_labels is not None and len(self.attempt_labels) != len(self.words):
            raise ParseError(f"{len(self.attempt_labels)} attempts for {len(self.words)} words",
                             field="attempts", record_id=record_id)
        if self.prompt_links is not None and len(self.prompt_links) != len(self.words):
            raise ParseError(f"{len(self.prompt_links)} prompt links for {len(self.words)} words",
                             field="attempts", record_id=record_id)

    def __eq__(self, other):
        if not isinstance(other, Transcript):
            return NotImplemented
        return (self.words.norms() == other.words.norms() and self.phonemes == other.phonemes
                and self.attempt_labels == other.attempt_labels and self.prompt_links == other.prompt_links)

    @classmethod
    def from_text(cls, text, cfg: NormalizationConfig = DEFAULT_CONFIG, phonemes=None, alphabet=IPA,
                  attempts=None, record_id=None):
        """
        Normalizes a transcript as read from a corpus file, a transcript file or the transcription service.

        :param text: raw orthographic transcript
        :param cfg: normalization settings
        :param phonemes: optional space-separated phoneme string
        :param alphabet: alphabet of `phonemes`
        :param attempts: optional list of {"label", "prompt_index"} annotations, one per normalized word
        :return: Transcript
        """
        words = normalize_text(text, cfg)
        phoneme_seq = None
        if phonemes is not None:
            # cue symbols only occur in the manual CGN annotation
            phoneme_seq = parse_phonemes(phonemes, alphabet, cfg if alphabet == CGN else None)

        labels, links = None, None
        if attempts is not None:
            try:
                labels = [AttemptLabel.from_annotation(a['label']) for a in attempts]
            except KeyError as e:
                raise ParseError(f"unknown attempt label {e}", field="attempts.label", record_id=record_id)
            if any('prompt_index' in a for a in attempts):
                links = [a.get('prompt_index') for a in attempts]
        return cls(text, words, phoneme_seq, labels, links, record_id)

    def cgn_phonemes(self, mapping: Optional[PhonemeMapping]) -> Optional[PhonemeSeq]:
        if self.phonemes is None or self.phonemes.alphabet == CGN:
            return self.phonemes
        if mapping is None:
            raise CorpusException(f"{self.phonemes.alphabet} phonemes need a mapping to {CGN}")
        return map_phonemes(self.phonemes, mapping)


class CorpusRecord:
    def __init__(self, record_id, prompt_text, prompt, reference, hypotheses=None, metadata=None):
        self.id: str = record_id
        self.prompt_text: str = prompt_text
        self.prompt: WordSeq = prompt
        self.reference: Transcript = reference
        self.hypotheses: Dict[str, Transcript] = dict(hypotheses or {})
        self.metadata: dict = dict(metadata or {})

        if not len(self.prompt):
            raise ParseError("prompt is empty after normalization", field="prompt", record_id=record_id)
        links = self.reference.prompt_links or []
        for link in links:
            if link is not None and not 0 <= link < len(self.prompt):
                raise ParseError(f"prompt_index {link} outside prompt of {len(self.prompt)} words",
                                 field="attempts.prompt_index", record_id=record_id)

    def __eq__(self, other):
        if not isinstance(other, CorpusRecord):
            return NotImplemented
        return (self.id == other.id and self.prompt.norms() == other.prompt.norms()
                and self.reference == other.reference and self.hypotheses == other.hypotheses
                and self.metadata == other.metadata)

    def __repr__(self):
        return f"CorpusRecord({self.id!r}, models={sorted(self.hypotheses)})"

    def model_keys(self) -> List[str]:
        return sorted(self.hypotheses)

    def hypothesis(self, model: str) -> Transcript:
        if model not in self.hypotheses:
            raise NotFound(self.id, f"no '{model}' hypothesis")
        return self.hypotheses[model]

    def with_hypothesis(self, model: str, transcript: Transcript):
        hypotheses = dict(self.hypotheses)
        hypotheses[model] = transcript
        return CorpusRecord(self.id, self.prompt_text, self.prompt, self.reference, hypotheses, self.metadata)

    def links(self) -> List[Optional[int]]:
        """
        Prompt index targeted by each reference word, annotated or read off the prompt-reference alignment
        """
        if self.reference.prompt_links is not None:
            return self.reference.prompt_links
        return prompt_links(self.prompt, self.reference.words)


class CorpusException(Exception):
    def __init__(self, message, record_id=None):
        super().__init__(message)
        self.message = message
        self.record_id = record_id


class ParseError(CorpusException):
    def __init__(self, message, line=None, field=None, record_id=None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field '{field}'")
        if record_id is not None:
            where.append(f"record '{record_id}'")
        super().__init__(f"{', '.join(where)}: {message}" if where else message, record_id)
        self.line = line
        self.field = field


class DuplicateId(CorpusException):
    def __init__(self, record_id):
        super().__init__(f"Duplicate record id '{record_id}'", record_id)


class SchemaVersionMismatch(CorpusException):
    def __init__(self, found, expected):
        super().__init__(f"Corpus version {found} is not supported (expected {expected})")
        self.found = found
        self.expected = expected


class DimensionMismatch(CorpusException):
    def __init__(self, line, expected, found):
        super().__init__(f"line {line}: expected {expected} values, found {found}")
        self.line = line
        self.expected = expected
        self.found = found


class MalformedLine(CorpusException):
    def __init__(self, line, message):
        super().__init__(f"line {line}: {message}")
        self.line = line


class NotFound(CorpusException):
    def __init__(self, record_id, detail=""):
        super().__init__(f"No hypothesis for record '{record_id}'" + (f" ({detail})" if detail else ""), record_id)

import json
import logging
import os
from dataclasses import dataclass
from typing import Any, Dict, List, Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, ValidationError

from miscue import EmbeddingProvider
from normalize import CGN, DEFAULT_CONFIG, IPA, NormalizationConfig, NormalizationException, normalize_text
from record import CorpusException, CorpusRecord, DimensionMismatch, DuplicateId, MalformedLine, NotFound, \
    ParseError, SchemaVersionMismatch, Transcript
from templates import corpus_template, record_template, transcript_template
from transcriber import DEFAULT_BACKOFF, DEFAULT_RETRIES, DEFAULT_TIMEOUT, RemoteTranscriber

"""
    The corpus file is a JSON document:
    {
        "version": 1,
        "records": [
            {
                "id": // unique record id,
                "prompt": // the text the child was asked to read,
                "reference": {
                    "text": // manual orthographic transcription,
                    "phonemes": // optional, space-separated CGN symbols,
                    "attempts": // optional, one {"label": correct|part|incorrect|other, "prompt_index": int} per word
                },
                "hypotheses": {
                    "<model>": {"text": ..., "phonemes": // optional, IPA unless "phoneme_alphabet" says otherwise}
                },
                "metadata": // free-form, passed through
            }
        ]
    }
"""

logger = logging.getLogger(__name__)

CORPUS_VERSION = 1
INLINE = "inline"
DIRECTORY = "directory"
REMOTE = "remote"


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class AttemptModel(_Strict):
    label: Literal["correct", "part", "incorrect", "other"]
    prompt_index: Optional[int] = None


class ReferenceModel(_Strict):
    text: str
    phonemes: Optional[str] = None
    phoneme_alphabet: Literal["IPA", "CGN"] = CGN
    attempts: Optional[List[AttemptModel]] = None


class HypothesisModel(_Strict):
    text: str
    phonemes: Optional[str] = None
    phoneme_alphabet: Literal["IPA", "CGN"] = IPA


class RecordModel(_Strict):
    id: str
    prompt: str
    reference: ReferenceModel
    hypotheses: Dict[str, HypothesisModel] = {}
    metadata: Dict[str, Any] = {}


class CorpusModel(_Strict):
    version: int
    records: List[RecordModel]


def _field_path(error) -> str:
    return ".".join(str(part) for part in error['loc'])


def _attempts(model: ReferenceModel):
    if model.attempts is None:
        return None
    return [a.model_dump(exclude_none=True) for a in model.attempts]


def record_from_model(model: RecordModel, cfg: NormalizationConfig = DEFAULT_CONFIG) -> CorpusRecord:
    ref = model.reference
    try:
        reference = Transcript.from_text(ref.text, cfg, ref.phonemes, ref.phoneme_alphabet, _attempts(ref), model.id)
        hypotheses = {key: Transcript.from_text(hyp.text, cfg, hyp.phonemes, hyp.phoneme_alphabet, record_id=model.id)
                      for key, hyp in model.hypotheses.items()}
    except NormalizationException as e:
        raise ParseError(e.message, field="phonemes", record_id=model.id)
    return CorpusRecord(model.id, model.prompt, normalize_text(model.prompt, cfg), reference, hypotheses,
                        model.metadata)


def parse_corpus(data, cfg: NormalizationConfig = DEFAULT_CONFIG) -> List[CorpusRecord]:
    if isinstance(data, dict) and 'version' in data and data['version'] != CORPUS_VERSION:
        raise SchemaVersionMismatch(data['version'], CORPUS_VERSION)
    try:
        corpus = CorpusModel.model_validate(data)
    except ValidationError as e:
        first = e.errors()[0]
        raise ParseError(first['msg'], field=_field_path(first))

    records, seen = [], set()
    for model in corpus.records:
        if model.id in seen:
            raise DuplicateId(model.id)
        seen.add(model.id)
        records.append(record_from_model(model, cfg))
    return records


def load_corpus(path, cfg: NormalizationConfig = DEFAULT_CONFIG) -> List[CorpusRecord]:
    """
    Reads and validates a corpus file.

    :param path: corpus JSON file
    :param cfg: normalization applied to prompts and transcripts
    :return: list of CorpusRecord, in file order
    """
    if not os.path.isfile(path):
        raise CorpusException(f"Corpus file {path} does not exist")
    with open(path, "r", encoding="utf-8") as inf:
        try:
            data = json.load(inf)
        except json.JSONDecodeError as e:
            raise ParseError(e.msg, line=e.lineno)
    records = parse_corpus(data, cfg)
    logger.info(f"Loaded {len(records)} records from {path}")
    return records


def transcript_to_dict(transcript: Transcript, default_alphabet: str) -> dict:
    out = transcript_template()
    out["text"] = transcript.text
    if transcript.phonemes is not None:
        out["phonemes"] = transcript.phonemes.text()
        if transcript.phonemes.alphabet != default_alphabet:
            out["phoneme_alphabet"] = transcript.phonemes.alphabet
    if transcript.attempt_labels is not None:
        links = transcript.prompt_links or [None] * len(transcript.attempt_labels)
        out["attempts"] = []
        for label, link in zip(transcript.attempt_labels, links):
            attempt = {"label": label.annotation}
            if link is not None:
                attempt["prompt_index"] = link
            out["attempts"].append(attempt)
    return {k: v for k, v in out.items() if v is not None}


def record_to_dict(record: CorpusRecord) -> dict:
    out = record_template()
    out["id"] = record.id
    out["prompt"] = record.prompt_text
    out["reference"] = transcript_to_dict(record.reference, CGN)
    out["hypotheses"] = {key: transcript_to_dict(record.hypotheses[key], IPA) for key in record.model_keys()}
    out["metadata"] = record.metadata
    return out


def dump_corpus(records: List[CorpusRecord], path):
    data = corpus_template(CORPUS_VERSION)
    data["records"] = [record_to_dict(record) for record in records]
    with open(path, "w", encoding="utf-8") as outf:
        json.dump(data, outf, indent=4, ensure_ascii=False)
        outf.write("\n")


def load_embeddings(path) -> EmbeddingProvider:
    """
    Reads word vectors in word2vec text format: a "<count> <dim>" header, then one
    line per word with `dim` whitespace-separated decimals.

    :param path: embeddings file
    :return: EmbeddingProvider
    """
    with open(path, "r", encoding="utf-8") as inf:
        header = inf.readline().split()
        if len(header) != 2 or not all(h.isdigit() for h in header):
            raise MalformedLine(1, "header must be '<count> <dim>'")
        count, dim = int(header[0]), int(header[1])

        words, rows, seen = [], [], set()
        for line_number, line in enumerate(inf, start=2):
            parts = line.split()
            if not parts:
                continue
            word, values = parts[0], parts[1:]
            if len(values) != dim:
                raise DimensionMismatch(line_number, dim, len(values))
            if word in seen:
                raise MalformedLine(line_number, f"duplicate word '{word}'")
            try:
                rows.append(np.array(values, dtype=np.float64))
            except ValueError:
                raise MalformedLine(line_number, f"non-numeric value for '{word}'")
            words.append(word)
            seen.add(word)

    if len(words) != count:
        raise MalformedLine(1, f"header announces {count} words, file has {len(words)}")
    matrix = np.vstack(rows) if rows else np.zeros((0, dim))
    logger.info(f"Loaded {count} embeddings of dimension {dim} from {path}")
    return EmbeddingProvider(words, matrix)


@dataclass(frozen=True)
class HypothesisSource:
    type: str = INLINE
    path: Optional[str] = None
    endpoint: Optional[str] = None
    token: Optional[str] = None
    timeout: float = DEFAULT_TIMEOUT
    retries: int = DEFAULT_RETRIES
    backoff: float = DEFAULT_BACKOFF
    jobs: int = 1
    phoneme_alphabet: str = IPA

    def __post_init__(self):
        if self.type not in SOURCE_READERS:
            raise CorpusException(f"Unknown hypothesis source type '{self.type}'")
        if self.type == DIRECTORY and not self.path:
            raise CorpusException("Directory hypothesis source has no path")
        if self.retries < 0:
            raise CorpusException("retries must be non-negative")

    def transcriber(self, cfg: NormalizationConfig = DEFAULT_CONFIG) -> RemoteTranscriber:
        return RemoteTranscriber(self.endpoint, self.token, self.timeout, self.retries, self.backoff, self.jobs, cfg)


def _read_inline(source, record, model, cfg):
    return record.hypothesis(model)


def _read_directory(source, record, model, cfg):
    text_path = os.path.join(source.path, f"{record.id}.{model}.txt")
    if not os.path.isfile(text_path):
        raise NotFound(record.id, text_path)
    with open(text_path, "r", encoding="utf-8") as inf:
        text = inf.read()

    phonemes = None
    phoneme_path = os.path.join(source.path, f"{record.id}.{model}.phn")
    if os.path.isfile(phoneme_path):
        with open(phoneme_path, "r", encoding="utf-8") as inf:
            phonemes = inf.read()
    try:
        return Transcript.from_text(text, cfg, phonemes, source.phoneme_alphabet, record_id=record.id)
    except NormalizationException as e:
        raise ParseError(e.message, field=phoneme_path, record_id=record.id)


def _read_remote(source, record, model, cfg):
    return source.transcriber(cfg).transcribe(record.id, record.metadata.get("audio_ref"))


SOURCE_READERS = {
    INLINE: _read_inline,
    DIRECTORY: _read_directory,
    REMOTE: _read_remote,
}


def fetch_hypotheses(source: HypothesisSource, record: CorpusRecord, model: str,
                     cfg: NormalizationConfig = DEFAULT_CONFIG) -> Transcript:
    """
    Produces the normalized hypothesis transcript of one model for one record, from the
    corpus itself, a directory of `<id>.<model>.txt` files or a transcription service.
    """
    return SOURCE_READERS[source.type](source, record, model, cfg)


def fetch_all(source: HypothesisSource, records: List[CorpusRecord], model: str,
              cfg: NormalizationConfig = DEFAULT_CONFIG) -> Dict[str, Transcript]:
    if source.type == REMOTE:
        audio_refs = {r.id: r.metadata["audio_ref"] for r in records if "audio_ref" in r.metadata}
        return source.transcriber(cfg).transcribe_all([r.id for r in records], audio_refs)
    return {record.id: fetch_hypotheses(source, record, model, cfg) for record in records}

import json
import logging
import os
from typing import Dict, List, Optional

from dotenv import load_dotenv

from align import CostConfig, CostConfigError
from corpusio import DIRECTORY, INLINE, REMOTE, HypothesisSource
from miscue import ClassifierConfig
from normalize import DEFAULT_MAPPING_PATH, NormalizationConfig
from record import CorpusException

"""
    A run is configured by an optional JSON file (--config) whose values command-line flags override:
    {
        "corpus": // path to the corpus JSON file,
        "models": // model keys to evaluate; all models found in the corpus when empty,
        "out": // output directory,
        "embeddings": // word2vec text file, needed for SS classification and injection,
        "phoneme_map": // IPA -> CGN table, defaults to files/ipa_cgn.tsv,
        "top_k": // rows per confusion table,
        "seed": // injection seed,
        "jobs": // records processed in parallel,
        "formats": // any of "json", "csv", "txt",
        "analyses": // any of "attempts", "false_recognition", "confusions",
        "missing_embeddings": // "error" or "degrade",
        "confusion_level": // "phoneme" or "word",
        "classifier": {"ortho_threshold", "sem_threshold", "restart_window", "ngram_order", "lexicon_gate"},
        "costs": {"word": {"sub", "ins", "del"}, "phoneme": {...}},
        "normalization": {"punctuation", "cue_markers", "cue_prefixes", "convert_numerals", "keep_apostrophes"},
        "sources": {"<model>": {"type": inline|directory|remote, "path", "endpoint", "timeout", "retries", "backoff", "jobs"}},
        "injection": {"SS", "OS", "O", "I_m", "D", "restart"}
    }
    The transcription service endpoint and its bearer token may instead come from the
    MISCUE_ASR_ENDPOINT and MISCUE_ASR_TOKEN environment variables (a .env file is read).
"""

logger = logging.getLogger(__name__)

FORMATS = ("json", "csv", "txt")
ANALYSES = ("attempts", "false_recognition", "confusions")
MISSING_EMBEDDINGS = ("error", "degrade")
CONFUSION_LEVELS = ("phoneme", "word")

DEFAULTS = {
    "corpus": None,
    "models": [],
    "out": "out",
    "embeddings": None,
    "phoneme_map": None,
    "top_k": 10,
    "seed": 0,
    "jobs": 1,
    "formats": list(FORMATS),
    "analyses": [],
    "missing_embeddings": "error",
    "confusion_level": "phoneme",
    "classifier": {},
    "costs": {},
    "normalization": {},
    "sources": {},
    "injection": {"SS": 1, "OS": 1, "O": 1, "I_m": 1, "D": 1, "restart": 1},
}


class ConfigError(Exception):
    def __init__(self, message, key=None):
        super().__init__(message)
        self.message = message
        self.key = key


def _choices(key, values, allowed):
    unknown = [v for v in values if v not in allowed]
    if unknown:
        raise ConfigError(f"'{key}' accepts {', '.join(allowed)}; got {', '.join(map(str, unknown))}", key)
    return list(values)


class RunConfig:
    def __init__(self, data: Optional[dict] = None):
        data = {**DEFAULTS, **(data or {})}
        unknown = sorted(set(data) - set(DEFAULTS))
        if unknown:
            raise ConfigError(f"Unknown configuration keys: {', '.join(unknown)}")

        self.corpus: Optional[str] = data['corpus']
        self.models: List[str] = list(data['models'])
        self.out: str = data['out']
        self.embeddings: Optional[str] = data['embeddings']
        self.phoneme_map: str = data['phoneme_map'] or str(DEFAULT_MAPPING_PATH)
        self.top_k: int = data['top_k']
        self.seed: int = data['seed']
        self.jobs: int = data['jobs']
        self.formats: List[str] = _choices("formats", data['formats'], FORMATS)
        self.analyses: List[str] = _choices("analyses", data['analyses'], ANALYSES)
        self.missing_embeddings: str = _choices("missing_embeddings", [data['missing_embeddings']],
                                                MISSING_EMBEDDINGS)[0]
        self.confusion_level: str = _choices("confusion_level", [data['confusion_level']], CONFUSION_LEVELS)[0]
        self.injection: dict = dict(data['injection'])

        if not isinstance(self.top_k, int) or self.top_k < 1:
            raise ConfigError("'top_k' must be a positive integer", "top_k")
        if not isinstance(self.jobs, int) or self.jobs < 1:
            raise ConfigError("'jobs' must be a positive integer", "jobs")

        try:
            self.classifier: ClassifierConfig = ClassifierConfig.from_dict(data['classifier'])
            self.normalization: NormalizationConfig = NormalizationConfig.from_dict(data['normalization'])
        except (TypeError, ValueError) as e:
            raise ConfigError(str(e))
        try:
            costs = data['costs']
            self.word_costs: CostConfig = CostConfig.from_dict(costs.get('word'))
            self.phoneme_costs: CostConfig = CostConfig.from_dict(costs.get('phoneme'))
        except CostConfigError as e:
            raise ConfigError(e.message, "costs")

        self.sources: Dict[str, HypothesisSource] = {model: self.build_source(model, spec)
                                                     for model, spec in data['sources'].items()}

    def build_source(self, model, spec) -> HypothesisSource:
        spec = dict(spec)
        source_type = spec.pop('type', INLINE)
        if source_type == REMOTE:
            spec.setdefault('endpoint', os.getenv('MISCUE_ASR_ENDPOINT'))
            spec.setdefault('token', os.getenv('MISCUE_ASR_TOKEN'))
            if not spec['endpoint']:
                raise ConfigError(f"Remote source for '{model}' has no endpoint and MISCUE_ASR_ENDPOINT is unset",
                                  "sources")
        try:
            return HypothesisSource(type=source_type, **spec)
        except (TypeError, CorpusException) as e:
            raise ConfigError(f"Source for '{model}': {getattr(e, 'message', e)}", "sources")

    def source(self, model: str) -> HypothesisSource:
        return self.sources.get(model, HypothesisSource())

    def check_paths(self, corpus=True, embeddings=False):
        """
        Referenced inputs must exist at run start; a missing file is a data error, not a usage error
        """
        needed = [("corpus", self.corpus)] if corpus else []
        if embeddings or self.embeddings:
            needed.append(("embeddings", self.embeddings))
        needed.append(("phoneme_map", self.phoneme_map))
        for model, source in sorted(self.sources.items()):
            if source.type == DIRECTORY:
                needed.append((f"sources.{model}.path", source.path))
        for key, path in needed:
            if not path:
                raise ConfigError(f"No '{key}' given", key)
            if not os.path.exists(path):
                raise CorpusException(f"{key}: {path} does not exist")


def load(path=None, overrides: Optional[dict] = None) -> RunConfig:
    """
    Reads the JSON run configuration, then applies command-line overrides (None values are ignored).

    :param path: optional configuration file
    :param overrides: values given on the command line
    :return: RunConfig
    """
    load_dotenv()
    data = {}
    if path:
        if not os.path.isfile(path):
            raise CorpusException(f"Configuration file {path} does not exist")
        with open(path, "r", encoding="utf-8") as inf:
            try:
                data = json.load(inf)
            except json.JSONDecodeError as e:
                raise ConfigError(f"{path} line {e.lineno}: {e.msg}")
        if not isinstance(data, dict):
            raise ConfigError(f"{path} must hold a JSON object")
    for key, value in (overrides or {}).items():
        if value is not None:
            data[key] = value
    return RunConfig(data)

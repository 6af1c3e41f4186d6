import json
import random

import numpy as np
import pytest

from miscue import EmbeddingProvider
from normalize import WordSeq

# base word -> (semantically similar word, orthographically similar word)
WORD_GROUPS = {
    "groot": ("enorm", "goot"),
    "boom": ("plant", "boon"),
    "kat": ("poes", "kast"),
    "huis": ("woning", "thuis"),
    "hond": ("reu", "honden"),
    "zon": ("ster", "zoon"),
    "bal": ("bol", "baal"),
    "vis": ("zalm", "vies"),
    "rood": ("paars", "roode"),
    "maan": ("nacht", "man"),
    "boek": ("lezen", "boeken"),
    "weg": ("straat", "wegen"),
}
BASE_WORDS = sorted(WORD_GROUPS)
FUNCTION_WORDS = ["de", "het", "een", "en", "op", "in"]


def group_vectors():
    """
    One axis per group plus one per word: v = e_group + e_word / 3, so words of one
    group have cosine 1 / (1 + 1/9) = 0.9 and words of different groups cosine 0.
    """
    words = []
    for base in BASE_WORDS:
        words.extend([base, *WORD_GROUPS[base]])
    dim = len(BASE_WORDS) + len(words)
    vectors = {}
    for offset, word in enumerate(words):
        group = offset // 3
        vec = np.zeros(dim)
        vec[group] = 1.0
        vec[len(BASE_WORDS) + offset] = 1.0 / 3.0
        vectors[word] = vec
    return vectors


@pytest.fixture(scope="session")
def emb():
    return EmbeddingProvider.from_dict(group_vectors())


@pytest.fixture
def embeddings_file(tmp_path):
    vectors = group_vectors()
    dim = len(next(iter(vectors.values())))
    path = tmp_path / "vectors.txt"
    lines = [f"{len(vectors)} {dim}"]
    lines += [word + " " + " ".join(repr(float(v)) for v in vec) for word, vec in vectors.items()]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def seeded_prompt(seed, length=20):
    # content words alternate with function words, so no word repeats next to itself
    rng = random.Random(seed)
    bases = rng.sample(BASE_WORDS, length // 2)
    words = []
    for base in bases:
        words.extend([base, rng.choice(FUNCTION_WORDS)])
    return WordSeq.from_norms(words[:length])


@pytest.fixture
def prompt():
    return WordSeq.from_norms(["de", "grote", "kat", "zit", "op", "de", "mat"])


def write_corpus(path, records, version=1):
    path.write_text(json.dumps({"version": version, "records": records}, ensure_ascii=False), encoding="utf-8")
    return path


@pytest.fixture
def corpus_records():
    return [
        {
            "id": "r2",
            "prompt": "De hond loopt op de weg.",
            "reference": {"text": "de hond loopt op weg"},
            "hypotheses": {"asr": {"text": "de hont loopt op de weg"}},
        },
        {
            "id": "r1",
            "prompt": "Het huis is groot.",
            "reference": {"text": "het huis is goot"},
            "hypotheses": {"asr": {"text": "het huis is groot"}},
        },
    ]


@pytest.fixture
def corpus_file(tmp_path, corpus_records):
    return write_corpus(tmp_path / "corpus.json", corpus_records)

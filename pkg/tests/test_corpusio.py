import json
from pathlib import Path

import pytest

from analysis import AttemptLabel
from conftest import write_corpus
from corpusio import DIRECTORY, HypothesisSource, dump_corpus, fetch_all, fetch_hypotheses, load_corpus, \
    load_embeddings, parse_corpus
from normalize import CGN, IPA
from record import CorpusException, DimensionMismatch, DuplicateId, MalformedLine, NotFound, ParseError, \
    SchemaVersionMismatch, Transcript

EXAMPLE_CORPUS = Path(__file__).resolve().parent.parent / "files" / "example_corpus.json"


def minimal_record(**changes):
    record = {"id": "r1", "prompt": "De kat zit.", "reference": {"text": "de kat zit"}}
    record.update(changes)
    return record


def test_load_example_corpus():
    records = load_corpus(EXAMPLE_CORPUS)
    assert [r.id for r in records] == ["ex001", "ex002"]

    first = records[0]
    assert first.prompt.norms() == ["het", "huis", "is", "groot", "en", "de", "kat", "is", "klein"]
    assert first.model_keys() == ["wav2vec2", "whisper"]
    assert first.hypothesis("whisper").words.norms() == first.hypothesis("wav2vec2").words.norms()
    assert first.reference.attempt_labels[3] == AttemptLabel.INCORRECT
    assert first.reference.phonemes.alphabet == CGN
    assert first.hypothesis("wav2vec2").phonemes.alphabet == IPA
    assert first.hypothesis("whisper").phonemes is None

    second = records[1]
    # the non-verbal cue is dropped from words and phonemes
    assert second.reference.words.norms() == ["op", "de", "we", "weg", "ligt", "een", "bol"]
    assert "ggg" not in second.reference.phonemes.symbols
    assert second.links() == [0, 1, None, 2, 3, 4, 5]


def test_dump_and_reload(tmp_path):
    records = load_corpus(EXAMPLE_CORPUS)
    path = tmp_path / "copy.json"
    dump_corpus(records, path)
    assert load_corpus(path) == records
    assert path.read_text(encoding="utf-8").endswith("}\n")


def test_links_fall_back_to_alignment(tmp_path):
    path = write_corpus(tmp_path / "c.json", [minimal_record(prompt="op de weg",
                                                             reference={"text": "op de we weg"})])
    assert load_corpus(path)[0].links() == [0, 1, None, 2]


def test_schema_version_mismatch():
    with pytest.raises(SchemaVersionMismatch) as e:
        parse_corpus({"version": 2, "records": []})
    assert e.value.found == 2


def test_duplicate_id():
    with pytest.raises(DuplicateId):
        parse_corpus({"version": 1, "records": [minimal_record(), minimal_record()]})


def test_missing_field_names_its_path():
    record = minimal_record()
    del record["prompt"]
    with pytest.raises(ParseError) as e:
        parse_corpus({"version": 1, "records": [record]})
    assert e.value.field == "records.0.prompt"


def test_unknown_field_rejected():
    with pytest.raises(ParseError):
        parse_corpus({"version": 1, "records": [minimal_record(speaker="x")]})


def test_invalid_json_reports_line(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text('{\n"version": 1,\n"records": [\n', encoding="utf-8")
    with pytest.raises(ParseError) as e:
        load_corpus(path)
    assert e.value.line is not None


def test_missing_corpus_file(tmp_path):
    with pytest.raises(CorpusException):
        load_corpus(tmp_path / "nope.json")


def test_empty_prompt():
    with pytest.raises(ParseError) as e:
        parse_corpus({"version": 1, "records": [minimal_record(prompt="...")]})
    assert e.value.field == "prompt"


def test_attempts_must_cover_reference():
    reference = {"text": "de kat zit", "attempts": [{"label": "correct"}, {"label": "correct"}]}
    with pytest.raises(ParseError) as e:
        parse_corpus({"version": 1, "records": [minimal_record(reference=reference)]})
    assert e.value.field == "attempts"


def test_prompt_index_out_of_range():
    attempts = [{"label": "correct", "prompt_index": i} for i in (0, 1, 7)]
    with pytest.raises(ParseError):
        parse_corpus({"version": 1, "records": [minimal_record(reference={"text": "de kat zit",
                                                                          "attempts": attempts})]})


def test_unknown_reference_phoneme():
    reference = {"text": "de kat zit", "phonemes": "d @ k Q t"}
    with pytest.raises(ParseError) as e:
        parse_corpus({"version": 1, "records": [minimal_record(reference=reference)]})
    assert e.value.field == "phonemes"


def test_missing_hypothesis():
    record = parse_corpus({"version": 1, "records": [minimal_record()]})[0]
    with pytest.raises(NotFound):
        record.hypothesis("asr")


def test_load_embeddings(embeddings_file):
    emb = load_embeddings(embeddings_file)
    assert len(emb) == 36
    assert emb.dim == 48
    assert emb.similarity("huis", "woning") == pytest.approx(0.9)


@pytest.mark.parametrize("content, error", [
    ("2 x\n", MalformedLine),
    ("1 3\nkat 1 2\n", DimensionMismatch),
    ("2 2\nkat 1 2\nkat 3 4\n", MalformedLine),
    ("1 2\nkat 1 twee\n", MalformedLine),
    ("3 2\nkat 1 2\n", MalformedLine),
])
def test_malformed_embeddings(tmp_path, content, error):
    path = tmp_path / "vectors.txt"
    path.write_text(content, encoding="utf-8")
    with pytest.raises(error):
        load_embeddings(path)


def test_dimension_mismatch_reports_line(tmp_path):
    path = tmp_path / "vectors.txt"
    path.write_text("2 2\nkat 1 2\nhond 1\n", encoding="utf-8")
    with pytest.raises(DimensionMismatch) as e:
        load_embeddings(path)
    assert (e.value.line, e.value.expected, e.value.found) == (3, 2, 1)


def test_directory_source(tmp_path, corpus_file):
    records = load_corpus(corpus_file)
    hyp_dir = tmp_path / "hyp"
    hyp_dir.mkdir()
    (hyp_dir / "r1.asr.txt").write_text("Het huis is groot.\n", encoding="utf-8")
    (hyp_dir / "r1.asr.phn").write_text("ɦ œy s\n", encoding="utf-8")
    source = HypothesisSource(type=DIRECTORY, path=str(hyp_dir))

    by_id = {r.id: r for r in records}
    transcript = fetch_hypotheses(source, by_id["r1"], "asr")
    assert transcript.words.norms() == ["het", "huis", "is", "groot"]
    assert transcript.phonemes.symbols == ("ɦ", "œy", "s")
    with pytest.raises(NotFound):
        fetch_hypotheses(source, by_id["r2"], "asr")


def test_inline_source(corpus_file):
    records = load_corpus(corpus_file)
    hypotheses = fetch_all(HypothesisSource(), records, "asr")
    assert sorted(hypotheses) == ["r1", "r2"]
    assert isinstance(hypotheses["r2"], Transcript)
    assert hypotheses["r2"].words.norms() == ["de", "hont", "loopt", "op", "de", "weg"]


def test_source_validation():
    with pytest.raises(CorpusException):
        HypothesisSource(type="ftp")
    with pytest.raises(CorpusException):
        HypothesisSource(type=DIRECTORY)


def test_corpus_file_is_utf8(tmp_path):
    path = write_corpus(tmp_path / "c.json", [minimal_record(prompt="Één café")])
    assert load_corpus(path)[0].prompt.norms() == ["één", "café"]
    assert json.loads(path.read_text(encoding="utf-8"))["version"] == 1

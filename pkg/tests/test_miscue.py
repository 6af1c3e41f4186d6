import numpy as np
import pytest

from align import OpKind
from conftest import WORD_GROUPS
from errors import ALL, ErrorPair
from miscue import ClassifiedError, ClassifierConfig, EmptyWord, MiscueLabel, \
    MissingEmbeddings, char_ngrams, classify_error, classify_errors, classify_miscue, detect_restart, \
    evaluate_miscues, miscue_match_results, semantic_similarity, string_cosine
from normalize import WordSeq


def sub(location, ref, hyp):
    return ErrorPair(OpKind.SUB, location, ref, hyp)


def ins(location, hyp):
    return ErrorPair(OpKind.INS, location, None, hyp)


def test_string_cosine_unigrams():
    assert string_cosine("groot", "goot") == pytest.approx(0.9258, abs=1e-4)
    assert string_cosine("kat", "kat") == pytest.approx(1.0)
    assert string_cosine("kat", "vis") == 0.0
    assert string_cosine("aaabbbb", "b") == 0.8


def test_string_cosine_higher_order():
    assert char_ngrams("kat", 2) == {"ka": 1, "at": 1}
    # a word shorter than n is a single gram
    assert char_ngrams("a", 2) == {"a": 1}
    assert string_cosine("kat", "kast", 2) == pytest.approx(1 / np.sqrt(6))


def test_string_cosine_empty_word():
    with pytest.raises(EmptyWord):
        string_cosine("", "kat")


def test_embedding_provider(emb):
    assert "groot" in emb
    assert "qwerty" not in emb
    assert emb.lookup("qwerty") is None
    assert emb.similarity("huis", "woning") == pytest.approx(0.9)
    assert emb.similarity("huis", "kat") == pytest.approx(0.0)
    assert semantic_similarity("huis", "qwerty", emb) is None
    assert semantic_similarity("huis", "woning", None) is None

    neighbours = emb.neighbors("groot", 2)
    assert [w for w, _ in neighbours] == ["enorm", "goot"]
    assert all(w != "groot" for w, _ in emb.neighbors("groot"))
    assert emb.neighbors("qwerty") == []
    with pytest.raises(ValueError):
        emb.matrix[0, 0] = 1.0


def test_orthographic_substitution(prompt, emb):
    result = classify_error(sub(2, "kat", "kast"), prompt, emb=emb)
    assert result.label == MiscueLabel.OS
    assert result.ortho == pytest.approx(0.866, abs=1e-3)


def test_threshold_is_inclusive(prompt):
    assert classify_miscue(sub(2, "aaabbbb", "b"), prompt) == MiscueLabel.OS


def test_semantic_substitution(emb):
    prompt = WordSeq.from_norms(["het", "huis", "is", "groot"])
    result = classify_error(sub(1, "huis", "woning"), prompt, emb=emb)
    assert result.label == MiscueLabel.SS
    assert result.semantic == pytest.approx(0.9)
    assert result.ortho < 0.8


def test_other_substitution(emb):
    prompt = WordSeq.from_norms(["het", "huis", "is", "groot"])
    assert classify_miscue(sub(1, "huis", "kat"), prompt, emb=emb) == MiscueLabel.O
    # out-of-vocabulary words cannot be semantically similar
    assert classify_miscue(sub(1, "huis", "qwerty"), prompt, emb=emb) == MiscueLabel.O


def test_missing_embeddings(emb):
    prompt = WordSeq.from_norms(["het", "huis"])
    error = sub(1, "huis", "woning")
    with pytest.raises(MissingEmbeddings):
        classify_error(error, prompt, strict=True)
    assert classify_error(error, prompt).label == MiscueLabel.O
    # orthographic matches never need embeddings
    assert classify_error(sub(1, "huis", "thuis"), prompt, strict=True).label == MiscueLabel.OS


def test_lexicon_gate(emb):
    prompt = WordSeq.from_norms(["de", "kat"])
    gated = ClassifierConfig(lexicon_gate=True)
    assert classify_miscue(sub(1, "kat", "kast"), prompt, gated, emb) == MiscueLabel.OS
    assert classify_error(sub(1, "kat", "kaat"), prompt, gated, emb).label == MiscueLabel.O
    assert classify_error(sub(1, "kat", "kaat"), prompt, gated, emb, lexicon={"kaat"}).label == MiscueLabel.OS


def test_deletion_is_d(prompt):
    assert classify_miscue(ErrorPair(OpKind.DEL, 1, "grote"), prompt) == MiscueLabel.D


def test_restart_and_insertion(prompt):
    assert classify_miscue(ins(2, "ka"), prompt) == MiscueLabel.RESTART
    assert classify_miscue(ins(2, "hond"), prompt) == MiscueLabel.I_M
    # repetition of an upcoming word
    assert classify_miscue(ins(2, "zit"), prompt) == MiscueLabel.RESTART


def test_restart_window(prompt):
    # prompt: de grote kat zit op de mat; "ma" only occurs in word 6
    assert detect_restart("ma", prompt, 2, window=5)
    assert not detect_restart("ma", prompt, 1, window=5)
    assert classify_miscue(ins(1, "ma"), prompt) == MiscueLabel.I_M
    assert classify_miscue(ins(1, "ma"), prompt, ClassifierConfig(restart_window=6)) == MiscueLabel.RESTART
    # nothing follows a trailing insertion
    assert not detect_restart("ma", prompt, 7)


def test_classifier_config_validation():
    with pytest.raises(ValueError):
        ClassifierConfig(ortho_threshold=1.5)
    with pytest.raises(ValueError):
        ClassifierConfig(restart_window=0)
    assert ClassifierConfig.from_dict({"sem_threshold": 0.5}).sem_threshold == 0.5


def test_classified_error_dict(emb):
    prompt = WordSeq.from_norms(["het", "huis"])
    result = classify_error(sub(1, "huis", "woning"), prompt, emb=emb)
    data = result.to_dict()
    assert data["category"] == "SS"
    assert data["prompt_token"] == "huis"
    assert data["transcript_token"] == "woning"
    assert ClassifiedError.from_dict(data) == result


def test_restarts_are_not_scored(prompt):
    truth = classify_errors([ins(2, "ka"), sub(2, "kat", "kast")], prompt)
    predicted = classify_errors([ins(2, "hond"), sub(2, "kat", "kast")], prompt)
    results = miscue_match_results(predicted, truth)
    assert (results["OS"].tp, results["OS"].fp, results["OS"].fn) == (1, 0, 0)
    assert (results["I_m"].tp, results["I_m"].fp, results["I_m"].fn) == (0, 1, 0)
    assert results[ALL].fn == 0
    assert "RestartNotMiscue" not in results

    scores = evaluate_miscues(predicted, truth)
    assert scores["OS"].f1 == 1.0
    assert scores[ALL].precision == pytest.approx(0.5)


def test_string_cosine_is_symmetric():
    words = ["groot", "goot", "kat", "kast", "aaabbbb", "b", "woning", "thuis"]
    for a in words:
        for b in words:
            for n in (1, 2):
                assert string_cosine(a, b, n) == pytest.approx(string_cosine(b, a, n))
                assert 0.0 <= string_cosine(a, b, n) <= 1.0


def test_restart_detection_grows_with_the_window(prompt):
    for inserted in ["ma", "ka", "de", "zit", "hond", "o"]:
        for gap in range(len(prompt) + 1):
            for window in range(1, len(prompt) + 1):
                if detect_restart(inserted, prompt, gap, window):
                    assert detect_restart(inserted, prompt, gap, window + 1)


def _group_substitutions():
    subs = []
    for base, (semantic, orthographic) in sorted(WORD_GROUPS.items()):
        subs += [sub(1, base, semantic), sub(1, base, orthographic), sub(1, base, "qwerty")]
    return subs


def test_raising_thresholds_never_adds_labels(prompt, emb):
    subs = _group_substitutions()
    steps = [0.0, 0.2, 0.4, 0.6, 0.7, 0.8, 0.9, 0.95, 1.0]

    def count(label, cfg):
        return sum(c.label == label for c in classify_errors(subs, prompt, cfg, emb))

    for low, high in zip(steps, steps[1:]):
        assert count(MiscueLabel.OS, ClassifierConfig(ortho_threshold=high)) <= \
            count(MiscueLabel.OS, ClassifierConfig(ortho_threshold=low))
        assert count(MiscueLabel.SS, ClassifierConfig(sem_threshold=high)) <= \
            count(MiscueLabel.SS, ClassifierConfig(sem_threshold=low))


def test_location_outside_the_prompt(prompt):
    # prompt has 7 words: tokens 0-6, gaps 0-7
    with pytest.raises(ValueError):
        classify_error(ErrorPair(OpKind.DEL, 7, "mat"), prompt)
    with pytest.raises(ValueError):
        classify_error(ins(8, "uh"), prompt)
    assert classify_miscue(ins(7, "uh"), prompt) == MiscueLabel.I_M

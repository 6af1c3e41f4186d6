import pytest

from normalize import CGN, IPA, AlphabetMismatch, MappingFormatError, NormalizationConfig, PhonemeSeq, Token, \
    UnknownSymbol, WordSeq, dutch_number_words, load_phoneme_mapping, map_phonemes, normalize_text, \
    normalize_tokens, parse_phonemes, strip_cues


def test_lowercase_and_punctuation():
    assert normalize_tokens("De kat, zat op de MAT!").norms() == ["de", "kat", "zat", "op", "de", "mat"]


def test_hyphenated_compounds_split():
    assert normalize_tokens("zee-leeuw").norms() == ["zee", "leeuw"]


def test_apostrophes():
    assert normalize_tokens("z'n 's avonds").norms() == ["z'n", "'s", "avonds"]
    assert normalize_tokens("kats'").norms() == ["kats"]
    no_apostrophes = NormalizationConfig(keep_apostrophes=False)
    assert normalize_tokens("z'n", no_apostrophes).norms() == ["zn"]


def test_numerals_become_dutch_words():
    assert normalize_tokens("3 katten").norms() == ["drie", "katten"]
    assert dutch_number_words("21") == ["eenentwintig"]
    assert dutch_number_words(12345) == ["12345"]
    assert normalize_tokens("3", NormalizationConfig(convert_numerals=False)).norms() == ["3"]


def test_surface_kept_and_indices_consecutive():
    seq = normalize_tokens("Het Huis.")
    assert [t.surface for t in seq] == ["Het", "Huis."]
    assert [t.index for t in seq] == [0, 1]


def test_empty_text():
    assert len(normalize_text("")) == 0
    assert len(normalize_text("  ?! ")) == 0


def test_cue_markers_stripped():
    seq = normalize_text("de ggg kat *a zat")
    assert seq.norms() == ["de", "kat", "zat"]
    assert [t.index for t in seq] == [0, 1, 2]


def test_strip_cues_custom_markers():
    raw = WordSeq.from_norms(["uh", "de", "kat"])
    assert strip_cues(raw, NormalizationConfig(cue_markers=frozenset(["uh"]))).norms() == ["de", "kat"]


def test_token_invariants():
    with pytest.raises(ValueError):
        Token("x", "", 0)
    with pytest.raises(ValueError):
        WordSeq((Token("a", "a", 1),))


def test_parse_phonemes_drops_cues_only_with_config():
    assert parse_phonemes("d @ ggg k A t", CGN, NormalizationConfig()).symbols == ("d", "@", "k", "A", "t")
    with pytest.raises(UnknownSymbol):
        parse_phonemes("d @ ggg", CGN)


def test_unknown_cgn_symbol_reports_position():
    with pytest.raises(UnknownSymbol) as e:
        PhonemeSeq(("d", "Q"), CGN)
    assert e.value.symbol == "Q"
    assert e.value.position == 1


def test_bundled_mapping_maps_ipa_to_cgn():
    mapping = load_phoneme_mapping()
    seq = map_phonemes(parse_phonemes("ɣ r oː t", IPA), mapping)
    assert seq.alphabet == CGN
    assert seq.symbols == ("G", "r", "o", "t")
    # one IPA symbol may stand for several CGN symbols
    assert map_phonemes(parse_phonemes("ʦ ɛi", IPA), mapping).symbols == ("t", "s", "E+")


def test_map_phonemes_unknown_symbol():
    mapping = load_phoneme_mapping()
    with pytest.raises(UnknownSymbol) as e:
        map_phonemes(parse_phonemes("k ʘ", IPA), mapping)
    assert e.value.position == 1


def test_map_phonemes_alphabet_mismatch():
    with pytest.raises(AlphabetMismatch):
        map_phonemes(parse_phonemes("k A t", CGN), load_phoneme_mapping())


def test_mapping_file_errors(tmp_path):
    path = tmp_path / "map.tsv"
    path.write_text("# comment\na\ta\na\tA\n", encoding="utf-8")
    with pytest.raises(MappingFormatError) as e:
        load_phoneme_mapping(path)
    assert e.value.line == 3

    path.write_text("a\tQ\n", encoding="utf-8")
    with pytest.raises(MappingFormatError):
        load_phoneme_mapping(path)

    path.write_text("a a\n", encoding="utf-8")
    with pytest.raises(MappingFormatError):
        load_phoneme_mapping(path)


def test_config_from_dict():
    cfg = NormalizationConfig.from_dict({"cue_markers": ["uh"], "convert_numerals": False})
    assert cfg.cue_markers == frozenset(["uh"])
    assert not cfg.convert_numerals
    assert cfg.keep_apostrophes
    with pytest.raises(ValueError):
        NormalizationConfig.from_dict({"cue_prefixes": [""]})


@pytest.mark.parametrize("raw", [
    "De kat, zat op de MAT!",
    "Een noord-zuid verbinding",
    "Hij is 21 jaar en z'n zus 3.",
    "  Het   ‘huis’ is groot...  ",
    "",
])
def test_normalizing_twice_changes_nothing(raw):
    once = normalize_tokens(raw).norms()
    assert normalize_tokens(" ".join(once)).norms() == once


def test_every_numeral_up_to_9999_becomes_words():
    for number in range(10000):
        words = dutch_number_words(number)
        assert words, number
        assert not any(c.isdigit() for w in words for c in w), (number, words)

import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import corpora, forms
from pertcrf.corpus import Corpus, Token
from pertcrf.features import (
    FeatureIndex,
    FeatureTemplate,
    build_feature_index,
    extract_features,
    sentence_features,
)

CRF1 = FeatureTemplate(id="CRF1")
CRF2 = FeatureTemplate(id="CRF2")
CRF2_EZ = FeatureTemplate(id="CRF2", ezafe_input=True)


class TestTemplate:
    def test_unknown_id(self):
        with pytest.raises(ValueError):
            FeatureTemplate(id="CRF3")

    def test_window_fixed(self):
        with pytest.raises(ValueError):
            FeatureTemplate(id="CRF1", window=3)

    def test_token_round_trip(self):
        for t in (CRF1, CRF2, CRF2_EZ, FeatureTemplate(id="CRF1", ezafe_input=True)):
            assert FeatureTemplate.from_token(t.token) == t

    def test_bad_token(self):
        for tok in ("CRF9", "CRF2+XX", "crf1", ""):
            with pytest.raises(ValueError):
                FeatureTemplate.from_token(tok)


class TestExtract:
    def test_crf1_single_token(self):
        keys = extract_features(["tak"], 0, CRF1)
        assert len(keys) == 11
        assert keys.count("w[0]=tak") == 1
        assert sum(1 for k in keys if "__BOS__" in k or "__EOS__" in k) == 10
        assert keys[0] == "w[-5]=__BOS__"
        assert keys[-1] == "w[5]=__EOS__"

    def test_crf1_window_values(self):
        sent = ["a", "b", "c"]
        keys = extract_features(sent, 1, CRF1)
        assert "w[-1]=a" in keys and "w[0]=b" in keys and "w[1]=c" in keys
        assert "w[-2]=__BOS__" in keys and "w[2]=__EOS__" in keys

    def test_crf2_two_scalar_focus(self):
        keys = extract_features(["ab"], 0, CRF2)
        affixes = [k for k in keys if k.startswith(("pre", "suf"))]
        assert sorted(affixes) == ["pre1=a", "pre2=ab", "suf1=b", "suf2=ab"]

    def test_crf2_three_scalar_focus_emits_whole_word_affix(self):
        keys = extract_features(["abc"], 0, CRF2)
        assert "pre3=abc" in keys and "suf3=abc" in keys

    def test_crf2_boundary_booleans(self):
        sent = ["aa", "bb", "cc"]
        assert "BOS" in extract_features(sent, 0, CRF2)
        assert "EOS" not in extract_features(sent, 0, CRF2)
        assert "BOS" not in extract_features(sent, 1, CRF2)
        assert "EOS" in extract_features(sent, 2, CRF2)
        single = extract_features(["aa"], 0, CRF2)
        assert "BOS" in single and "EOS" in single

    def test_crf2_ez_midposition_count(self):
        # 11 word + 6 affix (3-scalar focus) + 0 booleans + 11 ez
        keys = extract_features(["aaa", "bbb", "ccc"], 1, CRF2_EZ, ezafe=[1, 0, 1])
        assert len(keys) == 28
        assert "ez[-1]=1" in keys and "ez[0]=0" in keys and "ez[1]=1" in keys
        assert "ez[-2]=_" in keys and "ez[5]=_" in keys

    def test_persian_affixes_by_scalar(self):
        word = "کتاب"  # four Persian scalars
        keys = extract_features([word], 0, CRF2)
        assert f"pre2={word[:2]}" in keys
        assert f"suf3={word[-3:]}" in keys

    def test_position_out_of_range(self):
        with pytest.raises(ValueError, match="out of range"):
            extract_features(["a"], 1, CRF1)

    def test_ezafe_length_mismatch(self):
        with pytest.raises(ValueError, match="length"):
            extract_features(["a", "b"], 0, CRF2_EZ, ezafe=[1])

    def test_ezafe_presence_must_match_template(self):
        with pytest.raises(ValueError):
            extract_features(["a"], 0, CRF2_EZ)
        with pytest.raises(ValueError):
            extract_features(["a"], 0, CRF1, ezafe=[0])

    @given(st.lists(forms, min_size=1, max_size=9), st.data())
    def test_crf1_always_11_distinct_keys(self, sent, data):
        pos = data.draw(st.integers(0, len(sent) - 1))
        keys = extract_features(sent, pos, CRF1)
        assert len(keys) == 11
        assert len(set(keys)) == 11

    @given(st.lists(forms, min_size=1, max_size=9), st.data())
    def test_pure_function_and_focus_key(self, sent, data):
        pos = data.draw(st.integers(0, len(sent) - 1))
        a = extract_features(sent, pos, CRF2)
        b = extract_features(sent, pos, CRF2)
        assert a == b
        assert [k for k in a if k.startswith("w[0]=")] == [f"w[0]={sent[pos]}"]
        assert len(set(a)) == len(a)


class TestIndex:
    def one_token_corpus(self):
        return Corpus.from_sentences([(Token(form="tak", pos="N", ezafe=0),)])

    def test_crf1_single_token_corpus(self):
        index = build_feature_index(self.one_token_corpus(), CRF1)
        assert len(index) == 11

    def test_min_count_one_keeps_everything(self):
        c = self.one_token_corpus()
        keys = set()
        for i in range(1):
            keys.update(extract_features(["tak"], 0, CRF1))
        index = build_feature_index(c, CRF1, min_count=1)
        assert set(index.keys()) == keys

    def test_min_count_threshold(self):
        sents = [
            (Token(form="aa", pos="N", ezafe=0),),
            (Token(form="aa", pos="N", ezafe=0),),
            (Token(form="zz", pos="N", ezafe=0),),
        ]
        index = build_feature_index(Corpus.from_sentences(sents), CRF1, min_count=2)
        assert "w[0]=aa" in index
        assert "w[0]=zz" not in index  # seen once

    def test_first_occurrence_order(self):
        c = self.one_token_corpus()
        index = build_feature_index(c, CRF1)
        assert [index[k] for k in extract_features(["tak"], 0, CRF1)] == list(range(11))

    def test_unknown_feature_maps_to_nothing(self):
        index = build_feature_index(self.one_token_corpus(), CRF1)
        n = len(index)
        assert index.get("w[0]=unseen") is None
        assert index.encode(["w[0]=unseen", "w[0]=tak"]) == [index["w[0]=tak"]]
        assert len(index) == n

    def test_duplicate_key_rejected(self):
        with pytest.raises(ValueError):
            FeatureIndex(["a", "a"])

    def test_ezafe_template_needs_annotations(self):
        with pytest.raises(ValueError):
            build_feature_index(self.one_token_corpus(), CRF2_EZ)

    def test_ezafe_template_index(self):
        index = build_feature_index(self.one_token_corpus(), CRF2_EZ, ezafe=[(0,)])
        assert "ez[0]=0" in index
        assert "ez[1]=_" in index

    @given(corpora(max_sentences=5))
    def test_sentence_features_cover_index(self, c):
        index = build_feature_index(c, CRF2)
        for sent in c.sentences:
            for keys in sentence_features([t.form for t in sent], CRF2):
                for k in keys:
                    assert k in index

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nesc.errors import DataError, UsageError
from nesc.features import (
    ALL_CAPS, FIRST_CAP, HANDLE, HASHTAG, POS_TAGS, SPECIAL_CHARS, SURFACE_DIM,
    EmbeddingTable, Token, embed, pos_one_hot, surface_features, tokenize, vectorize,
)


def surfaces(text):
    return [t.surface for t in tokenize(text)]


class TestTokenize:
    def test_seven_token_sentence(self):
        assert len(tokenize("homeless population in San Francisco is surging")) == 7

    def test_i_love_san_francisco(self):
        assert surfaces("I love San Francisco") == ["I", "love", "San", "Francisco"]

    def test_handles_urls_punctuation(self):
        assert surfaces("see @jack: https://t.co/x !") == ["see", "@jack", ":", "https://t.co/x", "!"]

    def test_hashtag_and_trailing_punct(self):
        assert surfaces("#pumps, (wow)") == ["#pumps", ",", "(", "wow", ")"]

    def test_url_trailing_period(self):
        assert surfaces("read https://t.co/abc.") == ["read", "https://t.co/abc", "."]

    def test_internal_punctuation_kept(self):
        assert surfaces("President's 5/16") == ["President's", "5/16"]

    def test_empty(self):
        assert tokenize("") == [] and tokenize("   \n") == []

    @settings(max_examples=300, deadline=None)
    @given(st.lists(st.sampled_from(list("ab C@#:/.!?, \t'é") + ["https://"]), max_size=40).map("".join))
    def test_offsets_faithful(self, text):
        toks = tokenize(text)
        pos = 0
        for t in toks:
            assert t.surface and text[t.start:t.end] == t.surface
            assert t.start >= pos and text[pos:t.start].strip() == ""
            pos = t.end
        assert text[pos:].strip() == ""
        assert tokenize(text) == toks


class TestSurfaceFeatures:
    def test_dimensions(self):
        assert SURFACE_DIM == 36 and len(SPECIAL_CHARS) == 32

    def test_all_caps(self):
        v = surface_features(Token("NASA", 0, 4))
        assert v[ALL_CAPS] == 0.1 and v[FIRST_CAP] == 0

    def test_first_cap(self):
        v = surface_features(Token("Paris", 0, 5))
        assert v[FIRST_CAP] == 0.1 and v[ALL_CAPS] == 0

    def test_hashtag(self):
        v = surface_features(Token("#win", 0, 4))
        assert v[HASHTAG] == 0.1 and v[FIRST_CAP] == 0 and v[ALL_CAPS] == 0
        assert np.count_nonzero(v) == 1

    def test_handle_with_caps(self):
        v = surface_features("@NASA")
        assert v[HANDLE] == 0.1 and v[ALL_CAPS] == 0.1 and np.count_nonzero(v) == 2

    @pytest.mark.parametrize("ch", SPECIAL_CHARS)
    def test_special_chars_exclusive(self, ch):
        v = surface_features(ch)
        assert np.count_nonzero(v) == 1 and v[SPECIAL_CHARS.index(ch)] == 0.1

    def test_lowercase_word_empty(self):
        assert not surface_features("love").any()

    @settings(max_examples=300, deadline=None)
    @given(st.text(min_size=1, max_size=8))
    def test_caps_exclusive_and_values(self, s):
        v = surface_features(s)
        assert not (v[FIRST_CAP] and v[ALL_CAPS])
        assert set(np.unique(v)) <= {0.0, 0.1}
        assert np.count_nonzero(v) <= 2


class TestPos:
    def test_noun(self):
        v = pos_one_hot("NOUN")
        assert v[POS_TAGS.index("NOUN")] == 0.1 and np.count_nonzero(v) == 1

    def test_orthogonal(self):
        M = np.array([pos_one_hot(t) for t in POS_TAGS])
        assert M.shape == (17, 17)
        np.testing.assert_allclose(M @ M.T, 0.01 * np.eye(17))

    def test_unknown(self):
        with pytest.raises(DataError, match="XYZ.*line 12"):
            pos_one_hot("XYZ", line=12)


@pytest.fixture
def table():
    rng = np.random.default_rng(0)
    return EmbeddingTable(["francisco", "Paris", "love"], rng.normal(size=(3, 200)), unk=np.full(200, -1.0))


class TestEmbed:
    def test_exact(self, table):
        np.testing.assert_array_equal(embed(Token("Paris", 0, 5), table), table.matrix[1])

    def test_lowercase_fallback(self, table):
        np.testing.assert_array_equal(embed("Francisco", table), table.matrix[0])

    def test_unk(self, table):
        np.testing.assert_array_equal(embed("Zzz", table), np.full(200, -1.0))

    def test_default_unk_zero(self):
        t = EmbeddingTable(["a"], np.ones((1, 200)))
        assert not embed("b", t).any()

    def test_load_file(self, tmp_path):
        rng = np.random.default_rng(1)
        rows = rng.normal(size=(2, 200))
        lines = [" ".join(["san", *(repr(float(x)) for x in rows[0])]), " ".join(["<UNK>", *(repr(float(x)) for x in rows[1])])]
        p = tmp_path / "emb.txt"
        p.write_text("\n".join(lines) + "\n", encoding="utf-8")
        t = EmbeddingTable.load(p)
        np.testing.assert_array_equal(t.lookup("San"), rows[0])
        np.testing.assert_array_equal(t.lookup("other"), rows[1])
        assert len(t) == 1 and len(t.checksum) == 64

    def test_load_bad_width(self, tmp_path):
        p = tmp_path / "emb.txt"
        p.write_text("word 0.1 0.2\n", encoding="utf-8")
        with pytest.raises(DataError, match=":1:"):
            EmbeddingTable.load(p)


class TestVectorize:
    def test_length_and_layout(self, table):
        v = vectorize(Token("Paris", 0, 5, "PROPN"), table)
        assert v.shape == (253,)
        np.testing.assert_array_equal(v[:200], table.matrix[1])
        np.testing.assert_array_equal(v[200:236], surface_features("Paris"))
        np.testing.assert_array_equal(v[236:], pos_one_hot("PROPN"))

    def test_zero_unk(self):
        t = EmbeddingTable([], np.zeros((0, 200)))
        v = vectorize(Token("Hello", 0, 5, "INTJ"), t)
        assert not v[:200].any() and set(np.flatnonzero(v)) <= set(range(200, 253))

    def test_deterministic(self, table):
        a = vectorize(Token("love", 0, 4, "VERB"), table)
        b = vectorize(Token("love", 10, 14, "VERB"), table)
        np.testing.assert_array_equal(a, b)

    def test_missing_pos(self, table):
        with pytest.raises(UsageError):
            vectorize(Token("love", 0, 4), table)

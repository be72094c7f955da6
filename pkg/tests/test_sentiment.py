import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from veracity.exceptions import DimensionError, ParseError
from veracity.sentiment import (FEATURE_NAMES, N_FEATURES, STANDARDIZED, SentimentFeaturizer, SentimentLexicon,
                                extract_sentiment, normalize_score, score_vader, sentiment_fc, tokenize_sentiment)

F = {name: i for i, name in enumerate(FEATURE_NAMES)}


def compound_of(s):
    return s / math.sqrt(s * s + 15.0)


def test_feature_order():
    assert N_FEATURES == 14
    assert FEATURE_NAMES[:4] == ("vader_neg", "vader_pos", "vader_neu", "vader_compound")
    assert FEATURE_NAMES[-1] == "word_char_ratio"
    assert list(STANDARDIZED) == list(range(4, 13))


def test_normalization():
    assert normalize_score(15.0) == pytest.approx(15 / math.sqrt(240))
    assert normalize_score(15.0) == pytest.approx(0.9682, abs=1e-3)
    assert normalize_score(0.0) == 0.0


def test_no_lexicon_tokens(lexicon):
    s = score_vader(lexicon, "the cat sat on a mat")
    assert s.compound == 0.0 and s.neu == 1.0 and s.neg == 0.0 and s.pos == 0.0
    assert tuple(score_vader(lexicon, "")) == (0.0, 1.0, 0.0, 0.0)


def test_negation_flips_sign(lexicon):
    assert lexicon.valence["good"] == 1.9
    good = score_vader(lexicon, "good").compound
    not_good = score_vader(lexicon, "not good").compound
    assert good == pytest.approx(compound_of(1.9), abs=1e-12)
    assert not_good == pytest.approx(-(0.74 * 1.9) / math.sqrt((0.74 * 1.9) ** 2 + 15), abs=1e-12)
    assert not_good == pytest.approx(-0.341, abs=1e-3)
    assert not_good < 0 < good


@pytest.mark.parametrize("text,total", [
    ("never was it good", -0.74 * 1.9),        # negator three tokens back
    ("never it was so much good", 1.9),        # four tokens back: outside the window
    ("very good", 1.9 + 0.293),
    ("really very good", 1.9 + 2 * 0.293),
    ("very bad", -2.5 - 0.293),
    ("barely good", 1.9 - 0.293),
    ("good!!", 1.9 + 2 * 0.292),
    ("bad!!!!!!", -2.5 - 4 * 0.292),          # emphasis capped at four
    ("GOOD", 1.9),
])
def test_rule_application(lexicon, text, total):
    assert score_vader(lexicon, text).compound == pytest.approx(compound_of(total), abs=1e-12)


def test_proportions_by_hand(lexicon):
    # good (+1.9) and bad (-2.5) plus one neutral word
    s = score_vader(lexicon, "good bad cat")
    pos, neg = 2.9, 3.5
    mass = pos + neg + 1
    assert s.pos == pytest.approx(pos / mass)
    assert s.neg == pytest.approx(neg / mass)
    assert s.neu == pytest.approx(1 / mass)


def test_great_example(lexicon):
    assert lexicon.valence["great"] == 3.1
    v = extract_sentiment(lexicon, "Great!! :)")
    assert v[F["n_exclamation"]] == 2
    assert v[F["n_happy_emoticons"]] == 1
    assert v[F["n_question"]] == 0
    assert v[F["n_pos_words"]] == 1
    assert v[F["frac_pos_words"]] == 1.0


def test_empty_text(lexicon):
    v = extract_sentiment(lexicon, "")
    assert tuple(v[:4]) == (0.0, 0.0, 1.0, 0.0)
    assert np.all(v[4:] == 0.0)


def test_question_example(lexicon):
    v = extract_sentiment(lexicon, "WHY???")
    assert v[F["n_question"]] == 3
    assert v[F["n_uppercase_chars"]] == 3
    assert v[F["word_char_ratio"]] == pytest.approx(1 / 6)


def test_emoticons_are_whole_chunks(lexicon):
    assert tokenize_sentiment("so sad :( ok", lexicon.emoticons) == ["so", "sad", ":(", "ok"]
    v = extract_sentiment(lexicon, "sad :( :(")
    assert v[F["n_sad_emoticons"]] == 2
    assert v[F["n_neg_words"]] == 1


words = st.sampled_from(["good", "bad", "not", "very", "cat", "WOW", "fake", "hoax", ":)", ":(", "!", "?",
                         "great!!", "never", "love", "the"])


@given(st.lists(words, max_size=12))
def test_invariants(lexicon, tokens):
    text = " ".join(tokens)
    v = extract_sentiment(lexicon, text)
    assert -1.0 <= v[F["vader_compound"]] <= 1.0
    assert v[0] + v[1] + v[2] == pytest.approx(1.0, abs=1e-9)
    counts = v[[F[n] for n in ("n_pos_words", "n_neg_words", "n_sad_emoticons", "n_happy_emoticons",
                               "n_exclamation", "n_question", "n_uppercase_chars")]]
    assert np.all(counts >= 0) and np.all(counts == np.round(counts))
    assert 0.0 <= v[F["frac_pos_words"]] <= 1.0 and 0.0 <= v[F["frac_neg_words"]] <= 1.0
    has_word = any(t.strip("!?:()") for t in tokens)
    if has_word:
        assert 0.0 < v[F["word_char_ratio"]] <= 1.0


def test_negated_lexicon_flips_compound(lexicon):
    text = "very good news, not bad at all"
    assert score_vader(lexicon.negated(), text).compound == pytest.approx(-score_vader(lexicon, text).compound)


def test_lexicon_validation():
    with pytest.raises(ValueError, match="outside"):
        SentimentLexicon(valence={"x": 5.0})
    with pytest.raises(ValueError, match="both"):
        SentimentLexicon(valence={"not": -1.0}, negators=frozenset({"not"}))


def test_lexicon_parse_and_round_trip(tmp_path):
    path = tmp_path / "lex.tsv"
    path.write_text("# comment\nYay\t2.0\n[boosters]\nvery\t0.293\n[negators]\nnot\n[happy]\n:)\n[sad]\n:(\n")
    lex = SentimentLexicon.load(path)
    assert lex.valence == {"yay": 2.0} and lex.boosters == {"very": 0.293}
    assert lex.negators == {"not"} and lex.happy == {":)"} and lex.sad == {":("}
    assert SentimentLexicon.from_dict(lex.to_dict()) == lex


@pytest.mark.parametrize("body,line", [
    ("good\tx\n", 1),
    ("ok\t1.0\ngood\n", 2),
    ("[negators]\nnot\tno\n", 2),
    ("good\t9\n", None),
])
def test_lexicon_parse_errors(tmp_path, body, line):
    path = tmp_path / "lex.tsv"
    path.write_text(body)
    with pytest.raises(ParseError) as info:
        SentimentLexicon.load(path)
    assert info.value.line == line
    assert str(path) in str(info.value)


def test_sentiment_fc():
    rng = np.random.default_rng(0)
    f = rng.standard_normal(14)
    assert np.all(sentiment_fc(np.zeros((32, 14)), f) == 0.0)
    perm = rng.permutation(14)[:5]
    np.testing.assert_array_equal(sentiment_fc(np.eye(14)[perm], f), f[perm])
    W = rng.standard_normal((32, 14))
    expected = [sum(W[i, j] * f[j] for j in range(14)) for i in range(32)]
    np.testing.assert_allclose(sentiment_fc(W, f), expected, atol=1e-12)
    with pytest.raises(DimensionError):
        sentiment_fc(W, np.ones(13))


def test_featurizer_standardizes_counts(lexicon):
    texts = ["good good!", "bad?", "WOW great", "nothing here"]
    feat = SentimentFeaturizer(lexicon).fit(texts)
    out = feat.transform(texts)
    assert out.shape == (4, 14)
    raw = feat.raw_features(texts)
    np.testing.assert_array_equal(out[:, :4], raw[:, :4])
    np.testing.assert_array_equal(out[:, 13], raw[:, 13])
    for j in STANDARDIZED:
        col = out[:, j]
        if raw[:, j].std() > 0:
            assert col.mean() == pytest.approx(0.0, abs=1e-12)
            assert col.std() == pytest.approx(1.0)
        else:
            assert feat.scale_[j] == 1.0


def test_featurizer_defaults_to_bundled_lexicon(tmp_path):
    assert SentimentFeaturizer().fit(["good"]).lexicon_ == SentimentLexicon.bundled()
    path = tmp_path / "lex.tsv"
    path.write_text("yay\t2\n")
    assert SentimentFeaturizer(str(path)).fit(["yay"]).lexicon_.valence == {"yay": 2.0}

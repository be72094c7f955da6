import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from veracity.exceptions import ParseError
from veracity.text import OOV_ID, PAD_ID, TextEncoder, Vocabulary, encode, load_embeddings, tokenize, write_embeddings


@pytest.mark.parametrize("text,expected", [
    ("Check https://t.co/x @bob #Fake", ["check", "<url>", "<user>", "fake"]),
    ("", []),
    ("Hello, world!", ["hello", ",", "world", "!"]),
    ("Don't PANIC", ["don't", "panic"]),
    ("see www.example.com now", ["see", "<url>", "now"]),
])
def test_tokenize(text, expected):
    assert tokenize(text) == expected


def test_tokenize_normalizes_unicode():
    assert tokenize("café") == tokenize("café") == ["café"]


def test_vocabulary_reserved_ids_and_order():
    vocab = Vocabulary.build([["b", "a", "b"], ["a", "c", "b"]], min_freq=2)
    assert vocab.itos[:2] == ["<pad>", "<oov>"]
    assert vocab.words == ["b", "a"]
    assert vocab.lookup(["a", "zzz"]) == [3, OOV_ID]
    assert PAD_ID == 0 and OOV_ID == 1


@given(st.lists(st.lists(st.sampled_from("abcdefg"), max_size=6), max_size=6))
def test_vocabulary_is_bijective(lists):
    vocab = Vocabulary.build(lists, min_freq=1)
    ids = vocab.lookup(vocab.itos)
    assert ids == list(range(len(vocab)))


def test_vocabulary_save_load(tmp_path):
    vocab = Vocabulary(["x", "y"])
    vocab.save(tmp_path / "v.tsv")
    assert Vocabulary.load(tmp_path / "v.tsv") == vocab
    (tmp_path / "bad.tsv").write_text("<pad>\t0\nx\t5\n")
    with pytest.raises(ParseError):
        Vocabulary.load(tmp_path / "bad.tsv")
    with pytest.raises(ValueError):
        Vocabulary(["x", "x"])


def test_load_embeddings(tmp_path):
    vocab = Vocabulary(["hello", "absent"])
    values = [round(0.1 * i, 1) for i in range(1, 51)]
    path = tmp_path / "e.txt"
    path.write_text("hello " + " ".join(map(str, values)) + "\nother " + " ".join(["0"] * 50) + "\n")
    table, coverage = load_embeddings(path, vocab)
    assert table.shape == (4, 50)
    assert table[vocab.stoi["hello"]].tolist() == values
    assert np.all(table[vocab.stoi["absent"]] == 0.0)
    assert np.all(table[PAD_ID] == 0.0) and np.all(table[OOV_ID] == 0.0)
    assert coverage == 0.5


@pytest.mark.parametrize("body,line", [
    ("a 1 2\nword a b\n", 2),
    ("a 1 2\nb 1 2 3\n", 2),
    ("a\n", 1),
])
def test_load_embeddings_errors(tmp_path, body, line):
    path = tmp_path / "e.txt"
    path.write_text(body)
    with pytest.raises(ParseError) as info:
        load_embeddings(path, Vocabulary(["a"]))
    assert info.value.line == line


def test_write_embeddings_round_trip(tmp_path):
    vecs = {"a": np.array([0.1, -1 / 3]), "b": np.array([2.0, 1e-20])}
    write_embeddings(tmp_path / "e.txt", vecs)
    table, cov = load_embeddings(tmp_path / "e.txt", Vocabulary(["a", "b"]))
    np.testing.assert_array_equal(table[2:], [vecs["a"], vecs["b"]])
    assert cov == 1.0


def test_encode():
    vocab = Vocabulary(["t1", "t2", "t3"])
    assert encode(["t1", "t2", "t3"], vocab, 2, 2).tolist() == [[2, 3], [4, 0]]
    assert np.all(encode([], vocab, 3, 4) == 0)
    full = encode(["t1", "t2", "t3", "t1"], vocab, 2, 2)
    assert full.tolist() == [[2, 3], [4, 2]]
    assert encode(["t1"] * 9 + ["q"], vocab, 2, 2).tolist() == [[2, 2], [2, 2]]
    assert encode(["q"], vocab, 1, 2).tolist() == [[OOV_ID, 0]]
    with pytest.raises(ValueError):
        encode([], vocab, 0, 2)


def test_text_encoder_fit_transform():
    texts = ["good news today", "bad news today", "news"]
    enc = TextEncoder({"news": [1.0, 2.0], "today": [3.0, 4.0]}, steps=2, seg_len=2, min_freq=2).fit(texts)
    assert enc.vocabulary_.words == ["news", "today"]
    assert enc.embedding_table_.shape == (4, 2)
    assert enc.coverage_ == 1.0
    grid = enc.transform(["news flash today"])
    assert grid.shape == (1, 2, 2)
    assert grid.tolist() == [[[2, OOV_ID], [3, 0]]]
    no_vectors = TextEncoder(None, k=5).fit(texts)
    assert no_vectors.embedding_table_.shape == (4, 5) and no_vectors.coverage_ == 0.0

"""Text preprocessing: tokenisation, vocabulary, GloVe-format embeddings and
fixed-size segment encoding."""

from __future__ import annotations

import re
import unicodedata
from collections import Counter
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .exceptions import ParseError

PAD, OOV = "<pad>", "<oov>"
PAD_ID, OOV_ID = 0, 1

_URL = re.compile(r"(?:https?://|www\.)\S+", re.IGNORECASE)
_USER = re.compile(r"@\w+")
_HASHTAG = re.compile(r"#(\w+)")
_TOKEN = re.compile(r"<url>|<user>|\w+(?:'\w+)*|[^\w\s]")


def tokenize(text: str) -> list[str]:
    """Lowercased tokens with URLs and mentions replaced by placeholders.

    >>> tokenize("Check https://t.co/x @bob #Fake")
    ['check', '<url>', '<user>', 'fake']
    """
    text = unicodedata.normalize("NFC", text)
    text = _URL.sub(" <url> ", text)
    text = _USER.sub(" <user> ", text)
    text = _HASHTAG.sub(r"\1", text)
    return _TOKEN.findall(text.lower())


class Vocabulary:
    """Token <-> id map with ``0`` for padding and ``1`` for unknown tokens."""

    def __init__(self, tokens: Sequence[str] = ()):
        self.itos = [PAD, OOV]
        self.stoi = {PAD: PAD_ID, OOV: OOV_ID}
        for tok in tokens:
            if tok in self.stoi:
                raise ValueError(f"duplicate vocabulary token {tok!r}")
            self.stoi[tok] = len(self.itos)
            self.itos.append(tok)

    @classmethod
    def build(cls, token_lists: Iterable[Sequence[str]], min_freq: int = 2) -> "Vocabulary":
        counts = Counter(tok for tokens in token_lists for tok in tokens)
        kept = [t for t, n in counts.items() if n >= min_freq and t not in (PAD, OOV)]
        kept.sort(key=lambda t: (-counts[t], t))
        return cls(kept)

    def __len__(self):
        return len(self.itos)

    def __contains__(self, token):
        return token in self.stoi

    def __eq__(self, other):
        return isinstance(other, Vocabulary) and self.itos == other.itos

    def lookup(self, tokens: Iterable[str]) -> list[int]:
        return [self.stoi.get(t, OOV_ID) for t in tokens]

    @property
    def words(self) -> list[str]:
        """Tokens with ids >= 2."""
        return self.itos[2:]

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for i, tok in enumerate(self.itos):
                fh.write(f"{tok}\t{i}\n")

    @classmethod
    def load(cls, path) -> "Vocabulary":
        path = Path(path)
        entries = []
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.rstrip("\n")
                if not line:
                    continue
                tok, sep, idx = line.rpartition("\t")
                if not sep:
                    raise ParseError("expected 'token<TAB>id'", path, lineno)
                try:
                    entries.append((int(idx), tok))
                except ValueError:
                    raise ParseError(f"bad id {idx!r}", path, lineno) from None
        entries.sort()
        if [i for i, _ in entries] != list(range(len(entries))) or [t for _, t in entries[:2]] != [PAD, OOV]:
            raise ParseError("ids must be 0..V-1 with <pad>=0 and <oov>=1", path)
        return cls([t for _, t in entries[2:]])


def load_embeddings(path, vocab: Vocabulary, k: int | None = None):
    """Read GloVe text vectors for the words of ``vocab``.

    Returns ``(table, coverage)``: a [V, k] float64 table whose padding,
    OOV and not-found rows are zero, and the fraction of vocabulary words
    (ids >= 2) found in the file.
    """
    path = Path(path)
    rows: dict[int, np.ndarray] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.rstrip("\n").rstrip(" ").split(" ")
            if len(parts) == 1 and not parts[0]:
                continue
            word, values = parts[0], parts[1:]
            if k is None:
                if not values:
                    raise ParseError("line has no vector values", path, lineno)
                k = len(values)
            if len(values) != k:
                raise ParseError(f"expected {k} values, found {len(values)}", path, lineno)
            try:
                vec = np.array([float(v) for v in values], dtype=np.float64)
            except ValueError:
                raise ParseError(f"non-numeric vector value for {word!r}", path, lineno) from None
            if not np.all(np.isfinite(vec)):
                raise ParseError(f"non-finite vector value for {word!r}", path, lineno)
            idx = vocab.stoi.get(word)
            if idx is not None and idx > OOV_ID:
                rows[idx] = vec
    if k is None:
        raise ParseError("embedding file is empty", path)
    table = np.zeros((len(vocab), k), dtype=np.float64)
    for idx, vec in rows.items():
        table[idx] = vec
    n_words = len(vocab) - 2
    coverage = len(rows) / n_words if n_words else 0.0
    return table, coverage


def write_embeddings(path, vectors) -> None:
    """Write ``{word: vector}`` in GloVe text format."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for word, vec in vectors.items():
            fh.write(word + " " + " ".join(repr(float(v)) for v in vec) + "\n")


def encode(tokens: Sequence[str], vocab: Vocabulary, steps: int, seg_len: int) -> np.ndarray:
    """Token ids laid out as a [steps, seg_len] grid, zero-padded at the tail, overflow dropped."""
    if steps < 1 or seg_len < 1:
        raise ValueError("steps and seg_len must be >= 1")
    ids = vocab.lookup(tokens[: steps * seg_len])
    grid = np.zeros(steps * seg_len, dtype=np.int64)
    grid[: len(ids)] = ids
    return grid.reshape(steps, seg_len)


class TextEncoder(TransformerMixin, BaseEstimator):
    """Fit a vocabulary (and embedding table) on training texts; encode texts as id grids."""

    def __init__(self, embeddings=None, steps=4, seg_len=32, min_freq=2, k=50):
        self.embeddings = embeddings
        self.steps = steps
        self.seg_len = seg_len
        self.min_freq = min_freq
        self.k = k

    def fit(self, X, y=None):
        self.vocabulary_ = Vocabulary.build((tokenize(t) for t in X), self.min_freq)
        self._fit_table()
        return self

    def _fit_table(self):
        if self.embeddings is None:
            self.embedding_table_ = np.zeros((len(self.vocabulary_), self.k))
            self.coverage_ = 0.0
        elif isinstance(self.embeddings, (str, Path)):
            self.embedding_table_, self.coverage_ = load_embeddings(self.embeddings, self.vocabulary_)
        else:
            # mapping word -> vector
            vecs = {w: np.asarray(v, dtype=np.float64) for w, v in self.embeddings.items()}
            k = len(next(iter(vecs.values()))) if vecs else self.k
            table = np.zeros((len(self.vocabulary_), k))
            found = 0
            for w in self.vocabulary_.words:
                if w in vecs:
                    table[self.vocabulary_.stoi[w]] = vecs[w]
                    found += 1
            self.embedding_table_ = table
            self.coverage_ = found / max(len(self.vocabulary_) - 2, 1)

    def transform(self, X):
        check_is_fitted(self, "vocabulary_")
        grids = [encode(tokenize(t), self.vocabulary_, self.steps, self.seg_len) for t in X]
        return np.array(grids, dtype=np.int64).reshape(len(grids), self.steps, self.seg_len)

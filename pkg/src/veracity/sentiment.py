"""Lexicon-and-rule sentiment scoring and the 14-feature sentiment vector.

The scorer is a reduced VADER: token valences from a lexicon, a 3-token
negation window, booster increments, exclamation emphasis and the
``S / sqrt(S^2 + 15)`` compound normalisation.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, NamedTuple

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .exceptions import DimensionError, ParseError

NEGATION_SCALAR = -0.74
BOOSTER_INCREMENT = 0.293
EXCLAMATION_INCREMENT = 0.292
MAX_EXCLAMATIONS = 4
NORMALIZATION_ALPHA = 15.0
NEGATION_WINDOW = 3

FEATURE_NAMES = (
    "vader_neg",
    "vader_pos",
    "vader_neu",
    "vader_compound",
    "n_pos_words",
    "n_neg_words",
    "frac_pos_words",
    "frac_neg_words",
    "n_sad_emoticons",
    "n_happy_emoticons",
    "n_exclamation",
    "n_question",
    "n_uppercase_chars",
    "word_char_ratio",
)
N_FEATURES = len(FEATURE_NAMES)
# count-like features get train-set standardisation; scores and the ratio are already bounded
STANDARDIZED = np.arange(4, 13)

_WORD = re.compile(r"\w+(?:'\w+)*")
_PIECES = re.compile(r"\w+(?:'\w+)*|[^\w\s]")
_SECTIONS = ("valence", "boosters", "negators", "happy", "sad")


@dataclass(frozen=True)
class SentimentLexicon:
    valence: dict = field(default_factory=dict)
    boosters: dict = field(default_factory=dict)
    negators: frozenset = frozenset()
    happy: frozenset = frozenset()
    sad: frozenset = frozenset()

    def __post_init__(self):
        for token, v in self.valence.items():
            if not -4.0 <= v <= 4.0:
                raise ValueError(f"valence of {token!r} is {v}, outside [-4, 4]")
        groups = {
            "valence": set(self.valence),
            "boosters": set(self.boosters),
            "negators": set(self.negators),
            "happy": set(self.happy),
            "sad": set(self.sad),
        }
        names = list(groups)
        for a_i, a in enumerate(names):
            for b in names[a_i + 1 :]:
                common = groups[a] & groups[b]
                if common:
                    raise ValueError(f"tokens {sorted(common)} appear in both {a} and {b}")

    @property
    def emoticons(self) -> frozenset:
        return self.happy | self.sad

    @classmethod
    def load(cls, path) -> "SentimentLexicon":
        """Read the sectioned TSV format (``[boosters]``, ``[negators]``, ``[happy]``, ``[sad]``)."""
        path = Path(path)
        with open(path, encoding="utf-8") as fh:
            return cls.parse(fh, source=path)

    @classmethod
    def parse(cls, lines: Iterable[str], source=None) -> "SentimentLexicon":
        section = "valence"
        data = {"valence": {}, "boosters": {}, "negators": set(), "happy": set(), "sad": set()}
        for lineno, raw in enumerate(lines, start=1):
            line = raw.rstrip("\n").rstrip("\r")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            stripped = line.strip()
            if stripped.startswith("[") and stripped.endswith("]") and stripped[1:-1] in _SECTIONS:
                section = stripped[1:-1]
                continue
            parts = line.split("\t")
            token = parts[0].strip()
            if section in ("valence", "boosters"):
                if len(parts) != 2:
                    raise ParseError(f"expected 'token<TAB>value' in [{section}]", source, lineno)
                try:
                    value = float(parts[1])
                except ValueError:
                    raise ParseError(f"bad number {parts[1]!r}", source, lineno) from None
                data[section][token.lower()] = value
            else:
                if len(parts) != 1:
                    raise ParseError(f"expected a single token in [{section}]", source, lineno)
                data[section].add(token if section in ("happy", "sad") else token.lower())
        try:
            return cls(
                valence=data["valence"],
                boosters=data["boosters"],
                negators=frozenset(data["negators"]),
                happy=frozenset(data["happy"]),
                sad=frozenset(data["sad"]),
            )
        except ValueError as exc:
            raise ParseError(str(exc), source) from None

    @classmethod
    def bundled(cls) -> "SentimentLexicon":
        text = resources.files("veracity").joinpath("data/lexicon.tsv").read_text(encoding="utf-8")
        return cls.parse(text.splitlines(), source="<bundled lexicon>")

    def negated(self) -> "SentimentLexicon":
        """Copy with every valence sign flipped."""
        return SentimentLexicon(
            {t: -v for t, v in self.valence.items()}, dict(self.boosters), self.negators, self.happy, self.sad
        )

    def to_dict(self) -> dict:
        return {
            "valence": dict(sorted(self.valence.items())),
            "boosters": dict(sorted(self.boosters.items())),
            "negators": sorted(self.negators),
            "happy": sorted(self.happy),
            "sad": sorted(self.sad),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SentimentLexicon":
        return cls(
            dict(data["valence"]),
            dict(data["boosters"]),
            frozenset(data["negators"]),
            frozenset(data["happy"]),
            frozenset(data["sad"]),
        )


def tokenize_sentiment(text: str, emoticons=frozenset()) -> list[str]:
    """Whitespace then punctuation split, case preserved; whole-chunk emoticons kept intact."""
    tokens = []
    for chunk in text.split():
        if chunk in emoticons:
            tokens.append(chunk)
        else:
            tokens.extend(_PIECES.findall(chunk))
    return tokens


def _is_word(token: str) -> bool:
    return _WORD.fullmatch(token) is not None


class VaderScores(NamedTuple):
    neg: float
    neu: float
    pos: float
    compound: float


def normalize_score(score: float, alpha: float = NORMALIZATION_ALPHA) -> float:
    return score / math.sqrt(score * score + alpha)


def _token_valences(lexicon: SentimentLexicon, tokens: list[str]) -> list[float]:
    items = [t for t in tokens if t in lexicon.emoticons or _is_word(t)]
    keys = [t if t in lexicon.emoticons else t.lower() for t in items]
    valences = []
    for idx, key in enumerate(keys):
        v = lexicon.valence.get(key, 0.0)
        if v != 0.0:
            sign = 1.0 if v > 0 else -1.0
            j = idx - 1
            while j >= 0 and keys[j] in lexicon.boosters:
                v += sign * lexicon.boosters[keys[j]]
                j -= 1
            if any(k in lexicon.negators for k in keys[max(0, idx - NEGATION_WINDOW) : idx]):
                v *= NEGATION_SCALAR
        valences.append(v)
    return valences


def score_vader(lexicon: SentimentLexicon, text: str) -> VaderScores:
    """Return ``(neg, neu, pos, compound)`` for ``text``."""
    tokens = tokenize_sentiment(text, lexicon.emoticons)
    valences = _token_valences(lexicon, tokens)
    if not valences:
        return VaderScores(0.0, 1.0, 0.0, 0.0)
    emphasis = min(text.count("!"), MAX_EXCLAMATIONS) * EXCLAMATION_INCREMENT
    total = math.fsum(valences)
    if total > 0:
        total += emphasis
    elif total < 0:
        total -= emphasis
    compound = normalize_score(total)

    pos_sum = math.fsum(v + 1.0 for v in valences if v > 0)
    neg_sum = math.fsum(v - 1.0 for v in valences if v < 0)
    neutral = sum(1 for v in valences if v == 0)
    if pos_sum > abs(neg_sum):
        pos_sum += emphasis
    elif pos_sum < abs(neg_sum):
        neg_sum -= emphasis
    mass = pos_sum + abs(neg_sum) + neutral
    if mass == 0:
        return VaderScores(0.0, 1.0, 0.0, 0.0)
    return VaderScores(abs(neg_sum) / mass, neutral / mass, pos_sum / mass, compound)


def extract_sentiment(lexicon: SentimentLexicon, text: str) -> np.ndarray:
    """The 14 raw sentiment features of ``text``, ordered as ``FEATURE_NAMES``."""
    tokens = tokenize_sentiment(text, lexicon.emoticons)
    words = [t for t in tokens if t not in lexicon.emoticons and _is_word(t)]
    n_words = len(words)
    n_pos = sum(1 for w in words if lexicon.valence.get(w.lower(), 0.0) > 0)
    n_neg = sum(1 for w in words if lexicon.valence.get(w.lower(), 0.0) < 0)
    scores = score_vader(lexicon, text)
    return np.array(
        [
            scores.neg,
            scores.pos,
            scores.neu,
            scores.compound,
            n_pos,
            n_neg,
            n_pos / n_words if n_words else 0.0,
            n_neg / n_words if n_words else 0.0,
            sum(1 for t in tokens if t in lexicon.sad),
            sum(1 for t in tokens if t in lexicon.happy),
            text.count("!"),
            text.count("?"),
            sum(1 for ch in text if ch.isupper()),
            n_words / len(text) if text else 0.0,
        ],
        dtype=np.float64,
    )


def sentiment_fc(W_sf: np.ndarray, features: np.ndarray) -> np.ndarray:
    """Bias-free linear projection of a sentiment vector."""
    W_sf = np.asarray(W_sf)
    features = np.asarray(features)
    if W_sf.ndim != 2 or features.shape != (W_sf.shape[1],):
        raise DimensionError(f"cannot project sentiment vector {features.shape} with weights {W_sf.shape}")
    return W_sf @ features


class SentimentFeaturizer(TransformerMixin, BaseEstimator):
    """Map raw texts to standardised 14-dimensional sentiment vectors.

    ``fit`` records the mean and standard deviation of the count features on
    the training texts; ``transform`` applies them.
    """

    def __init__(self, lexicon=None):
        self.lexicon = lexicon

    def _lexicon(self) -> SentimentLexicon:
        if self.lexicon is None:
            return SentimentLexicon.bundled()
        if isinstance(self.lexicon, SentimentLexicon):
            return self.lexicon
        return SentimentLexicon.load(self.lexicon)

    def raw_features(self, texts) -> np.ndarray:
        lexicon = getattr(self, "lexicon_", None) or self._lexicon()
        rows = [extract_sentiment(lexicon, t) for t in texts]
        return np.array(rows, dtype=np.float64).reshape(len(rows), N_FEATURES)

    def fit(self, X, y=None):
        self.lexicon_ = self._lexicon()
        raw = self.raw_features(X)
        self.mean_ = np.zeros(N_FEATURES)
        self.scale_ = np.ones(N_FEATURES)
        if len(raw):
            mean = raw[:, STANDARDIZED].mean(axis=0)
            std = raw[:, STANDARDIZED].std(axis=0)
            self.mean_[STANDARDIZED] = mean
            self.scale_[STANDARDIZED] = np.where(std > 0, std, 1.0)
        return self

    def standardize(self, raw: np.ndarray) -> np.ndarray:
        check_is_fitted(self, "mean_")
        return (raw - self.mean_) / self.scale_

    def transform(self, X):
        return self.standardize(self.raw_features(X))

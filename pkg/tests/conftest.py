import json

import numpy as np
import pytest

from veracity.features import MessageFeaturizer
from veracity.pipeline import Message, split_by_event, write_corpus
from veracity.sentiment import SentimentLexicon
from veracity.synthetic import make_synthetic_corpus, write_synthetic
from veracity.text import write_embeddings
from veracity.visual import write_visual_features

# PASS/FAIL lines from test_acceptance.py, echoed in the terminal summary
ACCEPTANCE_LINES = []

# small but full-shaped model used wherever real training happens
TINY = dict(window_sizes=(2, 3, 4), d=8, lstm1=16, lstm2=8, sent_fc=8, vis_fc=8, head_hidden=10, batch=8,
            lr=0.2, max_epochs=50, patience=10)
TINY_DATA = dict(steps=2, seg_len=12)


@pytest.fixture(scope="session")
def lexicon():
    return SentimentLexicon.bundled()


@pytest.fixture(scope="session")
def synthetic():
    """Synthetic corpus split by event and featurised with the tiny grid."""
    corpus = make_synthetic_corpus(seed=0)
    train, test = split_by_event(corpus.messages, 0.7, seed=0)
    featurizer = MessageFeaturizer(embeddings=corpus.embeddings, lexicon=SentimentLexicon.bundled(),
                                   visual=corpus.visual, k=8, **TINY_DATA).fit(train)
    return {
        "corpus": corpus,
        "featurizer": featurizer,
        "train": featurizer.transform(train),
        "test": featurizer.transform(test),
    }


FIXTURE_MESSAGES = [
    Message("a1", "Breaking: the dam has failed, share now!!", 1, "flood", "i1"),
    Message("a2", "Officials say the dam is safe :)", 0, "flood", "i2"),
    Message("b1", "Shark seen swimming on the highway #fake", 1, "storm", "i3"),
    Message("b2", "Storm report: roads closed, stay safe", 0, "storm", None),
    Message("c1", "NOT a hoax, the photo is bad and fake", 1, "quake", "i5"),
    Message("c2", "Quake report from the official agency", 0, "quake", "i6"),
]


@pytest.fixture
def fixture_files(tmp_path):
    """Six-message corpus with embeddings, lexicon and 8-dim image features on disk."""
    rng = np.random.default_rng(5)
    words = ["the", "dam", "report", "safe", "storm", "quake", "official", "share", "photo", "is"]
    write_embeddings(tmp_path / "emb.txt", {w: rng.standard_normal(4) for w in words})
    write_corpus(tmp_path / "corpus.jsonl", FIXTURE_MESSAGES)
    write_visual_features(tmp_path / "visual.tsv",
                          {f"i{i}": rng.random(8, dtype=np.float32) for i in (1, 2, 3, 5, 6)})
    paths = write_synthetic(tmp_path / "syn", n=8, visual_dim=8)
    return {
        "corpus": tmp_path / "corpus.jsonl",
        "embeddings": tmp_path / "emb.txt",
        "visual": tmp_path / "visual.tsv",
        "lexicon": paths["lexicon"],
        "dir": tmp_path,
    }


def read_jsonl(path):
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda l: int(l.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)

"""Seeded synthetic corpus with planted signals in all three channels.

Each message carries three hidden bits: a text pattern phrase, a sentiment
polarity (lexicon words that have no embedding, so only the sentiment
channel sees them) and a shift of the image feature along a fixed
direction. The label is the majority of the three bits, so any single
channel agrees with the label on about 75% of messages while the fused
model can reach 100%.

Run ``python -m veracity.synthetic OUT_DIR`` to write ``corpus.jsonl``,
``embeddings.txt``, ``visual.tsv`` and ``lexicon.tsv``.
"""

from __future__ import annotations

import argparse
import shutil
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .pipeline import Message, write_corpus
from .text import write_embeddings
from .visual import VISUAL_DIM, write_visual_features

FAKE_PHRASES = (("breaking", "exclusive"), ("share", "before", "deleted"), ("they", "hide", "truth"))
REAL_PHRASES = (("official", "statement"), ("report", "confirms"), ("according", "to", "agency"))
POSITIVE_WORDS = ("good", "great", "happy", "excellent", "wonderful", "love", "nice", "glad")
NEGATIVE_WORDS = ("bad", "terrible", "awful", "sad", "hate", "horrible", "worst", "angry")


@dataclass
class SyntheticCorpus:
    messages: list
    embeddings: dict
    visual: dict
    bits: np.ndarray  # (n, 3): text, sentiment, visual


def make_synthetic_corpus(n: int = 400, seed: int = 0, n_events: int = 40, k: int = 8, n_filler: int = 60,
                          visual_dim: int = VISUAL_DIM, min_len: int = 10, max_len: int = 16,
                          visual_shift: float = 0.0125, visual_noise: float = 0.05, filler_scale: float = 0.3,
                          ) -> SyntheticCorpus:
    rng = np.random.default_rng(seed)
    filler = [f"w{i:02d}" for i in range(n_filler)]
    embed_words = filler + sorted({w for p in FAKE_PHRASES + REAL_PHRASES for w in p})
    embeddings = {w: rng.standard_normal(k) * (filler_scale if w in filler else 1.0) for w in embed_words}
    direction = rng.choice([-1.0, 1.0], size=visual_dim)

    bits = rng.integers(0, 2, size=(n, 3))
    labels = (bits.sum(axis=1) >= 2).astype(int)
    events = rng.integers(0, n_events, size=n)
    messages, visual = [], {}
    for i in range(n):
        text_bit, sent_bit, vis_bit = bits[i]
        words = list(rng.choice(filler, size=int(rng.integers(min_len, max_len + 1))))
        phrases = FAKE_PHRASES if text_bit else REAL_PHRASES
        phrase = phrases[int(rng.integers(len(phrases)))]
        at = int(rng.integers(len(words) + 1))
        words[at:at] = list(phrase)
        pool = NEGATIVE_WORDS if sent_bit else POSITIVE_WORDS
        for w in rng.choice(pool, size=2, replace=False):
            at = int(rng.integers(len(words) + 1))
            words.insert(at, str(w))
        text = " ".join(words)
        image_ref = f"img{i:04d}"
        base = visual_noise * rng.random(visual_dim)
        visual[image_ref] = (base + (1.0 if vis_bit else -1.0) * visual_shift * direction).astype(np.float32)
        messages.append(Message(f"m{i:04d}", text, int(labels[i]), f"ev{int(events[i]):02d}", image_ref))
    return SyntheticCorpus(messages, embeddings, visual, bits)


def write_synthetic(out_dir, **kwargs) -> dict:
    """Write the corpus files into ``out_dir``; returns their paths by role."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    corpus = make_synthetic_corpus(**kwargs)
    paths = {
        "corpus": out / "corpus.jsonl",
        "embeddings": out / "embeddings.txt",
        "visual": out / "visual.tsv",
        "lexicon": out / "lexicon.tsv",
    }
    write_corpus(paths["corpus"], corpus.messages)
    write_embeddings(paths["embeddings"], corpus.embeddings)
    write_visual_features(paths["visual"], corpus.visual)
    with resources.as_file(resources.files("veracity").joinpath("data/lexicon.tsv")) as src:
        shutil.copyfile(src, paths["lexicon"])
    return paths


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description="Write a synthetic three-channel corpus.")
    parser.add_argument("out_dir")
    parser.add_argument("--n", type=int, default=400)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--events", type=int, default=40)
    parser.add_argument("--k", type=int, default=8)
    args = parser.parse_args(argv)
    paths = write_synthetic(args.out_dir, n=args.n, seed=args.seed, n_events=args.events, k=args.k)
    for role, path in paths.items():
        print(f"{role}\t{path}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())

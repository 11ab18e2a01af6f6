"""Dataset IO and a synthetic corpus generator for dataset-free runs.

The on-disk format is UTF-8 text, one document per nonempty line,
``label<TAB>text``, with labels ``1``/``0`` or ``positive``/``negative``
(case-insensitive).
"""

from __future__ import annotations

import os

import numpy as np

from .sampling import round_half_up
from .text import Corpus

_LABEL_TOKENS = {"1": 1, "0": 0, "positive": 1, "negative": 0}

DATASET_FORMATS = ("tsv",)


def load_dataset(path: str | os.PathLike, format: str = "tsv",
                 name: str | None = None) -> Corpus:
    """Load a labelled corpus; ``tsv`` is the only supported format."""
    if format not in DATASET_FORMATS:
        raise ValueError(f"unknown dataset format {format!r}; supported: {DATASET_FORMATS}")
    return load_tsv_corpus(path, name)


def load_tsv_corpus(path: str | os.PathLike, name: str | None = None) -> Corpus:
    """Read a label<TAB>text file into a Corpus, preserving line order.

    Raises with the offending line number on a missing tab or an unknown
    label token; raises "empty corpus" when no nonempty lines exist.
    """
    documents: list[str] = []
    labels: list[int] = []
    with open(path, encoding="utf-8") as handle:
        for line_number, line in enumerate(handle, start=1):
            line = line.rstrip("\n").rstrip("\r")
            if not line.strip():
                continue
            if "\t" not in line:
                raise ValueError(
                    f"{path}: malformed line {line_number}: expected label<TAB>text"
                )
            token, text = line.split("\t", 1)
            label = _LABEL_TOKENS.get(token.strip().lower())
            if label is None:
                raise ValueError(
                    f"{path}: unknown label {token.strip()!r} at line {line_number}"
                )
            documents.append(text)
            labels.append(label)
    if not documents:
        raise ValueError(f"{path}: empty corpus")
    corpus_name = name if name is not None else os.path.basename(str(path))
    return Corpus(tuple(documents), np.array(labels, dtype=np.int8), corpus_name)


def write_tsv_corpus(corpus: Corpus, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for text, label in zip(corpus.documents, corpus.labels):
            handle.write(f"{int(label)}\t{text}\n")


def synthetic_corpus(
    name: str,
    size: int,
    positive_prevalence: float,
    *,
    vocabulary_size: int = 400,
    mean_doc_length: int = 30,
    separation: float = 1.0,
    seed: int = 0,
    world_seed: int | None = None,
) -> Corpus:
    """Generate a labelled corpus from two overlapping unigram distributions.

    Both classes share a Zipf-shaped base distribution over synthetic tokens
    ``w0000``..; each token carries a class affinity drawn once from N(0, 1),
    tilted by +/- separation/2 in the exponent, so ``separation`` controls how
    linearly separable the classes are (0 = identical distributions).

    ``world_seed`` fixes the class-conditional distributions; ``seed`` drives
    the document sampling.  Corpora meant to share a distribution (a train
    and test pair) must share the world seed and differ only in ``seed``.
    ``world_seed`` defaults to ``seed``.

    Deterministic given all arguments.
    """
    if size < 1:
        raise ValueError("size must be positive")
    if not (0.0 <= positive_prevalence <= 1.0):
        raise ValueError("positive_prevalence must lie in [0, 1]")
    if vocabulary_size < 2:
        raise ValueError("vocabulary_size must be at least 2")
    world_rng = np.random.default_rng(seed if world_seed is None else world_seed)
    rng = np.random.default_rng(seed)
    base_logits = -np.log(np.arange(vocabulary_size) + 2.0)
    affinity = world_rng.standard_normal(vocabulary_size)

    def class_distribution(sign: float) -> np.ndarray:
        logits = base_logits + sign * separation * affinity / 2.0
        weights = np.exp(logits - logits.max())
        return weights / weights.sum()

    distributions = {1: class_distribution(+1.0), 0: class_distribution(-1.0)}
    tokens = np.array([f"w{i:04d}" for i in range(vocabulary_size)])

    n_pos = round_half_up(positive_prevalence * size)
    labels = np.array([1] * n_pos + [0] * (size - n_pos), dtype=np.int8)
    labels = labels[rng.permutation(size)]
    lengths = rng.poisson(mean_doc_length, size) + 5
    documents = []
    for label, length in zip(labels, lengths):
        ids = rng.choice(vocabulary_size, size=int(length), p=distributions[int(label)])
        documents.append(" ".join(tokens[ids]))
    return Corpus(tuple(documents), labels, name)

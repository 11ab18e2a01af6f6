"""Text pipeline: corpora, tokenization, vocabulary, tf-idf vectorization.

Documents are lowercased, stripped of Unicode punctuation, whitespace-split,
and filtered against the bundled stop-word list.  Terms whose total occurrence
count in the training corpus falls below ``min_count`` are masked as unknown.
Weights are sublinear tf (1 + ln c) times ln(|train| / df), cosine-normalized
per document.
"""

from __future__ import annotations

import unicodedata
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp
from sklearn.base import BaseEstimator, TransformerMixin

from .prevalence import check_binary_labels
from .stopwords import STOP_WORDS

_punct_cache: dict[str, bool] = {}


def _is_punctuation(ch: str) -> bool:
    cached = _punct_cache.get(ch)
    if cached is None:
        cached = unicodedata.category(ch).startswith("P")
        _punct_cache[ch] = cached
    return cached


@dataclass(frozen=True)
class Corpus:
    """Raw labelled documents: the unit every pool and split is made from."""

    documents: tuple[str, ...]
    labels: np.ndarray = field(repr=False)
    name: str = ""

    def __post_init__(self) -> None:
        docs = tuple(self.documents)
        y = check_binary_labels(self.labels)
        if len(docs) != y.size:
            raise ValueError(f"{len(docs)} documents but {y.size} labels")
        object.__setattr__(self, "documents", docs)
        object.__setattr__(self, "labels", y)

    def __len__(self) -> int:
        return len(self.documents)

    def subset(self, indices, name: str | None = None) -> "Corpus":
        idx = np.asarray(indices, dtype=np.int64)
        return Corpus(
            tuple(self.documents[i] for i in idx),
            self.labels[idx],
            self.name if name is None else name,
        )


def tokenize(text: str) -> list[str]:
    """Lowercase, drop punctuation, split on whitespace, remove stop words."""
    lowered = text.lower()
    table = {ord(c): " " for c in set(lowered) if _is_punctuation(c)}
    if table:
        lowered = lowered.translate(table)
    return [token for token in lowered.split() if token not in STOP_WORDS]


@dataclass(frozen=True)
class Vocabulary:
    """Term-to-id map plus the statistics idf needs.

    ``term_ids`` is dense over [0, vocabulary size); ``document_frequency[i]``
    counts training documents containing term i; ``train_size`` is the number
    of training documents and fixes the idf numerator for all later corpora.
    """

    term_ids: dict[str, int]
    document_frequency: np.ndarray = field(repr=False)
    train_size: int
    min_count: int = 5

    def __post_init__(self) -> None:
        df = np.asarray(self.document_frequency, dtype=np.int64)
        if len(self.term_ids) != df.size:
            raise ValueError("document_frequency length must match the term map")
        if df.size and df.min() < 1:
            raise ValueError("document frequencies must be >= 1")
        ids = sorted(self.term_ids.values())
        if ids != list(range(len(ids))):
            raise ValueError("term ids must be dense in [0, vocabulary size)")
        object.__setattr__(self, "document_frequency", df)

    def __len__(self) -> int:
        return len(self.term_ids)

    def idf(self) -> np.ndarray:
        return np.log(self.train_size / self.document_frequency.astype(np.float64))


def _token_lists(documents: Iterable[str]) -> list[list[str]]:
    return [tokenize(doc) for doc in documents]


def _build_vocabulary(token_lists: Sequence[list[str]], min_count: int) -> Vocabulary:
    totals: Counter[str] = Counter()
    df: Counter[str] = Counter()
    for tokens in token_lists:
        totals.update(tokens)
        df.update(set(tokens))
    terms = sorted(t for t, c in totals.items() if c >= min_count)
    if not terms:
        raise ValueError("empty vocabulary: no term reaches the minimum count")
    term_ids = {t: i for i, t in enumerate(terms)}
    frequencies = np.array([df[t] for t in terms], dtype=np.int64)
    return Vocabulary(term_ids, frequencies, train_size=len(token_lists), min_count=min_count)


def build_vocabulary(train_corpus: Corpus, min_count: int = 5) -> Vocabulary:
    """Vocabulary over the training corpus, keeping terms with total count >= min_count."""
    if min_count < 1:
        raise ValueError("min_count must be a positive integer")
    return _build_vocabulary(_token_lists(train_corpus.documents), min_count)


def _count_rows(token_lists: Sequence[list[str]], vocab: Vocabulary) -> sp.csr_matrix:
    indptr = [0]
    indices: list[int] = []
    data: list[float] = []
    for tokens in token_lists:
        counts: Counter[int] = Counter()
        for token in tokens:
            term_id = vocab.term_ids.get(token)
            if term_id is not None:
                counts[term_id] += 1
        for term_id in sorted(counts):
            indices.append(term_id)
            data.append(float(counts[term_id]))
        indptr.append(len(indices))
    matrix = sp.csr_matrix(
        (np.asarray(data), np.asarray(indices, dtype=np.int32), np.asarray(indptr, dtype=np.int32)),
        shape=(len(token_lists), len(vocab)),
    )
    return matrix


def _tfidf_from_counts(counts: sp.csr_matrix, vocab: Vocabulary) -> sp.csr_matrix:
    out = counts.astype(np.float64)
    # sublinear tf: 1 + ln(c) on nonzero cells
    out.data = 1.0 + np.log(out.data)
    idf = vocab.idf()
    out.data *= idf[out.indices]
    out.eliminate_zeros()  # idf-0 terms leave explicit zeros behind
    norms = np.sqrt(out.multiply(out).sum(axis=1)).A1
    scale = np.divide(1.0, norms, out=np.zeros_like(norms), where=norms > 0)
    out = sp.diags(scale) @ out
    return sp.csr_matrix(out)


def vectorize(corpus: Corpus, vocab: Vocabulary) -> sp.csr_matrix:
    """Cosine-normalized tf-idf rows for a corpus under a fixed vocabulary.

    Out-of-vocabulary terms are ignored; a document with no in-vocabulary
    terms yields an all-zero row.  Never touches the vocabulary statistics.
    """
    return _tfidf_from_counts(_count_rows(_token_lists(corpus.documents), vocab), vocab)


class TfidfTextVectorizer(TransformerMixin, BaseEstimator):
    """Estimator wrapper around the tokenize/vocabulary/tf-idf pipeline.

    ``fit`` builds the vocabulary from raw training documents; ``transform``
    maps any document sequence onto that fixed vocabulary.  ``transform_counts``
    returns raw term counts for consumers that need unweighted occurrences.
    """

    def __init__(self, min_term_count: int = 5):
        self.min_term_count = min_term_count

    def fit(self, documents: Sequence[str], y=None) -> "TfidfTextVectorizer":
        self.vocabulary_ = _build_vocabulary(_token_lists(documents), self.min_term_count)
        return self

    def transform(self, documents: Sequence[str]) -> sp.csr_matrix:
        self._ensure_fitted()
        return _tfidf_from_counts(self.transform_counts(documents), self.vocabulary_)

    def transform_counts(self, documents: Sequence[str]) -> sp.csr_matrix:
        self._ensure_fitted()
        return _count_rows(_token_lists(documents), self.vocabulary_)

    def _ensure_fitted(self) -> None:
        if not hasattr(self, "vocabulary_"):
            raise ValueError("vectorizer is not fitted; call fit first")

"""Bag-of-words feature spaces over firm-year instances.

Documents are token sequences (already preprocessed); grams are unigrams
plus adjacent bigrams, counted within a history slot and never across
slot boundaries.  A :class:`FeatureSpace` freezes the gram universe of a
training set, assigns lexicographic ids, and records document
frequencies so TF-IDF weighting and chi-squared selection can be
re-applied to unseen data.  Vectors are kept sparse throughout; the
classifier layer consumes a CSR matrix built by :func:`stack_csr`.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
import scipy.sparse as sp

__all__ = [
    "extract_grams",
    "instance_grams",
    "FeatureSpace",
    "SparseVector",
    "binarize",
    "TfidfModel",
    "fit_tfidf",
    "chi2_scores",
    "select_top_k",
    "FeatureSelector",
    "project",
    "stack_csr",
]


def extract_grams(tokens: Sequence[str]) -> Counter:
    """Count unigrams and adjacent bigrams of one token sequence.

    Bigrams are stored as the two tokens joined by a single space, which
    cannot collide with unigrams because preprocessed tokens never
    contain whitespace.
    """
    grams = Counter(tokens)
    for a, b in zip(tokens, tokens[1:]):
        grams[f"{a} {b}"] += 1
    return grams


def instance_grams(slot_tokens: Sequence[Sequence[str]]) -> Counter:
    """Sum gram counts over history slots without bridging them.

    The last token of one slot never pairs with the first token of the
    next: the slots are distinct documents that happen to share a row.
    """
    total: Counter = Counter()
    for tokens in slot_tokens:
        total.update(extract_grams(tokens))
    return total


@dataclass(frozen=True)
class SparseVector:
    """One row of a sparse design matrix (indices strictly ascending)."""

    indices: tuple[int, ...]
    values: tuple[float, ...]
    dim: int

    def __post_init__(self):
        if len(self.indices) != len(self.values):
            raise ValueError("indices and values must be the same length")
        for prev, cur in zip(self.indices, self.indices[1:]):
            if cur <= prev:
                raise ValueError("indices must be strictly ascending")
        if self.indices and not 0 <= self.indices[0] <= self.indices[-1] < self.dim:
            raise ValueError("index out of range for dim")

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.dim)
        if self.indices:
            out[list(self.indices)] = self.values
        return out


@dataclass(frozen=True)
class FeatureSpace:
    """Frozen mapping from gram string to column id, with doc freqs.

    Ids are assigned by sorting the grams lexicographically, so the
    mapping is reproducible from the gram set alone.  ``doc_freq[i]`` is
    the number of training documents containing feature ``i`` at least
    once; ``n_docs`` is the training corpus size both counts refer to.
    """

    features: tuple[str, ...]
    doc_freq: tuple[int, ...]
    n_docs: int
    _ids: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if len(self.features) != len(self.doc_freq):
            raise ValueError("features and doc_freq must be the same length")
        if list(self.features) != sorted(self.features):
            raise ValueError("features must be lexicographically sorted")
        if len(set(self.features)) != len(self.features):
            raise ValueError("duplicate feature")
        for f, df in zip(self.features, self.doc_freq):
            if not 0 < df <= self.n_docs:
                raise ValueError(f"doc_freq of {f!r} out of range: {df}")
        object.__setattr__(self, "_ids", {f: i for i, f in enumerate(self.features)})

    def __len__(self) -> int:
        return len(self.features)

    def id_for(self, feature: str) -> int | None:
        return self._ids.get(feature)

    @classmethod
    def fit(cls, docs: Iterable[Mapping[str, int]]) -> "FeatureSpace":
        """Build the space from training documents given as gram counts."""
        df: Counter = Counter()
        n_docs = 0
        for grams in docs:
            n_docs += 1
            df.update(grams.keys())
        if n_docs == 0:
            raise ValueError("cannot fit a feature space on zero documents")
        features = tuple(sorted(df))
        return cls(features, tuple(df[f] for f in features), n_docs)

    def vectorize(self, grams: Mapping[str, int]) -> SparseVector:
        """Raw term counts of one document, unseen grams dropped."""
        pairs = sorted(
            (i, float(count))
            for f, count in grams.items()
            if count and (i := self._ids.get(f)) is not None
        )
        return SparseVector(
            tuple(i for i, _ in pairs), tuple(v for _, v in pairs), len(self)
        )

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"# n_docs={self.n_docs}\n")
            fh.write("feature\tid\tdoc_freq\n")
            for i, (f, df) in enumerate(zip(self.features, self.doc_freq)):
                fh.write(f"{f}\t{i}\t{df}\n")

    @classmethod
    def load(cls, path: str | Path) -> "FeatureSpace":
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
        if not lines or not lines[0].startswith("# n_docs="):
            raise ValueError(f"{path}: missing n_docs header")
        n_docs = int(lines[0].split("=", 1)[1])
        if len(lines) < 2 or lines[1] != "feature\tid\tdoc_freq":
            raise ValueError(f"{path}: missing column header")
        features, doc_freq = [], []
        for lineno, line in enumerate(lines[2:], start=3):
            parts = line.split("\t")
            if len(parts) != 3:
                raise ValueError(f"{path} line {lineno}: expected 3 fields")
            feature, fid, df = parts
            if int(fid) != len(features):
                raise ValueError(f"{path} line {lineno}: ids must be consecutive")
            features.append(feature)
            doc_freq.append(int(df))
        return cls(tuple(features), tuple(doc_freq), n_docs)


def binarize(vec: SparseVector) -> SparseVector:
    """Presence/absence encoding: every stored value becomes 1.0."""
    return SparseVector(vec.indices, (1.0,) * len(vec.indices), vec.dim)


@dataclass(frozen=True)
class TfidfModel:
    """Smoothed idf weights learned from a feature space.

    ``idf[i] = ln((1 + n_docs) / (1 + doc_freq[i])) + 1``, so a feature
    present in every document still carries weight 1 rather than
    vanishing.  Transformed vectors are L2-normalized.
    """

    space: FeatureSpace
    idf: tuple[float, ...]

    def transform(self, grams: Mapping[str, int]) -> SparseVector:
        counts = self.space.vectorize(grams)
        if not counts.indices:
            return counts
        weighted = [
            v * self.idf[i] for i, v in zip(counts.indices, counts.values)
        ]
        norm = math.sqrt(sum(w * w for w in weighted))
        if norm > 0.0:
            weighted = [w / norm for w in weighted]
        return SparseVector(counts.indices, tuple(weighted), counts.dim)


def fit_tfidf(space: FeatureSpace) -> TfidfModel:
    idf = tuple(
        math.log((1 + space.n_docs) / (1 + df)) + 1.0 for df in space.doc_freq
    )
    return TfidfModel(space, idf)


def chi2_scores(matrix: sp.csr_matrix, labels: np.ndarray) -> np.ndarray:
    """Chi-squared statistic of each column against the binary labels.

    Observed counts are the per-class column sums of feature mass;
    expected counts split each column's total mass by class proportion.
    Columns with zero total mass score 0 (no evidence either way).
    Requires non-negative input, which both the binary and TF-IDF
    encodings satisfy.
    """
    labels = np.asarray(labels)
    if matrix.shape[0] != labels.shape[0]:
        raise ValueError("matrix rows and labels must align")
    if set(np.unique(labels)) != {0, 1}:
        raise ValueError("labels must contain both classes")
    if matrix.nnz and matrix.data.min() < 0:
        raise ValueError("chi-squared requires non-negative feature values")
    mask = labels == 1
    observed = np.vstack(
        [
            np.asarray(matrix[~mask].sum(axis=0)).ravel(),
            np.asarray(matrix[mask].sum(axis=0)).ravel(),
        ]
    )
    class_prob = np.array([[(~mask).mean()], [mask.mean()]])
    expected = observed.sum(axis=0, keepdims=True) * class_prob
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(expected > 0, (observed - expected) ** 2 / expected, 0.0)
    return terms.sum(axis=0)


@dataclass(frozen=True)
class FeatureSelector:
    """The top-k columns of a feature space, highest score first."""

    feature_ids: tuple[int, ...]
    scores: tuple[float, ...]
    space: FeatureSpace

    def __post_init__(self):
        if len(self.feature_ids) != len(self.scores):
            raise ValueError("feature_ids and scores must be the same length")
        if len(set(self.feature_ids)) != len(self.feature_ids):
            raise ValueError("duplicate feature id")

    def __len__(self) -> int:
        return len(self.feature_ids)

    @property
    def features(self) -> tuple[str, ...]:
        return tuple(self.space.features[i] for i in self.feature_ids)

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("feature\tscore\n")
            for fid, score in zip(self.feature_ids, self.scores):
                fh.write(f"{self.space.features[fid]}\t{score:.10g}\n")

    @classmethod
    def load(cls, path: str | Path, space: FeatureSpace) -> "FeatureSelector":
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
        if not lines or lines[0] != "feature\tscore":
            raise ValueError(f"{path}: missing header")
        ids, scores = [], []
        for lineno, line in enumerate(lines[1:], start=2):
            parts = line.split("\t")
            if len(parts) != 2:
                raise ValueError(f"{path} line {lineno}: expected 2 fields")
            fid = space.id_for(parts[0])
            if fid is None:
                raise ValueError(
                    f"{path} line {lineno}: {parts[0]!r} not in feature space"
                )
            ids.append(fid)
            scores.append(float(parts[1]))
        return cls(tuple(ids), tuple(scores), space)


def select_top_k(
    matrix: sp.csr_matrix, labels: np.ndarray, space: FeatureSpace, k: int
) -> FeatureSelector:
    """Keep the k highest-scoring columns; ties break toward lower id."""
    if k <= 0:
        raise ValueError(f"k must be positive, got {k}")
    scores = chi2_scores(matrix, labels)
    k = min(k, len(scores))
    # stable sort on -score keeps lower ids first within a tie
    order = np.argsort(-scores, kind="stable")[:k]
    return FeatureSelector(
        tuple(int(i) for i in order),
        tuple(float(scores[i]) for i in order),
        space,
    )


def project(vec: SparseVector, selector: FeatureSelector) -> SparseVector:
    """Restrict a vector to the selected columns, reindexed 0..k-1.

    Output column j corresponds to ``selector.feature_ids[j]``; values
    pass through unchanged (no re-normalization after projection).
    """
    if vec.dim != len(selector.space):
        raise ValueError("vector dim does not match the selector's space")
    lookup = {fid: j for j, fid in enumerate(selector.feature_ids)}
    pairs = sorted(
        (lookup[i], v) for i, v in zip(vec.indices, vec.values) if i in lookup
    )
    return SparseVector(
        tuple(i for i, _ in pairs),
        tuple(v for _, v in pairs),
        len(selector),
    )


def stack_csr(vectors: Sequence[SparseVector]) -> sp.csr_matrix:
    """Assemble row vectors into one CSR matrix."""
    if not vectors:
        raise ValueError("cannot stack zero vectors")
    dim = vectors[0].dim
    if any(v.dim != dim for v in vectors):
        raise ValueError("all vectors must share one dim")
    indptr = np.zeros(len(vectors) + 1, dtype=np.int64)
    for i, v in enumerate(vectors):
        indptr[i + 1] = indptr[i] + len(v.indices)
    indices = np.concatenate(
        [np.asarray(v.indices, dtype=np.int64) for v in vectors]
    ) if indptr[-1] else np.zeros(0, dtype=np.int64)
    data = np.concatenate(
        [np.asarray(v.values, dtype=np.float64) for v in vectors]
    ) if indptr[-1] else np.zeros(0)
    return sp.csr_matrix((data, indices, indptr), shape=(len(vectors), dim))

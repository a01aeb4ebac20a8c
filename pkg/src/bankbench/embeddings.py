"""Skip-gram word embeddings and document-embedding plumbing.

Word vectors are trained with negative sampling: for every
(center, context) pair within the window, the objective maximizes
``log sigma(u_ctx . v_ctr) + sum_k log sigma(-u_k . v_ctr)`` with ``k``
noise words drawn from the unigram^0.75 distribution.  Documents are
embedded as the arithmetic mean of input vectors over token
occurrences, so a document that is just the missing sentinel pools to
that token's own vector.

Externally computed document embeddings (e.g. 768-dim transformer
pools) arrive through a TSV table keyed by document; both paths produce
:class:`DocEmbedding` rows that :func:`concat_history` flattens into
classifier inputs.

Training is sequential and deterministic for a given seed.  Pairs are
processed in fixed-size blocks with vectorized numpy updates; within a
block, gradients are taken at the block-start parameters and each
parameter row moves by the mean of its accumulated gradients — the
mini-batch approximation of the streaming update, kept stable even when
one row appears many times in a block.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.special import expit

__all__ = [
    "SkipGramModel",
    "DocEmbedding",
    "init_vectors",
    "pair_loss",
    "pair_gradients",
    "train_skipgram",
    "embed_doc",
    "concat_history",
    "load_embedding_table",
    "write_embedding_table",
]

EMBEDDING_SOURCES = ("trained_w2v", "imported")


def _softplus(x: np.ndarray) -> np.ndarray:
    return np.logaddexp(0.0, x)


@dataclass(frozen=True, eq=False)
class SkipGramModel:
    """Input/output vector tables plus the vocabulary they index."""

    vocab: tuple[str, ...]
    input_vectors: np.ndarray
    output_vectors: np.ndarray
    epoch_losses: tuple[float, ...] = ()
    _ids: dict = field(init=False, repr=False)

    def __post_init__(self):
        n, d = self.input_vectors.shape
        if n != len(self.vocab):
            raise ValueError("vector table rows must match vocab size")
        if self.output_vectors.shape != (n, d):
            raise ValueError("input and output tables must share a shape")
        if not (
            np.isfinite(self.input_vectors).all()
            and np.isfinite(self.output_vectors).all()
        ):
            raise ValueError("vector tables must be finite")
        if len(set(self.vocab)) != len(self.vocab):
            raise ValueError("duplicate token in vocab")
        object.__setattr__(self, "_ids", {t: i for i, t in enumerate(self.vocab)})

    @property
    def dim(self) -> int:
        return self.input_vectors.shape[1]

    def vector(self, token: str) -> np.ndarray | None:
        i = self._ids.get(token)
        return None if i is None else self.input_vectors[i]

    def save(self, path: str | Path) -> None:
        """Write the word-vector text format: input vectors only."""
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"{len(self.vocab)} {self.dim}\n")
            for token, row in zip(self.vocab, self.input_vectors):
                fh.write(token + " " + " ".join(repr(float(v)) for v in row) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "SkipGramModel":
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
        if not lines:
            raise ValueError(f"{path}: empty file")
        try:
            n, d = (int(x) for x in lines[0].split())
        except ValueError:
            raise ValueError(f"{path}: malformed header {lines[0]!r}") from None
        if len(lines) - 1 != n:
            raise ValueError(f"{path}: header says {n} rows, found {len(lines) - 1}")
        vocab, rows = [], []
        for lineno, line in enumerate(lines[1:], start=2):
            parts = line.split(" ")
            if len(parts) != d + 1:
                raise ValueError(f"{path} line {lineno}: expected {d} values")
            vocab.append(parts[0])
            rows.append([float(v) for v in parts[1:]])
        inputs = np.asarray(rows, dtype=np.float64).reshape(n, d)
        return cls(tuple(vocab), inputs, np.zeros_like(inputs))


def init_vectors(
    n: int, d: int, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Standard word2vec init: small uniform inputs, zero outputs."""
    inputs = rng.uniform(-0.5 / d, 0.5 / d, size=(n, d))
    return inputs, np.zeros((n, d))


def pair_loss(
    v_center: np.ndarray, u_context: np.ndarray, u_negs: np.ndarray
) -> float:
    """Negative-sampling loss of one (center, context, negatives) triple."""
    s_pos = float(v_center @ u_context)
    s_neg = u_negs @ v_center
    return float(_softplus(-np.asarray(s_pos)) + _softplus(s_neg).sum())


def pair_gradients(
    v_center: np.ndarray, u_context: np.ndarray, u_negs: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Exact gradients of :func:`pair_loss` w.r.t. its three arguments."""
    g_pos = expit(v_center @ u_context) - 1.0
    g_neg = expit(u_negs @ v_center)
    grad_center = g_pos * u_context + g_neg @ u_negs
    grad_context = g_pos * v_center
    grad_negs = g_neg[:, None] * v_center[None, :]
    return grad_center, grad_context, grad_negs


def _apply_row_mean(
    table: np.ndarray, rows: np.ndarray, deltas: np.ndarray
) -> None:
    """Subtract the per-row mean of ``deltas`` from ``table``.

    A row that occurs many times inside one block would otherwise
    receive the sum of gradients all evaluated at the same block-start
    parameters — an effective step of multiplicity x lr that diverges on
    repetitive corpora.  Averaging per row keeps every step bounded and
    coincides with the plain update whenever a row occurs once.
    """
    uniq, inverse = np.unique(rows, return_inverse=True)
    acc = np.zeros((len(uniq), table.shape[1]))
    np.add.at(acc, inverse, deltas)
    counts = np.bincount(inverse, minlength=len(uniq))
    table[uniq] -= acc / counts[:, None]


def _build_pairs(
    docs: Sequence[Sequence[int]], window: int
) -> tuple[np.ndarray, np.ndarray]:
    centers, contexts = [], []
    for doc in docs:
        ids = np.asarray(doc, dtype=np.int32)
        for offset in range(1, window + 1):
            if len(ids) <= offset:
                break
            left, right = ids[:-offset], ids[offset:]
            centers.append(left)
            contexts.append(right)
            centers.append(right)
            contexts.append(left)
    if not centers:
        return np.zeros(0, dtype=np.int32), np.zeros(0, dtype=np.int32)
    return np.concatenate(centers), np.concatenate(contexts)


def train_skipgram(
    docs: Sequence[Sequence[int]],
    vocab: Sequence[str],
    *,
    d: int = 100,
    window: int = 5,
    negatives: int = 5,
    epochs: int = 5,
    lr: float = 0.025,
    seed: int = 0,
    block_size: int = 8192,
) -> SkipGramModel:
    """Train word vectors on token-id documents.

    The learning rate decays linearly per pair over all epochs down to a
    floor of ``1e-4 * lr``.  Negative draws never skip the true context:
    a draw that happens to equal it simply contributes its penalty term.
    """
    if d <= 0 or window <= 0 or negatives <= 0 or epochs <= 0:
        raise ValueError("d, window, negatives, and epochs must be positive")
    if lr < 0:
        raise ValueError(f"lr must be non-negative, got {lr}")
    vocab = tuple(vocab)
    if not docs or all(len(doc) == 0 for doc in docs):
        raise ValueError("cannot train on an empty corpus")
    counts = np.zeros(len(vocab))
    for doc in docs:
        np.add.at(counts, np.asarray(doc, dtype=np.int64), 1.0)
    noise = counts**0.75
    total_noise = noise.sum()
    if total_noise == 0.0:
        raise ValueError("cannot train on an empty corpus")
    noise_cdf = np.cumsum(noise / total_noise)

    rng = np.random.default_rng(seed)
    inputs, outputs = init_vectors(len(vocab), d, rng)

    centers, contexts = _build_pairs(docs, window)
    n_pairs = len(centers)
    if n_pairs == 0:
        # single-token documents yield no pairs; vectors stay at init
        return SkipGramModel(vocab, inputs, outputs, epoch_losses=(0.0,) * epochs)

    total = n_pairs * epochs
    epoch_losses = []
    processed = 0
    for _ in range(epochs):
        epoch_loss = 0.0
        for start in range(0, n_pairs, block_size):
            ctr = centers[start : start + block_size]
            ctx = contexts[start : start + block_size]
            b = len(ctr)
            draws = rng.random((b, negatives))
            negs = np.searchsorted(noise_cdf, draws, side="right").astype(np.int32)
            np.clip(negs, 0, len(vocab) - 1, out=negs)

            v = inputs[ctr]  # (b, d)
            u_pos = outputs[ctx]  # (b, d)
            u_neg = outputs[negs]  # (b, K, d)
            s_pos = np.einsum("bd,bd->b", v, u_pos)
            s_neg = np.einsum("bkd,bd->bk", u_neg, v)
            epoch_loss += float(
                _softplus(-s_pos).sum() + _softplus(s_neg).sum()
            )

            g_pos = expit(s_pos) - 1.0  # (b,)
            g_neg = expit(s_neg)  # (b, K)
            # linear decay per pair, floored at 1e-4 of the initial rate
            step = lr * np.maximum(
                1.0 - (processed + np.arange(b)) / total, 1e-4
            )
            processed += b

            grad_v = g_pos[:, None] * u_pos + np.einsum("bk,bkd->bd", g_neg, u_neg)
            _apply_row_mean(inputs, ctr, step[:, None] * grad_v)
            out_rows = np.concatenate([ctx, negs.reshape(-1)])
            out_deltas = np.concatenate(
                [
                    (step * g_pos)[:, None] * v,
                    ((step[:, None] * g_neg)[:, :, None] * v[:, None, :]).reshape(
                        -1, d
                    ),
                ]
            )
            _apply_row_mean(outputs, out_rows, out_deltas)
        epoch_losses.append(epoch_loss / n_pairs)

    return SkipGramModel(vocab, inputs, outputs, tuple(epoch_losses))


@dataclass(frozen=True, eq=False)
class DocEmbedding:
    """A fixed-dimension document vector with its provenance."""

    vector: np.ndarray
    source: str

    def __post_init__(self):
        vec = np.asarray(self.vector, dtype=np.float64)
        if vec.ndim != 1:
            raise ValueError("vector must be one-dimensional")
        if not np.isfinite(vec).all():
            raise ValueError("vector must be finite")
        if self.source not in EMBEDDING_SOURCES:
            raise ValueError(f"unknown source {self.source!r}")
        object.__setattr__(self, "vector", vec)

    @property
    def dim(self) -> int:
        return len(self.vector)


def embed_doc(doc: Sequence[int], model: SkipGramModel) -> DocEmbedding:
    """Mean input vector over token occurrences; empty doc → zeros."""
    if len(doc) == 0:
        return DocEmbedding(np.zeros(model.dim), "trained_w2v")
    ids = np.asarray(doc, dtype=np.int64)
    return DocEmbedding(
        model.input_vectors[ids].mean(axis=0), "trained_w2v"
    )


def concat_history(embeddings: Sequence[DocEmbedding]) -> np.ndarray:
    """Flatten history-slot embeddings oldest-first into one vector."""
    if not embeddings:
        raise ValueError("need at least one embedding")
    dims = {e.dim for e in embeddings}
    if len(dims) != 1:
        raise ValueError(f"mixed embedding dimensions: {sorted(dims)}")
    return np.concatenate([e.vector for e in embeddings])


def load_embedding_table(path: str | Path) -> dict[str, DocEmbedding]:
    """Read the shared document-embedding TSV import format."""
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or not lines[0].startswith("dim="):
        raise ValueError(f"{path}: missing dim=<d> header")
    try:
        dim = int(lines[0][4:])
    except ValueError:
        raise ValueError(f"{path}: malformed header {lines[0]!r}") from None
    table: dict[str, DocEmbedding] = {}
    for lineno, line in enumerate(lines[1:], start=2):
        parts = line.split("\t")
        if len(parts) != dim + 1:
            raise ValueError(
                f"{path} line {lineno}: expected {dim} values, got {len(parts) - 1}"
            )
        key = parts[0]
        if key in table:
            raise ValueError(f"{path} line {lineno}: duplicate key {key!r}")
        vec = np.array([float(v) for v in parts[1:]])
        if not np.isfinite(vec).all():
            raise ValueError(f"{path} line {lineno}: non-finite value")
        table[key] = DocEmbedding(vec, "imported")
    return table


def write_embedding_table(
    table: Mapping[str, DocEmbedding] | Iterable[tuple[str, np.ndarray]],
    path: str | Path,
) -> None:
    """Write the TSV import format, rows sorted by key."""
    items = (
        list(table.items()) if isinstance(table, Mapping) else list(table)
    )
    if not items:
        raise ValueError("cannot write an empty embedding table")
    rows = []
    for key, value in items:
        vec = value.vector if isinstance(value, DocEmbedding) else np.asarray(value)
        rows.append((key, vec))
    dims = {len(v) for _, v in rows}
    if len(dims) != 1:
        raise ValueError(f"mixed embedding dimensions: {sorted(dims)}")
    rows.sort(key=lambda kv: kv[0])
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"dim={dims.pop()}\n")
        for key, vec in rows:
            fh.write(key + "\t" + "\t".join(repr(float(v)) for v in vec) + "\n")

"""Skip-gram training, document pooling, and embedding-table I/O."""

from __future__ import annotations

import numpy as np
import pytest

from bankbench.embeddings import (
    DocEmbedding,
    SkipGramModel,
    concat_history,
    embed_doc,
    init_vectors,
    load_embedding_table,
    pair_gradients,
    pair_loss,
    train_skipgram,
    write_embedding_table,
)

from oracles import numerical_gradient

VOCAB = tuple(f"w{i}" for i in range(30))


def planted_docs(rng, n_docs=300, length=12):
    """Every doc carries an adjacent 'w0 w1' pair amid random filler."""
    docs = []
    for _ in range(n_docs):
        filler = rng.integers(2, len(VOCAB), size=length).tolist()
        pos = int(rng.integers(0, length - 1))
        filler[pos : pos + 2] = [0, 1]
        docs.append(filler)
    return docs


class TestPairGradients:
    def test_matches_finite_differences(self):
        rng = np.random.default_rng(13)
        for _ in range(25):
            d = int(rng.integers(2, 8))
            k = int(rng.integers(1, 5))
            v = rng.normal(scale=0.5, size=d)
            u = rng.normal(scale=0.5, size=d)
            negs = rng.normal(scale=0.5, size=(k, d))

            def f(theta):
                return pair_loss(
                    theta[:d], theta[d : 2 * d], theta[2 * d :].reshape(k, d)
                )

            theta = np.concatenate([v, u, negs.ravel()])
            want = numerical_gradient(f, theta)
            g_v, g_u, g_n = pair_gradients(v, u, negs)
            got = np.concatenate([g_v, g_u, g_n.ravel()])
            np.testing.assert_allclose(got, want, atol=1e-6)

    def test_loss_positive(self):
        rng = np.random.default_rng(1)
        v, u = rng.normal(size=4), rng.normal(size=4)
        negs = rng.normal(size=(3, 4))
        assert pair_loss(v, u, negs) > 0.0


class TestInit:
    def test_ranges(self):
        inputs, outputs = init_vectors(50, 10, np.random.default_rng(0))
        assert inputs.shape == outputs.shape == (50, 10)
        assert np.abs(inputs).max() <= 0.05
        assert (outputs == 0.0).all()


class TestTraining:
    def test_zero_lr_keeps_initialization(self):
        docs = [[0, 1, 2, 3]]
        model = train_skipgram(
            docs, VOCAB, d=6, window=2, epochs=1, lr=0.0, seed=5
        )
        inputs, outputs = init_vectors(len(VOCAB), 6, np.random.default_rng(5))
        np.testing.assert_array_equal(model.input_vectors, inputs)
        np.testing.assert_array_equal(model.output_vectors, outputs)

    def test_deterministic(self):
        rng = np.random.default_rng(3)
        docs = planted_docs(rng, n_docs=40)
        a = train_skipgram(docs, VOCAB, d=8, epochs=2, seed=11)
        b = train_skipgram(docs, VOCAB, d=8, epochs=2, seed=11)
        np.testing.assert_array_equal(a.input_vectors, b.input_vectors)
        np.testing.assert_array_equal(a.output_vectors, b.output_vectors)
        assert a.epoch_losses == b.epoch_losses

    def test_seed_changes_result(self):
        docs = planted_docs(np.random.default_rng(3), n_docs=40)
        a = train_skipgram(docs, VOCAB, d=8, epochs=1, seed=11)
        b = train_skipgram(docs, VOCAB, d=8, epochs=1, seed=12)
        assert not np.array_equal(a.input_vectors, b.input_vectors)

    def test_epoch_losses_non_increasing(self):
        docs = planted_docs(np.random.default_rng(7))
        model = train_skipgram(docs, VOCAB, d=16, epochs=5, seed=2)
        losses = model.epoch_losses
        assert len(losses) == 5
        for prev, cur in zip(losses, losses[1:]):
            assert cur <= prev * 1.01

    def test_planted_cooccurrence_beats_random_pairs(self):
        # a vocab large enough that random pairs share few contexts
        vocab = tuple(f"w{i}" for i in range(200))
        rng = np.random.default_rng(19)
        docs = []
        for _ in range(500):
            doc = rng.integers(2, len(vocab), size=12).tolist()
            pos = int(rng.integers(0, 11))
            doc[pos : pos + 2] = [0, 1]  # tokens 0 and 1 always adjacent
            docs.append(doc)
        model = train_skipgram(
            docs, vocab, d=32, window=2, epochs=5, seed=4, block_size=256
        )
        unit = model.input_vectors / np.linalg.norm(
            model.input_vectors, axis=1, keepdims=True
        )
        planted = float(unit[0] @ unit[1])
        prng = np.random.default_rng(99)
        pairs = prng.integers(0, len(vocab), size=(10_000, 2))
        pairs = pairs[pairs[:, 0] != pairs[:, 1]]
        random_cos = np.einsum("id,id->i", unit[pairs[:, 0]], unit[pairs[:, 1]])
        assert planted > np.percentile(random_cos, 95)

    def test_empty_corpus_is_error(self):
        with pytest.raises(ValueError, match="empty"):
            train_skipgram([], VOCAB, d=4)
        with pytest.raises(ValueError, match="empty"):
            train_skipgram([[], []], VOCAB, d=4)

    def test_single_token_docs_yield_init(self):
        model = train_skipgram([[3], [5]], VOCAB, d=4, epochs=2, seed=8)
        inputs, _ = init_vectors(len(VOCAB), 4, np.random.default_rng(8))
        np.testing.assert_array_equal(model.input_vectors, inputs)
        assert model.epoch_losses == (0.0, 0.0)

    def test_bad_hyperparams(self):
        with pytest.raises(ValueError):
            train_skipgram([[0, 1]], VOCAB, d=0)
        with pytest.raises(ValueError):
            train_skipgram([[0, 1]], VOCAB, d=4, lr=-0.1)


class TestVecIO:
    def test_roundtrip_exact(self, tmp_path):
        docs = planted_docs(np.random.default_rng(3), n_docs=20)
        model = train_skipgram(docs, VOCAB, d=5, epochs=1, seed=1)
        path = tmp_path / "embeddings.vec"
        model.save(path)
        back = SkipGramModel.load(path)
        assert back.vocab == model.vocab
        np.testing.assert_array_equal(back.input_vectors, model.input_vectors)
        assert path.read_text().splitlines()[0] == f"{len(VOCAB)} 5"

    def test_header_row_count_mismatch(self, tmp_path):
        path = tmp_path / "bad.vec"
        path.write_text("2 3\na 0.0 0.0 0.0\n")
        with pytest.raises(ValueError, match="2 rows"):
            SkipGramModel.load(path)

    def test_short_row(self, tmp_path):
        path = tmp_path / "bad.vec"
        path.write_text("1 3\na 0.0 0.0\n")
        with pytest.raises(ValueError, match="line 2"):
            SkipGramModel.load(path)


class TestEmbedDoc:
    def model(self):
        inputs = np.arange(12, dtype=float).reshape(4, 3)
        return SkipGramModel(("a", "b", "c", "missing"), inputs, np.zeros((4, 3)))

    def test_single_token_exact(self):
        model = self.model()
        got = embed_doc([2], model)
        np.testing.assert_array_equal(got.vector, model.input_vectors[2])
        assert got.source == "trained_w2v"

    def test_two_token_mean(self):
        model = self.model()
        got = embed_doc([0, 1], model)
        want = (model.input_vectors[0] + model.input_vectors[1]) / 2.0
        np.testing.assert_allclose(got.vector, want, atol=1e-12)

    def test_multiplicity_counts(self):
        model = self.model()
        got = embed_doc([0, 0, 1], model)
        want = (2 * model.input_vectors[0] + model.input_vectors[1]) / 3.0
        np.testing.assert_allclose(got.vector, want, atol=1e-12)

    def test_permutation_invariant(self):
        model = self.model()
        rng = np.random.default_rng(0)
        doc = rng.integers(0, 4, size=20).tolist()
        shuffled = list(doc)
        rng.shuffle(shuffled)
        np.testing.assert_allclose(
            embed_doc(doc, model).vector, embed_doc(shuffled, model).vector,
            atol=1e-12,
        )

    def test_empty_doc_is_zero(self):
        got = embed_doc([], self.model())
        assert (got.vector == 0.0).all() and got.dim == 3

    def test_missing_sentinel_doc_pools_to_its_vector(self):
        model = self.model()
        got = embed_doc([3], model)
        np.testing.assert_array_equal(got.vector, model.input_vectors[3])


class TestConcatHistory:
    def test_identity_for_single(self):
        e = DocEmbedding(np.array([1.0, 2.0]), "trained_w2v")
        np.testing.assert_array_equal(concat_history([e]), e.vector)

    def test_oldest_first_order(self):
        es = [
            DocEmbedding(np.full(100, float(i)), "trained_w2v") for i in range(3)
        ]
        flat = concat_history(es)
        assert flat.shape == (300,)
        assert flat[0] == 0.0 and flat[150] == 1.0 and flat[299] == 2.0

    def test_imported_768(self):
        es = [DocEmbedding(np.zeros(768), "imported") for _ in range(3)]
        assert concat_history(es).shape == (2304,)

    def test_dim_mismatch(self):
        with pytest.raises(ValueError, match="dimension"):
            concat_history(
                [
                    DocEmbedding(np.zeros(3), "imported"),
                    DocEmbedding(np.zeros(4), "imported"),
                ]
            )

    def test_empty(self):
        with pytest.raises(ValueError):
            concat_history([])


class TestDocEmbedding:
    def test_bad_source(self):
        with pytest.raises(ValueError, match="source"):
            DocEmbedding(np.zeros(2), "other")

    def test_non_finite(self):
        with pytest.raises(ValueError, match="finite"):
            DocEmbedding(np.array([1.0, np.nan]), "imported")

    def test_not_flat(self):
        with pytest.raises(ValueError):
            DocEmbedding(np.zeros((2, 2)), "imported")


class TestEmbeddingTable:
    def test_roundtrip(self, tmp_path):
        rng = np.random.default_rng(6)
        table = {
            f"000001:201{i}:0": DocEmbedding(rng.normal(size=4), "imported")
            for i in range(3)
        }
        path = tmp_path / "doc_embeddings.tsv"
        write_embedding_table(table, path)
        back = load_embedding_table(path)
        assert set(back) == set(table)
        for key in table:
            np.testing.assert_array_equal(back[key].vector, table[key].vector)
            assert back[key].source == "imported"
        assert path.read_text().splitlines()[0] == "dim=4"

    def test_loaded_twice_identical(self, tmp_path):
        path = tmp_path / "doc_embeddings.tsv"
        write_embedding_table({"k": np.array([0.1, 0.2])}, path)
        a = load_embedding_table(path)
        b = load_embedding_table(path)
        np.testing.assert_array_equal(a["k"].vector, b["k"].vector)

    def test_wrong_value_count_names_line(self, tmp_path):
        path = tmp_path / "bad.tsv"
        path.write_text("dim=3\nk\t1.0\t2.0\n")
        with pytest.raises(ValueError, match="line 2"):
            load_embedding_table(path)

    def test_duplicate_key(self, tmp_path):
        path = tmp_path / "bad.tsv"
        path.write_text("dim=1\nk\t1.0\nk\t2.0\n")
        with pytest.raises(ValueError, match="line 3"):
            load_embedding_table(path)

    def test_non_finite_value(self, tmp_path):
        path = tmp_path / "bad.tsv"
        path.write_text("dim=1\nk\tnan\n")
        with pytest.raises(ValueError, match="line 2"):
            load_embedding_table(path)

    def test_missing_header(self, tmp_path):
        path = tmp_path / "bad.tsv"
        path.write_text("k\t1.0\n")
        with pytest.raises(ValueError, match="header"):
            load_embedding_table(path)

    def test_writer_rejects_mixed_dims(self, tmp_path):
        with pytest.raises(ValueError, match="dimension"):
            write_embedding_table(
                {"a": np.zeros(2), "b": np.zeros(3)}, tmp_path / "x.tsv"
            )

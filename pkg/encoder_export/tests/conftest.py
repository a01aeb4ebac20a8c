"""Shared fixture: a tiny local encoder with the production hidden size.

Tests must run without network access, so instead of the default
long-context encoder they use a two-layer BERT with randomly
initialized weights, a 24-token WordPiece vocabulary, and the real
768-dimensional hidden size, saved to disk once per session.  Every
property under test (pooled output, truncation, batching, key layout,
byte-stable output) is independent of the weights being meaningful.
"""

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).resolve().parents[1]))

VOCAB = [
    "[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]",
    "the", "company", "reported", "declining", "revenue", "missing",
    "steady", "growth", "liquidity", "covenant", "default", "cash",
    "flow", "operations", "results", "waiver", "net", "loss", "a",
]


@pytest.fixture(scope="session")
def tiny_encoder_dir(tmp_path_factory) -> str:
    import torch
    from transformers import BertConfig, BertModel, BertTokenizer

    target = tmp_path_factory.mktemp("tiny_encoder")
    vocab_file = target / "vocab.txt"
    vocab_file.write_text("\n".join(VOCAB) + "\n", encoding="utf-8")
    tokenizer = BertTokenizer(
        str(vocab_file), do_lower_case=True, model_max_length=512
    )
    tokenizer.save_pretrained(target)

    torch.manual_seed(0)
    config = BertConfig(
        vocab_size=len(VOCAB),
        hidden_size=768,
        num_hidden_layers=2,
        num_attention_heads=4,
        intermediate_size=128,
        max_position_embeddings=512,
    )
    BertModel(config).save_pretrained(target)
    return str(target)

#!/usr/bin/env python3
"""Export pooled transformer embeddings for firm-year narrative histories.

Reads a firm-year instances file (one JSON object per line with "cik",
"year", and "history" fields), embeds every history slot with a frozen
pretrained encoder, and writes a document-embedding table:

    dim=<d>
    <cik>:<year>:<slot>  v1  v2  ...  vd      (tab-separated, 6 decimals)

The encoder is used as-is -- no fine-tuning, inference mode only.  Each
document is truncated to its first 4096 encoder tokens (or the model's
own limit if smaller, special tokens included), and the pooled
representation of the classification token is retained.  Empty history
slots are embedded as the sentinel token "missing", matching the
convention of the instances file.  Output is written atomically and is
byte-identical across repeated runs.

Usage:
    export.py --instances instances.jsonl --out doc_embeddings.tsv \
              [--model allenai/longformer-base-4096] [--batch 8]
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from pathlib import Path

MISSING_TOKEN = "missing"
DEFAULT_MODEL = "allenai/longformer-base-4096"
MAX_TOKENS = 4096
_SANE_LENGTH_CAP = 1_000_000  # tokenizers use ~1e30 to mean "unset"


def read_slot_texts(path) -> list[tuple[str, str]]:
    """(key, text) pairs for every history slot, in file order.

    Keys are "cik:year:slot" with slot indexing the history oldest
    first.  Blank slots fall back to the "missing" sentinel so every
    key required by the instances file appears in the output.
    """
    rows: list[tuple[str, str]] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
                cik = str(record["cik"])
                year = int(record["year"])
                history = list(record["history"])
            except (KeyError, TypeError, ValueError) as exc:
                raise ValueError(
                    f"{path}:{lineno}: not a firm-year instance record: {exc}"
                ) from exc
            for slot, text in enumerate(history):
                key = f"{cik}:{year}:{slot}"
                if key in seen:
                    raise ValueError(f"{path}:{lineno}: duplicate key {key}")
                seen.add(key)
                text = text.strip() if isinstance(text, str) else ""
                rows.append((key, text or MISSING_TOKEN))
    if not rows:
        raise ValueError(f"{path}: no instances found")
    return rows


def load_encoder(model_id: str):
    """Tokenizer and frozen encoder, in inference mode on the CPU."""
    import torch
    from transformers import AutoModel, AutoTokenizer

    try:
        tokenizer = AutoTokenizer.from_pretrained(model_id)
        model = AutoModel.from_pretrained(model_id)
    except Exception as exc:
        raise RuntimeError(f"cannot load encoder {model_id!r}: {exc}") from exc
    model.eval()
    torch.set_num_threads(1)  # fixed reduction order -> repeatable output
    return tokenizer, model


def usable_length(tokenizer, model) -> int:
    """Truncation length: 4096 capped by what the encoder can position."""
    limit = getattr(tokenizer, "model_max_length", None)
    if not limit or limit > _SANE_LENGTH_CAP:
        limit = int(getattr(model.config, "max_position_embeddings", MAX_TOKENS))
    return min(int(limit), MAX_TOKENS)


def add_global_attention(encoded: dict, model_type: str) -> dict:
    """Long-document encoders with sparse attention need the pooled
    token marked global so it can attend to the whole narrative."""
    if model_type == "longformer":
        import torch

        mask = torch.zeros_like(encoded["input_ids"])
        mask[:, 0] = 1
        encoded["global_attention_mask"] = mask
    return encoded


def pool(outputs) -> "object":
    """The encoder's designated pooled vector, falling back to the raw
    classification-token state for models without a pooling head."""
    pooled = getattr(outputs, "pooler_output", None)
    if pooled is None:
        pooled = outputs.last_hidden_state[:, 0]
    return pooled


def embed_batch(tokenizer, model, texts: list[str], max_length: int) -> list[list[float]]:
    import torch

    encoded = tokenizer(
        texts,
        padding=True,
        truncation=True,
        max_length=max_length,
        return_tensors="pt",
    )
    encoded = add_global_attention(dict(encoded), model.config.model_type)
    with torch.no_grad():
        outputs = model(**encoded)
    return pool(outputs).cpu().tolist()


def export_embeddings(
    instances_path,
    out_path,
    model_id: str = DEFAULT_MODEL,
    batch_size: int = 8,
    progress=None,
) -> int:
    """Embed every history slot of the instances file; rows written."""
    if batch_size < 1:
        raise ValueError(f"batch size must be positive, got {batch_size}")
    rows = read_slot_texts(instances_path)
    tokenizer, model = load_encoder(model_id)
    max_length = usable_length(tokenizer, model)

    vectors: list[list[float]] = []
    dim = None
    for start in range(0, len(rows), batch_size):
        batch = rows[start : start + batch_size]
        pooled = embed_batch(
            tokenizer, model, [text for _, text in batch], max_length
        )
        for vec in pooled:
            if dim is None:
                dim = len(vec)
            elif len(vec) != dim:
                raise RuntimeError(
                    f"encoder produced {len(vec)} dimensions after {dim}"
                )
            vectors.append(vec)
        if progress is not None:
            done = min(start + batch_size, len(rows))
            print(f"embedded {done}/{len(rows)}", file=progress)

    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(
        dir=out_path.parent, prefix=out_path.name, suffix=".tmp"
    )
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(f"dim={dim}\n")
            for (key, _), vec in zip(rows, vectors):
                fh.write(key + "\t" + "\t".join(f"{v:.6f}" for v in vec) + "\n")
        os.replace(tmp_name, out_path)
    except BaseException:
        os.unlink(tmp_name)
        raise
    return len(rows)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="export.py",
        description="Embed firm-year narrative histories with a frozen "
        "transformer encoder.",
    )
    parser.add_argument(
        "--instances", required=True, help="firm-year instances JSONL file"
    )
    parser.add_argument(
        "--out", required=True, help="output path for the embedding table"
    )
    parser.add_argument(
        "--model",
        default=DEFAULT_MODEL,
        help=f"encoder model id or local path (default: {DEFAULT_MODEL})",
    )
    parser.add_argument(
        "--batch", type=int, default=8, help="inference batch size (default: 8)"
    )
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        n = export_embeddings(
            args.instances,
            args.out,
            model_id=args.model,
            batch_size=args.batch,
            progress=sys.stderr,
        )
    except (ValueError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {n} rows to {args.out}", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())

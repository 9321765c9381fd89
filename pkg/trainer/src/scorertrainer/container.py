"""Writer for the engine's weight container.

Byte layout (the inference engine is the reader)::

    MPEW1\\n                  magic + format version
    <header JSON>\\n          one UTF-8 line, sorted keys
    <payload>                 raw little-endian float32, row-major

Header fields: ``meta`` (architecture dims, ``vocab_offsets``, plus any
extra keys such as a model hash), ``tensors`` (directory of name, shape,
byte offset into the payload), ``payload_bytes``, ``payload_crc32``
(zlib CRC-32 as 8 hex digits).  Tensors are laid out in canonical order:
``embed`` first, then per attention layer ``wq wk wv wo bq bk bv bo``,
then the encoder input projection, the residual blocks, and the head.
"""
from __future__ import annotations

import json
import zlib
from pathlib import Path

import numpy as np

from .errors import ConfigError

MAGIC = b"MPEW1"


def tensor_specs(
    d_model: int, n_attn_layers: int, n_ffn_blocks: int, ffn_dim: int
) -> list[tuple[str, tuple[int, ...]]]:
    """Required non-embedding tensors with shapes, in canonical order."""
    d, f = d_model, ffn_dim
    specs: list[tuple[str, tuple[int, ...]]] = []
    for l in range(n_attn_layers):
        for name in ("wq", "wk", "wv", "wo"):
            specs.append((f"attn.{l}.{name}", (d, d)))
        for name in ("bq", "bk", "bv", "bo"):
            specs.append((f"attn.{l}.{name}", (d,)))
    specs.append(("enc.in.w", (2 * d, f)))
    specs.append(("enc.in.b", (f,)))
    for k in range(n_ffn_blocks):
        specs.append((f"enc.{k}.w1", (f, f)))
        specs.append((f"enc.{k}.b1", (f,)))
        specs.append((f"enc.{k}.w2", (f, f)))
        specs.append((f"enc.{k}.b2", (f,)))
    specs.append(("head.w", (f, 1)))
    specs.append(("head.b", (1,)))
    return specs


def write_container(
    path,
    *,
    d_model: int,
    n_heads: int,
    n_attn_layers: int,
    n_ffn_blocks: int,
    ffn_dim: int,
    vocab_offsets,
    tensors: dict[str, np.ndarray],
    extra_meta: dict | None = None,
) -> None:
    offsets = [int(o) for o in vocab_offsets]
    if not offsets or offsets[0] != 0 or any(
        offsets[i] >= offsets[i + 1] for i in range(len(offsets) - 1)
    ):
        raise ConfigError("vocab_offsets must start at 0 and strictly increase")
    if "embed" not in tensors:
        raise ConfigError("missing tensor 'embed'")
    emb = np.asarray(tensors["embed"])
    if emb.ndim != 2 or emb.shape[1] != d_model or emb.shape[0] <= offsets[-1]:
        raise ConfigError(f"tensor 'embed' has shape {tuple(emb.shape)}")
    names = ["embed"]
    for name, shape in tensor_specs(d_model, n_attn_layers, n_ffn_blocks, ffn_dim):
        if name not in tensors:
            raise ConfigError(f"missing tensor {name!r}")
        if tuple(tensors[name].shape) != shape:
            raise ConfigError(
                f"tensor {name!r} has shape {tuple(tensors[name].shape)}, expected {shape}"
            )
        names.append(name)

    directory = []
    chunks = []
    offset = 0
    for name in names:
        arr = np.ascontiguousarray(tensors[name], dtype="<f4")
        directory.append({"name": name, "shape": list(arr.shape), "offset": offset})
        chunks.append(arr.tobytes())
        offset += len(chunks[-1])
    payload = b"".join(chunks)
    meta = {
        "d_model": int(d_model),
        "n_heads": int(n_heads),
        "n_attn_layers": int(n_attn_layers),
        "n_ffn_blocks": int(n_ffn_blocks),
        "ffn_dim": int(ffn_dim),
        "vocab_offsets": offsets,
    }
    meta.update(extra_meta or {})
    header = {
        "meta": meta,
        "tensors": directory,
        "payload_bytes": len(payload),
        "payload_crc32": format(zlib.crc32(payload) & 0xFFFFFFFF, "08x"),
    }
    blob = MAGIC + b"\n" + json.dumps(header, sort_keys=True).encode() + b"\n" + payload
    Path(path).write_bytes(blob)

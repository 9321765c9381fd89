"""Container file for learned move-scorer weights.

Byte layout::

    MPEW1\\n                  magic + format version
    <header JSON>\\n          one UTF-8 line
    <payload>                 raw little-endian float32, row-major

The header object holds:

* ``meta``: ``d_model``, ``n_heads``, ``n_attn_layers``, ``n_ffn_blocks``,
  ``ffn_dim``, ``vocab_offsets`` (per-variable base token index), plus any
  extra keys a writer wants to record (e.g. a model hash).
* ``tensors``: directory of ``{name, shape, offset}``; offsets are byte
  positions inside the payload.
* ``payload_bytes`` and ``payload_crc32`` (zlib CRC-32, 8 hex digits),
  guarding truncation and corruption.

Required tensors, shapes in terms of ``d = d_model`` and ``f = ffn_dim``:

* ``embed``                                  ``[V, d]``
* ``attn.{l}.wq|wk|wv|wo``                   ``[d, d]``   per attention layer
* ``attn.{l}.bq|bk|bv|bo``                   ``[d]``
* ``enc.in.w`` / ``enc.in.b``                ``[2d, f]`` / ``[f]``
* ``enc.{k}.w1|w2`` / ``enc.{k}.b1|b2``      ``[f, f]`` / ``[f]``   per block
* ``head.w`` / ``head.b``                    ``[f, 1]`` / ``[1]``
"""
from __future__ import annotations

import json
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import WeightFormatError

MAGIC = b"MPEW1"


@dataclass(eq=False)
class ScorerWeights:
    d_model: int
    n_heads: int
    n_attn_layers: int
    n_ffn_blocks: int
    ffn_dim: int
    vocab_offsets: tuple[int, ...]
    tensors: dict[str, np.ndarray]
    extra_meta: dict = field(default_factory=dict)

    @property
    def num_tokens(self) -> int:
        return int(self.tensors["embed"].shape[0])

    def cardinality(self, var: int) -> int:
        off = self.vocab_offsets
        hi = off[var + 1] if var + 1 < len(off) else self.num_tokens
        return hi - off[var]

    def required_specs(self) -> list[tuple[str, tuple[int, ...]]]:
        d, f = self.d_model, self.ffn_dim
        specs: list[tuple[str, tuple[int, ...]]] = []
        for l in range(self.n_attn_layers):
            for nm in ("wq", "wk", "wv", "wo"):
                specs.append((f"attn.{l}.{nm}", (d, d)))
            for nm in ("bq", "bk", "bv", "bo"):
                specs.append((f"attn.{l}.{nm}", (d,)))
        specs.append(("enc.in.w", (2 * d, f)))
        specs.append(("enc.in.b", (f,)))
        for k in range(self.n_ffn_blocks):
            specs.append((f"enc.{k}.w1", (f, f)))
            specs.append((f"enc.{k}.b1", (f,)))
            specs.append((f"enc.{k}.w2", (f, f)))
            specs.append((f"enc.{k}.b2", (f,)))
        specs.append(("head.w", (f, 1)))
        specs.append(("head.b", (1,)))
        return specs

    def validate(self) -> None:
        if self.d_model < 1 or self.ffn_dim < 1:
            raise WeightFormatError("d_model and ffn_dim must be positive")
        if self.n_heads < 1 or self.d_model % self.n_heads != 0:
            raise WeightFormatError(
                f"n_heads {self.n_heads} must divide d_model {self.d_model}"
            )
        if self.n_attn_layers < 1 or self.n_ffn_blocks < 0:
            raise WeightFormatError("layer counts out of range")
        off = self.vocab_offsets
        if len(off) == 0 or off[0] != 0 or any(
            off[i] >= off[i + 1] for i in range(len(off) - 1)
        ):
            raise WeightFormatError("vocab_offsets must start at 0 and strictly increase")
        if "embed" not in self.tensors:
            raise WeightFormatError("missing tensor 'embed'")
        emb = self.tensors["embed"]
        if emb.ndim != 2 or emb.shape[1] != self.d_model or emb.shape[0] <= off[-1]:
            raise WeightFormatError(
                f"tensor 'embed' has shape {tuple(emb.shape)}, "
                f"expected [V>{off[-1]}, {self.d_model}]"
            )
        for name, shape in self.required_specs():
            if name not in self.tensors:
                raise WeightFormatError(f"missing tensor {name!r}")
            got = tuple(self.tensors[name].shape)
            if got != shape:
                raise WeightFormatError(
                    f"tensor {name!r} has shape {got}, expected {shape}"
                )

    def token(self, var: int, value: int) -> int:
        return self.vocab_offsets[var] + value

    @classmethod
    def zeros(
        cls,
        cardinalities,
        d_model: int,
        n_heads: int,
        n_attn_layers: int,
        n_ffn_blocks: int,
        ffn_dim: int,
    ) -> "ScorerWeights":
        """All-zero weights sized for a model's token vocabulary."""
        cards = [int(c) for c in cardinalities]
        offsets = [0]
        for c in cards[:-1]:
            offsets.append(offsets[-1] + c)
        w = cls(
            d_model=d_model,
            n_heads=n_heads,
            n_attn_layers=n_attn_layers,
            n_ffn_blocks=n_ffn_blocks,
            ffn_dim=ffn_dim,
            vocab_offsets=tuple(offsets),
            tensors={},
        )
        w.tensors["embed"] = np.zeros((sum(cards), d_model), dtype=np.float32)
        for name, shape in w.required_specs():
            w.tensors[name] = np.zeros(shape, dtype=np.float32)
        w.validate()
        return w


def save_weights(path: str | Path, w: ScorerWeights) -> None:
    w.validate()
    names = ["embed"] + [name for name, _ in w.required_specs()]
    directory = []
    chunks = []
    offset = 0
    for name in names:
        arr = np.ascontiguousarray(w.tensors[name], dtype="<f4")
        directory.append({"name": name, "shape": list(arr.shape), "offset": offset})
        chunks.append(arr.tobytes())
        offset += len(chunks[-1])
    payload = b"".join(chunks)
    meta = {
        "d_model": w.d_model,
        "n_heads": w.n_heads,
        "n_attn_layers": w.n_attn_layers,
        "n_ffn_blocks": w.n_ffn_blocks,
        "ffn_dim": w.ffn_dim,
        "vocab_offsets": list(w.vocab_offsets),
    }
    meta.update(w.extra_meta)
    header = {
        "meta": meta,
        "tensors": directory,
        "payload_bytes": len(payload),
        "payload_crc32": format(zlib.crc32(payload) & 0xFFFFFFFF, "08x"),
    }
    blob = MAGIC + b"\n" + json.dumps(header, sort_keys=True).encode() + b"\n" + payload
    Path(path).write_bytes(blob)


def load_weights(path: str | Path) -> ScorerWeights:
    blob = Path(path).read_bytes()
    nl1 = blob.find(b"\n")
    if nl1 < 0 or blob[:nl1] != MAGIC:
        raise WeightFormatError(f"{path}: not a scorer weight file (bad magic)")
    nl2 = blob.find(b"\n", nl1 + 1)
    if nl2 < 0:
        raise WeightFormatError(f"{path}: missing header line")
    try:
        header = json.loads(blob[nl1 + 1 : nl2].decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise WeightFormatError(f"{path}: malformed header: {e}") from e
    payload = blob[nl2 + 1 :]
    try:
        meta = header["meta"]
        directory = header["tensors"]
        payload_bytes = int(header["payload_bytes"])
        crc_expect = str(header["payload_crc32"])
    except (KeyError, TypeError, ValueError) as e:
        raise WeightFormatError(f"{path}: header missing required field: {e}") from e
    if len(payload) != payload_bytes:
        raise WeightFormatError(
            f"{path}: payload truncated: expected {payload_bytes} bytes, got {len(payload)}"
        )
    crc_got = format(zlib.crc32(payload) & 0xFFFFFFFF, "08x")
    if crc_got != crc_expect:
        raise WeightFormatError(
            f"{path}: payload checksum mismatch (expected {crc_expect}, got {crc_got})"
        )
    tensors: dict[str, np.ndarray] = {}
    try:
        for ent in directory:
            name = ent["name"]
            shape = tuple(int(s) for s in ent["shape"])
            off = int(ent["offset"])
            count = 1
            for s in shape:
                count *= s
            end = off + 4 * count
            if off < 0 or end > len(payload):
                raise WeightFormatError(
                    f"{path}: tensor {name!r} extends past payload end"
                )
            arr = np.frombuffer(payload, dtype="<f4", count=count, offset=off)
            tensors[name] = arr.reshape(shape)
        known = {"d_model", "n_heads", "n_attn_layers", "n_ffn_blocks", "ffn_dim", "vocab_offsets"}
        w = ScorerWeights(
            d_model=int(meta["d_model"]),
            n_heads=int(meta["n_heads"]),
            n_attn_layers=int(meta["n_attn_layers"]),
            n_ffn_blocks=int(meta["n_ffn_blocks"]),
            ffn_dim=int(meta["ffn_dim"]),
            vocab_offsets=tuple(int(o) for o in meta["vocab_offsets"]),
            tensors=tensors,
            extra_meta={k: v for k, v in meta.items() if k not in known},
        )
    except (KeyError, TypeError, ValueError) as e:
        raise WeightFormatError(f"{path}: malformed tensor directory: {e}") from e
    w.validate()
    return w

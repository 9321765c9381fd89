"""Reader for the line-delimited training dataset.

The file contract: one JSON header line with ``{"format": 1,
"model_hash", "num_vars", "cardinalities"}``, then one JSON record per
line with exactly the fields ``evidence`` (variable -> value map, string
keys), ``state`` (full assignment including evidence variables), and
``neighbors`` (list of ``[var, value, label]`` triples describing each
1-flip move and whether it cuts the distance to the reference).

Records are grouped into queries by runs of identical evidence: the
generator emits every walk state of one query consecutively, so a new
evidence map marks the next query.  Splits are taken in file order
because queries are already independently sampled.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError

DATASET_FORMAT = 1


@dataclass(frozen=True)
class DatasetHeader:
    model_hash: str
    num_vars: int
    cardinalities: tuple[int, ...]

    @property
    def vocab_offsets(self) -> tuple[int, ...]:
        out = [0]
        for c in self.cardinalities[:-1]:
            out.append(out[-1] + int(c))
        return tuple(out)

    @property
    def num_tokens(self) -> int:
        return int(sum(self.cardinalities))


@dataclass(eq=False)
class Record:
    evidence: dict[int, int]
    state: np.ndarray  # [n] int64
    moves: np.ndarray  # [m, 2] int64 rows (var, value)
    labels: np.ndarray  # [m] float32 in {0, 1}


def _fail(path, line_no, msg) -> DataError:
    return DataError(f"{path}: line {line_no}: {msg}")


def _parse_header(path, line) -> DatasetHeader:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as e:
        raise _fail(path, 1, f"malformed header: {e}") from e
    if not isinstance(obj, dict):
        raise _fail(path, 1, "header must be a JSON object")
    if obj.get("format") != DATASET_FORMAT:
        raise _fail(path, 1, f"unsupported dataset format {obj.get('format')!r}")
    try:
        num_vars = int(obj["num_vars"])
        cards = tuple(int(c) for c in obj["cardinalities"])
        model_hash = str(obj["model_hash"])
    except (KeyError, TypeError, ValueError) as e:
        raise _fail(path, 1, f"header missing required field: {e}") from e
    if num_vars < 1 or len(cards) != num_vars or any(c < 1 for c in cards):
        raise _fail(path, 1, "header cardinalities inconsistent with num_vars")
    return DatasetHeader(model_hash=model_hash, num_vars=num_vars, cardinalities=cards)


def _parse_record(path, line_no, line, header: DatasetHeader) -> Record:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as e:
        raise _fail(path, line_no, f"malformed record: {e}") from e
    if not isinstance(obj, dict) or set(obj) != {"evidence", "state", "neighbors"}:
        raise _fail(path, line_no, "record fields must be exactly evidence/state/neighbors")
    n = header.num_vars
    cards = header.cardinalities
    try:
        evidence = {int(k): int(v) for k, v in obj["evidence"].items()}
        state = np.asarray([int(v) for v in obj["state"]], dtype=np.int64)
        triples = [(int(a), int(b), int(c)) for a, b, c in obj["neighbors"]]
    except (AttributeError, TypeError, ValueError) as e:
        raise _fail(path, line_no, f"unreadable record: {e}") from e
    if state.shape != (n,) or ((state < 0) | (state >= np.asarray(cards))).any():
        raise _fail(path, line_no, "state is not a full in-range assignment")
    for var, val in evidence.items():
        if not 0 <= var < n or not 0 <= val < cards[var]:
            raise _fail(path, line_no, f"evidence {var}={val} out of range")
        if int(state[var]) != val:
            raise _fail(path, line_no, f"state contradicts evidence on variable {var}")
    if not triples:
        raise _fail(path, line_no, "record has no neighbors")
    for var, val, label in triples:
        if not 0 <= var < n or var in evidence:
            raise _fail(path, line_no, f"neighbor flips non-query variable {var}")
        if not 0 <= val < cards[var] or val == int(state[var]):
            raise _fail(path, line_no, f"neighbor value {val} invalid for variable {var}")
        if label not in (0, 1):
            raise _fail(path, line_no, f"label must be 0 or 1, got {label}")
    return Record(
        evidence=evidence,
        state=state,
        moves=np.asarray([(v, val) for v, val, _ in triples], dtype=np.int64),
        labels=np.asarray([lb for _, _, lb in triples], dtype=np.float32),
    )


def read_dataset(path) -> tuple[DatasetHeader, list[Record]]:
    lines = Path(path).read_text().splitlines()
    if not lines:
        raise DataError(f"{path}: empty dataset file")
    header = _parse_header(path, lines[0])
    records = [
        _parse_record(path, i + 2, line, header)
        for i, line in enumerate(lines[1:])
        if line.strip()
    ]
    if not records:
        raise DataError(f"{path}: dataset holds no records")
    return header, records


def query_ids(records: list[Record]) -> np.ndarray:
    """Group index per record; increments whenever the evidence changes."""
    ids = np.empty(len(records), dtype=np.int64)
    gid = -1
    prev = None
    for i, rec in enumerate(records):
        if rec.evidence != prev:
            gid += 1
            prev = rec.evidence
        ids[i] = gid
    return ids


def split_by_query(
    ids: np.ndarray, split: tuple[int, int, int]
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Record indices of the train/validation/test splits, by file order.

    Queries beyond the first ``sum(split)`` are ignored.
    """
    n_train, n_val, n_test = (int(s) for s in split)
    if min(n_train, n_val, n_test) < 1:
        raise ConfigError(f"split counts must be positive, got {split}")
    total = int(ids.max()) + 1 if ids.size else 0
    if total < n_train + n_val + n_test:
        raise ConfigError(
            f"dataset has {total} queries, split {split} needs {n_train + n_val + n_test}"
        )
    train = np.flatnonzero(ids < n_train)
    val = np.flatnonzero((ids >= n_train) & (ids < n_train + n_val))
    test = np.flatnonzero((ids >= n_train + n_val) & (ids < n_train + n_val + n_test))
    return train, val, test


@dataclass(eq=False)
class EncodedDataset:
    """Dense token arrays ready for batching.

    Neighbor lists are padded to the longest neighborhood; padded slots
    carry token 0 with ``mask`` False and contribute nothing to the loss.
    """

    states: np.ndarray  # [N, n] int64 token ids
    moves: np.ndarray  # [N, M] int64 token ids, zero-padded
    labels: np.ndarray  # [N, M] float32
    mask: np.ndarray  # [N, M] bool

    def __len__(self) -> int:
        return self.states.shape[0]


def encode(header: DatasetHeader, records: list[Record]) -> EncodedDataset:
    offsets = np.asarray(header.vocab_offsets, dtype=np.int64)
    n_rec = len(records)
    max_m = max(rec.moves.shape[0] for rec in records)
    states = np.empty((n_rec, header.num_vars), dtype=np.int64)
    moves = np.zeros((n_rec, max_m), dtype=np.int64)
    labels = np.zeros((n_rec, max_m), dtype=np.float32)
    mask = np.zeros((n_rec, max_m), dtype=bool)
    for i, rec in enumerate(records):
        states[i] = offsets + rec.state
        m = rec.moves.shape[0]
        moves[i, :m] = offsets[rec.moves[:, 0]] + rec.moves[:, 1]
        labels[i, :m] = rec.labels
        mask[i, :m] = True
    return EncodedDataset(states=states, moves=moves, labels=labels, mask=mask)

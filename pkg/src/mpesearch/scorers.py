"""Move scorers for the 1-flip neighborhood.

Every scorer maps a batch of candidate moves to real scores under the same
interface, so search loops can swap the objective-gain scorer, the learned
scorer, or blends without changing selection logic.  Higher is better;
ties are broken by neighborhood order (variable ascending, value
ascending).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ContractError
from .model import Assignment, GraphicalModel, Move, QuerySpec, value_gains
from .weights import ScorerWeights


def minmax_normalize(gains) -> np.ndarray:
    """Rescale scores to [0, 1] by min-max.

    All-equal inputs map to 0.5.  ``-inf`` entries are clamped one finite
    range below the finite minimum first (so they land at 0); ``+inf``
    symmetrically above (landing at 1).
    """
    g = np.asarray(gains, dtype=np.float64)
    if g.size == 0:
        return g.copy()
    if np.isnan(g).any():
        raise ContractError("scores contain NaN")
    finite = g[np.isfinite(g)]
    if finite.size == 0:
        return np.full(g.shape, 0.5)
    fmin = float(finite.min())
    fmax = float(finite.max())
    pad = (fmax - fmin) or 1.0
    c = np.clip(g, fmin - pad, fmax + pad)
    mn = float(c.min())
    mx = float(c.max())
    if mx == mn:
        return np.full(g.shape, 0.5)
    return (c - mn) / (mx - mn)


class NeighborScorer:
    """Interface: score a batch of moves against the current assignment.

    ``ll_gains`` lets callers that already computed raw objective gains
    share them; scorers that do not need the gains ignore the argument.
    """

    def score_all(
        self,
        model: GraphicalModel,
        x: Assignment,
        q: QuerySpec,
        moves: list[Move],
        *,
        ll_gains: np.ndarray | None = None,
    ) -> np.ndarray:
        raise NotImplementedError


class LLGainScorer(NeighborScorer):
    """Raw objective gain of each move."""

    def score_all(self, model, x, q, moves, *, ll_gains=None):
        if ll_gains is not None:
            return np.asarray(ll_gains, dtype=np.float64)
        out = np.empty(len(moves), dtype=np.float64)
        per_var: dict[int, np.ndarray] = {}
        for i, m in enumerate(moves):
            gv = per_var.get(m.var)
            if gv is None:
                gv = value_gains(model, x, m.var)
                per_var[m.var] = gv
            out[i] = gv[m.value]
        return out


@dataclass(eq=False)
class HammingOracleScorer(NeighborScorer):
    """Scores 1.0 exactly for moves that shrink the query-variable
    Hamming distance to a fixed reference assignment, else 0.0."""

    reference: Assignment

    def score_all(self, model, x, q, moves, *, ll_gains=None):
        ref = self.reference
        out = np.zeros(len(moves), dtype=np.float64)
        for i, m in enumerate(moves):
            if int(x[m.var]) != int(ref[m.var]) and m.value == int(ref[m.var]):
                out[i] = 1.0
        return out


def _softmax_rows(z: np.ndarray) -> np.ndarray:
    m = z.max(axis=-1, keepdims=True)
    e = np.exp(z - m)
    return e / e.sum(axis=-1, keepdims=True)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def neural_forward(
    w: ScorerWeights,
    x: Assignment,
    q: QuerySpec,
    moves: list[Move],
    _t: dict[str, np.ndarray] | None = None,
) -> np.ndarray:
    """Inference pass of the learned scorer over a batch of moves.

    Tokens: every variable/value pair owns one embedding row; the full
    assignment (evidence included) forms the state token set, each move
    forms one query token.  Per attention layer the move representations
    attend over the state embeddings (keys and values always come from the
    raw state embeddings), heads are concatenated and projected.  The final
    move representation is concatenated with its raw embedding, projected
    into the feed-forward width, passed through residual ReLU blocks, and
    squashed to a probability by a sigmoid head.  No dropout, no
    normalization layers.
    """
    if not moves:
        raise ContractError("neural_forward needs at least one move")
    t = _t if _t is not None else {k: v.astype(np.float64) for k, v in w.tensors.items()}
    emb = t["embed"]
    offsets = np.asarray(w.vocab_offsets, dtype=np.int64)
    state_tokens = offsets + np.asarray(x, dtype=np.int64)
    if state_tokens.max() >= emb.shape[0]:
        raise ContractError("assignment token exceeds scorer vocabulary")
    S = emb[state_tokens]                       # [n, d]
    mtok = np.array([offsets[m.var] + m.value for m in moves], dtype=np.int64)
    if mtok.max() >= emb.shape[0]:
        raise ContractError("move token exceeds scorer vocabulary")
    M0 = emb[mtok]                              # [nm, d]

    d = w.d_model
    nh = w.n_heads
    dh = d // nh
    scale = 1.0 / math.sqrt(dh)
    n = S.shape[0]
    nm = M0.shape[0]

    H = M0
    for l in range(w.n_attn_layers):
        Q = H @ t[f"attn.{l}.wq"] + t[f"attn.{l}.bq"]
        K = S @ t[f"attn.{l}.wk"] + t[f"attn.{l}.bk"]
        V = S @ t[f"attn.{l}.wv"] + t[f"attn.{l}.bv"]
        Qh = Q.reshape(nm, nh, dh).transpose(1, 0, 2)   # [nh, nm, dh]
        Kh = K.reshape(n, nh, dh).transpose(1, 2, 0)    # [nh, dh, n]
        Vh = V.reshape(n, nh, dh).transpose(1, 0, 2)    # [nh, n, dh]
        att = _softmax_rows(Qh @ Kh * scale)            # [nh, nm, n]
        ctx = att @ Vh                                  # [nh, nm, dh]
        ctx = ctx.transpose(1, 0, 2).reshape(nm, d)
        H = ctx @ t[f"attn.{l}.wo"] + t[f"attn.{l}.bo"]

    z = np.concatenate([H, M0], axis=1)                 # [nm, 2d]
    h = np.maximum(z @ t["enc.in.w"] + t["enc.in.b"], 0.0)
    for k in range(w.n_ffn_blocks):
        inner = np.maximum(h @ t[f"enc.{k}.w1"] + t[f"enc.{k}.b1"], 0.0)
        h = np.maximum(h + inner @ t[f"enc.{k}.w2"] + t[f"enc.{k}.b2"], 0.0)
    logit = (h @ t["head.w"] + t["head.b"]).ravel()
    return _sigmoid(logit)


@dataclass(eq=False)
class NeuralScorer(NeighborScorer):
    """Learned scorer; batches the whole neighborhood through one forward
    pass.  Validates once that the weight vocabulary matches the model."""

    weights: ScorerWeights

    def __post_init__(self):
        self.weights.validate()
        self._t = {k: v.astype(np.float64) for k, v in self.weights.tensors.items()}
        self._checked: int | None = None

    def _check_model(self, model: GraphicalModel) -> None:
        if self._checked == id(model):
            return
        w = self.weights
        if len(w.vocab_offsets) != model.num_vars:
            raise ConfigError(
                f"scorer weights cover {len(w.vocab_offsets)} variables, model has {model.num_vars}"
            )
        for v in range(model.num_vars):
            if w.cardinality(v) != int(model.cardinalities[v]):
                raise ConfigError(
                    f"scorer weights disagree with model on cardinality of variable {v}"
                )
        self._checked = id(model)

    def score_all(self, model, x, q, moves, *, ll_gains=None):
        self._check_model(model)
        return neural_forward(self.weights, x, q, moves, self._t)


@dataclass(eq=False)
class CombinedScorer(NeighborScorer):
    """Convex blend of min-max normalized objective gains with the learned
    score: ``(1 - mix) * normalized_gain + mix * neural``.

    ``mix = 0`` reproduces raw-gain greedy selection (shared tie-break);
    ``mix = 1`` is the pure learned scorer.
    """

    neural: NeuralScorer
    mix: float

    def __post_init__(self):
        if isinstance(self.neural, ScorerWeights):
            self.neural = NeuralScorer(self.neural)
        if not 0.0 <= self.mix <= 1.0:
            raise ConfigError(f"mix weight must be in [0, 1], got {self.mix}")
        self._ll = LLGainScorer()

    def score_all(self, model, x, q, moves, *, ll_gains=None):
        gains = self._ll.score_all(model, x, q, moves, ll_gains=ll_gains)
        norm = minmax_normalize(gains)
        nn = self.neural.score_all(model, x, q, moves)
        return (1.0 - self.mix) * norm + self.mix * nn

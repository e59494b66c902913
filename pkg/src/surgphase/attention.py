"""Scaled dot-product attention: exact (dense) and sampled-sparse paths.

The dense path is the textbook computation with optional causal masking
and multi-head column splitting; rows are processed in blocks so memory
stays bounded for long sequences.

The sparse path exploits the observation that most query rows produce a
near-uniform attention distribution and therefore contribute little
beyond an average of the value rows.  Each query scores itself by
``max - mean`` of its dot products against a small random subset of keys
(about ``sample_factor * ln(num_queries)`` of them); only the
``top_u_factor * ln(num_queries)`` highest-scoring queries get an exact
attention row, and every other query falls back to a cheap aggregate of
the value matrix.  That turns the quadratic score matrix into an
``O(L log L)`` computation.

Key subsets come from the counter-based scheme in :mod:`surgphase.rng`,
so results are a pure function of ``(seed, shapes)``.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np

from .config import SparseConfig
from .errors import ConfigError, ShapeError
from .linalg import LinearLayer, as_matrix, check_finite, linear_apply
from .rng import sample_key_indices

# Rows of the query matrix processed per score-matrix block in the dense
# path.  Bounds transient memory to block_rows * num_keys floats.
_DENSE_BLOCK_ROWS = 1024


@dataclass(frozen=True)
class AttentionConfig:
    """Head layout and masking for one attention call."""

    model_dim: int
    num_heads: int = 1
    causal: bool = False

    def __post_init__(self) -> None:
        if self.model_dim < 1:
            raise ConfigError(f"model_dim must be >= 1, got {self.model_dim}")
        if self.num_heads < 1 or self.model_dim % self.num_heads != 0:
            raise ConfigError(
                f"num_heads ({self.num_heads}) must divide model_dim ({self.model_dim})"
            )

    @property
    def head_dim(self) -> int:
        return self.model_dim // self.num_heads


@dataclass(frozen=True)
class AttentionWeights:
    """Learned projections wrapped around an attention core."""

    query: LinearLayer
    key: LinearLayer
    value: LinearLayer
    output: LinearLayer


def top_query_count(num_queries: int, factor: float) -> int:
    """How many queries receive exact attention: ``factor * ln(L)``, clamped."""
    if num_queries < 1:
        raise ValueError(f"num_queries must be >= 1, got {num_queries}")
    return min(num_queries, max(1, math.ceil(factor * math.log(num_queries))))


def keys_per_query(num_queries: int, factor: float) -> int:
    """Sampled keys per query when scoring: ``factor * ln(L)``, at least 1."""
    if num_queries < 1:
        raise ValueError(f"num_queries must be >= 1, got {num_queries}")
    return max(1, math.ceil(factor * math.log(num_queries)))


def sampled_pair_budget(num_queries: int, num_keys: int) -> int:
    """Nominal total of sampled query-key dot products, ``L_K * ln(L_Q)``."""
    if num_queries < 1 or num_keys < 1:
        raise ValueError("need at least one query and one key")
    return int(math.floor(num_keys * math.log(num_queries)))


def _validate_qkv(
    q: np.ndarray,
    k: np.ndarray,
    v: np.ndarray,
    cfg: AttentionConfig,
    enforce_square: bool = True,
) -> None:
    if q.shape[1] != k.shape[1]:
        raise ShapeError(
            f"query dim {q.shape[1]} does not match key dim {k.shape[1]}"
        )
    if k.shape[0] != v.shape[0]:
        raise ShapeError(
            f"key count {k.shape[0]} does not match value count {v.shape[0]}"
        )
    if q.shape[1] != cfg.model_dim:
        raise ShapeError(
            f"query dim {q.shape[1]} does not match configured model_dim {cfg.model_dim}"
        )
    if v.shape[1] % cfg.num_heads != 0:
        raise ShapeError(
            f"value dim {v.shape[1]} is not divisible by num_heads {cfg.num_heads}"
        )
    if q.shape[0] < 1 or k.shape[0] < 1:
        raise ShapeError("attention needs at least one query and one key")
    if enforce_square and cfg.causal and q.shape[0] != k.shape[0]:
        raise ShapeError(
            f"causal attention requires square shapes, got {q.shape[0]} queries "
            f"and {k.shape[0]} keys"
        )


def _split_heads(x: np.ndarray, num_heads: int) -> np.ndarray:
    """(rows, dim) -> (heads, rows, dim/heads)."""
    rows, dim = x.shape
    return x.reshape(rows, num_heads, dim // num_heads).transpose(1, 0, 2)


def _merge_heads(x: np.ndarray) -> np.ndarray:
    """(heads, rows, width) -> (rows, heads*width)."""
    heads, rows, width = x.shape
    return x.transpose(1, 0, 2).reshape(rows, heads * width)


def _masked_softmax_matmul(
    qh: np.ndarray,
    kh: np.ndarray,
    vh: np.ndarray,
    mask: np.ndarray | None,
) -> np.ndarray:
    """Head-batched attention kernel, computed in query-row blocks.

    Inputs are (heads, rows, width); ``mask`` (queries x keys, True =
    visible) is shared across heads and must leave every query at least
    one visible key.
    """
    scale = 1.0 / math.sqrt(qh.shape[2])
    out = np.empty((qh.shape[0], qh.shape[1], vh.shape[2]), dtype=np.float64)
    kt = kh.transpose(0, 2, 1)
    for start in range(0, qh.shape[1], _DENSE_BLOCK_ROWS):
        stop = min(start + _DENSE_BLOCK_ROWS, qh.shape[1])
        scores = (qh[:, start:stop] @ kt) * scale
        if mask is not None:
            np.copyto(scores, -np.inf, where=~mask[start:stop])
        scores -= scores.max(axis=2, keepdims=True)
        np.exp(scores, out=scores)
        scores /= scores.sum(axis=2, keepdims=True)
        out[:, start:stop] = scores @ vh
    return out


@functools.lru_cache(maxsize=64)
def causal_mask(rows: int) -> np.ndarray:
    """Lower-triangular visibility mask (read-only, cached by size)."""
    mask = np.tril(np.ones((rows, rows), dtype=bool))
    mask.setflags(write=False)
    return mask


def masked_attention(
    q,
    k,
    v,
    cfg: AttentionConfig,
    mask: np.ndarray | None,
) -> np.ndarray:
    """Exact attention under an arbitrary visibility mask.

    This is the engine behind :func:`dense_attention` and the frame-aware
    cross-attention used by the fusion modules.  ``mask`` is authoritative
    (``cfg.causal`` is ignored here); pass None for full visibility.
    """
    q = as_matrix(q, "query")
    k = as_matrix(k, "key")
    v = as_matrix(v, "value")
    _validate_qkv(q, k, v, cfg, enforce_square=False)
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != (q.shape[0], k.shape[0]):
            raise ShapeError(
                f"mask shape {mask.shape} does not match "
                f"(queries, keys) = ({q.shape[0]}, {k.shape[0]})"
            )
        if not mask.any(axis=1).all():
            raise ShapeError("attention mask leaves a query with no visible keys")
    out = _masked_softmax_matmul(
        _split_heads(q, cfg.num_heads),
        _split_heads(k, cfg.num_heads),
        _split_heads(v, cfg.num_heads),
        mask,
    )
    return check_finite(_merge_heads(out), "attention output")


def dense_attention(q, k, v, cfg: AttentionConfig) -> np.ndarray:
    """Exact scaled dot-product attention.

    Computes ``softmax(q @ k.T / sqrt(head_dim)) @ v`` per head.  With
    ``cfg.causal`` row ``i`` only sees keys ``0..i`` (shapes must be
    square); masked scores are excluded before exponentiation, never
    zeroed afterwards.
    """
    q = as_matrix(q, "query")
    k = as_matrix(k, "key")
    v = as_matrix(v, "value")
    _validate_qkv(q, k, v, cfg)
    mask = causal_mask(q.shape[0]) if cfg.causal else None
    return masked_attention(q, k, v, cfg, mask)


def cross_attention(
    q_source,
    kv_source,
    weights: AttentionWeights,
    cfg: AttentionConfig,
) -> np.ndarray:
    """Projected attention of one sequence onto another.

    Queries come from ``q_source``; keys and values from ``kv_source``.
    All four learned projections are applied here — the attention cores
    themselves are projection-free.
    """
    q = linear_apply(weights.query, as_matrix(q_source, "q_source"))
    kv = as_matrix(kv_source, "kv_source")
    k = linear_apply(weights.key, kv)
    v = linear_apply(weights.value, kv)
    mixed = dense_attention(q, k, v, cfg)
    return linear_apply(weights.output, mixed)


def sparsity_measure(q, k, sampled_key_indices_per_query, head_dim: int | None = None) -> np.ndarray:
    """Max-minus-mean score of each query over its sampled keys.

    A query whose scaled dot products against the sampled keys have a
    large maximum relative to their mean is far from producing a uniform
    attention row, so it is worth exact treatment.  Returns one score per
    query.
    """
    q = as_matrix(q, "query")
    k = as_matrix(k, "key")
    if q.shape[1] != k.shape[1]:
        raise ShapeError(f"query dim {q.shape[1]} does not match key dim {k.shape[1]}")
    if len(sampled_key_indices_per_query) != q.shape[0]:
        raise ShapeError(
            f"need one index set per query: got {len(sampled_key_indices_per_query)} "
            f"for {q.shape[0]} queries"
        )
    scale = 1.0 / math.sqrt(head_dim if head_dim is not None else q.shape[1])
    scores = np.empty(q.shape[0], dtype=np.float64)
    for i, raw in enumerate(sampled_key_indices_per_query):
        idx = np.asarray(raw, dtype=np.int64)
        if idx.size == 0:
            raise ShapeError(f"query {i} has an empty sampled key set")
        if idx.min() < 0 or idx.max() >= k.shape[0]:
            raise ShapeError(f"query {i} samples a key index out of range")
        logits = (q[i] @ k[idx].T) * scale
        scores[i] = logits.max() - logits.mean()
    return scores


def select_top_queries(scores: np.ndarray, count: int) -> np.ndarray:
    """Indices of the ``count`` highest scores, ascending; ties prefer lower index."""
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim != 1 or scores.size == 0:
        raise ShapeError("scores must be a non-empty 1-D array")
    if not 1 <= count <= scores.size:
        raise ValueError(f"count must be in [1, {scores.size}], got {count}")
    order = np.lexsort((np.arange(scores.size), -scores))
    return np.sort(order[:count])


def _lazy_rows(v: np.ndarray, num_queries: int, causal: bool) -> np.ndarray:
    """Fallback output for queries that skip exact attention.

    Non-causal: every lazy query gets the column mean of ``v``.  Causal:
    query ``i`` gets the running mean of value rows ``0..i``, which uses
    exactly the rows it is allowed to see.
    """
    if not causal:
        return np.broadcast_to(v.mean(axis=0), (num_queries, v.shape[1]))
    running = np.cumsum(v, axis=0)
    running /= np.arange(1, v.shape[0] + 1, dtype=np.float64)[:, None]
    return running


def probsparse_attention(q, k, v, cfg: AttentionConfig, sparse: SparseConfig) -> np.ndarray:
    """Attention with sampled query scoring and a top-query exact pass.

    Matches :func:`dense_attention` on the selected queries exactly (same
    kernel, all keys); the remaining queries receive the mean-of-values
    fallback from :func:`_lazy_rows`.  Per-query key samples are drawn by
    the deterministic counter scheme seeded from ``sparse.seed``, so two
    calls with identical inputs agree bit for bit.
    """
    q = as_matrix(q, "query")
    k = as_matrix(k, "key")
    v = as_matrix(v, "value")
    _validate_qkv(q, k, v, cfg)

    num_q, num_k = q.shape[0], k.shape[0]
    draws = keys_per_query(num_q, sparse.sample_factor)
    exact_count = top_query_count(num_q, sparse.top_u_factor)
    indices, valid = sample_key_indices(sparse.seed, num_q, num_k, draws, cfg.causal)
    counts = valid.sum(axis=1)

    out = np.empty((num_q, v.shape[1]), dtype=np.float64)
    width_q = q.shape[1] // cfg.num_heads
    width_v = v.shape[1] // cfg.num_heads
    col = np.arange(num_k, dtype=np.int64)
    for h in range(cfg.num_heads):
        qs = slice(h * width_q, (h + 1) * width_q)
        vs = slice(h * width_v, (h + 1) * width_v)
        qh, kh, vh = q[:, qs], k[:, qs], v[:, vs]
        scale = 1.0 / math.sqrt(qh.shape[1])

        # Score every query against its sampled keys in one gather.
        gathered = kh[indices]  # (num_q, draws, head_dim)
        logits = np.einsum("qd,qjd->qj", qh, gathered) * scale
        neg = np.where(valid, logits, -np.inf)
        highest = neg.max(axis=1)
        mean = np.where(valid, logits, 0.0).sum(axis=1) / counts
        measure = highest - mean

        selected = select_top_queries(measure, exact_count)

        # Exact attention for the selected queries only.
        sel_mask = None
        if cfg.causal:
            sel_mask = col[None, :] <= selected[:, None]
        exact = _masked_softmax_matmul(
            qh[selected][None], kh[None], vh[None], sel_mask
        )[0]

        head_out = np.array(_lazy_rows(vh, num_q, cfg.causal))
        head_out[selected] = exact
        out[:, vs] = head_out
    return check_finite(out, "sparse attention output")

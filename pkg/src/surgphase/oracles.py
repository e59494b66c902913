"""Independent brute-force references used to verify the engine.

Everything here is written from the *definitions* — textbook softmax
attention with explicit loops, exhaustive query scoring, a pure-integer
re-implementation of the counter-based sampling scheme, and a
straightline recomposition of the whole per-frame pipeline via
recursion and memoization instead of incremental state.

This module must stay decoupled from the optimized code: it imports
only plain data containers (configs, sequences, the weight store used
as a dict of arrays) and never calls into the attention, fusion, model,
rng, or streaming modules.  A test enforces that import discipline.
"""

from __future__ import annotations

import math

import numpy as np

from .config import ModelConfig
from .seqtypes import PhaseOutput
from .weights import WeightStore

# ---------------------------------------------------------------------------
# Deterministic sampling, re-derived with pure Python integers.

_MASK = 0xFFFFFFFFFFFFFFFF


def oracle_splitmix64(value: int) -> int:
    z = (value + 0x9E3779B97F4A7C15) & _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def oracle_derive(seed: int, *parts: int) -> int:
    state = oracle_splitmix64(seed & _MASK)
    for part in parts:
        state = oracle_splitmix64(state ^ oracle_splitmix64(part & _MASK))
    return state


def oracle_sample(
    seed: int, num_queries: int, num_keys: int, draws: int, causal: bool
) -> list[list[int]]:
    """Sampled key indices per query: ``derive(derive(seed, i), j) % population``."""
    per_query: list[list[int]] = []
    for i in range(num_queries):
        population = i + 1 if causal else num_keys
        if population <= draws:
            per_query.append(list(range(population)))
            continue
        query_seed = oracle_derive(seed, i)
        per_query.append([oracle_derive(query_seed, j) % population for j in range(draws)])
    return per_query


# ---------------------------------------------------------------------------
# Brute-force attention.


def _naive_softmax(scores: list[float]) -> list[float]:
    exps = [math.exp(s) for s in scores]
    total = sum(exps)
    return [e / total for e in exps]


def naive_attention(q, k, v, causal: bool = False, num_heads: int = 1) -> np.ndarray:
    """Attention from the definition: explicit loops, no masking tricks.

    For each head and each query row: score every visible key with the
    scaled dot product, softmax the scores, and take the weighted sum of
    value rows.  Causal mode restricts query ``i`` to keys ``0..i``.
    """
    q = np.asarray(q, dtype=np.float64)
    k = np.asarray(k, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    out = np.zeros((q.shape[0], v.shape[1]), dtype=np.float64)
    q_width = q.shape[1] // num_heads
    v_width = v.shape[1] // num_heads
    for head in range(num_heads):
        qs = slice(head * q_width, (head + 1) * q_width)
        vs = slice(head * v_width, (head + 1) * v_width)
        scale = 1.0 / math.sqrt(q_width)
        for i in range(q.shape[0]):
            visible = range(i + 1) if causal else range(k.shape[0])
            scores = [float(np.dot(q[i, qs], k[j, qs])) * scale for j in visible]
            weights = _naive_softmax(scores)
            row = np.zeros(v_width, dtype=np.float64)
            for weight, j in zip(weights, visible):
                row += weight * v[j, vs]
            out[i, vs] = row
    return out


def exhaustive_sparsity_rank(q, k, head_dim: int | None = None) -> tuple[np.ndarray, list[int]]:
    """Full (unsampled) max-minus-mean score per query, plus the ranking.

    Returns ``(scores, order)`` where ``order`` lists query indices from
    highest score to lowest, ties broken toward the lower index.
    """
    q = np.asarray(q, dtype=np.float64)
    k = np.asarray(k, dtype=np.float64)
    scale = 1.0 / math.sqrt(head_dim if head_dim is not None else q.shape[1])
    scores = np.empty(q.shape[0], dtype=np.float64)
    for i in range(q.shape[0]):
        logits = [float(np.dot(q[i], k[j])) * scale for j in range(k.shape[0])]
        scores[i] = max(logits) - sum(logits) / len(logits)
    order = sorted(range(q.shape[0]), key=lambda i: (-scores[i], i))
    return scores, order


def oracle_probsparse(
    q,
    k,
    v,
    num_heads: int,
    seed: int,
    causal: bool,
    top_u_factor: float,
    sample_factor: float,
) -> np.ndarray:
    """Sampled-sparse attention from the definition, loop by loop."""
    q = np.asarray(q, dtype=np.float64)
    k = np.asarray(k, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    num_q, num_k = q.shape[0], k.shape[0]
    draws = max(1, math.ceil(sample_factor * math.log(num_q)))
    exact_count = min(num_q, max(1, math.ceil(top_u_factor * math.log(num_q))))
    samples = oracle_sample(seed, num_q, num_k, draws, causal)

    out = np.zeros((num_q, v.shape[1]), dtype=np.float64)
    q_width = q.shape[1] // num_heads
    v_width = v.shape[1] // num_heads
    for head in range(num_heads):
        qs = slice(head * q_width, (head + 1) * q_width)
        vs = slice(head * v_width, (head + 1) * v_width)
        scale = 1.0 / math.sqrt(q_width)

        measures = []
        for i in range(num_q):
            logits = [float(np.dot(q[i, qs], k[j, qs])) * scale for j in samples[i]]
            measures.append(max(logits) - sum(logits) / len(logits))
        selected = sorted(sorted(range(num_q), key=lambda i: (-measures[i], i))[:exact_count])

        for i in range(num_q):
            if i in selected:
                visible = range(i + 1) if causal else range(num_k)
                scores = [float(np.dot(q[i, qs], k[j, qs])) * scale for j in visible]
                weights = _naive_softmax(scores)
                row = np.zeros(v_width, dtype=np.float64)
                for weight, j in zip(weights, visible):
                    row += weight * v[j, vs]
                out[i, vs] = row
            elif causal:
                out[i, vs] = v[: i + 1, vs].mean(axis=0)
            else:
                out[i, vs] = v[:, vs].mean(axis=0)
    return out


# ---------------------------------------------------------------------------
# Straightline pipeline recomposition.
#
# The engine steps a mutable state forward one frame at a time; this
# reference instead defines each stage's output at frame t as a pure
# function of frame index, evaluated by recursion with memoization.  The
# architecture constants below (normalization epsilon, positional base,
# GELU coefficients, stage ids for seed derivation) are part of the
# model contract and are restated here on purpose.

_EPS = 1e-5
_POS_BASE = 10000.0
_GLOBAL_STAGE_ID = 3


def _linear(x: np.ndarray, store: WeightStore, prefix: str) -> np.ndarray:
    return x @ store[prefix + ".w"].T + store[prefix + ".b"]


def _norm(x: np.ndarray, store: WeightStore, prefix: str) -> np.ndarray:
    mean = x.mean(axis=1, keepdims=True)
    centered = x - mean
    variance = (centered**2).mean(axis=1, keepdims=True)
    return centered / np.sqrt(variance + _EPS) * store[prefix + ".g"] + store[prefix + ".b"]


def _gelu(x: np.ndarray) -> np.ndarray:
    return 0.5 * x * (1.0 + np.tanh(math.sqrt(2.0 / math.pi) * (x + 0.044715 * x**3)))


def _posenc(frames: list[int], dim: int) -> np.ndarray:
    code = np.zeros((len(frames), dim), dtype=np.float64)
    for row, frame in enumerate(frames):
        for pair in range(dim // 2):
            rate = _POS_BASE ** (-2.0 * pair / dim)
            code[row, 2 * pair] = math.sin(frame * rate)
            code[row, 2 * pair + 1] = math.cos(frame * rate)
        if dim % 2:
            rate = _POS_BASE ** (-(dim - 1.0) / dim)
            code[row, dim - 1] = math.sin(frame * rate)
    return code


def _masked_rows_attention(
    q: np.ndarray,
    k: np.ndarray,
    v: np.ndarray,
    num_heads: int,
    visible_per_row: list[list[int]] | None,
) -> np.ndarray:
    out = np.zeros((q.shape[0], v.shape[1]), dtype=np.float64)
    q_width = q.shape[1] // num_heads
    v_width = v.shape[1] // num_heads
    for head in range(num_heads):
        qs = slice(head * q_width, (head + 1) * q_width)
        vs = slice(head * v_width, (head + 1) * v_width)
        scale = 1.0 / math.sqrt(q_width)
        for i in range(q.shape[0]):
            visible = (
                visible_per_row[i] if visible_per_row is not None else list(range(k.shape[0]))
            )
            scores = [float(np.dot(q[i, qs], k[j, qs])) * scale for j in visible]
            weights = _naive_softmax(scores)
            row = np.zeros(v_width, dtype=np.float64)
            for weight, j in zip(weights, visible):
                row += weight * v[j, vs]
            out[i, vs] = row
    return out


def _attn_sublayer(
    x_q: np.ndarray,
    x_kv: np.ndarray,
    store: WeightStore,
    prefix: str,
    num_heads: int,
    visible_per_row: list[list[int]] | None,
) -> np.ndarray:
    q = _linear(x_q, store, prefix + ".q")
    k = _linear(x_kv, store, prefix + ".k")
    v = _linear(x_kv, store, prefix + ".v")
    mixed = _masked_rows_attention(q, k, v, num_heads, visible_per_row)
    return _linear(mixed, store, prefix + ".o")


def _probsparse_sublayer(
    x: np.ndarray,
    store: WeightStore,
    prefix: str,
    num_heads: int,
    seed: int,
    causal: bool,
    top_u_factor: float,
    sample_factor: float,
) -> np.ndarray:
    q = _linear(x, store, prefix + ".q")
    k = _linear(x, store, prefix + ".k")
    v = _linear(x, store, prefix + ".v")
    mixed = oracle_probsparse(q, k, v, num_heads, seed, causal, top_u_factor, sample_factor)
    return _linear(mixed, store, prefix + ".o")


def _feed_forward(x: np.ndarray, store: WeightStore, prefix: str) -> np.ndarray:
    return _linear(_gelu(_linear(x, store, prefix + ".ff.lift")), store, prefix + ".ff.drop")


def _causal_rows(frames_q: list[int], frames_k: list[int]) -> list[list[int]]:
    return [[j for j, fk in enumerate(frames_k) if fk <= fq] for fq in frames_q]


def _fusion(
    aux: np.ndarray,
    main: np.ndarray,
    store: WeightStore,
    prefix: str,
    cfg: ModelConfig,
    encoder_layers: int,
    decoder_layers: int,
    model_dim: int,
    aux_start: int,
    main_start: int,
    causal: bool = False,
    sparse_seed: int | None = None,
) -> np.ndarray:
    if f"{prefix}.aux_in.w" in store:
        aux = _linear(aux, store, f"{prefix}.aux_in")
    if f"{prefix}.main_in.w" in store:
        main = _linear(main, store, f"{prefix}.main_in")
    aux_frames = list(range(aux_start, aux_start + aux.shape[0]))
    main_frames = list(range(main_start, main_start + main.shape[0]))
    aux = aux + _posenc(aux_frames, model_dim)
    main = main + _posenc(main_frames, model_dim)

    enc_self = _causal_rows(aux_frames, aux_frames) if causal and sparse_seed is None else None
    x = aux
    for i in range(encoder_layers):
        layer = f"{prefix}.enc.{i}"
        normed = _norm(x, store, f"{layer}.norm1")
        if sparse_seed is not None:
            x = x + _probsparse_sublayer(
                normed,
                store,
                f"{layer}.attn",
                cfg.num_heads,
                oracle_derive(sparse_seed, i),
                causal,
                cfg.sparse.top_u_factor,
                cfg.sparse.sample_factor,
            )
        else:
            x = x + _attn_sublayer(normed, normed, store, f"{layer}.attn", cfg.num_heads, enc_self)
        x = x + _feed_forward(_norm(x, store, f"{layer}.norm2"), store, layer)
    encoded = _norm(x, store, f"{prefix}.enc_norm")

    dec_self = _causal_rows(main_frames, main_frames) if causal else None
    cross = _causal_rows(main_frames, aux_frames) if causal else None
    y = main
    for i in range(decoder_layers):
        layer = f"{prefix}.dec.{i}"
        normed = _norm(y, store, f"{layer}.norm1")
        y = y + _attn_sublayer(normed, normed, store, f"{layer}.self", cfg.num_heads, dec_self)
        normed = _norm(y, store, f"{layer}.norm2")
        y = y + _attn_sublayer(normed, encoded, store, f"{layer}.cross", cfg.num_heads, cross)
        y = y + _feed_forward(_norm(y, store, f"{layer}.norm3"), store, layer)
    return _norm(y, store, f"{prefix}.dec_norm")


def _sigmoid(values: np.ndarray) -> np.ndarray:
    return np.asarray([1.0 / (1.0 + math.exp(-v)) for v in values])


def straightline_outputs(
    features: np.ndarray,
    store: WeightStore,
    cfg: ModelConfig,
    seed_root: int,
) -> list[PhaseOutput]:
    """Recompute every frame's output from first principles.

    Stage outputs are defined recursively: the short stage at frame t
    fuses the previous short-stage output (one short-span earlier) into
    the window of the last ``window_short`` embeddings; the long stage
    repeats the pattern over short rows with the long span; the global
    stage causally compresses long rows 1..t; the head fuses all three.
    Memoization makes this O(T) stage evaluations, but no incremental
    state is shared between frames — each value depends only on frame
    index, inputs, weights, and the seed.
    """
    features = np.asarray(features, dtype=np.float64)
    total = features.shape[0]
    seed_root = int(seed_root) & _MASK
    short_full: dict[int, np.ndarray] = {}
    long_full: dict[int, np.ndarray] = {}

    def short_stage(t: int) -> np.ndarray:
        if t not in short_full:
            start = max(1, t - cfg.window_short + 1)
            window = features[start - 1 : t]
            prev_t = t - cfg.window_short
            if prev_t >= 1:
                prev, prev_start = short_stage(prev_t), max(1, prev_t - cfg.window_short + 1)
            else:
                prev, prev_start = np.zeros((1, cfg.dim_short)), 0
            first = _fusion(
                prev, window, store, "short.0", cfg,
                cfg.short_layers[0], cfg.short_layers[1], cfg.dim_short,
                aux_start=prev_start, main_start=start,
            )
            short_full[t] = _fusion(
                first, window, store, "short.1", cfg,
                cfg.short_layers[0], cfg.short_layers[1], cfg.dim_short,
                aux_start=start, main_start=start,
            )
        return short_full[t]

    def short_row(t: int) -> np.ndarray:
        return short_stage(t)[-1]

    def long_stage(t: int) -> np.ndarray:
        if t not in long_full:
            start = max(1, t - cfg.window_long + 1)
            window = np.asarray([short_row(u) for u in range(start, t + 1)])
            prev_t = t - cfg.window_long
            if prev_t >= 1:
                prev, prev_start = long_stage(prev_t), max(1, prev_t - cfg.window_long + 1)
            else:
                prev, prev_start = np.zeros((1, cfg.dim_long)), 0
            first = _fusion(
                prev, window, store, "long.0", cfg,
                cfg.long_layers[0], cfg.long_layers[1], cfg.dim_long,
                aux_start=prev_start, main_start=start,
            )
            long_full[t] = _fusion(
                first, window, store, "long.1", cfg,
                cfg.long_layers[0], cfg.long_layers[1], cfg.dim_long,
                aux_start=start, main_start=start,
            )
        return long_full[t]

    def long_row(t: int) -> np.ndarray:
        return long_stage(t)[-1]

    outputs: list[PhaseOutput] = []
    for t in range(1, total + 1):
        history = np.asarray([long_row(u) for u in range(1, t + 1)])
        start = max(1, t - cfg.window_short + 1)
        long_win = history[start - 1 :]
        global_win = _fusion(
            history, long_win, store, "global.0", cfg,
            cfg.global_layers[0], cfg.global_layers[1], cfg.dim_global,
            aux_start=1, main_start=start,
            causal=True, sparse_seed=oracle_derive(seed_root, t, _GLOBAL_STAGE_ID),
        )
        short_win = np.asarray([short_row(u) for u in range(start, t + 1)])
        fused = _fusion(
            short_win, long_win, store, "head.local.0", cfg,
            cfg.head_layers[0], cfg.head_layers[1], cfg.dim_long,
            aux_start=start, main_start=start,
        )
        final = _fusion(
            global_win, fused, store, "head.global.0", cfg,
            cfg.head_layers[0], cfg.head_layers[1], cfg.dim_long,
            aux_start=start, main_start=start,
        )
        logits = _linear(final, store, "out.logits")
        heat = _sigmoid(_linear(final, store, "out.heat")[:, 0])
        outputs.append(PhaseOutput.from_logits(t, logits[-1], float(heat[-1])))
    return outputs

"""Two-branch encoder/decoder fusion module.

Each fusion module merges an auxiliary sequence into a main sequence:
the encoder runs self-attention layers over the auxiliary branch, the
decoder runs self-attention over the main branch plus cross-attention
onto the encoded auxiliary rows, and the output has one row per main
row.  Layers are pre-norm (normalize, apply sublayer, add residual)
with a final normalization on each stack, and feed-forward sublayers
use a GELU between a widening and a narrowing linear map.

Positional information is injected by adding a sinusoidal code of each
row's *absolute* frame index after the input projection, so a window
that slides over a stream keeps consistent phase regardless of where
it starts.

In causal mode the decoder's self-attention is lower-triangular and its
cross-attention only lets a main row at frame ``t`` see auxiliary rows
at frames ``<= t``; the encoder becomes causal self-attention too.  The
auxiliary and main branches may start at different absolute frames —
masks compare frame indices, not row positions.
"""

from __future__ import annotations

from dataclasses import replace

import numpy as np

from .attention import (
    AttentionConfig,
    AttentionWeights,
    causal_mask,
    masked_attention,
    probsparse_attention,
)
from .config import FusionConfig
from .errors import ShapeError
from .linalg import as_matrix, check_finite, gelu, layer_norm, linear_apply
from .rng import derive_seed
from .weights import BlockWeights

POSITION_BASE = 10000.0


def positional_encoding(frames: np.ndarray, dim: int) -> np.ndarray:
    """Sinusoidal code of absolute frame indices, shaped (len(frames), dim).

    Column pairs ``(2i, 2i+1)`` hold ``sin`` and ``cos`` of
    ``frame / POSITION_BASE ** (2i / dim)``.
    """
    if dim < 1:
        raise ShapeError(f"positional encoding dim must be >= 1, got {dim}")
    positions = np.asarray(frames, dtype=np.float64)[:, None]
    pair_index = np.arange(0, dim, 2, dtype=np.float64)
    rates = POSITION_BASE ** (-pair_index / dim)
    angles = positions * rates[None, :]
    code = np.zeros((positions.shape[0], dim), dtype=np.float64)
    code[:, 0::2] = np.sin(angles)
    code[:, 1::2] = np.cos(angles)[:, : dim // 2]
    return code


def _attention_weights(block: BlockWeights, local: str) -> AttentionWeights:
    return AttentionWeights(
        query=block.linear(f"{local}.q"),
        key=block.linear(f"{local}.k"),
        value=block.linear(f"{local}.v"),
        output=block.linear(f"{local}.o"),
    )


def _feed_forward(x: np.ndarray, block: BlockWeights, layer: str) -> np.ndarray:
    lifted = gelu(linear_apply(block.linear(f"{layer}.ff.lift"), x))
    return linear_apply(block.linear(f"{layer}.ff.drop"), lifted)


def _project_attention(
    x_q: np.ndarray,
    x_kv: np.ndarray,
    weights: AttentionWeights,
    attn_cfg: AttentionConfig,
    mask: np.ndarray | None,
) -> np.ndarray:
    q = linear_apply(weights.query, x_q)
    k = linear_apply(weights.key, x_kv)
    v = linear_apply(weights.value, x_kv)
    mixed = masked_attention(q, k, v, attn_cfg, mask)
    return linear_apply(weights.output, mixed)


def _causal_cross_mask(main_frames: np.ndarray, aux_frames: np.ndarray) -> np.ndarray:
    mask = aux_frames[None, :] <= main_frames[:, None]
    if not mask.any(axis=1).all():
        raise ShapeError(
            "causal cross-attention leaves a main row with no visible auxiliary rows"
        )
    return mask


def _encode_auxiliary(
    x: np.ndarray,
    block: BlockWeights,
    cfg: FusionConfig,
    attn_cfg: AttentionConfig,
) -> np.ndarray:
    self_mask = None
    if cfg.causal and cfg.encoder_attention == "dense":
        self_mask = causal_mask(x.shape[0])
    for i in range(cfg.encoder_layers):
        layer = f"enc.{i}"
        weights = _attention_weights(block, f"{layer}.attn")
        normed = layer_norm(x, *block.norm(f"{layer}.norm1"))
        if cfg.encoder_attention == "probsparse":
            q = linear_apply(weights.query, normed)
            k = linear_apply(weights.key, normed)
            v = linear_apply(weights.value, normed)
            layer_sparse = replace(cfg.sparse, seed=derive_seed(cfg.sparse.seed, i))
            mixed = probsparse_attention(q, k, v, attn_cfg, layer_sparse)
            attended = linear_apply(weights.output, mixed)
        else:
            attended = _project_attention(normed, normed, weights, attn_cfg, self_mask)
        x = x + attended
        x = x + _feed_forward(layer_norm(x, *block.norm(f"{layer}.norm2")), block, layer)
    return layer_norm(x, *block.norm("enc_norm"))


def _decode_main(
    y: np.ndarray,
    encoded_aux: np.ndarray,
    block: BlockWeights,
    cfg: FusionConfig,
    attn_cfg: AttentionConfig,
    cross_mask: np.ndarray | None,
) -> np.ndarray:
    self_mask = causal_mask(y.shape[0]) if cfg.causal else None
    for i in range(cfg.decoder_layers):
        layer = f"dec.{i}"
        normed = layer_norm(y, *block.norm(f"{layer}.norm1"))
        y = y + _project_attention(
            normed, normed, _attention_weights(block, f"{layer}.self"), attn_cfg, self_mask
        )
        normed = layer_norm(y, *block.norm(f"{layer}.norm2"))
        y = y + _project_attention(
            normed,
            encoded_aux,
            _attention_weights(block, f"{layer}.cross"),
            attn_cfg,
            cross_mask,
        )
        y = y + _feed_forward(layer_norm(y, *block.norm(f"{layer}.norm3")), block, layer)
    return layer_norm(y, *block.norm("dec_norm"))


def fusion_forward(
    aux,
    main,
    block: BlockWeights,
    cfg: FusionConfig,
    aux_start: int = 1,
    main_start: int = 1,
) -> np.ndarray:
    """Run one fusion module; returns one output row per main row.

    ``aux_start`` / ``main_start`` are the absolute frame indices of the
    first row of each branch.  Branches whose width differs from
    ``cfg.model_dim`` must have a matching input projection in the block
    (its absence is a shape error, by way of a missing-tensor error).
    """
    aux = as_matrix(aux, "auxiliary branch")
    main = as_matrix(main, "main branch")
    if aux.shape[0] < 1 or main.shape[0] < 1:
        raise ShapeError("fusion branches must be non-empty")

    if block.has("aux_in.w"):
        aux = linear_apply(block.linear("aux_in"), aux)
    elif aux.shape[1] != cfg.model_dim:
        raise ShapeError(
            f"auxiliary branch dim {aux.shape[1]} does not match model_dim "
            f"{cfg.model_dim} and no input projection exists"
        )
    if block.has("main_in.w"):
        main = linear_apply(block.linear("main_in"), main)
    elif main.shape[1] != cfg.model_dim:
        raise ShapeError(
            f"main branch dim {main.shape[1]} does not match model_dim "
            f"{cfg.model_dim} and no input projection exists"
        )

    aux_frames = np.arange(aux_start, aux_start + aux.shape[0], dtype=np.int64)
    main_frames = np.arange(main_start, main_start + main.shape[0], dtype=np.int64)
    aux = aux + positional_encoding(aux_frames, cfg.model_dim)
    main = main + positional_encoding(main_frames, cfg.model_dim)

    attn_cfg = AttentionConfig(
        model_dim=cfg.model_dim, num_heads=cfg.num_heads, causal=cfg.causal
    )
    cross_mask = _causal_cross_mask(main_frames, aux_frames) if cfg.causal else None

    encoded = _encode_auxiliary(aux, block, cfg, attn_cfg)
    decoded = _decode_main(main, encoded, block, cfg, attn_cfg, cross_mask)
    return check_finite(decoded, "fusion output")

"""Named-tensor storage for every learned parameter of the stack.

Weights live in a flat ``name -> float64 ndarray`` mapping with dotted
names, e.g. ``short.0.enc.1.attn.q.w``.  :func:`expected_shapes` builds
the complete directory for a config; :func:`validate_store` checks a
store against it (missing tensor, unexpected tensor, or shape mismatch
are all load errors).  :func:`synth_weights` fills a directory with
deterministic pseudo-random values for tests and synthetic corpora.

Module prefixes::

    short.0, short.1   cascaded fusion pair of the short-window stage
    long.0,  long.1    cascaded fusion pair of the long-window stage
    global.0           history-compressing fusion stage
    head.local.0       head fusion of short features onto long features
    head.global.0      head fusion of global features onto the fused rows
    out.logits/out.heat  final linear heads
"""

from __future__ import annotations

from typing import Iterator, Mapping

import numpy as np

from .config import FusionConfig, ModelConfig
from .errors import WeightError
from .linalg import LinearLayer
from .rng import derive_seed


class WeightStore:
    """Immutable-by-convention mapping from tensor name to float64 array."""

    def __init__(self, tensors: Mapping[str, np.ndarray]) -> None:
        self._tensors = {
            name: np.asarray(value, dtype=np.float64) for name, value in tensors.items()
        }

    def __getitem__(self, name: str) -> np.ndarray:
        try:
            return self._tensors[name]
        except KeyError:
            raise WeightError(f"missing tensor {name!r}") from None

    def __contains__(self, name: str) -> bool:
        return name in self._tensors

    def __len__(self) -> int:
        return len(self._tensors)

    def names(self) -> list[str]:
        return sorted(self._tensors)

    def items(self) -> Iterator[tuple[str, np.ndarray]]:
        for name in self.names():
            yield name, self._tensors[name]

    def replaced(self, updates: Mapping[str, np.ndarray]) -> "WeightStore":
        """A new store with some tensors replaced (names must already exist)."""
        for name in updates:
            if name not in self._tensors:
                raise WeightError(f"cannot replace unknown tensor {name!r}")
        merged = dict(self._tensors)
        merged.update({k: np.asarray(v, dtype=np.float64) for k, v in updates.items()})
        return WeightStore(merged)

    def linear(self, prefix: str) -> LinearLayer:
        return LinearLayer(self[prefix + ".w"], self[prefix + ".b"])

    def block(self, prefix: str) -> "BlockWeights":
        return BlockWeights(self, prefix)

    def equals(self, other: "WeightStore") -> bool:
        if self.names() != other.names():
            return False
        return all(
            a.shape == other._tensors[name].shape and np.array_equal(a, other._tensors[name])
            for name, a in self.items()
        )


class BlockWeights:
    """A dotted-prefix view into a :class:`WeightStore`."""

    def __init__(self, store: WeightStore, prefix: str) -> None:
        self._store = store
        self._prefix = prefix

    def tensor(self, local_name: str) -> np.ndarray:
        return self._store[f"{self._prefix}.{local_name}"]

    def has(self, local_name: str) -> bool:
        return f"{self._prefix}.{local_name}" in self._store

    def linear(self, local_name: str) -> LinearLayer:
        return LinearLayer(self.tensor(local_name + ".w"), self.tensor(local_name + ".b"))

    def norm(self, local_name: str) -> tuple[np.ndarray, np.ndarray]:
        return self.tensor(local_name + ".g"), self.tensor(local_name + ".b")


def _linear_shapes(prefix: str, out_dim: int, in_dim: int) -> dict[str, tuple[int, ...]]:
    return {f"{prefix}.w": (out_dim, in_dim), f"{prefix}.b": (out_dim,)}


def _norm_shapes(prefix: str, dim: int) -> dict[str, tuple[int, ...]]:
    return {f"{prefix}.g": (dim,), f"{prefix}.b": (dim,)}


def _attn_shapes(prefix: str, dim: int) -> dict[str, tuple[int, ...]]:
    shapes: dict[str, tuple[int, ...]] = {}
    for proj in ("q", "k", "v", "o"):
        shapes.update(_linear_shapes(f"{prefix}.{proj}", dim, dim))
    return shapes


def _fusion_module_shapes(
    prefix: str,
    fcfg: FusionConfig,
    aux_in_dim: int,
    main_in_dim: int,
) -> dict[str, tuple[int, ...]]:
    d, f = fcfg.model_dim, fcfg.ff_dim
    shapes: dict[str, tuple[int, ...]] = {}
    if aux_in_dim != d:
        shapes.update(_linear_shapes(f"{prefix}.aux_in", d, aux_in_dim))
    if main_in_dim != d:
        shapes.update(_linear_shapes(f"{prefix}.main_in", d, main_in_dim))
    for i in range(fcfg.encoder_layers):
        layer = f"{prefix}.enc.{i}"
        shapes.update(_norm_shapes(f"{layer}.norm1", d))
        shapes.update(_attn_shapes(f"{layer}.attn", d))
        shapes.update(_norm_shapes(f"{layer}.norm2", d))
        shapes.update(_linear_shapes(f"{layer}.ff.lift", f, d))
        shapes.update(_linear_shapes(f"{layer}.ff.drop", d, f))
    shapes.update(_norm_shapes(f"{prefix}.enc_norm", d))
    for i in range(fcfg.decoder_layers):
        layer = f"{prefix}.dec.{i}"
        shapes.update(_norm_shapes(f"{layer}.norm1", d))
        shapes.update(_attn_shapes(f"{layer}.self", d))
        shapes.update(_norm_shapes(f"{layer}.norm2", d))
        shapes.update(_attn_shapes(f"{layer}.cross", d))
        shapes.update(_norm_shapes(f"{layer}.norm3", d))
        shapes.update(_linear_shapes(f"{layer}.ff.lift", f, d))
        shapes.update(_linear_shapes(f"{layer}.ff.drop", d, f))
    shapes.update(_norm_shapes(f"{prefix}.dec_norm", d))
    return shapes


def expected_shapes(cfg: ModelConfig) -> dict[str, tuple[int, ...]]:
    """The complete tensor directory (name -> shape) for a config."""
    shapes: dict[str, tuple[int, ...]] = {}
    short, long_, glob, head = (
        cfg.short_fusion(),
        cfg.long_fusion(),
        cfg.global_fusion(),
        cfg.head_fusion(),
    )
    # Short-window stage: auxiliary = previous clip's output (already at
    # dim_short), main = raw frame embeddings.
    shapes.update(_fusion_module_shapes("short.0", short, cfg.dim_short, cfg.feature_dim))
    shapes.update(_fusion_module_shapes("short.1", short, cfg.dim_short, cfg.feature_dim))
    shapes.update(_fusion_module_shapes("long.0", long_, cfg.dim_long, cfg.dim_short))
    shapes.update(_fusion_module_shapes("long.1", long_, cfg.dim_long, cfg.dim_short))
    # Global stage: both branches arrive at dim_long and are projected down.
    shapes.update(_fusion_module_shapes("global.0", glob, cfg.dim_long, cfg.dim_long))
    # Recognition head: fuse short features onto long features, then global
    # features onto the result; everything at dim_long.
    shapes.update(_fusion_module_shapes("head.local.0", head, cfg.dim_short, cfg.dim_long))
    shapes.update(_fusion_module_shapes("head.global.0", head, cfg.dim_global, cfg.dim_long))
    shapes.update(_linear_shapes("out.logits", cfg.num_phases, cfg.dim_long))
    shapes.update(_linear_shapes("out.heat", 1, cfg.dim_long))
    return shapes


def validate_store(store: WeightStore, cfg: ModelConfig) -> None:
    """Raise :class:`WeightError` unless the store matches the directory exactly."""
    expected = expected_shapes(cfg)
    present = set(store.names())
    missing = sorted(set(expected) - present)
    if missing:
        raise WeightError(f"missing tensor {missing[0]!r} ({len(missing)} missing in total)")
    unexpected = sorted(present - set(expected))
    if unexpected:
        raise WeightError(
            f"unexpected tensor {unexpected[0]!r} ({len(unexpected)} unexpected in total)"
        )
    for name, shape in expected.items():
        actual = store[name].shape
        if actual != shape:
            raise WeightError(
                f"tensor {name!r} has shape {actual}, expected {shape}"
            )


def synth_weights(cfg: ModelConfig, seed: int) -> WeightStore:
    """Deterministic plausible weights for tests and synthetic data.

    Weight matrices are uniform in ``[-1/sqrt(in_dim), 1/sqrt(in_dim)]``
    so activations keep a stable scale through the stack.  Normalization
    gains start at one, every bias and shift at zero.  Each tensor draws
    from its own counter-derived stream, so the result depends only on
    ``(cfg, seed)`` and not on generation order.
    """
    tensors: dict[str, np.ndarray] = {}
    for index, (name, shape) in enumerate(sorted(expected_shapes(cfg).items())):
        if len(shape) == 1:
            fill = 1.0 if name.endswith(".g") else 0.0
            tensors[name] = np.full(shape, fill, dtype=np.float64)
            continue
        gen = np.random.Generator(np.random.Philox(derive_seed(seed, index)))
        scale = 1.0 / np.sqrt(shape[1])
        tensors[name] = gen.uniform(-scale, scale, size=shape)
    return WeightStore(tensors)

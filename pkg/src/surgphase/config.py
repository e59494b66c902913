"""Configuration objects for the temporal stack.

Defaults describe the full-size model used for 1 fps surgical video:
frame embeddings of width 768 are condensed through feature widths
512 -> 64 -> 8, with a short window of 100 frames and a long window of
500 frames.  Tests typically shrink every width while keeping the same
wiring.

Configs serialize to a line-oriented ``key = value`` text form so a
checkpoint can embed everything needed to rebuild the model.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

from .errors import ConfigError

ENCODER_ATTENTION_KINDS = ("dense", "probsparse")


@dataclass(frozen=True)
class SparseConfig:
    """Tuning knobs for the sampled-measurement sparse attention path.

    ``top_u_factor`` scales how many query rows get exact attention
    (``top_u_factor * ln(num_queries)``, the "c" constant, default 5) and
    ``sample_factor`` scales how many keys each query samples when scoring
    itself (``sample_factor * ln(num_queries)``).
    """

    top_u_factor: float = 5.0
    sample_factor: float = 1.0
    seed: int = 0

    def __post_init__(self) -> None:
        if not (self.top_u_factor > 0.0) or not math.isfinite(self.top_u_factor):
            raise ConfigError(f"top_u_factor must be finite and > 0, got {self.top_u_factor}")
        if not (self.sample_factor > 0.0) or not math.isfinite(self.sample_factor):
            raise ConfigError(f"sample_factor must be finite and > 0, got {self.sample_factor}")
        if not isinstance(self.seed, int):
            raise ConfigError("seed must be an int")


@dataclass(frozen=True)
class FusionConfig:
    """Shape of one encoder/decoder fusion module.

    The encoder runs ``encoder_layers`` self-attention layers over the
    auxiliary branch; the decoder runs ``decoder_layers`` layers of
    self-attention over the main branch plus cross-attention onto the
    encoded auxiliary branch.  ``encoder_attention`` picks dense or
    sampled-sparse attention for the encoder stack.
    """

    encoder_layers: int
    decoder_layers: int
    model_dim: int
    num_heads: int
    encoder_attention: str = "dense"
    causal: bool = False
    ff_multiplier: float = 4.0
    sparse: SparseConfig | None = None

    def __post_init__(self) -> None:
        if self.encoder_layers < 1 or self.decoder_layers < 1:
            raise ConfigError("fusion modules need at least one encoder and one decoder layer")
        if self.model_dim < 1:
            raise ConfigError(f"model_dim must be >= 1, got {self.model_dim}")
        if self.num_heads < 1 or self.model_dim % self.num_heads != 0:
            raise ConfigError(
                f"num_heads ({self.num_heads}) must divide model_dim ({self.model_dim})"
            )
        if self.encoder_attention not in ENCODER_ATTENTION_KINDS:
            raise ConfigError(f"unknown encoder_attention {self.encoder_attention!r}")
        if self.encoder_attention == "probsparse" and self.sparse is None:
            raise ConfigError("probsparse encoder attention requires a SparseConfig")
        if self.ff_multiplier <= 0.0:
            raise ConfigError(f"ff_multiplier must be > 0, got {self.ff_multiplier}")

    @property
    def ff_dim(self) -> int:
        return max(1, int(round(self.model_dim * self.ff_multiplier)))


@dataclass(frozen=True)
class ModelConfig:
    """Every size and hyperparameter of the full temporal stack."""

    num_phases: int = 7
    feature_dim: int = 768
    dim_short: int = 512
    dim_long: int = 64
    dim_global: int = 8
    window_short: int = 100
    window_long: int = 500
    num_heads: int = 4
    ff_multiplier: float = 4.0
    short_layers: tuple[int, int] = (2, 2)
    long_layers: tuple[int, int] = (2, 2)
    global_layers: tuple[int, int] = (2, 1)
    head_layers: tuple[int, int] = (2, 1)
    sparse: SparseConfig = field(default_factory=SparseConfig)

    def __post_init__(self) -> None:
        if self.num_phases < 2:
            raise ConfigError(f"num_phases must be >= 2, got {self.num_phases}")
        for name in ("feature_dim", "dim_short", "dim_long", "dim_global"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if not (1 <= self.window_short <= self.window_long):
            raise ConfigError(
                f"windows must satisfy 1 <= window_short <= window_long, "
                f"got {self.window_short} and {self.window_long}"
            )
        for name in ("dim_short", "dim_long", "dim_global"):
            if getattr(self, name) % self.num_heads != 0:
                raise ConfigError(
                    f"num_heads ({self.num_heads}) must divide {name} ({getattr(self, name)})"
                )
        for name in ("short_layers", "long_layers", "global_layers", "head_layers"):
            pair = getattr(self, name)
            if len(pair) != 2 or pair[0] < 1 or pair[1] < 1:
                raise ConfigError(f"{name} must be a pair of positive layer counts")

    def short_fusion(self) -> FusionConfig:
        return FusionConfig(
            encoder_layers=self.short_layers[0],
            decoder_layers=self.short_layers[1],
            model_dim=self.dim_short,
            num_heads=self.num_heads,
            ff_multiplier=self.ff_multiplier,
        )

    def long_fusion(self) -> FusionConfig:
        return FusionConfig(
            encoder_layers=self.long_layers[0],
            decoder_layers=self.long_layers[1],
            model_dim=self.dim_long,
            num_heads=self.num_heads,
            ff_multiplier=self.ff_multiplier,
        )

    def global_fusion(self) -> FusionConfig:
        return FusionConfig(
            encoder_layers=self.global_layers[0],
            decoder_layers=self.global_layers[1],
            model_dim=self.dim_global,
            num_heads=self.num_heads,
            encoder_attention="probsparse",
            causal=True,
            ff_multiplier=self.ff_multiplier,
            sparse=self.sparse,
        )

    def head_fusion(self) -> FusionConfig:
        return FusionConfig(
            encoder_layers=self.head_layers[0],
            decoder_layers=self.head_layers[1],
            model_dim=self.dim_long,
            num_heads=self.num_heads,
            ff_multiplier=self.ff_multiplier,
        )

    def role_dim(self, role: str) -> int:
        dims = {
            "e": self.feature_dim,
            "s": self.dim_short,
            "l": self.dim_long,
            "g": self.dim_global,
        }
        if role not in dims:
            raise ConfigError(f"unknown feature role {role!r}")
        return dims[role]

    def with_seed(self, seed: int) -> "ModelConfig":
        return replace(self, sparse=replace(self.sparse, seed=seed))


_CONFIG_FIELDS: dict[str, type] = {
    "num_phases": int,
    "feature_dim": int,
    "dim_short": int,
    "dim_long": int,
    "dim_global": int,
    "window_short": int,
    "window_long": int,
    "num_heads": int,
    "ff_multiplier": float,
    "short_encoder_layers": int,
    "short_decoder_layers": int,
    "long_encoder_layers": int,
    "long_decoder_layers": int,
    "global_encoder_layers": int,
    "global_decoder_layers": int,
    "head_encoder_layers": int,
    "head_decoder_layers": int,
    "sparse_top_u_factor": float,
    "sparse_sample_factor": float,
    "sparse_seed": int,
}


def config_to_text(cfg: ModelConfig) -> str:
    """Render a config as sorted ``key = value`` lines."""
    values = {
        "num_phases": cfg.num_phases,
        "feature_dim": cfg.feature_dim,
        "dim_short": cfg.dim_short,
        "dim_long": cfg.dim_long,
        "dim_global": cfg.dim_global,
        "window_short": cfg.window_short,
        "window_long": cfg.window_long,
        "num_heads": cfg.num_heads,
        "ff_multiplier": repr(cfg.ff_multiplier),
        "short_encoder_layers": cfg.short_layers[0],
        "short_decoder_layers": cfg.short_layers[1],
        "long_encoder_layers": cfg.long_layers[0],
        "long_decoder_layers": cfg.long_layers[1],
        "global_encoder_layers": cfg.global_layers[0],
        "global_decoder_layers": cfg.global_layers[1],
        "head_encoder_layers": cfg.head_layers[0],
        "head_decoder_layers": cfg.head_layers[1],
        "sparse_top_u_factor": repr(cfg.sparse.top_u_factor),
        "sparse_sample_factor": repr(cfg.sparse.sample_factor),
        "sparse_seed": cfg.sparse.seed,
    }
    return "".join(f"{key} = {values[key]}\n" for key in sorted(values))


def config_from_text(text: str) -> ModelConfig:
    """Parse the ``key = value`` form produced by :func:`config_to_text`.

    Blank lines and ``#`` comments are allowed; unknown or repeated keys
    and malformed values raise :class:`ConfigError`.
    """
    raw: dict[str, str] = {}
    for line_no, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"config line {line_no} is not 'key = value': {line!r}")
        key, _, value = stripped.partition("=")
        key = key.strip()
        if key not in _CONFIG_FIELDS:
            raise ConfigError(f"unknown config key {key!r} on line {line_no}")
        if key in raw:
            raise ConfigError(f"duplicate config key {key!r} on line {line_no}")
        raw[key] = value.strip()

    missing = sorted(set(_CONFIG_FIELDS) - set(raw))
    if missing:
        raise ConfigError(f"config is missing keys: {', '.join(missing)}")

    parsed: dict[str, int | float] = {}
    for key, value in raw.items():
        caster = _CONFIG_FIELDS[key]
        try:
            parsed[key] = caster(value)
        except ValueError as exc:
            raise ConfigError(f"config key {key!r} has bad value {value!r}") from exc

    return ModelConfig(
        num_phases=parsed["num_phases"],
        feature_dim=parsed["feature_dim"],
        dim_short=parsed["dim_short"],
        dim_long=parsed["dim_long"],
        dim_global=parsed["dim_global"],
        window_short=parsed["window_short"],
        window_long=parsed["window_long"],
        num_heads=parsed["num_heads"],
        ff_multiplier=parsed["ff_multiplier"],
        short_layers=(parsed["short_encoder_layers"], parsed["short_decoder_layers"]),
        long_layers=(parsed["long_encoder_layers"], parsed["long_decoder_layers"]),
        global_layers=(parsed["global_encoder_layers"], parsed["global_decoder_layers"]),
        head_layers=(parsed["head_encoder_layers"], parsed["head_decoder_layers"]),
        sparse=SparseConfig(
            top_u_factor=parsed["sparse_top_u_factor"],
            sample_factor=parsed["sparse_sample_factor"],
            seed=parsed["sparse_seed"],
        ),
    )

"""Long-video temporal attention engine for online surgical phase recognition.

Public surface: configs, the attention cores, the fusion/pipeline
forwards, streaming sessions with exact checkpointing, transition-map
supervision, evaluation metrics, file formats, and brute-force
verification oracles.
"""

from .attention import (
    AttentionConfig,
    AttentionWeights,
    cross_attention,
    dense_attention,
    keys_per_query,
    probsparse_attention,
    sampled_pair_budget,
    select_top_queries,
    sparsity_measure,
    top_query_count,
)
from .config import FusionConfig, ModelConfig, SparseConfig, config_from_text, config_to_text
from .errors import (
    ConfigError,
    EngineError,
    FormatError,
    ShapeError,
    StreamError,
    WeightError,
)
from .fusion import fusion_forward, positional_encoding
from .linalg import LinearLayer, gelu, layer_norm, linear_apply, softmax_rows
from .metrics import (
    EvalReport,
    PhaseScore,
    phase_level_metrics,
    relax_predictions,
    relaxed_boundary_eval,
    video_accuracy,
)
from .model import (
    TemporalStack,
    batch_forward,
    global_stage_forward,
    local_stage_forward,
    recognition_head,
    replay_outputs,
)
from .seqtypes import FeatureSequence, PhaseOutput
from .streaming import StreamState, checkpoint, init_stream, push_frame, restore
from .transition import (
    PhaseTrack,
    SamplerConfig,
    TransitionMap,
    build_transition_map,
    clip_indices,
    joint_loss,
)
from .verify import OracleReport, run_all, toy_config
from .weights import WeightStore, expected_shapes, synth_weights, validate_store

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]

"""Person-of-interest face forgery detection via audio-conditioned
expression diffusion: a noise-prediction transformer over facial
expression coefficient sequences, personalized per subject with adapter
tokens, exposing forgeries through a content-agnostic ratio of
reconstruction errors.
"""

from .adapter import AdapterParams, adapted_attention, count_adapter_params, init_adapter
from .audio import Waveform, encode_audio
from .bench import (
    BenchReport,
    EvaluationSplit,
    SubjectSplit,
    auc,
    average_auc,
    make_evaluation_split,
    perturb,
    run_benchmark,
)
from .config import ExperimentConfig, preset
from .model import Denoiser, ModelConfig, TiLM, sinusoidal_embedding
from .schedule import (
    NoiseSchedule,
    TimestepGrid,
    forward_diffuse,
    make_linear_schedule,
    sample_timesteps,
)
from .scorer import (
    AuthScore,
    DecisionRule,
    GuidanceConfig,
    ScoringConfig,
    authenticate,
    decide,
    fit_decision_rule,
    guided_denoise,
    reconstruction_distance,
    temporal_scores,
)
from .synthdata import (
    FlameSequence,
    PersonaSpec,
    RefinementObjective,
    filter_clip,
    forge_clip,
    generate_persona,
    refine_coeffs,
    singularize_shape,
    synthesize_clip,
)
from .trainer import (
    Dataset,
    ReferenceSet,
    TrainConfig,
    params_digest,
    personalize,
    pretrain_step,
    run_pretraining,
)

__version__ = "0.1.0"

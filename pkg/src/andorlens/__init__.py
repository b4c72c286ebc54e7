"""Sparse AND-OR interaction extraction and effect decomposition.

Given any black-box model that scores prompts with maskable words, this
package materializes the 2^n masked-score table, learns the sparsest
AND/OR effect decomposition, and splits every effect into foundational
memorization, chaotic memorization, and in-context reasoning parts with
per-pattern classification.
"""

from .lattice import (
    FAMILY_AND,
    FAMILY_OR,
    ComponentSplit,
    InteractionVector,
    Mask,
    ValueTable,
    adjoint_zeta,
    enumerate_masks,
    mobius_and,
    mobius_or,
    reconstruct_table,
    zeta_reconstruct,
)
from .sparsify import (
    NoiseVector,
    SalientSet,
    SparsifyConfig,
    SparsityReport,
    ThetaVector,
    extract_salient,
    matching_error_curve,
    optimize_theta,
    salient_pair,
    smoothness_check,
    split_components,
)
from .effects import (
    EffectRatios,
    EffectRecord,
    OrderStrengths,
    ReasoningOrderStrengths,
    classify_pattern,
    decompose_effects,
    effect_ratios,
    order_strengths,
    reasoning_order_strengths,
    verify_additivity,
)
from .oracle import (
    OracleConfig,
    RemoteOracle,
    ReplayOracle,
    ScoreRequest,
    ScoreResponse,
    SyntheticModel,
    SyntheticOracle,
    average_value_tables,
    confidence_from_prob,
    synthetic_eval,
)
from .dataset import PromptVariant, SampleSpec, analysis_plan, load_dataset, validate_sample
from .pipeline import (
    AnalysisReport,
    decompose_sample,
    extract_sample,
    smooth_synthetic_model,
    sparsity_sweep,
    verify_artifacts,
)

__version__ = "0.1.0"

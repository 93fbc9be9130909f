"""Group-relative test-time adaptation for frozen embedding classifiers.

A small projector is tuned per sample against a clipped, group-standardized
objective over the top-K candidate classes, then thrown away. The classifier
and text embeddings never change.
"""

from __future__ import annotations

__version__ = "0.1.0"

from .ablation import AblationGrid, AblationRow, format_ablation_csv, run_ablation, write_ablation_csv
from .errors import DegenerateInput, EngineError, FormatError, InvalidArgument
from .fileio import EmbeddingFileHeader, read_embedding_file, write_embedding_file
from .numerics import SeededRng, cosine, gaussian_sample, l2_normalize, shannon_entropy, softmax
from .objective import (
    ClipConfig,
    GradCheckResult,
    LossReport,
    ParamGrad,
    cap,
    entropy_gradient,
    entropy_loss,
    evaluate_objective,
    finite_diff_gradient,
    gradient_check,
    grpo_tta_loss,
    loss_gradient,
)
from .optim import OptimState, optimizer_step
from .pipeline import (
    AdaptConfig,
    EpisodeResult,
    RunSummary,
    adapt_sample,
    entropy_min_baseline,
    run_stream,
    zero_shot_baseline,
)
from .policy import (
    CandidateGroup,
    EmbeddingTable,
    PolicySnapshot,
    ProjectorParams,
    SampleViews,
    aggregate_distribution,
    candidate_policy,
    class_distribution,
    filter_views,
    project,
    project_rows,
    topk_candidates,
)
from .rewards import (
    RewardBundle,
    advantages,
    alignment_rewards,
    combine_rewards,
    compute_rewards,
    dispersion_rewards,
    sim_matrix,
)
from .synth import SynthConfig, generate_synthetic, jitter_views

__all__ = [
    "__version__",
    "AblationGrid",
    "AblationRow",
    "AdaptConfig",
    "CandidateGroup",
    "ClipConfig",
    "DegenerateInput",
    "EmbeddingFileHeader",
    "EmbeddingTable",
    "EngineError",
    "EpisodeResult",
    "FormatError",
    "GradCheckResult",
    "InvalidArgument",
    "LossReport",
    "OptimState",
    "ParamGrad",
    "PolicySnapshot",
    "ProjectorParams",
    "RewardBundle",
    "RunSummary",
    "SampleViews",
    "SeededRng",
    "SynthConfig",
    "adapt_sample",
    "advantages",
    "aggregate_distribution",
    "alignment_rewards",
    "candidate_policy",
    "cap",
    "class_distribution",
    "combine_rewards",
    "compute_rewards",
    "cosine",
    "dispersion_rewards",
    "entropy_gradient",
    "entropy_loss",
    "entropy_min_baseline",
    "evaluate_objective",
    "filter_views",
    "finite_diff_gradient",
    "format_ablation_csv",
    "gaussian_sample",
    "generate_synthetic",
    "gradient_check",
    "grpo_tta_loss",
    "jitter_views",
    "l2_normalize",
    "loss_gradient",
    "optimizer_step",
    "project",
    "project_rows",
    "read_embedding_file",
    "run_ablation",
    "run_stream",
    "shannon_entropy",
    "sim_matrix",
    "softmax",
    "topk_candidates",
    "write_ablation_csv",
    "write_embedding_file",
    "zero_shot_baseline",
]

"""Episodic adaptation: one sample in, a few projector steps, state thrown away.

Every sample starts from the same pristine parameters and never sees another
sample's state, so a stream is just a map over independent episodes; worker
count can only change wall-clock time, never results. Labels ride along for
scoring and are never read during adaptation.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateInput, InvalidArgument
from .numerics import NORM_FLOOR
from .objective import (
    ClipConfig,
    entropy_gradient,
    entropy_loss,
    evaluate_objective,
)
from .optim import OptimState, optimizer_step
from .policy import (
    EmbeddingTable,
    ProjectorParams,
    SampleViews,
    aggregate_distribution,
    candidate_policy,
    class_distribution,
    filter_views,
    project,
    topk_candidates,
)
from .rewards import RewardBundle, compute_rewards


@dataclass(frozen=True)
class AdaptConfig:
    """Hyperparameters for one adaptation run; defaults follow the reference setup."""

    top_k: int = 4
    disp_weight: float = 1.0
    align_scale: float = 2.5
    clip_epsilon: float = 0.2
    keep_fraction: float = 0.1
    temperature: float | None = None  # None: use the table's temperature
    learning_rate: float = 5e-6
    weight_decay: float = 5e-4
    tta_steps: int = 1
    use_bias: bool = False
    seed: int = 0
    predict_from_views: bool = False
    disable_dispersion: bool = False

    def __post_init__(self):
        if self.top_k < 2:
            raise InvalidArgument(f"top_k must be >= 2, got {self.top_k}")
        if self.tta_steps < 1:
            raise InvalidArgument(f"tta_steps must be >= 1, got {self.tta_steps}")
        if not (0.0 < self.keep_fraction <= 1.0):
            raise InvalidArgument(f"keep_fraction must be in (0, 1], got {self.keep_fraction}")
        if not (0.0 < self.clip_epsilon < 1.0):
            raise InvalidArgument(f"clip_epsilon must be in (0, 1), got {self.clip_epsilon}")
        if self.temperature is not None and not self.temperature > 0.0:
            raise InvalidArgument(f"temperature must be > 0, got {self.temperature}")
        if not self.learning_rate >= 0.0:
            raise InvalidArgument(f"learning_rate must be >= 0, got {self.learning_rate}")
        if not self.weight_decay >= 0.0:
            raise InvalidArgument(f"weight_decay must be >= 0, got {self.weight_decay}")
        if not self.disp_weight >= 0.0:
            raise InvalidArgument(f"disp_weight must be >= 0, got {self.disp_weight}")
        if not self.align_scale > 0.0:
            raise InvalidArgument(f"align_scale must be > 0, got {self.align_scale}")


@dataclass
class EpisodeResult:
    """Everything recorded about one sample's episode."""

    sample_id: int
    zero_shot_prediction: int
    adapted_prediction: int
    candidate_ids: tuple[int, ...]
    per_step_loss: tuple[float, ...]
    selected_view_indices: tuple[int, ...]
    rewards: RewardBundle | None
    wall_time_ms: float
    label: int | None = None
    failed: bool = False


@dataclass
class RunSummary:
    """Ordered episode results plus top-1 accuracies when labels are present."""

    episodes: list[EpisodeResult] = field(default_factory=list)
    top1_zero_shot: float | None = None
    top1_adapted: float | None = None
    config: AdaptConfig | None = None


def _resolved_table(table: EmbeddingTable, cfg: AdaptConfig) -> EmbeddingTable:
    if cfg.temperature is None:
        return table
    return table.with_temperature(cfg.temperature)


def zero_shot_prediction(original: np.ndarray, table: EmbeddingTable) -> int:
    """argmax class under the identity projector; class 0 on a zero vector."""
    norm = float(np.linalg.norm(np.asarray(original, dtype=np.float64)))
    if norm <= NORM_FLOOR:
        return 0
    return int(np.argmax(class_distribution(np.asarray(original) / norm, table)))


def _failed_episode(sample: SampleViews, prediction: int, started: float) -> EpisodeResult:
    return EpisodeResult(
        sample_id=sample.sample_id,
        zero_shot_prediction=prediction,
        adapted_prediction=prediction,
        candidate_ids=(),
        per_step_loss=(),
        selected_view_indices=(),
        rewards=None,
        wall_time_ms=(time.perf_counter() - started) * 1e3,
        label=sample.label,
        failed=True,
    )


def adapt_sample(
    sample: SampleViews,
    table: EmbeddingTable,
    params_init: ProjectorParams,
    cfg: AdaptConfig = AdaptConfig(),
) -> EpisodeResult:
    """One full episode; params_init is copied, never touched.

    Candidate group, frozen policy, and rewards are all fixed under the
    starting parameters; the update steps only move the ratio term. Episodes
    that hit degenerate embeddings fall back to the zero-shot prediction and
    report failed=True rather than raising.
    """
    started = time.perf_counter()
    table = _resolved_table(table, cfg)
    if sample.dim != table.dim:
        raise InvalidArgument(
            f"sample {sample.sample_id}: dim {sample.dim} does not match table dim {table.dim}"
        )
    zero_shot = zero_shot_prediction(sample.original, table)
    try:
        start_params = params_init.copy()
        selected = filter_views(sample, start_params, table, cfg.keep_fraction)
        views = sample.views[selected]
        group = topk_candidates(aggregate_distribution(views, start_params, table), cfg.top_k)
        frozen = candidate_policy(views, start_params, table, group)
        bundle = compute_rewards(
            project(sample.original, start_params),
            views,
            start_params,
            table,
            group,
            align_scale=cfg.align_scale,
            disp_weight=cfg.disp_weight,
            disable_dispersion=cfg.disable_dispersion,
        )
        clip = ClipConfig(cfg.clip_epsilon)

        params = start_params.copy()
        state = OptimState.for_params(
            params, learning_rate=cfg.learning_rate, weight_decay=cfg.weight_decay
        )
        losses = []
        for _ in range(cfg.tta_steps):
            report = evaluate_objective(
                params, views, table, group, frozen, bundle.advantages, clip
            )
            losses.append(report.loss)
            optimizer_step(params, report.gradient, state)

        if cfg.predict_from_views:
            adapted = int(np.argmax(aggregate_distribution(views, params, table)))
        else:
            adapted = int(np.argmax(class_distribution(project(sample.original, params), table)))
    except DegenerateInput:
        return _failed_episode(sample, zero_shot, started)
    return EpisodeResult(
        sample_id=sample.sample_id,
        zero_shot_prediction=zero_shot,
        adapted_prediction=adapted,
        candidate_ids=group.class_ids,
        per_step_loss=tuple(losses),
        selected_view_indices=tuple(int(i) for i in selected),
        rewards=bundle,
        wall_time_ms=(time.perf_counter() - started) * 1e3,
        label=sample.label,
        failed=False,
    )


def _accuracy(episodes: list[EpisodeResult], attr: str) -> float | None:
    if not episodes or any(e.label is None for e in episodes):
        return None
    hits = sum(1 for e in episodes if getattr(e, attr) == e.label)
    return hits / len(episodes)


def _summarize(episodes: list[EpisodeResult], cfg: AdaptConfig | None) -> RunSummary:
    episodes = sorted(episodes, key=lambda e: e.sample_id)
    return RunSummary(
        episodes=episodes,
        top1_zero_shot=_accuracy(episodes, "zero_shot_prediction"),
        top1_adapted=_accuracy(episodes, "adapted_prediction"),
        config=cfg,
    )


def _check_dims(dataset: list[SampleViews], table: EmbeddingTable) -> None:
    for sample in dataset:
        if sample.dim != table.dim:
            raise InvalidArgument(
                f"sample {sample.sample_id}: dim {sample.dim} does not match table dim {table.dim}"
            )


def _map_episodes(fn, dataset, workers: int) -> list:
    if workers < 1:
        raise InvalidArgument(f"workers must be >= 1, got {workers}")
    if workers == 1 or len(dataset) <= 1:
        return [fn(s) for s in dataset]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, dataset))


def run_stream(
    dataset: list[SampleViews],
    table: EmbeddingTable,
    cfg: AdaptConfig = AdaptConfig(),
    workers: int = 1,
    params_init: ProjectorParams | None = None,
) -> RunSummary:
    """Adapt every sample independently; results are ordered by sample id.

    The same params_init object (identity by default) seeds every episode;
    each episode copies it, so the stream is embarrassingly parallel and the
    summary is identical for any worker count.
    """
    table = _resolved_table(table, cfg)
    _check_dims(dataset, table)
    if params_init is None:
        params_init = ProjectorParams.identity(table.dim, cfg.use_bias)
    episodes = _map_episodes(
        lambda s: adapt_sample(s, table, params_init, cfg), dataset, workers
    )
    return _summarize(episodes, cfg)


def zero_shot_baseline(
    dataset: list[SampleViews],
    table: EmbeddingTable,
    cfg: AdaptConfig = AdaptConfig(),
    workers: int = 1,
) -> RunSummary:
    """No adaptation at all: argmax over the original embeddings only."""
    table = _resolved_table(table, cfg)
    _check_dims(dataset, table)

    def episode(sample: SampleViews) -> EpisodeResult:
        started = time.perf_counter()
        prediction = zero_shot_prediction(sample.original, table)
        return EpisodeResult(
            sample_id=sample.sample_id,
            zero_shot_prediction=prediction,
            adapted_prediction=prediction,
            candidate_ids=(),
            per_step_loss=(),
            selected_view_indices=(),
            rewards=None,
            wall_time_ms=(time.perf_counter() - started) * 1e3,
            label=sample.label,
            failed=False,
        )

    episodes = _map_episodes(episode, dataset, workers)
    return _summarize(episodes, cfg)


def entropy_min_baseline(
    dataset: list[SampleViews],
    table: EmbeddingTable,
    cfg: AdaptConfig = AdaptConfig(),
    workers: int = 1,
    params_init: ProjectorParams | None = None,
) -> RunSummary:
    """Same episodic skeleton, but the loss is the aggregated-distribution entropy.

    No candidate group, no rewards, no clipping; this is the classic
    test-time entropy-minimization baseline on the same view filter.
    """
    table = _resolved_table(table, cfg)
    _check_dims(dataset, table)
    if params_init is None:
        params_init = ProjectorParams.identity(table.dim, cfg.use_bias)

    def episode(sample: SampleViews) -> EpisodeResult:
        started = time.perf_counter()
        zero_shot = zero_shot_prediction(sample.original, table)
        try:
            start_params = params_init.copy()
            selected = filter_views(sample, start_params, table, cfg.keep_fraction)
            views = sample.views[selected]
            params = start_params.copy()
            state = OptimState.for_params(
                params, learning_rate=cfg.learning_rate, weight_decay=cfg.weight_decay
            )
            losses = []
            for _ in range(cfg.tta_steps):
                losses.append(entropy_loss(params, views, table))
                optimizer_step(params, entropy_gradient(params, views, table), state)
            if cfg.predict_from_views:
                adapted = int(np.argmax(aggregate_distribution(views, params, table)))
            else:
                adapted = int(
                    np.argmax(class_distribution(project(sample.original, params), table))
                )
        except DegenerateInput:
            return _failed_episode(sample, zero_shot, started)
        return EpisodeResult(
            sample_id=sample.sample_id,
            zero_shot_prediction=zero_shot,
            adapted_prediction=adapted,
            candidate_ids=(),
            per_step_loss=tuple(losses),
            selected_view_indices=tuple(int(i) for i in selected),
            rewards=None,
            wall_time_ms=(time.perf_counter() - started) * 1e3,
            label=sample.label,
            failed=False,
        )

    episodes = _map_episodes(episode, dataset, workers)
    return _summarize(episodes, cfg)

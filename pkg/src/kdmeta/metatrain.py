"""Reptile meta-training over a task stream and target-scenario retraining."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from .autoencoder import ModelParams, TrainState, evaluate_sgcs, train_steps
from .core import ConfigError, RngStream
from .metaenv import Task

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class MetaConfig:
    epsilon: float = 0.25
    inner_steps: int = 32
    lr: float = 1e-3
    batch_size: int = 32
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.epsilon <= 1.0:
            raise ConfigError(f"epsilon must lie in [0, 1], got {self.epsilon}")
        if self.inner_steps < 1:
            raise ConfigError("inner_steps must be >= 1")


@dataclass(frozen=True)
class RetrainConfig:
    train: np.ndarray
    test: np.ndarray
    steps: int = 2000
    eval_every: int = 10
    threshold: float | None = None
    early_stop: bool = False
    batch_size: int = 32
    lr: float = 1e-3
    seed: int = 0

    def __post_init__(self):
        if self.steps < 0:
            raise ConfigError("steps must be >= 0")
        if self.eval_every < 1:
            raise ConfigError("eval_every must be >= 1")
        if len(self.train) == 0 or len(self.test) == 0:
            raise ConfigError("train and test sets must be nonempty")


def blend(current: ModelParams, adapted: ModelParams, epsilon: float) -> ModelParams:
    """``current + epsilon * (adapted - current)``; the endpoints are returned exactly."""
    if epsilon == 0.0:
        return current.copy()
    if epsilon == 1.0:
        return adapted.copy()
    arrays = {k: v + epsilon * (adapted.arrays[k] - v) for k, v in current.arrays.items()}
    return ModelParams(current.config, arrays)


def inner_state(params: ModelParams, cfg: MetaConfig, task_id: int) -> TrainState:
    """Fresh optimizer state for one task; moments never carry across tasks."""
    gen = RngStream(cfg.seed, (1, task_id)).generator()
    return TrainState(params.copy(), gen, lr=cfg.lr)


def adapt(state: TrainState, task: Task, cfg: MetaConfig) -> TrainState:
    """The inner loop: ``inner_steps`` optimizer steps on the task's samples."""
    if len(task) == 0:
        raise ValueError("task has no samples")
    inner = inner_state(state.params, cfg, task.spec.task_id)
    return train_steps(inner, task.samples, cfg.inner_steps, cfg.batch_size)


def reptile_step(state: TrainState, task: Task, cfg: MetaConfig) -> TrainState:
    """``theta <- theta + epsilon * (U^g(theta) - theta)`` for one task."""
    return _blend_into(state, adapt(state, task, cfg), cfg.epsilon)


def _blend_into(state: TrainState, adapted: TrainState, epsilon: float) -> TrainState:
    new = state.clone()
    new.params = blend(state.params, adapted.params, epsilon)
    return new


@dataclass
class MetaLogRow:
    task: int
    loss: float
    wall_time_ms: float


def meta_train(
    env: Iterable[Task],
    cfg: MetaConfig,
    init: TrainState,
    on_task: Callable[[MetaLogRow], None] | None = None,
) -> tuple[TrainState, list[MetaLogRow]]:
    """Serial Reptile over ``env`` in stream order.

    The logged loss is ``-SGCS`` of the adapted (post-inner-loop) model on
    the task's own samples.
    """
    state = init.clone()
    rows: list[MetaLogRow] = []
    t0 = time.perf_counter()
    for task in env:
        adapted = adapt(state, task, cfg)
        state = _blend_into(state, adapted, cfg.epsilon)
        loss = -float(evaluate_sgcs(adapted.params, task.samples).mean())
        row = MetaLogRow(task.spec.task_id, loss, 1e3 * (time.perf_counter() - t0))
        rows.append(row)
        if on_task is not None:
            on_task(row)
    if not rows:
        raise ValueError("meta environment yielded no tasks")
    log.info("meta-training finished after %d tasks", len(rows))
    return state, rows


@dataclass
class RetrainResult:
    state: TrainState
    curve: list[tuple[int, float]] = field(default_factory=list)  # (step, best-so-far test SGCS)
    train_loss: list[float] = field(default_factory=list)  # per evaluation point
    steps_to_threshold: int | None = None


def target_retrain(init: ModelParams | TrainState, cfg: RetrainConfig) -> RetrainResult:
    """Fine-tune on the target set, tracking the best test SGCS so far.

    Evaluation runs at step 0 and every ``eval_every`` steps (plus the last
    step). ``steps_to_threshold`` is the first evaluated step whose
    best-so-far SGCS reaches ``threshold``.
    """
    params = init.params if isinstance(init, TrainState) else init
    state = TrainState(params.copy(), RngStream(cfg.seed, (2,)).generator(), lr=cfg.lr)
    result = RetrainResult(state)
    best = -np.inf
    recent: list[float] = []

    def record(step: int):
        nonlocal best
        score = float(evaluate_sgcs(state.params, cfg.test).mean())
        best = max(best, score)
        result.curve.append((step, best))
        result.train_loss.append(float(np.mean(recent)) if recent else float("nan"))
        recent.clear()
        if cfg.threshold is not None and result.steps_to_threshold is None and best >= cfg.threshold:
            result.steps_to_threshold = step
            return cfg.early_stop
        return False

    if record(0):
        result.state = state
        return result
    done = 0
    while done < cfg.steps:
        chunk = min(cfg.eval_every, cfg.steps - done)
        state = train_steps(state, cfg.train, chunk, cfg.batch_size, losses=recent)
        done += chunk
        if record(done):
            break
    result.state = state
    return result

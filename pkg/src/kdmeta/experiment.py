"""Desk-scale end-to-end comparisons: meta vs random initialization,
augmented vs seed-only retraining, complete vs incomplete basis."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .augment import build_target_dataset
from .autoencoder import ModelConfig, TrainState, init_params
from .basis import make_basis
from .channel import PRESETS, channels_to_csi, gen_population
from .core import ConfigError, RngStream
from .metaenv import MetaEnvConfig, build_meta_env
from .metatrain import MetaConfig, RetrainConfig, RetrainResult, meta_train, target_retrain

log = logging.getLogger(__name__)

# Top-level stream ids under the run seed; the CLI uses the same layout.
STREAM_BASIS = 10
STREAM_META_ENV = 11
STREAM_INIT = 20
STREAM_BATCHES = 21
STREAM_TARGET = 30


@dataclass(frozen=True)
class DeskConfig:
    # array / band
    n_h: int = 4
    n_v: int = 2
    n_r: int = 2
    n_sb: int = 8
    n_gran: int = 4
    # basis and meta environment
    basis: str = "dft"
    o_h: int = 2
    o_v: int = 2
    n_tasks: int = 500
    max_ue: int = 16
    max_slot: int = 16
    l_task: int = 3
    m_task: int = 3
    alpha: float = 0.75
    beta: float = 0.75
    # meta training
    epsilon: float = 0.25
    inner_steps: int = 32
    # model
    hidden: tuple[int, ...] = (128, 64)
    bits: int = 64
    bits_per_dim: int = 2
    lr: float = 1e-3
    batch_size: int = 32
    # target scenarios
    scenarios: tuple[str, ...] = ("short_delay", "long_delay")
    seed_ues: int = 30
    seed_slots: int = 10
    n_aug: int = 100
    test_ues: int = 100
    test_slots: int = 4
    retrain_steps: int = 600
    eval_every: int = 10
    thresholds: tuple[float, ...] = (0.80, 0.60)  # reference SGCS, one per scenario

    def __post_init__(self):
        if len(self.thresholds) != len(self.scenarios):
            raise ConfigError("need exactly one threshold per scenario")

    @property
    def n_t(self) -> int:
        return self.n_h * self.n_v

    @property
    def n_sc(self) -> int:
        return self.n_sb * self.n_gran

    def model_config(self) -> ModelConfig:
        return ModelConfig(self.n_t, self.n_sb, self.hidden, self.bits, self.bits_per_dim)


def meta_env_config(cfg: DeskConfig, seed: int, incomplete: tuple[int, int] | None = None) -> MetaEnvConfig:
    basis = make_basis(cfg.basis, cfg.n_h, cfg.n_v, cfg.n_sb, cfg.o_h, cfg.o_v, rng=RngStream(seed, (STREAM_BASIS,)))
    return MetaEnvConfig(
        basis=basis,
        n_tasks=cfg.n_tasks,
        max_ue=cfg.max_ue,
        max_slot=cfg.max_slot,
        l_task=cfg.l_task,
        m_task=cfg.m_task,
        alpha=cfg.alpha,
        beta=cfg.beta,
        incomplete_basis=incomplete,
    )


def initial_state(cfg: DeskConfig, seed: int) -> TrainState:
    params = init_params(cfg.model_config(), RngStream(seed, (STREAM_INIT,)))
    return TrainState(params, RngStream(seed, (STREAM_BATCHES,)).generator(), lr=cfg.lr)


def run_meta_training(cfg: DeskConfig, seed: int, incomplete: tuple[int, int] | None = None):
    env_cfg = meta_env_config(cfg, seed, incomplete)
    meta_cfg = MetaConfig(cfg.epsilon, cfg.inner_steps, cfg.lr, cfg.batch_size, seed)
    env = build_meta_env(env_cfg, RngStream(seed, (STREAM_META_ENV,)))
    return meta_train(env, meta_cfg, initial_state(cfg, seed))


@dataclass
class TargetData:
    scenario: str
    seeds: list[np.ndarray]  # per UE: (seed_slots, N_r, N_t, N_d)
    seed_csi: np.ndarray
    augmented: np.ndarray
    test: np.ndarray


def scenario_stream(seed: int, scenario: str) -> RngStream:
    return RngStream(seed, (STREAM_TARGET, list(PRESETS).index(scenario)))


def make_target_data(cfg: DeskConfig, scenario: str, seed: int) -> TargetData:
    """Seeded UEs (branch 0), disjoint test UEs (branch 1) and the augmented set."""
    preset = PRESETS[scenario]
    root = scenario_stream(seed, scenario)
    seeds = gen_population(preset, cfg.n_h, cfg.n_v, cfg.n_r, cfg.seed_ues, cfg.seed_slots, root.child(0))
    test_h = gen_population(preset, cfg.n_h, cfg.n_v, cfg.n_r, cfg.test_ues, cfg.test_slots, root.child(1))
    seed_csi = channels_to_csi(np.concatenate(seeds), cfg.n_sc, cfg.n_gran)
    test = channels_to_csi(np.concatenate(test_h), cfg.n_sc, cfg.n_gran)
    augmented = build_target_dataset(seeds, cfg.n_aug, root.child(2), cfg.n_sc, cfg.n_gran)
    return TargetData(scenario, seeds, seed_csi, augmented, test)


def retrain(
    cfg: DeskConfig, init, train: np.ndarray, test: np.ndarray, seed: int, threshold: float | None = None
) -> RetrainResult:
    rc = RetrainConfig(
        train=train,
        test=test,
        steps=cfg.retrain_steps,
        eval_every=cfg.eval_every,
        threshold=threshold,
        batch_size=cfg.batch_size,
        lr=cfg.lr,
        seed=seed,
    )
    return target_retrain(init, rc)


@dataclass
class SeedReport:
    """Per-scenario outcomes for one seed; ``None`` steps mean unreached."""

    seed: int
    steps_meta: dict[str, int | None] = field(default_factory=dict)
    steps_random: dict[str, int | None] = field(default_factory=dict)
    final_aug: dict[str, float] = field(default_factory=dict)
    final_seed_only: dict[str, float] = field(default_factory=dict)
    final_full_basis: dict[str, float] = field(default_factory=dict)
    final_incomplete: dict[str, float] = field(default_factory=dict)


def run_seed(cfg: DeskConfig, seed: int) -> SeedReport:
    """All paired comparisons for one seed, each over ``cfg.retrain_steps``.

    * meta vs random initialization, both retrained on augmented data;
    * augmented vs seed-only data, both from the meta initialization;
    * full vs half-basis meta-training, both retrained on seed-only data so
      that augmentation does not mask the meta-training difference.
    """
    rep = SeedReport(seed)
    meta_state, _ = run_meta_training(cfg, seed)
    lacking_state, _ = run_meta_training(cfg, seed, incomplete=(cfg.n_t // 2, cfg.n_sb // 2))
    rand_state = initial_state(cfg, seed)
    for scen, thr in zip(cfg.scenarios, cfg.thresholds):
        data = make_target_data(cfg, scen, seed)
        r_meta = retrain(cfg, meta_state, data.augmented, data.test, seed, thr)
        r_rand = retrain(cfg, rand_state, data.augmented, data.test, seed, thr)
        r_seed = retrain(cfg, meta_state, data.seed_csi, data.test, seed)
        r_lack = retrain(cfg, lacking_state, data.seed_csi, data.test, seed)
        rep.steps_meta[scen] = r_meta.steps_to_threshold
        rep.steps_random[scen] = r_rand.steps_to_threshold
        rep.final_aug[scen] = r_meta.curve[-1][1]
        rep.final_seed_only[scen] = rep.final_full_basis[scen] = r_seed.curve[-1][1]
        rep.final_incomplete[scen] = r_lack.curve[-1][1]
        log.info(
            "seed %d %s: steps meta=%s random=%s | aug=%.4f seed-only=%.4f | lacking=%.4f",
            seed, scen, r_meta.steps_to_threshold, r_rand.steps_to_threshold,
            rep.final_aug[scen], rep.final_seed_only[scen], rep.final_incomplete[scen],
        )
    return rep


def _total_steps(steps: dict[str, int | None], cfg: DeskConfig) -> int:
    # an unreached threshold counts as one evaluation past the budget
    return sum(cfg.retrain_steps + cfg.eval_every if s is None else s for s in steps.values())


@dataclass
class Summary:
    meta_wins: int
    median_reduction: float
    aug_wins: int
    basis_wins: int
    n_seeds: int


def summarize(reports: list[SeedReport], cfg: DeskConfig) -> Summary:
    """Per-seed verdicts: steps are summed and SGCS averaged over the scenarios."""
    meta_wins, ratios, aug_wins, basis_wins = 0, [], 0, 0
    for rep in reports:
        m, r = _total_steps(rep.steps_meta, cfg), _total_steps(rep.steps_random, cfg)
        meta_wins += m < r
        ratios.append(np.inf if m == 0 else r / m)
        aug_wins += np.mean(list(rep.final_aug.values())) > np.mean(list(rep.final_seed_only.values()))
        basis_wins += np.mean(list(rep.final_full_basis.values())) > np.mean(list(rep.final_incomplete.values()))
    return Summary(int(meta_wins), float(np.median(ratios)), int(aug_wins), int(basis_wins), len(reports))

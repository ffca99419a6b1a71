"""Command-line entry points.

Exit codes: 0 success, 2 configuration error, 3 I/O error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .augment import augment_from_profiles, estimate_profile
from .autoencoder import TrainState, evaluate_sgcs, init_params
from .basis import make_basis
from .channel import PRESETS, channels_to_csi, gen_population
from .core import ConfigError, DegenerateInputError, NumericalError, RngStream, as_csi, sgcs_per_sample
from .experiment import STREAM_BASIS, STREAM_BATCHES, STREAM_INIT, STREAM_META_ENV, STREAM_TARGET
from .io import (
    KIND_CHANNEL,
    KIND_CSI,
    KIND_PROFILE,
    DatasetWriter,
    ExperimentConfig,
    load_config,
    read_checkpoint,
    read_dataset,
    write_checkpoint,
    write_csv,
    write_dataset,
    write_json,
)
from .metaenv import MetaEnvConfig, Task, TaskSpec, build_meta_env
from .metatrain import MetaConfig, RetrainConfig, meta_train, target_retrain

log = logging.getLogger("kdmeta")

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_NUMERIC = 0, 2, 3, 4
STREAM_AUGMENT = 40
PERCENTILES = (5, 25, 50, 75, 95)


# -- builders ----------------------------------------------------------------


def meta_env_config(cfg: ExperimentConfig) -> MetaEnvConfig:
    s, m = cfg.system, cfg.meta
    basis = make_basis(
        m.basis, s.n_h, s.n_v, s.subbands, m.o_h, m.o_v, p=m.P,
        rng=RngStream(cfg.seed, (STREAM_BASIS,)), dual_pol=s.dual_pol,
    )
    return MetaEnvConfig(
        basis=basis,
        n_tasks=m.T,
        max_ue=m.max_ue,
        max_slot=m.max_slot,
        l_task=m.l_task,
        m_task=m.m_task,
        alpha=m.alpha,
        beta=m.beta,
        incomplete_basis=m.incomplete_basis,
    )


def fresh_state(cfg: ExperimentConfig) -> TrainState:
    params = init_params(cfg.model_config_obj(), RngStream(cfg.seed, (STREAM_INIT,)))
    return TrainState(params, RngStream(cfg.seed, (STREAM_BATCHES,)).generator(), lr=cfg.model.lr)


def _tasks_from_file(path: str):
    ds = read_dataset(path)
    if ds.kind != KIND_CSI or ds.index is None:
        raise ConfigError(f"{path}: expected a CSI dataset with a task index")
    data = ds.arrays()
    for task_id, group, n_ue, n_slot, start in ds.index:
        spec = TaskSpec(int(task_id), int(group), (), (), int(n_ue), int(n_slot))
        yield Task(spec, data[start : start + n_ue * n_slot])


def _csi_data(path: str, cfg: ExperimentConfig | None = None) -> np.ndarray:
    ds = read_dataset(path)
    if ds.kind != KIND_CSI:
        raise ConfigError(f"{path}: expected a CSI dataset (kind 0), got kind {ds.kind}")
    data = as_csi(ds.arrays())
    if cfg is not None and data.shape[1:] != (cfg.system.n_t, cfg.system.subbands):
        raise ConfigError(f"{path}: CSI shape {data.shape[1:]} does not match the config")
    return data


# -- subcommands -------------------------------------------------------------


def cmd_gen_meta_env(args) -> int:
    cfg = load_config(args.config)
    env_cfg = meta_env_config(cfg)
    rows = []
    with DatasetWriter(args.out, KIND_CSI, (env_cfg.basis.n_t, env_cfg.basis.n_sb)) as w:
        for task in build_meta_env(env_cfg, RngStream(cfg.seed, (STREAM_META_ENV,))):
            sp = task.spec
            rows.append((sp.task_id, sp.group, sp.n_ue, sp.n_slot, w.count))
            w.write(task.samples)
        w.close(np.array(rows, dtype=np.int64).reshape(-1, 5), cfg.provenance(kind="meta_env"))
    log.info("wrote %d tasks, %d samples to %s", len(rows), w.count, args.out)
    return EXIT_OK


def cmd_meta_train(args) -> int:
    cfg = load_config(args.config)
    if args.stream:
        env_cfg = meta_env_config(cfg)
        env = build_meta_env(env_cfg, RngStream(cfg.seed, (STREAM_META_ENV,)))
    else:
        env = _tasks_from_file(args.env)
    # fail on an unwritable destination before spending the training time
    for out in (args.out, args.log):
        if out and not Path(out).parent.is_dir():
            raise FileNotFoundError(f"output directory does not exist: {Path(out).parent}")
    mcfg = MetaConfig(cfg.meta.epsilon, cfg.meta.g, cfg.model.lr, cfg.model.batch_size, cfg.seed)
    state, rows = meta_train(env, mcfg, fresh_state(cfg))
    write_checkpoint(args.out, state.params, cfg.provenance(stage="meta_train"))
    if args.log:
        write_csv(args.log, ("task", "loss", "wall_time_ms"), ((r.task, r.loss, r.wall_time_ms) for r in rows))
    log.info("meta-trained on %d tasks -> %s", len(rows), args.out)
    return EXIT_OK


def cmd_gen_channels(args) -> int:
    cfg = load_config(args.config)
    s, t = cfg.system, cfg.target
    scenario = args.scenario or t.scenario
    if scenario not in PRESETS:
        raise ConfigError(f"unknown scenario {scenario!r}; choose from {sorted(PRESETS)}")
    split = {"seed": 0, "test": 1}[args.split]
    n_ue = args.ues or (t.seed_ues if split == 0 else t.test_ues)
    n_slot = args.slots or (t.seed_slots if split == 0 else t.test_slots)
    rng = RngStream(cfg.seed, (STREAM_TARGET, list(PRESETS).index(scenario))).child(split)
    chans = gen_population(PRESETS[scenario], s.n_h, s.n_v, s.n_r, n_ue, n_slot, rng, s.dual_pol)
    starts = np.arange(n_ue, dtype=np.int64) * n_slot
    index = np.stack([np.arange(n_ue), starts], axis=1)
    prov = cfg.provenance(scenario=scenario, split=args.split)
    h = np.concatenate(chans)
    if args.csi:
        write_dataset(args.out, KIND_CSI, channels_to_csi(h, s.n_sc, s.n_gran), index, prov)
    else:
        write_dataset(args.out, KIND_CHANNEL, h, index, prov)
    return EXIT_OK


def _profiles_from_channels(path: str):
    ds = read_dataset(path)
    if ds.kind != KIND_CHANNEL:
        raise ConfigError(f"{path}: expected a channel dataset (kind 1), got kind {ds.kind}")
    h = ds.arrays()
    if ds.index is None:
        groups = [(0, 0, len(h))]
    else:
        starts = list(ds.index[:, 1]) + [len(h)]
        groups = [(int(u), int(a), int(b)) for u, a, b in zip(ds.index[:, 0], starts, starts[1:])]
    return [estimate_profile(h[a:b], ue_id=u) for u, a, b in groups]


def cmd_augment(args) -> int:
    cfg = load_config(args.config)
    if args.profile_in:
        ds = read_dataset(args.profile_in)
        if ds.kind != KIND_PROFILE:
            raise ConfigError(f"{args.profile_in}: expected a profile dataset (kind 2)")
        profiles = ds.profiles()
    elif args.channels:
        profiles = _profiles_from_channels(args.channels)
    else:
        raise ConfigError("augment needs --channels or --profile-in")
    if args.profile_out:
        write_dataset(args.profile_out, KIND_PROFILE, profiles, provenance=cfg.provenance(kind="profiles"))
    n_aug = args.n_aug or cfg.target.n_aug
    rng = RngStream(cfg.seed, (STREAM_AUGMENT,))
    csi = augment_from_profiles(profiles, n_aug, rng, cfg.system.n_sc, cfg.system.n_gran)
    index = np.stack([np.arange(len(profiles)), np.arange(len(profiles)) * n_aug], axis=1)
    write_dataset(args.out, KIND_CSI, csi, index, cfg.provenance(kind="augmented", n_aug=n_aug))
    log.info("augmented %d UEs x %d -> %d samples", len(profiles), n_aug, len(csi))
    return EXIT_OK


def cmd_retrain(args) -> int:
    cfg = load_config(args.config)
    if args.init == "random":
        init = fresh_state(cfg).params
    else:
        if not args.checkpoint:
            raise ConfigError("--checkpoint is required unless --init random")
        init, _ = read_checkpoint(args.checkpoint)
    train, test = _csi_data(args.train, cfg), _csi_data(args.test, cfg)
    threshold = args.threshold if args.threshold is not None else cfg.target.threshold
    rc = RetrainConfig(
        train=train,
        test=test,
        steps=cfg.target.steps if args.steps is None else args.steps,
        eval_every=cfg.target.eval_every,
        threshold=threshold,
        batch_size=cfg.model.batch_size,
        lr=cfg.model.lr,
        seed=cfg.seed,
    )
    res = target_retrain(init, rc)
    write_checkpoint(args.out, res.state.params, cfg.provenance(stage="retrain", init=args.init))
    if args.log:
        rows = [
            (step, "" if np.isnan(loss) else loss, best)
            for (step, best), loss in zip(res.curve, res.train_loss)
        ]
        write_csv(args.log, ("step", "train_loss", "best_test_sgcs"), rows)
    if threshold is not None:
        hit = res.steps_to_threshold
        print(f"steps_to_threshold: {'unreached' if hit is None else hit}")
    if args.report:
        write_json(
            args.report,
            {
                "final_best_test_sgcs": res.curve[-1][1],
                "steps_to_threshold": res.steps_to_threshold,
                "threshold": threshold,
                "provenance": cfg.provenance(stage="retrain", init=args.init),
            },
        )
    return EXIT_OK


def cmd_eval(args) -> int:
    data = _csi_data(args.data)
    if args.bypass:
        scores = sgcs_per_sample(data, data)
        bits, bits_q = None, None
    else:
        if not args.checkpoint:
            raise ConfigError("--checkpoint is required unless --bypass")
        params, _ = read_checkpoint(args.checkpoint)
        if data.shape[1:] != (params.config.n_t, params.config.n_sb):
            raise ConfigError("dataset shape does not match the checkpoint")
        scores = evaluate_sgcs(params, data, quantized=not args.no_quant)
        bits, bits_q = params.config.bits, params.config.bits_per_dim
    pct = np.percentile(scores, PERCENTILES)
    report = {
        "mean_sgcs": float(np.mean(scores)),
        "percentiles": {f"p{q}": float(v) for q, v in zip(PERCENTILES, pct)},
        "count": int(len(scores)),
        "B": bits,
        "B_q": bits_q,
        "bypass": bool(args.bypass),
        "provenance": {"version": __version__, "checkpoint": args.checkpoint, "data": args.data},
    }
    write_json(args.out, report)
    print(f"mean_sgcs: {report['mean_sgcs']:.6f}")
    return EXIT_OK


# -- entry point -------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="kdmeta", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-meta-env", help="write the synthetic meta task environment")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_meta_env)

    p = sub.add_parser("meta-train", help="Reptile meta-training")
    p.add_argument("--config", required=True)
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--env", help="meta environment file from gen-meta-env")
    src.add_argument("--stream", action="store_true", help="regenerate tasks from the seed")
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--log", help="CSV log (task, loss, wall_time_ms)")
    p.set_defaults(func=cmd_meta_train)

    p = sub.add_parser("gen-channels", help="seeded or test channels for one target scenario")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--scenario", choices=sorted(PRESETS))
    p.add_argument("--split", choices=("seed", "test"), default="seed")
    p.add_argument("--ues", type=int)
    p.add_argument("--slots", type=int)
    p.add_argument("--csi", action="store_true", help="write CSI matrices instead of channels")
    p.set_defaults(func=cmd_gen_channels)

    p = sub.add_parser("augment", help="statistics-driven augmentation")
    p.add_argument("--config", required=True)
    p.add_argument("--channels", help="seed channel dataset (kind 1)")
    p.add_argument("--n-aug", type=int)
    p.add_argument("--out", required=True)
    p.add_argument("--profile-out")
    p.add_argument("--profile-in")
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("retrain", help="fine-tune on target data")
    p.add_argument("--config", required=True)
    p.add_argument("--checkpoint")
    p.add_argument("--init", choices=("checkpoint", "random"), default="checkpoint")
    p.add_argument("--train", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--steps", type=int)
    p.add_argument("--threshold", type=float)
    p.add_argument("--out", required=True)
    p.add_argument("--log", help="CSV (step, train_loss, best_test_sgcs)")
    p.add_argument("--report", help="JSON summary")
    p.set_defaults(func=cmd_retrain)

    p = sub.add_parser("eval", help="SGCS report for a checkpoint on a CSI dataset")
    p.add_argument("--checkpoint")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--bypass", action="store_true", help="score the data against itself")
    p.add_argument("--no-quant", action="store_true", help="skip the quantizer")
    p.set_defaults(func=cmd_eval)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (NumericalError, DegenerateInputError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        # remaining ValueErrors come from argument/shape validation
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())

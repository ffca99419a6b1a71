import numpy as np
import pytest

from kdmeta.autoencoder import ModelConfig, TrainState, init_params
from kdmeta.basis import dft_basis
from kdmeta.core import ConfigError, RngStream, complex_gaussian, normalize_columns
from kdmeta.experiment import DeskConfig, run_meta_training
from kdmeta.metaenv import MetaEnvConfig, build_meta_env
from kdmeta.metatrain import (
    MetaConfig,
    RetrainConfig,
    adapt,
    blend,
    meta_train,
    reptile_step,
    target_retrain,
)

CFG = ModelConfig(4, 4, hidden=(16,), bits=8, bits_per_dim=2)


@pytest.fixture(scope="module")
def env():
    basis = dft_basis(2, 2, 4, 2, 1)
    return list(build_meta_env(MetaEnvConfig(basis, n_tasks=6, max_ue=3, max_slot=3, l_task=2, m_task=2), RngStream(0)))


def fresh(seed=0):
    return TrainState(init_params(CFG, RngStream(seed)), RngStream(seed, (1,)).generator())


def data(n, seed):
    return normalize_columns(complex_gaussian(RngStream(seed), (n, 4, 4)))


class TestBlend:
    def test_endpoints_exact(self):
        a, b = init_params(CFG, RngStream(1)), init_params(CFG, RngStream(2))
        assert blend(a, b, 0.0).equal(a)
        assert blend(a, b, 1.0).equal(b)

    def test_quarter(self):
        a, b = init_params(CFG, RngStream(1)), init_params(CFG, RngStream(2))
        out = blend(a, b, 0.25)
        for k in a.arrays:
            ref = 0.75 * a.arrays[k] + 0.25 * b.arrays[k]
            assert np.max(np.abs(out.arrays[k] - ref)) <= 1e-12

    def test_no_aliasing(self):
        a, b = init_params(CFG, RngStream(1)), init_params(CFG, RngStream(2))
        out = blend(a, b, 0.0)
        out.arrays["enc.0.w"][0, 0] += 1
        assert not out.equal(a)


class TestReptile:
    def test_epsilon_endpoints(self, env):
        state, task = fresh(), env[0]
        cfg0 = MetaConfig(epsilon=0.0, inner_steps=4, seed=3)
        cfg1 = MetaConfig(epsilon=1.0, inner_steps=4, seed=3)
        assert reptile_step(state, task, cfg0).params.equal(state.params)
        assert reptile_step(state, task, cfg1).params.equal(adapt(state, task, cfg1).params)

    def test_inner_optimizer_is_fresh(self, env):
        state = fresh()
        state.step = 99
        state.m = {k: np.ones_like(v) for k, v in state.m.items()}
        cfg = MetaConfig(epsilon=1.0, inner_steps=3)
        inner = adapt(state, env[0], cfg)
        assert inner.step == 3
        reference = adapt(fresh(), env[0], cfg)
        assert inner.params.equal(reference.params)

    def test_outer_state_untouched(self, env):
        state = fresh()
        snapshot = state.params.copy()
        reptile_step(state, env[1], MetaConfig(inner_steps=2))
        assert state.params.equal(snapshot)

    def test_config_validation(self):
        with pytest.raises(ConfigError):
            MetaConfig(epsilon=1.5)
        with pytest.raises(ConfigError):
            MetaConfig(inner_steps=0)


class TestMetaTrain:
    def test_deterministic_and_logged(self, env):
        cfg = MetaConfig(inner_steps=4, seed=1)
        seen = []
        a, rows = meta_train(env, cfg, fresh(), on_task=seen.append)
        b, _ = meta_train(env, cfg, fresh())
        assert a.params.equal(b.params)
        assert [r.task for r in rows] == list(range(6)) and seen == rows
        assert all(r.loss <= 0 for r in rows)

    def test_order_matters(self, env):
        cfg = MetaConfig(inner_steps=4, seed=1)
        a, _ = meta_train(env, cfg, fresh())
        b, _ = meta_train(env[::-1], cfg, fresh())
        assert not a.params.equal(b.params)

    def test_empty_env(self):
        with pytest.raises(ValueError):
            meta_train([], MetaConfig(), fresh())

    @pytest.mark.slow
    def test_desk_learning_curve(self):
        # post-adaptation SGCS improves over the task stream
        _, rows = run_meta_training(DeskConfig(), seed=0)
        sgcs = -np.array([r.loss for r in rows])
        assert len(rows) == 500
        assert sgcs[-50:].mean() > sgcs[:50].mean()


class TestRetrain:
    def test_zero_steps(self):
        res = target_retrain(fresh().params, RetrainConfig(train=data(8, 1), test=data(8, 2), steps=0))
        assert [s for s, _ in res.curve] == [0]

    def test_curve_monotone_and_threshold(self):
        cfg = RetrainConfig(train=data(128, 1), test=data(32, 2), steps=95, eval_every=10, threshold=0.0)
        res = target_retrain(fresh(), cfg)
        steps = [s for s, _ in res.curve]
        best = [b for _, b in res.curve]
        assert steps == [0, 10, 20, 30, 40, 50, 60, 70, 80, 90, 95]
        assert all(b2 >= b1 for b1, b2 in zip(best, best[1:]))
        assert res.steps_to_threshold == 0
        assert len(res.train_loss) == len(res.curve) and np.isnan(res.train_loss[0])

    def test_unreached_and_early_stop(self):
        base = dict(train=data(64, 1), test=data(16, 2), steps=40, eval_every=10)
        assert target_retrain(fresh(), RetrainConfig(**base, threshold=1.1)).steps_to_threshold is None
        res = target_retrain(fresh(), RetrainConfig(**base, threshold=-1.0, early_stop=True))
        assert res.steps_to_threshold == 0 and len(res.curve) == 1

    def test_validation(self):
        with pytest.raises(ConfigError):
            RetrainConfig(train=data(4, 1), test=data(1, 2)[:0])
        with pytest.raises(ConfigError):
            RetrainConfig(train=data(4, 1), test=data(4, 2), eval_every=0)

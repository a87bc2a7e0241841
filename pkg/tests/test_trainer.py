import numpy as np
import pytest

from rpd.envs import EnvSpec
from rpd.errors import ConfigError, TeacherUnavailableError
from rpd.losses import LossConfig
from rpd.metrics import write_metrics_csv
from rpd.nn import PolicyValueNet
from rpd.teacher import ScriptedTeacher, ScriptedTeacherSpec
from rpd.trainer import (ExperimentConfig, TeacherSettings, evaluate,
                         teacher_eval, train)

FAST = dict(hidden_sizes=(16, 16), lanes=4, horizon=10, minibatch_size=20,
            epochs=2, eval_episodes=20, eval_interval=2)


def fast_config(**kw):
    base = dict(task="Push2D", reward_mode="dense", total_steps=4 * 10 * 3,
                loss=LossConfig(variant="none"), seed=0)
    base.update(FAST)
    base.update(kw)
    return ExperimentConfig(**base)


def metrics_bytes(metrics, tmp_path, name):
    path = tmp_path / name
    write_metrics_csv(metrics, str(path))
    return path.read_bytes()


def test_budget_arithmetic_single_update():
    cfg = fast_config(total_steps=4 * 10)
    assert cfg.updates == 1
    res = train(cfg)
    assert len(res.metrics) == 1
    assert res.metrics[0].global_step == 40


def test_seed_reproducibility(tmp_path):
    cfg = fast_config(total_steps=4 * 10 * 5)
    a = train(cfg)
    b = train(cfg)
    assert metrics_bytes(a.metrics, tmp_path, "a.csv") == \
        metrics_bytes(b.metrics, tmp_path, "b.csv")
    np.testing.assert_array_equal(a.policy.flat_parameters(),
                                  b.policy.flat_parameters())


def test_variant_none_ignores_configured_teacher(tmp_path):
    teacher = TeacherSettings(kind="scripted", competence=0.5, seed=3)
    with_teacher = train(fast_config(teacher=teacher))
    without = train(fast_config())
    assert all(m.teacher_queries == 0 for m in with_teacher.metrics)
    assert metrics_bytes(with_teacher.metrics, tmp_path, "a.csv") == \
        metrics_bytes(without.metrics, tmp_path, "b.csv")


def test_distillation_variant_queries_teacher_every_step():
    teacher = TeacherSettings(kind="scripted", seed=3)
    cfg = fast_config(teacher=teacher, loss=LossConfig(variant="rpd_mse"))
    res = train(cfg)
    assert res.metrics[-1].teacher_queries == cfg.updates * cfg.horizon
    assert res.teacher_success is not None


def test_ppd_variant_runs_with_gaussian_fits():
    teacher = TeacherSettings(kind="scripted", action_noise_std=0.05, seed=3)
    cfg = fast_config(teacher=teacher, loss=LossConfig(variant="ppd_kl"))
    res = train(cfg)
    assert np.isfinite(res.metrics[-1].loss_distill)


def test_evaluation_isolation():
    # changing the amount of evaluation must not change training
    a = train(fast_config(eval_episodes=10))
    b = train(fast_config(eval_episodes=40))
    for ma, mb in zip(a.metrics, b.metrics):
        assert ma.train_reward == mb.train_reward
        assert ma.loss_total == mb.loss_total
    np.testing.assert_array_equal(a.policy.flat_parameters(),
                                  b.policy.flat_parameters())


def test_checkpoint_round_trip_evaluation(tmp_path):
    cfg = fast_config()
    res = train(cfg, checkpoint_dir=str(tmp_path))
    loaded = PolicyValueNet.load(str(tmp_path / "checkpoint.bin"))
    spec = EnvSpec(task="Push2D", reward_mode="dense")
    assert evaluate(loaded, spec, 50, 7) == evaluate(res.policy, spec, 50, 7)


def test_evaluate_deterministic_and_isolated():
    policy = PolicyValueNet(8, 3, hidden=(8,), seed=0)
    spec = EnvSpec(task="Push2D", reward_mode="sparse")
    assert evaluate(policy, spec, 30, 5) == evaluate(policy, spec, 30, 5)


def test_random_policy_sparse_eval_fails_with_minus_one():
    policy = PolicyValueNet(8, 3, hidden=(8,), seed=0)
    spec = EnvSpec(task="Push2D", reward_mode="sparse")
    success, reward = evaluate(policy, spec, 100, 3)
    assert success <= 0.05
    assert reward == pytest.approx(-1.0, abs=0.1)


def test_teacher_eval_matches_competence():
    spec = EnvSpec(task="Push2D", reward_mode="sparse")
    teacher = ScriptedTeacher(
        "Push2D", ScriptedTeacherSpec(competence=0.9, action_noise_std=0.02), seed=1)
    rate = teacher_eval(teacher, spec, 500, 0)
    assert rate == pytest.approx(0.9, abs=0.1)


def test_remote_teacher_unreachable_aborts():
    teacher = TeacherSettings(kind="remote", endpoint="http://127.0.0.1:1",
                              instruction="push")
    cfg = fast_config(teacher=teacher, loss=LossConfig(variant="rpd_mse"))
    with pytest.raises(TeacherUnavailableError):
        train(cfg)


def test_teacher_failure_mid_run_checkpoints(tmp_path):
    class FlakyTeacher:
        def __init__(self):
            self.calls = 0
            self.inner = ScriptedTeacher("Push2D", ScriptedTeacherSpec(), seed=0)

        def act(self, obs, sample_count=1):
            self.calls += 1
            # survive the 50-step baseline eval and the first update
            if self.calls > 65:
                raise TeacherUnavailableError("gone")
            return self.inner.act(obs, sample_count)

    import rpd.trainer as trainer_mod
    cfg = fast_config(teacher=TeacherSettings(kind="scripted", seed=0),
                      loss=LossConfig(variant="rpd_mse"))
    orig = trainer_mod.build_teacher
    trainer_mod.build_teacher = lambda c, e: FlakyTeacher()
    try:
        with pytest.raises(TeacherUnavailableError):
            train(cfg, checkpoint_dir=str(tmp_path))
    finally:
        trainer_mod.build_teacher = orig
    assert (tmp_path / "checkpoint.bin").exists()


def test_config_validation():
    with pytest.raises(ConfigError):
        fast_config(gamma=1.5)
    with pytest.raises(ConfigError):
        fast_config(total_steps=10)  # below one update
    with pytest.raises(ConfigError):
        fast_config(loss=LossConfig(variant="rpd_mse"))  # teacher missing
    with pytest.raises(ConfigError):
        ExperimentConfig(act_dim=5)


def test_gamma_resolution_by_reward_mode():
    assert fast_config(reward_mode="dense").resolved_gamma() == 0.8
    assert fast_config(reward_mode="sparse").resolved_gamma() == 0.99
    assert fast_config(reward_mode="sparse", gamma=0.5).resolved_gamma() == 0.5


def test_dim7_training_smoke():
    teacher = TeacherSettings(kind="scripted", seed=0)
    cfg = fast_config(act_dim=7, teacher=teacher, loss=LossConfig(variant="rpd_mse"))
    res = train(cfg)
    assert res.policy.act_dim == 7

"""End-to-end seeded training runs: rollout, GAE, minibatch updates,
periodic deterministic evaluation, teacher baselines, checkpoints.
"""

from __future__ import annotations

import logging
import os
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import autodiff as ad
from .envs import EnvSpec, VecEnv, camera_shift_transform, obs_dim
from .errors import ConfigError, NumericalFailureError, TeacherUnavailableError
from .losses import LossConfig, rpd_objective
from .nn import Adam, PolicyValueNet, clip_grad_norm
from .rollout import collect, compute_gae, minibatches
from .teacher import (RemoteTeacher, ScriptedTeacher, ScriptedTeacherSpec,
                      teacher_expectation)

log = logging.getLogger("rpd.trainer")


@dataclass
class TeacherSettings:
    kind: str = "scripted"              # scripted | remote
    task: str | None = None             # defaults to the environment task
    competence: float = 1.0
    action_noise_std: float = 0.0
    systematic_bias: list[float] | None = None
    observes_transformed: bool = False
    seed: int = 0
    endpoint: str = ""
    instruction: str = ""

    def __post_init__(self):
        if self.kind not in ("scripted", "remote"):
            raise ConfigError("teacher.kind must be 'scripted' or 'remote'")
        if self.kind == "remote" and not self.endpoint:
            raise ConfigError("teacher.endpoint required for remote teachers")


@dataclass
class ExperimentConfig:
    task: str = "Push2D"
    reward_mode: str = "dense"
    max_episode_steps: int = 50
    camera_shift_seed: int | None = None
    act_dim: int = 3
    hidden_sizes: tuple[int, ...] = (256, 256)
    loss: LossConfig = field(default_factory=LossConfig)
    teacher: TeacherSettings | None = None
    total_steps: int = 1_000_000
    lanes: int = 32
    horizon: int = 50
    epochs: int = 4
    minibatch_size: int = 800
    learning_rate: float = 3e-4
    gamma: float | None = None          # resolved per reward mode when unset
    gae_lambda: float = 0.9
    eval_episodes: int = 100
    eval_interval: int = 5
    teacher_eval_episodes: int = 500
    max_grad_norm: float = 0.5
    anneal_lr: bool = False
    target_kl: float | None = 0.1
    log_std_init: float = 0.0
    seed: int = 0

    def __post_init__(self):
        for name in ("max_episode_steps", "total_steps", "lanes", "horizon",
                     "epochs", "minibatch_size", "eval_episodes", "eval_interval",
                     "teacher_eval_episodes"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.act_dim not in (3, 7):
            raise ConfigError("act_dim must be 3 or 7")
        if self.gamma is not None and not 0.0 <= self.gamma <= 1.0:
            raise ConfigError("gamma must be in [0, 1]")
        if not 0.0 <= self.gae_lambda <= 1.0:
            raise ConfigError("gae_lambda must be in [0, 1]")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be positive")
        if self.total_steps < self.lanes * self.horizon:
            raise ConfigError("total_steps must cover at least one update "
                              "(lanes * horizon)")
        if self.loss.variant != "none" and self.teacher is None:
            raise ConfigError(f"loss variant {self.loss.variant!r} needs a teacher")

    def resolved_gamma(self) -> float:
        if self.gamma is not None:
            return self.gamma
        return 0.99 if self.reward_mode == "sparse" else 0.8

    @property
    def updates(self) -> int:
        return self.total_steps // (self.lanes * self.horizon)


@dataclass
class RunMetrics:
    update: int
    global_step: int
    train_reward: float
    eval_success: float
    eval_reward: float
    loss_total: float
    loss_ppo: float
    loss_value: float
    loss_entropy: float
    loss_distill: float
    teacher_queries: int
    wallclock_s: float


@dataclass
class TrainResult:
    metrics: list[RunMetrics]
    policy: PolicyValueNet
    teacher_success: float | None
    wallclock_s: float


def build_env_spec(cfg: ExperimentConfig) -> EnvSpec:
    transform = None
    if cfg.camera_shift_seed is not None:
        transform = camera_shift_transform(obs_dim(cfg.task), cfg.camera_shift_seed)
    return EnvSpec(task=cfg.task, reward_mode=cfg.reward_mode,
                   max_episode_steps=cfg.max_episode_steps, obs_transform=transform)


def build_teacher(cfg: ExperimentConfig, env_spec: EnvSpec):
    if cfg.teacher is None:
        return None
    ts = cfg.teacher
    if ts.kind == "remote":
        teacher = RemoteTeacher(ts.endpoint, instruction=ts.instruction)
        info = teacher.health()
        if int(info.get("act_dim", -1)) != cfg.act_dim:
            raise ConfigError(f"remote teacher act_dim {info.get('act_dim')} "
                              f"does not match config act_dim {cfg.act_dim}")
        return teacher
    spec = ScriptedTeacherSpec(
        competence=ts.competence, action_noise_std=ts.action_noise_std,
        systematic_bias=(np.asarray(ts.systematic_bias, dtype=np.float64)
                         if ts.systematic_bias is not None else None),
        observes_transformed=ts.observes_transformed)
    undo = env_spec.obs_transform if ts.observes_transformed else None
    return ScriptedTeacher(ts.task or cfg.task, spec, seed=ts.seed,
                           act_dim=cfg.act_dim, undo_transform=undo)


def _first_episode_stats(actor, env_spec: EnvSpec, episodes: int, seed) -> tuple[float, float]:
    """Success rate and mean return of the first episode in each lane."""
    venv = VecEnv(env_spec, episodes, seed=seed)
    done = np.zeros(episodes, dtype=bool)
    success = np.zeros(episodes, dtype=bool)
    returns = np.zeros(episodes)
    for _ in range(env_spec.max_episode_steps):
        obs = venv.observations()
        results = venv.step(actor(obs))
        for i, r in enumerate(results):
            if done[i]:
                continue
            returns[i] += r.reward
            if r.terminated or r.truncated:
                done[i] = True
                success[i] = r.terminated
        if done.all():
            break
    return float(success.mean()), float(returns.mean())


def evaluate(policy: PolicyValueNet, env_spec: EnvSpec, episodes: int,
             seed) -> tuple[float, float]:
    """Deterministic mean-action rollouts on their own seeded episodes."""
    return _first_episode_stats(lambda obs: policy.forward(obs)[0],
                                env_spec, episodes, seed)


def teacher_eval(teacher, env_spec: EnvSpec, episodes: int, seed) -> float:
    """Success rate of the teacher acting directly in the environment."""
    success, _ = _first_episode_stats(
        lambda obs: teacher_expectation(teacher.act(obs, 1)),
        env_spec, episodes, seed)
    return success


def train(cfg: ExperimentConfig, checkpoint_dir: str | None = None,
          progress=None) -> TrainResult:
    """Run the configured experiment to its step budget.

    Deterministic per seed. Evaluation episodes are independent of the
    training stream and do not count toward the budget. On teacher
    failure the current policy is checkpointed before the error
    propagates.
    """
    t_start = time.perf_counter()
    env_spec = build_env_spec(cfg)
    seq = np.random.SeedSequence(cfg.seed)
    s_net, s_env, s_act, s_mb, s_eval = seq.spawn(5)

    policy = PolicyValueNet(env_spec.obs_dim, cfg.act_dim,
                            hidden=cfg.hidden_sizes, seed=s_net,
                            log_std_init=cfg.log_std_init)
    adam = Adam(policy.params, lr=cfg.learning_rate)

    use_teacher = cfg.loss.variant != "none"
    teacher = build_teacher(cfg, env_spec) if use_teacher else None
    eval_seed_rng = np.random.default_rng(s_eval)

    teacher_success = None
    if teacher is not None:
        teacher_success = teacher_eval(teacher, env_spec, cfg.teacher_eval_episodes,
                                       int(eval_seed_rng.integers(2 ** 63)))
        log.info("teacher baseline success: %.3f", teacher_success)

    venv = VecEnv(env_spec, cfg.lanes, seed=s_env)
    rng_act = np.random.default_rng(s_act)
    rng_mb = np.random.default_rng(s_mb)

    sample_count = 10 if cfg.loss.variant == "ppd_kl" else 1
    with_fit = cfg.loss.variant == "ppd_kl"
    gamma = cfg.resolved_gamma()

    def save_checkpoint():
        if checkpoint_dir is not None:
            os.makedirs(checkpoint_dir, exist_ok=True)
            policy.save(os.path.join(checkpoint_dir, "checkpoint.bin"))

    metrics: list[RunMetrics] = []
    queries_total = 0
    last_eval = (0.0, 0.0)
    train_reward = 0.0

    for update in range(1, cfg.updates + 1):
        if cfg.anneal_lr:
            adam.lr = cfg.learning_rate * (1.0 - (update - 1.0) / cfg.updates)
        try:
            buf = collect(policy, venv, teacher, cfg.horizon, rng_act,
                          sample_count=sample_count, with_fit=with_fit)
        except TeacherUnavailableError:
            save_checkpoint()
            raise
        compute_gae(buf, gamma, cfg.gae_lambda)

        obs_f = buf.flat(buf.obs)
        act_f = buf.flat(buf.actions)
        lp_f = buf.flat(buf.log_probs)
        val_f = buf.flat(buf.values)
        ret_f = buf.flat(buf.returns)
        pmean_f = buf.flat(buf.policy_means)
        tmean_f = buf.flat(buf.teacher_means) if buf.teacher_means is not None else None
        tfit_m = buf.flat(buf.teacher_fit_means) if buf.teacher_fit_means is not None else None
        tfit_s = buf.flat(buf.teacher_fit_stds) if buf.teacher_fit_stds is not None else None

        diag_sums: dict[str, float] = {}
        n_batches = 0
        try:
            for mb in minibatches(buf, cfg.minibatch_size, cfg.epochs, rng_mb):
                idx = mb.indices
                mean, value, log_std = policy.forward_graph(obs_f[idx])
                total, diags = rpd_objective(
                    policy_means=mean, values=value, log_std=log_std,
                    actions=act_f[idx], old_log_probs=lp_f[idx],
                    old_values=val_f[idx], advantages=mb.advantages,
                    returns=ret_f[idx], config=cfg.loss,
                    teacher_means=tmean_f[idx] if tmean_f is not None else None,
                    teacher_fit_means=tfit_m[idx] if tfit_m is not None else None,
                    teacher_fit_stds=tfit_s[idx] if tfit_s is not None else None,
                    old_policy_means=pmean_f[idx], old_log_std=buf.old_log_std)
                policy.params.zero_grad()
                ad.backward(total)
                if cfg.max_grad_norm > 0:
                    clip_grad_norm(policy.params, cfg.max_grad_norm)
                adam.step()
                for k, v in diags.items():
                    diag_sums[k] = diag_sums.get(k, 0.0) + v
                n_batches += 1
                if cfg.target_kl is not None and diags["approx_kl"] > cfg.target_kl:
                    break
        except NumericalFailureError:
            save_checkpoint()
            raise

        queries_total += buf.teacher_queries
        if buf.episode_returns:
            train_reward = float(np.mean(buf.episode_returns))

        if update == 1 or update % cfg.eval_interval == 0 or update == cfg.updates:
            last_eval = evaluate(policy, env_spec, cfg.eval_episodes,
                                 int(eval_seed_rng.integers(2 ** 63)))

        row = RunMetrics(
            update=update, global_step=update * cfg.lanes * cfg.horizon,
            train_reward=train_reward, eval_success=last_eval[0],
            eval_reward=last_eval[1],
            loss_total=diag_sums["loss_total"] / n_batches,
            loss_ppo=diag_sums["loss_ppo"] / n_batches,
            loss_value=diag_sums["loss_value"] / n_batches,
            loss_entropy=diag_sums["loss_entropy"] / n_batches,
            loss_distill=diag_sums["loss_distill"] / n_batches,
            teacher_queries=queries_total,
            wallclock_s=time.perf_counter() - t_start)
        metrics.append(row)
        if progress is not None:
            progress(row)
        log.debug("update %d/%d eval_success=%.3f train_reward=%.3f",
                  update, cfg.updates, row.eval_success, row.train_reward)

    save_checkpoint()
    return TrainResult(metrics=metrics, policy=policy,
                       teacher_success=teacher_success,
                       wallclock_s=time.perf_counter() - t_start)

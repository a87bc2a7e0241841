"""On-policy trajectory collection, advantage estimation, minibatching.

Buffers are [steps, lanes] arrays, write-once during collection and
read-only during optimization; stored log-probs, values, and teacher
actions are plain numbers, so no gradient ever flows through them.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import distributions as dist
from .envs import StepResult, VecEnv, trajectory_record
from .errors import ConfigError
from .nn import PolicyValueNet
from .teacher import fit_gaussian, teacher_expectation


@dataclass
class RolloutBuffer:
    obs: np.ndarray             # [T, N, obs_dim]
    actions: np.ndarray         # [T, N, act_dim]
    log_probs: np.ndarray       # [T, N]
    values: np.ndarray          # [T, N]
    policy_means: np.ndarray    # [T, N, act_dim] rollout-time means
    rewards: np.ndarray         # [T, N]
    terminated: np.ndarray      # [T, N] bool
    truncated: np.ndarray       # [T, N] bool
    bootstrap_values: np.ndarray          # [N]
    old_log_std: np.ndarray               # [act_dim] rollout-time snapshot
    teacher_means: np.ndarray | None      # [T, N, act_dim]
    teacher_fit_means: np.ndarray | None  # [T, N, act_dim]
    teacher_fit_stds: np.ndarray | None   # [T, N, act_dim]
    advantages: np.ndarray | None = None  # [T, N]
    returns: np.ndarray | None = None     # [T, N]
    episode_returns: list[float] = field(default_factory=list)
    episode_successes: list[bool] = field(default_factory=list)
    teacher_queries: int = 0

    @property
    def dones(self) -> np.ndarray:
        return self.terminated | self.truncated

    @property
    def horizon(self) -> int:
        return self.obs.shape[0]

    @property
    def lanes(self) -> int:
        return self.obs.shape[1]

    def flat(self, arr: np.ndarray) -> np.ndarray:
        """Collapse [T, N, ...] to [T*N, ...]."""
        return arr.reshape(arr.shape[0] * arr.shape[1], *arr.shape[2:])

    def dump_jsonl(self, path: str, lane: int = 0) -> None:
        with open(path, "w") as f:
            for t in range(self.horizon):
                res = StepResult(observation=self.obs[t, lane],
                                 reward=float(self.rewards[t, lane]),
                                 terminated=bool(self.terminated[t, lane]),
                                 truncated=bool(self.truncated[t, lane]),
                                 success=bool(self.terminated[t, lane]))
                f.write(trajectory_record(t, self.obs[t, lane],
                                          self.actions[t, lane], res) + "\n")


def collect(policy: PolicyValueNet, venv: VecEnv, teacher, horizon: int,
            rng: np.random.Generator, sample_count: int = 1,
            with_fit: bool = False) -> RolloutBuffer:
    """Roll the current policy for `horizon` steps across all lanes.

    When a teacher is given it is queried once per step on the exact
    observation batch the policy saw; its mean action (and optionally a
    Gaussian fit over `sample_count` samples) is stored alongside.
    """
    if horizon < 1:
        raise ConfigError("horizon must be >= 1")
    n = venv.n_lanes
    obs_dim = venv.spec.obs_dim
    act_dim = policy.act_dim

    buf_obs = np.empty((horizon, n, obs_dim))
    buf_act = np.empty((horizon, n, act_dim))
    buf_lp = np.empty((horizon, n))
    buf_val = np.empty((horizon, n))
    buf_mean = np.empty((horizon, n, act_dim))
    buf_rew = np.empty((horizon, n))
    buf_term = np.zeros((horizon, n), dtype=bool)
    buf_trunc = np.zeros((horizon, n), dtype=bool)
    t_mean = np.empty((horizon, n, act_dim)) if teacher is not None else None
    t_fit_mean = np.empty((horizon, n, act_dim)) if with_fit else None
    t_fit_std = np.empty((horizon, n, act_dim)) if with_fit else None

    log_std = policy.log_std()
    running = np.zeros(n)
    episode_returns: list[float] = []
    episode_successes: list[bool] = []
    queries = 0

    obs = venv.observations()
    for t in range(horizon):
        mean, value = policy.forward(obs)
        actions = dist.sample(mean, log_std, rng)
        lp = dist.log_prob(mean, log_std, actions)

        if teacher is not None:
            response = teacher.act(obs, sample_count)
            queries += 1
            t_mean[t] = teacher_expectation(response)
            if with_fit:
                fits = fit_gaussian(response)
                for i, g in enumerate(fits):
                    t_fit_mean[t, i] = g.mean
                    t_fit_std[t, i] = g.std

        results = venv.step(actions)
        buf_obs[t] = obs
        buf_act[t] = actions
        buf_lp[t] = lp
        buf_val[t] = value
        buf_mean[t] = mean
        for i, r in enumerate(results):
            buf_rew[t, i] = r.reward
            buf_term[t, i] = r.terminated
            buf_trunc[t, i] = r.truncated
            running[i] += r.reward
            if r.terminated or r.truncated:
                episode_returns.append(float(running[i]))
                episode_successes.append(bool(r.success))
                running[i] = 0.0
        obs = venv.observations()

    _, bootstrap = policy.forward(obs)
    return RolloutBuffer(
        obs=buf_obs, actions=buf_act, log_probs=buf_lp, values=buf_val,
        policy_means=buf_mean, rewards=buf_rew, terminated=buf_term,
        truncated=buf_trunc, bootstrap_values=bootstrap, old_log_std=log_std,
        teacher_means=t_mean, teacher_fit_means=t_fit_mean,
        teacher_fit_stds=t_fit_std, episode_returns=episode_returns,
        episode_successes=episode_successes, teacher_queries=queries)


def compute_gae(buffer: RolloutBuffer, gamma: float, gae_lambda: float) -> None:
    """Generalized advantage estimation with terminal masking, in place."""
    if not 0.0 <= gamma <= 1.0 or not 0.0 <= gae_lambda <= 1.0:
        raise ConfigError("gamma and gae_lambda must be in [0, 1]")
    horizon, lanes = buffer.rewards.shape
    adv = np.zeros((horizon, lanes))
    dones = buffer.dones
    last_gae = np.zeros(lanes)
    for t in range(horizon - 1, -1, -1):
        next_values = buffer.bootstrap_values if t == horizon - 1 else buffer.values[t + 1]
        mask = 1.0 - dones[t].astype(np.float64)
        delta = buffer.rewards[t] + gamma * next_values * mask - buffer.values[t]
        last_gae = delta + gamma * gae_lambda * mask * last_gae
        adv[t] = last_gae
    buffer.advantages = adv
    buffer.returns = adv + buffer.values
    if not np.all(np.isfinite(adv)):
        raise ConfigError("non-finite advantages")


@dataclass
class Minibatch:
    indices: np.ndarray      # into the flattened [T*N] axis
    advantages: np.ndarray   # normalized within this batch


def minibatches(buffer: RolloutBuffer, batch_size: int, epochs: int,
                rng: np.random.Generator):
    """Shuffled disjoint index batches covering every sample once per epoch.

    Advantages are normalized per minibatch (mean 0, std 1).
    """
    if buffer.advantages is None:
        raise ConfigError("compute_gae must run before minibatches")
    if batch_size < 1 or epochs < 1:
        raise ConfigError("batch_size and epochs must be >= 1")
    total = buffer.horizon * buffer.lanes
    flat_adv = buffer.flat(buffer.advantages)
    for _ in range(epochs):
        perm = rng.permutation(total)
        for start in range(0, total, batch_size):
            idx = perm[start:start + batch_size]
            adv = flat_adv[idx]
            adv = (adv - adv.mean()) / (adv.std() + 1e-8)
            yield Minibatch(indices=idx, advantages=adv)

"""Desk-scale 2-D continuous-control tasks with dense and sparse rewards.

A point agent moves in the arena [-1, 1]^2. Reach2D drives the agent to a
goal; Push2D shoves a disc-shaped object to a goal by contact; Pull2D drags
it with a grasp flag; the *Distract2D variants add two static obstacle
discs the agent can collide with. Observations are flat state vectors,
optionally passed through an orthogonal linear map (the camera-change
stand-in).

All lane math lives in one batched kernel so vectorized stepping is
bit-identical to stepping lanes one at a time.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, UsageError

ARENA = 1.0
MAX_STEP = 0.05          # meters per step at full action deflection
AGENT_RADIUS = 0.04
OBJECT_RADIUS = 0.04
CONTACT_RADIUS = AGENT_RADIUS + OBJECT_RADIUS
GRASP_RADIUS = 0.11
DISTRACTOR_RADIUS = 0.08
DISTRACTOR_SEP = AGENT_RADIUS + DISTRACTOR_RADIUS
SUCCESS_RADIUS = 0.05
REWARD_SHARPNESS = 5.0
# shaped rewards are scaled well below the terminal success reward of 1.0;
# otherwise camping next to the goal outvalues finishing the episode
# (0.15 / (1 - 0.8) < 1.0 keeps success optimal under the dense-mode gamma)
DENSE_SHAPING_SCALE = 0.15

# spawn rectangles: (low_xy, high_xy); regions used together in one task
# are disjoint, and neighbouring regions touch so episode difficulty spans
# from near-trivial to full-arena crossings
REGIONS = {
    "agent": (np.array([-0.55, -0.42]), np.array([-0.02, 0.42])),
    "agent_reach": (np.array([-0.65, -0.60]), np.array([0.44, 0.60])),
    "object": (np.array([0.03, -0.42]), np.array([0.45, 0.42])),
    "goal_far": (np.array([0.50, -0.42]), np.array([0.90, 0.42])),
    "goal_near": (np.array([-0.90, -0.42]), np.array([-0.60, 0.42])),
    "distractor_a": (np.array([0.03, 0.47]), np.array([0.45, 0.70])),
    "distractor_b": (np.array([0.03, -0.70]), np.array([0.45, -0.47])),
}

# task -> (has_object, pull-style grasp, goal region, number of distractors)
TASKS = {
    "Reach2D": (False, False, "goal_far", 0),
    "Push2D": (True, False, "goal_far", 0),
    "Pull2D": (True, True, "goal_near", 0),
    "PushDistract2D": (True, False, "goal_far", 2),
    "PullDistract2D": (True, True, "goal_near", 2),
}

REWARD_MODES = ("dense", "sparse")


def task_has_object(task: str) -> bool:
    return TASKS[task][0]


def task_is_pull(task: str) -> bool:
    return TASKS[task][1]


def task_n_distractors(task: str) -> int:
    return TASKS[task][3]


def obs_dim(task: str) -> int:
    has_obj, _, _, n_dist = TASKS[task]
    return 4 + (2 if has_obj else 0) + 2 + 2 * n_dist


@dataclass
class ObsTransform:
    """Orthogonal matrix plus offset applied to observations."""

    matrix: np.ndarray
    offset: np.ndarray

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=np.float64)
        self.offset = np.asarray(self.offset, dtype=np.float64)
        d = self.matrix.shape[0]
        if self.matrix.shape != (d, d) or self.offset.shape != (d,):
            raise ConfigError("transform matrix/offset shapes are inconsistent")
        if abs(abs(np.linalg.det(self.matrix)) - 1.0) > 1e-9:
            raise ConfigError("transform matrix must be orthogonal (|det| = 1)")
        if np.max(np.abs(self.matrix @ self.matrix.T - np.eye(d))) > 1e-9:
            raise ConfigError("transform matrix must be orthogonal")

    def apply(self, obs: np.ndarray) -> np.ndarray:
        return obs @ self.matrix.T + self.offset

    def invert(self, obs: np.ndarray) -> np.ndarray:
        return (obs - self.offset) @ self.matrix


def camera_shift_transform(dim: int, seed: int, angle_deg: float = 20.0,
                           offset: float = 0.1) -> ObsTransform:
    """Rotation by `angle_deg` in a seeded random 2-plane, plus an offset.

    Small and information-preserving: the camera-perspective-change analog.
    """
    rng = np.random.default_rng(seed)
    u = rng.standard_normal(dim)
    u /= np.linalg.norm(u)
    v = rng.standard_normal(dim)
    v -= (v @ u) * u
    v /= np.linalg.norm(v)
    theta = np.deg2rad(angle_deg)
    rot = (np.eye(dim)
           + (np.cos(theta) - 1.0) * (np.outer(u, u) + np.outer(v, v))
           + np.sin(theta) * (np.outer(v, u) - np.outer(u, v)))
    return ObsTransform(rot, np.full(dim, offset))


@dataclass
class EnvSpec:
    task: str = "Push2D"
    reward_mode: str = "dense"
    max_episode_steps: int = 50
    obs_transform: ObsTransform | None = None
    dt: float = 0.1

    def __post_init__(self):
        if self.task not in TASKS:
            raise ConfigError(f"unknown task {self.task!r}")
        if self.reward_mode not in REWARD_MODES:
            raise ConfigError(f"reward_mode must be one of {REWARD_MODES}")
        if self.max_episode_steps < 1:
            raise ConfigError("max_episode_steps must be >= 1")
        if self.dt <= 0:
            raise ConfigError("dt must be positive")
        if self.obs_transform is not None:
            d = obs_dim(self.task)
            if self.obs_transform.matrix.shape != (d, d):
                raise ConfigError(f"obs_transform must be {d}x{d} for {self.task}")

    @property
    def obs_dim(self) -> int:
        return obs_dim(self.task)


@dataclass
class EnvState:
    agent_pos: np.ndarray
    agent_vel: np.ndarray
    obj_pos: np.ndarray | None
    goal_pos: np.ndarray
    distractors: np.ndarray  # [k, 2], possibly empty
    t: int = 0
    terminal: bool = False
    rng: np.random.Generator | None = field(default=None, repr=False)


@dataclass
class StepResult:
    observation: np.ndarray
    reward: float
    terminated: bool
    truncated: bool
    success: bool


# ---------------------------------------------------------------------------
# batched kernel
# ---------------------------------------------------------------------------

class _Batch:
    """Struct-of-arrays view over N lanes."""

    __slots__ = ("agent", "vel", "obj", "goal", "dist", "t")

    def __init__(self, agent, vel, obj, goal, dist, t):
        self.agent = agent    # [N, 2]
        self.vel = vel        # [N, 2]
        self.obj = obj        # [N, 2] or None
        self.goal = goal      # [N, 2]
        self.dist = dist      # [N, k, 2]
        self.t = t            # [N] int


def _sample_lane(spec: EnvSpec, rng: np.random.Generator) -> EnvState:
    has_obj, _, goal_region, n_dist = TASKS[spec.task]
    lo, hi = REGIONS["agent" if has_obj else "agent_reach"]
    agent = rng.uniform(lo, hi)
    obj = None
    if has_obj:
        lo, hi = REGIONS["object"]
        obj = rng.uniform(lo, hi)
    lo, hi = REGIONS[goal_region]
    goal = rng.uniform(lo, hi)
    dist = np.zeros((n_dist, 2))
    for k, name in enumerate(("distractor_a", "distractor_b")[:n_dist]):
        lo, hi = REGIONS[name]
        dist[k] = rng.uniform(lo, hi)
    return EnvState(agent_pos=agent, agent_vel=np.zeros(2), obj_pos=obj,
                    goal_pos=goal, distractors=dist, t=0, terminal=False, rng=rng)


def _pack(states: list[EnvState]) -> _Batch:
    agent = np.stack([s.agent_pos for s in states])
    vel = np.stack([s.agent_vel for s in states])
    obj = None
    if states[0].obj_pos is not None:
        obj = np.stack([s.obj_pos for s in states])
    goal = np.stack([s.goal_pos for s in states])
    dist = np.stack([s.distractors for s in states])
    t = np.array([s.t for s in states], dtype=np.int64)
    return _Batch(agent, vel, obj, goal, dist, t)


def _unpack(batch: _Batch, states: list[EnvState], terminal: np.ndarray) -> None:
    for i, s in enumerate(states):
        s.agent_pos = batch.agent[i]
        s.agent_vel = batch.vel[i]
        if batch.obj is not None:
            s.obj_pos = batch.obj[i]
        s.t = int(batch.t[i])
        s.terminal = bool(terminal[i])


def _norm(v: np.ndarray) -> np.ndarray:
    return np.sqrt(np.sum(v * v, axis=-1))


def _observe_batch(batch: _Batch, spec: EnvSpec) -> np.ndarray:
    parts = [batch.agent, batch.vel]
    if batch.obj is not None:
        parts.append(batch.obj)
    parts.append(batch.goal)
    if batch.dist.shape[1] > 0:
        parts.append(batch.dist.reshape(batch.dist.shape[0], -1))
    raw = np.concatenate(parts, axis=1)
    if spec.obs_transform is not None:
        return spec.obs_transform.apply(raw)
    return raw


def _interact_index(act_dim: int) -> int:
    # native layout is (dx, dy, interact); the 7-wide layout keeps the
    # interact flag in its last slot with slots 2..5 ignored by 2-D tasks
    if act_dim == 3:
        return 2
    if act_dim == 7:
        return 6
    raise ConfigError(f"action dimension must be 3 or 7, got {act_dim}")


def _step_kernel(batch: _Batch, actions: np.ndarray, spec: EnvSpec
                 ) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Advance every lane one step. Returns (reward, terminated, truncated, success)."""
    actions = np.asarray(actions, dtype=np.float64)
    if actions.ndim != 2 or actions.shape[0] != batch.agent.shape[0]:
        raise ConfigError(f"actions must be [N, act_dim], got {actions.shape}")
    interact_idx = _interact_index(actions.shape[1])
    is_pull = task_is_pull(spec.task)

    delta = np.clip(actions[:, :2], -1.0, 1.0) * MAX_STEP
    interact = actions[:, interact_idx] > 0.0

    old_agent = batch.agent.copy()
    agent = np.clip(old_agent + delta, -ARENA, ARENA)

    # static distractors block the agent: project it out of each disc
    for k in range(batch.dist.shape[1]):
        d = agent - batch.dist[:, k, :]
        r = _norm(d)
        hit = r < DISTRACTOR_SEP
        if np.any(hit):
            safe_r = np.where(r > 1e-12, r, 1.0)
            direction = np.where(r[:, None] > 1e-12, d / safe_r[:, None],
                                 np.array([1.0, 0.0]))
            pushed = batch.dist[:, k, :] + direction * DISTRACTOR_SEP
            agent = np.where(hit[:, None], pushed, agent)
    agent = np.clip(agent, -ARENA, ARENA)

    moved = agent - old_agent
    batch.agent = agent
    batch.vel = moved / spec.dt

    if batch.obj is not None:
        obj = batch.obj
        if is_pull:
            grasped = interact & (_norm(old_agent - obj) <= GRASP_RADIUS)
            obj = np.where(grasped[:, None], obj + moved, obj)
        else:
            grasped = np.zeros(len(obj), dtype=bool)
        d = obj - agent
        r = _norm(d)
        push = (~grasped) & (r < CONTACT_RADIUS)
        if np.any(push):
            safe_r = np.where(r > 1e-12, r, 1.0)
            direction = np.where(r[:, None] > 1e-12, d / safe_r[:, None],
                                 np.array([1.0, 0.0]))
            obj = np.where(push[:, None], agent + direction * CONTACT_RADIUS, obj)
        batch.obj = np.clip(obj, -ARENA, ARENA)

    batch.t = batch.t + 1

    if batch.obj is None:
        goal_dist = _norm(batch.agent - batch.goal)
    else:
        goal_dist = _norm(batch.obj - batch.goal)
    success = goal_dist < SUCCESS_RADIUS
    terminated = success
    truncated = (~success) & (batch.t >= spec.max_episode_steps)

    if spec.reward_mode == "sparse":
        reward = success.astype(np.float64) - truncated.astype(np.float64)
    else:
        if batch.obj is None:
            shaped = 1.0 - np.tanh(REWARD_SHARPNESS * goal_dist)
        else:
            d_ao = np.maximum(0.0, _norm(batch.agent - batch.obj) - CONTACT_RADIUS)
            shaped = (0.5 * (1.0 - np.tanh(REWARD_SHARPNESS * d_ao))
                      + 0.5 * (1.0 - np.tanh(REWARD_SHARPNESS * goal_dist)))
        reward = np.where(success, 1.0, DENSE_SHAPING_SCALE * shaped)

    return reward, terminated, truncated, success


# ---------------------------------------------------------------------------
# public API
# ---------------------------------------------------------------------------

def reset(spec: EnvSpec, seed: int) -> tuple[EnvState, np.ndarray]:
    """Fresh episode state and its observation, fully determined by `seed`."""
    state = _sample_lane(spec, np.random.default_rng(seed))
    return state, observe(state, spec)


def observe(state: EnvState, spec: EnvSpec) -> np.ndarray:
    return _observe_batch(_pack([state]), spec)[0]


def step(state: EnvState, action: np.ndarray, spec: EnvSpec) -> StepResult:
    """Advance one environment in place. Raises on finished episodes."""
    if state.terminal:
        raise UsageError("step() called on a finished episode; reset first")
    batch = _pack([state])
    reward, terminated, truncated, success = _step_kernel(
        batch, np.asarray(action, dtype=np.float64)[None, :], spec)
    _unpack(batch, [state], terminated | truncated)
    return StepResult(observation=observe(state, spec), reward=float(reward[0]),
                      terminated=bool(terminated[0]), truncated=bool(truncated[0]),
                      success=bool(success[0]))


def vec_step(states: list[EnvState], actions: np.ndarray, spec: EnvSpec) -> list[StepResult]:
    """Step N lanes; finished lanes auto-reset from their own RNG stream.

    Elementwise equal to N independent step() calls; the returned
    observation of a finished lane is the reset observation with the
    terminal flags of the episode that just ended.
    """
    batch = _pack(states)
    reward, terminated, truncated, success = _step_kernel(batch, actions, spec)
    done = terminated | truncated
    _unpack(batch, states, done)
    obs = _observe_batch(batch, spec)
    results = []
    for i, s in enumerate(states):
        ob = obs[i]
        if done[i]:
            if s.rng is None:
                raise UsageError("auto-reset needs states created by reset()/VecEnv")
            fresh = _sample_lane(spec, s.rng)
            s.agent_pos = fresh.agent_pos
            s.agent_vel = fresh.agent_vel
            s.obj_pos = fresh.obj_pos
            s.goal_pos = fresh.goal_pos
            s.distractors = fresh.distractors
            s.t = 0
            s.terminal = False
            ob = observe(s, spec)
        results.append(StepResult(observation=ob, reward=float(reward[i]),
                                  terminated=bool(terminated[i]),
                                  truncated=bool(truncated[i]),
                                  success=bool(success[i])))
    return results


class VecEnv:
    """N independent lanes with per-lane RNG streams and auto-reset."""

    def __init__(self, spec: EnvSpec, n_lanes: int, seed: int | None = None,
                 lane_seeds: list[int] | None = None):
        self.spec = spec
        if lane_seeds is not None:
            if len(lane_seeds) != n_lanes:
                raise ConfigError("lane_seeds length must equal n_lanes")
            rngs = [np.random.default_rng(s) for s in lane_seeds]
        else:
            seq = (seed if isinstance(seed, np.random.SeedSequence)
                   else np.random.SeedSequence(seed))
            rngs = [np.random.default_rng(c) for c in seq.spawn(n_lanes)]
        self.states = [_sample_lane(spec, rng) for rng in rngs]

    @property
    def n_lanes(self) -> int:
        return len(self.states)

    def observations(self) -> np.ndarray:
        return _observe_batch(_pack(self.states), self.spec)

    def step(self, actions: np.ndarray) -> list[StepResult]:
        return vec_step(self.states, actions, self.spec)


def trajectory_record(t: int, obs: np.ndarray, action: np.ndarray,
                      result: StepResult) -> str:
    """One JSON-lines trajectory row."""
    return json.dumps({
        "t": t,
        "obs": [float(x) for x in obs],
        "action": [float(x) for x in action],
        "reward": result.reward,
        "terminated": result.terminated,
        "truncated": result.truncated,
        "success": result.success,
    })

"""Teacher policies: scripted waypoint experts and remote HTTP teachers.

The scripted teacher is a pure function of (observation, spec, seed):
noise and per-episode goal corruption are derived by hashing the
observation bytes with the seed, so identical queries always return
identical actions, with no RNG state to synchronize between a local
teacher and a server hosting the same spec.
"""

from __future__ import annotations

import hashlib
import json
import math
import time
import urllib.error
import urllib.request
from dataclasses import dataclass, field

import numpy as np

from .distributions import GaussianDist
from .envs import (CONTACT_RADIUS, GRASP_RADIUS, MAX_STEP, SUCCESS_RADIUS,
                   ObsTransform, task_has_object, task_is_pull)
from .errors import ConfigError, ProtocolError, TeacherUnavailableError

STANDOFF = CONTACT_RADIUS + 0.02       # push staging distance behind the object
FLOW_RADIUS = 0.09                     # virtual cylinder the approach flow bends around
VORTEX = 0.28                          # circulation strength breaking head-on symmetry
PUSH_DEPTH = CONTACT_RADIUS - 0.03     # how far into the contact point the push aims
PULL_HOLD_RADIUS = 0.085               # pull staging ring (inside grasp, outside contact)
PULL_ENGAGE_RADIUS = 0.098             # gripper closes inside this radius
FIT_STD_FLOOR = 1e-3
# y-extent of the goal spawn regions, used to size the competence blind spot
GOAL_BAND_LO = -0.42
GOAL_BAND_HI = 0.42

TWO_PI = 2.0 * math.pi


def _sigmoid(x: float) -> float:
    return 1.0 / (1.0 + math.exp(-x))


@dataclass
class TeacherQuery:
    observations: np.ndarray            # [B, obs_dim]
    instruction: str = ""
    sample_count: int = 1

    def __post_init__(self):
        self.observations = np.asarray(self.observations, dtype=np.float64)
        if self.observations.ndim != 2 or self.observations.shape[0] < 1:
            raise ConfigError("observations must be a non-empty [B, obs_dim] matrix")
        if self.sample_count < 1:
            raise ConfigError("sample_count must be >= 1")


@dataclass
class TeacherResponse:
    actions: np.ndarray                 # [B, sample_count, act_dim]

    def __post_init__(self):
        self.actions = np.asarray(self.actions, dtype=np.float64)
        if self.actions.ndim != 3:
            raise ConfigError("actions must be [B, sample_count, act_dim]")
        if not np.all(np.isfinite(self.actions)):
            raise ConfigError("teacher returned non-finite actions")


@dataclass
class ScriptedTeacherSpec:
    competence: float = 1.0
    action_noise_std: float = 0.0
    systematic_bias: np.ndarray | None = None
    observes_transformed: bool = False

    def __post_init__(self):
        if not 0.0 <= self.competence <= 1.0:
            raise ConfigError("competence must be in [0, 1]")
        if self.action_noise_std < 0.0:
            raise ConfigError("action_noise_std must be >= 0")
        if self.systematic_bias is not None:
            self.systematic_bias = np.asarray(self.systematic_bias, dtype=np.float64)


def teacher_expectation(response: TeacherResponse) -> np.ndarray:
    """Mean action per batch row across the sample axis."""
    return response.actions.mean(axis=1)


def fit_gaussian(response: TeacherResponse) -> list[GaussianDist]:
    """Per-row diagonal Gaussian fit (unbiased std, floored at 1e-3)."""
    if response.actions.shape[1] < 2:
        raise ConfigError("fit_gaussian needs sample_count >= 2")
    mean = response.actions.mean(axis=1)
    std = np.maximum(response.actions.std(axis=1, ddof=1), FIT_STD_FLOOR)
    return [GaussianDist(mean[i], np.log(std[i])) for i in range(mean.shape[0])]


# ---------------------------------------------------------------------------
# hash-derived randomness
# ---------------------------------------------------------------------------

def hash_uniforms(key: bytes, count: int) -> np.ndarray:
    """`count` uniforms in (0, 1) from a SHA-256 counter stream over `key`."""
    out = np.empty(count, dtype=np.float64)
    i = 0
    counter = 0
    while i < count:
        digest = hashlib.sha256(key + counter.to_bytes(4, "little")).digest()
        for off in range(0, 32, 8):
            if i >= count:
                break
            word = int.from_bytes(digest[off:off + 8], "little")
            out[i] = (word + 0.5) / 2.0 ** 64
            i += 1
        counter += 1
    return out


def hash_normals(key: bytes, count: int) -> np.ndarray:
    """Standard normals via Box-Muller over hash_uniforms."""
    pairs = (count + 1) // 2
    u = hash_uniforms(key, 2 * pairs)
    radius = np.sqrt(-2.0 * np.log(u[:pairs]))
    angle = 2.0 * np.pi * u[pairs:]
    z = np.concatenate([radius * np.cos(angle), radius * np.sin(angle)])
    return z[:count]


# ---------------------------------------------------------------------------
# scripted expert
# ---------------------------------------------------------------------------

class ScriptedTeacher:
    """Waypoint proportional controller standing in for a large teacher model.

    Drives the agent to the object, then moves the object to the goal
    (contact pushes for push tasks, grasp-and-drag for pull tasks). With
    probability 1 - competence per episode the goal waypoint is replaced
    by a hash-derived wrong location for the whole episode.
    """

    def __init__(self, task: str, spec: ScriptedTeacherSpec | None = None,
                 seed: int = 0, act_dim: int = 3,
                 undo_transform: ObsTransform | None = None):
        if task_has_object(task):
            self.prefix = 8
        else:
            self.prefix = 6
        if act_dim not in (3, 7):
            raise ConfigError(f"act_dim must be 3 or 7, got {act_dim}")
        self.task = task
        self.spec = spec or ScriptedTeacherSpec()
        self.seed = int(seed)
        self.act_dim = act_dim
        self.interact_idx = 2 if act_dim == 3 else 6
        self.undo_transform = undo_transform
        if self.spec.systematic_bias is not None \
                and self.spec.systematic_bias.shape != (act_dim,):
            raise ConfigError("systematic_bias length must equal act_dim")
        self._seed_bytes = self.seed.to_bytes(8, "little", signed=True)

    # per-episode goal corruption --------------------------------------
    def _resolve_goal(self, goal: np.ndarray) -> np.ndarray:
        """Goals in the lower (1 - competence) band of the goal region get a
        mirrored waypoint for the whole episode.

        Deterministic and smooth in the goal coordinates, like a weak
        teacher with a systematic blind spot; under uniform goal sampling
        the corruption probability per episode is exactly 1 - competence.
        """
        if self.spec.competence >= 1.0:
            return goal
        frac = (goal[1] - GOAL_BAND_LO) / (GOAL_BAND_HI - GOAL_BAND_LO)
        frac = min(1.0, max(0.0, frac))
        if frac >= 1.0 - self.spec.competence:
            return goal
        return -goal

    def _nominal_row(self, obs: np.ndarray) -> np.ndarray:
        agent = obs[0:2]
        action = np.zeros(self.act_dim)
        if not task_has_object(self.task):
            goal = self._resolve_goal(obs[4:6])
            desired = goal - agent
            action[self.interact_idx] = -1.0
        else:
            obj = obs[4:6]
            goal = self._resolve_goal(obs[6:8])
            if task_is_pull(self.task):
                desired, interact = self._pull_plan(agent, obj, goal)
            else:
                desired, interact = self._push_plan(agent, obj, goal)
            action[self.interact_idx] = interact
        action[0:2] = np.clip(desired / MAX_STEP, -1.0, 1.0)
        return action

    @staticmethod
    def _push_plan(agent, obj, goal):
        """Smooth push field: potential flow around the object toward the
        staging point behind it, blended into an axis-seeking contact push
        once roughly aligned. Smoothness keeps the behavior distillable.
        """
        to_goal = goal - obj
        dist_goal = float(np.hypot(to_goal[0], to_goal[1]))
        if dist_goal < SUCCESS_RADIUS * 0.9:
            return np.zeros(2), -1.0
        ux, uy = to_goal[0] / dist_goal, to_goal[1] / dist_goal
        zx, zy = float(agent[0] - obj[0]), float(agent[1] - obj[1])
        r2 = zx * zx + zy * zy
        if r2 < 1e-18:
            zx, zy = -uy * 1e-6, ux * 1e-6
            r2 = zx * zx + zy * zy
        r = math.sqrt(r2)

        behind_x = obj[0] - ux * STANDOFF
        behind_y = obj[1] - uy * STANDOFF
        dx, dy = behind_x - agent[0], behind_y - agent[1]
        d_len = math.hypot(dx, dy)
        if d_len > 1e-12:
            fx, fy = dx / d_len, dy / d_len
        else:
            fx, fy = -ux, -uy
        # uniform stream toward the staging point, bent around a virtual
        # cylinder at the object, plus a weak vortex to break symmetry
        p = zx * zx - zy * zy
        q = 2.0 * zx * zy
        r4 = r2 * r2
        s = FLOW_RADIUS * FLOW_RADIUS * p / r4
        t = -FLOW_RADIUS * FLOW_RADIUS * q / r4
        vel_x = fx - fx * s + fy * t
        vel_y = fy + fx * t + fy * s
        swirl = VORTEX / (TWO_PI * r2)
        vel_x += swirl * -zy
        vel_y += swirl * zx
        vel_len = math.hypot(vel_x, vel_y)
        if vel_len > 1e-12:
            approach_x = vel_x / vel_len * d_len
            approach_y = vel_y / vel_len * d_len
        else:
            approach_x, approach_y = dx, dy

        # alignment blend: behind the object and close -> drive at the
        # contact point on the goal axis so pushes re-center themselves
        cos_behind = -(zx * ux + zy * uy) / r
        w = (_sigmoid((cos_behind - 0.88) / 0.05)
             * _sigmoid((STANDOFF + 0.05 - r) / 0.02))
        push_x = obj[0] - ux * PUSH_DEPTH - agent[0]
        push_y = obj[1] - uy * PUSH_DEPTH - agent[1]
        out_x = (1.0 - w) * approach_x + w * push_x
        out_y = (1.0 - w) * approach_y + w * push_y
        return np.array([out_x, out_y]), -1.0

    @staticmethod
    def _pull_plan(agent, obj, goal):
        """Smooth pull field: radial approach blended into grasp-and-drag.

        The drag weight stays near zero until the hold radius, inside the
        grasp-engage radius: otherwise the goal-ward component tugs the
        agent away from an object it has not grabbed yet.
        """
        to_goal = goal - obj
        if float(np.hypot(to_goal[0], to_goal[1])) < SUCCESS_RADIUS * 0.9:
            return np.zeros(2), -1.0
        v = agent - obj
        r = float(np.hypot(v[0], v[1]))
        w = _sigmoid((PULL_HOLD_RADIUS - r) / 0.003)
        out = (1.0 - w) * -v + w * to_goal
        interact = math.tanh((PULL_ENGAGE_RADIUS - r) / 0.004)
        return out, interact

    # public query ------------------------------------------------------
    def act(self, observations: np.ndarray, sample_count: int = 1) -> TeacherResponse:
        obs = np.asarray(observations, dtype=np.float64)
        if obs.ndim != 2 or obs.shape[0] < 1:
            raise ConfigError("observations must be a non-empty [B, obs_dim] matrix")
        if obs.shape[1] < self.prefix:
            raise ConfigError(
                f"{self.task} teacher needs >= {self.prefix} observation dims, "
                f"got {obs.shape[1]}")
        if sample_count < 1:
            raise ConfigError("sample_count must be >= 1")
        if self.undo_transform is not None and self.spec.observes_transformed:
            obs = self.undo_transform.invert(obs)

        batch = obs.shape[0]
        actions = np.empty((batch, sample_count, self.act_dim))
        for i in range(batch):
            nominal = self._nominal_row(obs[i])
            row_key = self._seed_bytes + b"|noise|" + obs[i].astype("<f8").tobytes()
            for k in range(sample_count):
                a = nominal.copy()
                if self.spec.action_noise_std > 0.0:
                    z = hash_normals(row_key + k.to_bytes(4, "little"), self.act_dim)
                    a = a + self.spec.action_noise_std * z
                if self.spec.systematic_bias is not None:
                    a = a + self.spec.systematic_bias
                actions[i, k] = a
        return TeacherResponse(actions)


def scripted_act(teacher: ScriptedTeacher, observations: np.ndarray,
                 sample_count: int = 1) -> TeacherResponse:
    return teacher.act(observations, sample_count)


# ---------------------------------------------------------------------------
# HTTP teacher protocol
# ---------------------------------------------------------------------------

def encode_act_request(query: TeacherQuery) -> bytes:
    return json.dumps({
        "observations": [[float(x) for x in row] for row in query.observations],
        "instruction": query.instruction,
        "sample_count": int(query.sample_count),
    }).encode("utf-8")


def decode_act_response(body: bytes, batch: int, sample_count: int) -> TeacherResponse:
    try:
        payload = json.loads(body.decode("utf-8"))
        actions = np.asarray(payload["actions"], dtype=np.float64)
    except (ValueError, KeyError, TypeError) as exc:
        raise ProtocolError(f"malformed teacher response: {exc}") from exc
    if actions.ndim != 3 or actions.shape[0] != batch or actions.shape[1] != sample_count:
        raise ProtocolError(f"teacher response has shape {actions.shape}, "
                            f"expected [{batch}, {sample_count}, act_dim]")
    return TeacherResponse(actions)


def remote_act(endpoint: str, query: TeacherQuery, timeout: float = 30.0,
               retries: int = 2) -> TeacherResponse:
    """POST the query to `endpoint`/v1/act with retry on transient failures."""
    url = endpoint.rstrip("/") + "/v1/act"
    body = encode_act_request(query)
    last_error: Exception | None = None
    for attempt in range(retries + 1):
        try:
            req = urllib.request.Request(
                url, data=body, headers={"Content-Type": "application/json"})
            with urllib.request.urlopen(req, timeout=timeout) as resp:
                return decode_act_response(resp.read(), query.observations.shape[0],
                                           query.sample_count)
        except urllib.error.HTTPError as exc:
            if exc.code >= 500:
                last_error = exc
            else:
                detail = ""
                try:
                    detail = exc.read().decode("utf-8", "replace")
                except Exception:
                    pass
                raise ProtocolError(f"teacher rejected request ({exc.code}): {detail}")
        except (urllib.error.URLError, TimeoutError, ConnectionError, OSError) as exc:
            last_error = exc
        if attempt < retries:
            time.sleep(0.5 * 2 ** attempt)
    raise TeacherUnavailableError(f"teacher at {endpoint} unreachable: {last_error}")


class RemoteTeacher:
    """Teacher backed by an HTTP endpoint implementing the act protocol."""

    def __init__(self, endpoint: str, instruction: str = "", timeout: float = 30.0,
                 retries: int = 2):
        self.endpoint = endpoint
        self.instruction = instruction
        self.timeout = timeout
        self.retries = retries

    def act(self, observations: np.ndarray, sample_count: int = 1) -> TeacherResponse:
        query = TeacherQuery(observations=observations, instruction=self.instruction,
                             sample_count=sample_count)
        return remote_act(self.endpoint, query, timeout=self.timeout,
                          retries=self.retries)

    def health(self) -> dict:
        url = self.endpoint.rstrip("/") + "/v1/health"
        try:
            with urllib.request.urlopen(url, timeout=self.timeout) as resp:
                return json.loads(resp.read().decode("utf-8"))
        except (urllib.error.URLError, OSError, ValueError) as exc:
            raise TeacherUnavailableError(f"health check failed: {exc}") from exc

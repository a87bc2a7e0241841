"""Scripted waypoint teacher, standard library only.

Independent implementation of the engine's scripted-teacher semantics:
a proportional waypoint controller (approach the object, then move it to
the goal), per-episode goal corruption keyed on the goal coordinates,
and per-query Gaussian noise derived by hashing the observation bytes.
Everything is IEEE-754 double math so a client-side teacher with the same
spec and seed produces the same actions to within serialization noise.
"""

from __future__ import annotations

import hashlib
import math
import struct
from dataclasses import dataclass, field

# geometry constants of the 2-D task family
MAX_STEP = 0.05
CONTACT_RADIUS = 0.08
GRASP_RADIUS = 0.11
SUCCESS_RADIUS = 0.05
STANDOFF = CONTACT_RADIUS + 0.02
ORBIT_RADIUS = CONTACT_RADIUS + 0.06
APPROACH_RADIUS = GRASP_RADIUS - 0.02
COS_ALIGNED = math.cos(math.radians(25.0))
GOAL_BAND_LO = -0.42
GOAL_BAND_HI = 0.42

TASK_FAMILY = {
    "Reach2D": "reach",
    "Push2D": "push",
    "Pull2D": "pull",
    "PushDistract2D": "push",
    "PullDistract2D": "pull",
}


def hash_uniforms(key: bytes, count: int) -> list[float]:
    """`count` uniforms in (0, 1) from a SHA-256 counter stream over `key`."""
    out: list[float] = []
    counter = 0
    while len(out) < count:
        digest = hashlib.sha256(key + counter.to_bytes(4, "little")).digest()
        for off in range(0, 32, 8):
            if len(out) >= count:
                break
            word = int.from_bytes(digest[off:off + 8], "little")
            out.append((word + 0.5) / 2.0 ** 64)
        counter += 1
    return out


def hash_normals(key: bytes, count: int) -> list[float]:
    """Standard normals via Box-Muller over hash_uniforms."""
    pairs = (count + 1) // 2
    u = hash_uniforms(key, 2 * pairs)
    cos_part, sin_part = [], []
    for i in range(pairs):
        radius = math.sqrt(-2.0 * math.log(u[i]))
        angle = 2.0 * math.pi * u[pairs + i]
        cos_part.append(radius * math.cos(angle))
        sin_part.append(radius * math.sin(angle))
    return (cos_part + sin_part)[:count]


def _clip(x: float, lo: float, hi: float) -> float:
    return lo if x < lo else hi if x > hi else x


@dataclass
class ScriptedTeacher:
    task: str
    competence: float = 1.0
    action_noise_std: float = 0.0
    systematic_bias: list[float] | None = None
    observes_transformed: bool = False
    seed: int = 0
    act_dim: int = 3
    _seed_bytes: bytes = field(init=False, repr=False)

    def __post_init__(self):
        if self.task not in TASK_FAMILY:
            raise ValueError(f"unknown task {self.task!r}")
        if self.act_dim not in (3, 7):
            raise ValueError("act_dim must be 3 or 7")
        if not 0.0 <= self.competence <= 1.0:
            raise ValueError("competence must be in [0, 1]")
        if self.action_noise_std < 0.0:
            raise ValueError("action_noise_std must be >= 0")
        if self.systematic_bias is not None \
                and len(self.systematic_bias) != self.act_dim:
            raise ValueError("systematic_bias length must equal act_dim")
        self._seed_bytes = int(self.seed).to_bytes(8, "little", signed=True)

    @property
    def family(self) -> str:
        return TASK_FAMILY[self.task]

    @property
    def prefix(self) -> int:
        return 6 if self.family == "reach" else 8

    @property
    def interact_idx(self) -> int:
        return 2 if self.act_dim == 3 else 6

    # goal corruption ---------------------------------------------------
    def _resolve_goal(self, gx: float, gy: float) -> tuple[float, float]:
        """Mirror the waypoint for goals in the low-competence band."""
        if self.competence >= 1.0:
            return gx, gy
        frac = (gy - GOAL_BAND_LO) / (GOAL_BAND_HI - GOAL_BAND_LO)
        frac = min(1.0, max(0.0, frac))
        if frac >= 1.0 - self.competence:
            return gx, gy
        return -gx, -gy

    # waypoint plans ----------------------------------------------------
    def _plan(self, obs: list[float]) -> tuple[float, float, float]:
        """Desired (dx, dy) displacement in meters plus the interact flag."""
        ax, ay = obs[0], obs[1]
        if self.family == "reach":
            gx, gy = self._resolve_goal(obs[4], obs[5])
            return gx - ax, gy - ay, -1.0
        ox, oy = obs[4], obs[5]
        gx, gy = self._resolve_goal(obs[6], obs[7])
        if self.family == "pull":
            return self._pull_plan(ax, ay, ox, oy, gx, gy)
        return self._push_plan(ax, ay, ox, oy, gx, gy)

    @staticmethod
    def _pull_plan(ax, ay, ox, oy, gx, gy):
        tx, ty = gx - ox, gy - oy
        if math.hypot(tx, ty) < SUCCESS_RADIUS * 0.9:
            return 0.0, 0.0, -1.0
        vx, vy = ax - ox, ay - oy
        r = math.hypot(vx, vy)
        if r <= GRASP_RADIUS - 0.005:
            return tx, ty, 1.0
        if r > 1e-12:
            dx, dy = vx / r, vy / r
        else:
            dx, dy = 1.0, 0.0
        return (ox + dx * APPROACH_RADIUS - ax,
                oy + dy * APPROACH_RADIUS - ay, -1.0)

    @staticmethod
    def _push_plan(ax, ay, ox, oy, gx, gy):
        tx, ty = gx - ox, gy - oy
        dist_goal = math.hypot(tx, ty)
        if dist_goal < SUCCESS_RADIUS * 0.9:
            return 0.0, 0.0, -1.0
        ux, uy = tx / dist_goal, ty / dist_goal
        vx, vy = ax - ox, ay - oy
        r = math.hypot(vx, vy)
        if r < 1e-12:
            vx, vy = -uy * 1e-6, ux * 1e-6
            r = 1e-6
        if (-(vx * ux + vy * uy) / r) >= COS_ALIGNED and r <= STANDOFF + 0.08:
            depth = CONTACT_RADIUS - 0.03
            return ox - ux * depth - ax, oy - uy * depth - ay, -1.0
        bx, by = ox - ux * STANDOFF, oy - uy * STANDOFF
        if r > ORBIT_RADIUS + 0.06:
            if _segment_point_dist(ax, ay, bx, by, ox, oy) >= CONTACT_RADIUS + 0.01:
                return bx - ax, by - ay, -1.0
            return (ox + (vx / r) * ORBIT_RADIUS - ax,
                    oy + (vy / r) * ORBIT_RADIUS - ay, -1.0)
        cross = vx * (-uy) - vy * (-ux)
        step_angle = 0.4 if cross > 0 else -0.4
        c, s = math.cos(step_angle), math.sin(step_angle)
        rx, ry = (c * vx - s * vy) / r, (s * vx + c * vy) / r
        return (ox + rx * ORBIT_RADIUS - ax, oy + ry * ORBIT_RADIUS - ay, -1.0)

    # public query ------------------------------------------------------
    def act(self, observations: list[list[float]],
            sample_count: int = 1) -> list[list[list[float]]]:
        if not observations:
            raise ValueError("observations must be a non-empty batch")
        if sample_count < 1:
            raise ValueError("sample_count must be >= 1")
        result = []
        for row in observations:
            row = [float(x) for x in row]
            if len(row) < self.prefix:
                raise ValueError(
                    f"{self.task} teacher needs >= {self.prefix} observation "
                    f"dims, got {len(row)}")
            dx, dy, interact = self._plan(row)
            nominal = [0.0] * self.act_dim
            nominal[0] = _clip(dx / MAX_STEP, -1.0, 1.0)
            nominal[1] = _clip(dy / MAX_STEP, -1.0, 1.0)
            nominal[self.interact_idx] = interact
            row_key = (self._seed_bytes + b"|noise|"
                       + struct.pack(f"<{len(row)}d", *row))
            samples = []
            for k in range(sample_count):
                action = list(nominal)
                if self.action_noise_std > 0.0:
                    z = hash_normals(row_key + k.to_bytes(4, "little"),
                                     self.act_dim)
                    action = [a + self.action_noise_std * zi
                              for a, zi in zip(action, z)]
                if self.systematic_bias is not None:
                    action = [a + b for a, b in zip(action, self.systematic_bias)]
                samples.append(action)
            result.append(samples)
        return result


def _segment_point_dist(ax, ay, bx, by, px, py) -> float:
    abx, aby = bx - ax, by - ay
    denom = abx * abx + aby * aby
    if denom < 1e-18:
        return math.hypot(px - ax, py - ay)
    t = ((px - ax) * abx + (py - ay) * aby) / denom
    t = _clip(t, 0.0, 1.0)
    return math.hypot(px - (ax + t * abx), py - (ay + t * aby))

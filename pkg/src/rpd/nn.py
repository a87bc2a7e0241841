"""Dense policy/value network, parameter store, Adam, and checkpoint I/O.

The network is a shared tanh trunk with separate action-mean and value
heads plus a state-independent log-std vector. Two forward paths exist:
a plain numpy one for rollouts/evaluation and a graph one for training;
they apply the same operations in the same order, so their outputs are
bit-identical.
"""

from __future__ import annotations

import struct

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ConfigError, NumericalFailureError

LOG_STD_MIN = -20.0
LOG_STD_MAX = 2.0

CHECKPOINT_MAGIC = b"RPDNN1"


def orthogonal(rng: np.random.Generator, rows: int, cols: int, gain: float) -> np.ndarray:
    """Orthogonal weight matrix via QR of a seeded gaussian draw."""
    a = rng.standard_normal((rows, cols))
    q, r = np.linalg.qr(a if rows >= cols else a.T)
    q = q * np.sign(np.diag(r))
    if rows < cols:
        q = q.T
    return gain * q[:rows, :cols]


class ParamStore:
    """Ordered, named parameter tensors with persistent gradient slots."""

    def __init__(self):
        self._params: list[Tensor] = []
        self._by_name: dict[str, Tensor] = {}
        self._frozen = False

    def add(self, name: str, value: np.ndarray) -> Tensor:
        if self._frozen:
            raise ConfigError("parameter count is fixed after construction")
        if name in self._by_name:
            raise ConfigError(f"duplicate parameter name {name!r}")
        p = Tensor(value, requires_grad=True, name=name)
        self._params.append(p)
        self._by_name[name] = p
        return p

    def freeze(self) -> None:
        self._frozen = True

    def __iter__(self):
        return iter(self._params)

    def __len__(self):
        return len(self._params)

    def __getitem__(self, name: str) -> Tensor:
        return self._by_name[name]

    def names(self) -> list[str]:
        return [p.name for p in self._params]

    def zero_grad(self) -> None:
        for p in self._params:
            p.zero_grad()

    def flat_values(self) -> np.ndarray:
        return np.concatenate([p.value.ravel() for p in self._params])

    def load_flat(self, flat: np.ndarray) -> None:
        offset = 0
        for p in self._params:
            n = p.value.size
            p.value[...] = flat[offset:offset + n].reshape(p.value.shape)
            offset += n
        if offset != flat.size:
            raise ConfigError("checkpoint parameter count does not match network")


class PolicyValueNet:
    """Actor MLP (mean head + log-std vector) and critic MLP (value head).

    `shared_trunk` controls whether the critic reuses the actor's trunk or
    keeps its own; the checkpoint loader infers the arrangement from the
    parameter count.
    """

    def __init__(self, obs_dim: int, act_dim: int, hidden: tuple[int, ...] = (256, 256),
                 seed: int = 0, log_std_init: float = 0.0, shared_trunk: bool = False):
        if obs_dim < 1 or act_dim < 1 or any(h < 1 for h in hidden):
            raise ConfigError("network dimensions must be positive")
        self.obs_dim = obs_dim
        self.act_dim = act_dim
        self.hidden = tuple(int(h) for h in hidden)
        self.shared_trunk = shared_trunk
        self.params = ParamStore()

        rng = np.random.default_rng(seed)
        sizes = [obs_dim, *self.hidden]
        for i in range(len(self.hidden)):
            self.params.add(f"trunk_w{i}", orthogonal(rng, sizes[i], sizes[i + 1], np.sqrt(2.0)))
            self.params.add(f"trunk_b{i}", np.zeros(sizes[i + 1]))
        last = sizes[-1]
        # small mean-head gain keeps the initial policy near zero actions
        self.params.add("mean_w", orthogonal(rng, last, act_dim, 0.01))
        self.params.add("mean_b", np.zeros(act_dim))
        if not shared_trunk:
            for i in range(len(self.hidden)):
                self.params.add(f"critic_w{i}",
                                orthogonal(rng, sizes[i], sizes[i + 1], np.sqrt(2.0)))
                self.params.add(f"critic_b{i}", np.zeros(sizes[i + 1]))
        self.params.add("value_w", orthogonal(rng, last, 1, 1.0))
        self.params.add("value_b", np.zeros(1))
        self.params.add("log_std", np.full(act_dim, float(log_std_init)))
        self.params.freeze()

    # plain forward ---------------------------------------------------
    def forward(self, obs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Mean actions [B, act_dim] and values [B] for an observation batch."""
        obs = np.asarray(obs, dtype=np.float64)
        if obs.ndim != 2 or obs.shape[1] != self.obs_dim:
            raise ConfigError(f"expected observations [B, {self.obs_dim}], got {obs.shape}")
        h = obs
        for i in range(len(self.hidden)):
            h = np.tanh(h @ self.params[f"trunk_w{i}"].value + self.params[f"trunk_b{i}"].value)
        mean = h @ self.params["mean_w"].value + self.params["mean_b"].value
        g = obs
        if not self.shared_trunk:
            for i in range(len(self.hidden)):
                g = np.tanh(g @ self.params[f"critic_w{i}"].value
                            + self.params[f"critic_b{i}"].value)
        else:
            g = h
        value = (g @ self.params["value_w"].value + self.params["value_b"].value)[:, 0]
        if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(value))):
            raise NumericalFailureError("network_forward")
        return mean, value

    # graph forward (training path) ------------------------------------
    def forward_graph(self, obs: np.ndarray) -> tuple[Tensor, Tensor, Tensor]:
        """Same computation as forward(), returning graph nodes.

        Returns (mean [B, act_dim], value [B], log_std [act_dim]).
        """
        obs = np.asarray(obs, dtype=np.float64)
        h: Tensor = Tensor(obs)
        for i in range(len(self.hidden)):
            h = ad.tanh(ad.add(ad.matmul(h, self.params[f"trunk_w{i}"]),
                               self.params[f"trunk_b{i}"]))
        mean = ad.add(ad.matmul(h, self.params["mean_w"]), self.params["mean_b"])
        g: Tensor = h
        if not self.shared_trunk:
            g = Tensor(obs)
            for i in range(len(self.hidden)):
                g = ad.tanh(ad.add(ad.matmul(g, self.params[f"critic_w{i}"]),
                                   self.params[f"critic_b{i}"]))
        value_col = ad.add(ad.matmul(g, self.params["value_w"]), self.params["value_b"])
        value = ad.sum_along(value_col, axis=1)
        log_std = ad.clip(self.params["log_std"], LOG_STD_MIN, LOG_STD_MAX)
        return mean, value, log_std

    def log_std(self) -> np.ndarray:
        return np.clip(self.params["log_std"].value, LOG_STD_MIN, LOG_STD_MAX)

    # checkpoint I/O ----------------------------------------------------
    def save(self, path: str) -> None:
        """Flat binary: magic, u32 dims and layer sizes, then f64 params.

        Parameters are written in declaration order (trunk weights/biases,
        mean head, value head, log-std), little-endian.
        """
        header = CHECKPOINT_MAGIC
        header += struct.pack("<III", self.obs_dim, self.act_dim, len(self.hidden))
        header += struct.pack(f"<{len(self.hidden)}I", *self.hidden)
        flat = self.flat_parameters()
        with open(path, "wb") as f:
            f.write(header)
            f.write(flat.astype("<f8").tobytes())

    def flat_parameters(self) -> np.ndarray:
        return self.params.flat_values()

    @classmethod
    def load(cls, path: str) -> "PolicyValueNet":
        with open(path, "rb") as f:
            blob = f.read()
        if blob[:6] != CHECKPOINT_MAGIC:
            raise ConfigError(f"{path}: not a policy checkpoint (bad magic)")
        obs_dim, act_dim, n_hidden = struct.unpack_from("<III", blob, 6)
        hidden = struct.unpack_from(f"<{n_hidden}I", blob, 18)
        flat = np.frombuffer(blob[18 + 4 * n_hidden:], dtype="<f8")
        net = cls(obs_dim, act_dim, hidden=hidden, seed=0, shared_trunk=False)
        if net.flat_parameters().size != flat.size:
            net = cls(obs_dim, act_dim, hidden=hidden, seed=0, shared_trunk=True)
        net.params.load_flat(flat.astype(np.float64))
        return net


def clip_grad_norm(params: ParamStore, max_norm: float) -> float:
    """Scale all gradients so their global L2 norm is at most max_norm."""
    total = 0.0
    for p in params:
        total += float(np.sum(p.grad * p.grad))
    norm = np.sqrt(total)
    if norm > max_norm and norm > 0.0:
        scale = max_norm / norm
        for p in params:
            p.grad *= scale
    return float(norm)


class Adam:
    """Adam with bias correction; gradient slots are left untouched."""

    def __init__(self, params: ParamStore, lr: float = 3e-4, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p.value) for p in params]
        self.v = [np.zeros_like(p.value) for p in params]

    def step(self) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        for i, p in enumerate(self.params):
            g = p.grad
            self.m[i] = b1 * self.m[i] + (1.0 - b1) * g
            self.v[i] = b2 * self.v[i] + (1.0 - b2) * g * g
            m_hat = self.m[i] / (1.0 - b1 ** self.t)
            v_hat = self.v[i] / (1.0 - b2 ** self.t)
            p.value -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)

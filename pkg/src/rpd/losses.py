"""Training objectives: PPO clipped surrogate, value/entropy terms, and the
distillation variants (MSE, L1, BC likelihood, clipped teacher KL), composed
into one scalar the optimizer minimizes.

All functions build autodiff graph nodes from the current policy outputs;
rollout-time quantities (old log-probs, values, teacher actions) enter as
constants.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .distributions import LOG_2PI, kl_divergence
from .errors import ConfigError, NumericalFailureError

VARIANTS = ("none", "rpd_mse", "rpd_l1", "rpd_bc", "ppd_kl")

# safety clamp on log-ratios before exponentiation; never binds at the
# scales PPO operates at, only guards collapsed-variance policies
RATIO_LOG_BOUND = 40.0


@dataclass
class LossConfig:
    variant: str = "none"
    distill_weight: float = 1.0
    clip_eps: float = 0.2
    value_coef: float = 0.5
    entropy_coef: float = 0.0
    ppd_lambda: float = 1.0
    ppd_clip: float = 0.2
    value_clip: float = 0.2

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigError(f"loss variant must be one of {VARIANTS}")
        if self.distill_weight < 0.0:
            raise ConfigError("distill_weight must be >= 0")
        if not 0.0 < self.clip_eps < 1.0:
            raise ConfigError("clip_eps must be in (0, 1)")


def gaussian_log_prob_graph(mean: Tensor, log_std: Tensor,
                            actions: np.ndarray) -> Tensor:
    """Row-wise log densities [B] with gradients to mean and log_std."""
    rows = actions.shape[0]
    ls = ad.broadcast_rows(log_std, rows)
    diff = ad.add(Tensor(actions), ad.neg(mean))
    inv_two_var = ad.div(Tensor(0.5), ad.exp(ad.mul(ls, 2.0)))
    terms = ad.add(ad.add(ad.neg(ad.mul(ad.square(diff), inv_two_var)),
                          ad.neg(ls)),
                   Tensor(-0.5 * LOG_2PI))
    return ad.sum_along(terms, axis=1)


def entropy_graph(log_std: Tensor, act_dim: int) -> Tensor:
    """Entropy of the (state-independent) policy distribution."""
    return ad.add(ad.sum_along(log_std), Tensor(act_dim * (0.5 + 0.5 * LOG_2PI)))


def ppo_clip_loss(new_log_probs: Tensor, old_log_probs: np.ndarray,
                  advantages: np.ndarray, clip_eps: float) -> Tensor:
    """Mean of min(ratio * adv, clip(ratio) * adv); maximized."""
    delta = ad.add(new_log_probs, Tensor(-np.asarray(old_log_probs)))
    ratio = ad.exp(ad.clip(delta, -RATIO_LOG_BOUND, RATIO_LOG_BOUND))
    adv = Tensor(advantages)
    unclipped = ad.mul(ratio, adv)
    clipped = ad.mul(ad.clip(ratio, 1.0 - clip_eps, 1.0 + clip_eps), adv)
    return ad.mean_all(ad.minimum(unclipped, clipped))


def value_loss_clipped(values: Tensor, old_values: np.ndarray,
                       returns: np.ndarray, clip_eps: float) -> Tensor:
    """Clipped squared error of the value head against returns."""
    err = ad.add(values, Tensor(-np.asarray(returns)))
    moved = ad.add(values, Tensor(-np.asarray(old_values)))
    v_clipped = ad.add(ad.clip(moved, -clip_eps, clip_eps),
                       Tensor(np.asarray(old_values)))
    err_clipped = ad.add(v_clipped, Tensor(-np.asarray(returns)))
    return ad.mean_all(ad.maximum(ad.square(err), ad.square(err_clipped)))


def mse_distill_loss(policy_means: Tensor, teacher_means: np.ndarray) -> Tensor:
    """Mean over batch and action dims of squared mean error."""
    diff = ad.add(policy_means, Tensor(-np.asarray(teacher_means)))
    return ad.mean_all(ad.square(diff))


def l1_distill_loss(policy_means: Tensor, teacher_means: np.ndarray) -> Tensor:
    diff = ad.add(policy_means, Tensor(-np.asarray(teacher_means)))
    return ad.mean_all(ad.absolute(diff))


def bc_nll_loss(policy_means: Tensor, log_std: Tensor,
                teacher_actions: np.ndarray) -> Tensor:
    """Mean negative log likelihood of teacher actions under the policy.

    Gradients reach both the mean and the log-std, so minimizing this
    also shrinks the policy's standard deviation toward the residual.
    """
    lp = gaussian_log_prob_graph(policy_means, log_std, np.asarray(teacher_actions))
    return ad.neg(ad.mean_all(lp))


def ppd_kl_loss(policy_means: Tensor, log_std: Tensor,
                fit_means: np.ndarray, fit_stds: np.ndarray,
                old_means: np.ndarray, old_log_std: np.ndarray,
                ppd_clip: float) -> Tensor:
    """Mean over rows of KL(teacher_fit || policy), proximally capped.

    Each row's contribution is clipped to (1 + ppd_clip) times its value
    under the rollout-time policy snapshot, so the distillation pull
    cannot grow without bound within one update.
    """
    fit_means = np.asarray(fit_means)
    fit_stds = np.asarray(fit_stds)
    rows = fit_means.shape[0]
    fit_log_std = np.log(fit_stds)

    ls = ad.broadcast_rows(log_std, rows)
    var = ad.exp(ad.mul(ls, 2.0))
    mean_gap = ad.add(Tensor(fit_means), ad.neg(policy_means))
    numer = ad.add(ad.square(mean_gap), Tensor(fit_stds ** 2))
    terms = ad.add(ad.add(ad.add(ls, Tensor(-fit_log_std)),
                          ad.div(numer, ad.mul(var, 2.0))),
                   Tensor(-0.5))
    kl_rows = ad.sum_along(terms, axis=1)

    old_kl = kl_divergence(fit_means, fit_log_std,
                           np.asarray(old_means),
                           np.broadcast_to(old_log_std, fit_means.shape))
    cap = (1.0 + ppd_clip) * old_kl
    return ad.mean_all(ad.minimum(kl_rows, Tensor(cap)))


def rpd_objective(*, policy_means: Tensor, values: Tensor, log_std: Tensor,
                  actions: np.ndarray, old_log_probs: np.ndarray,
                  old_values: np.ndarray, advantages: np.ndarray,
                  returns: np.ndarray, config: LossConfig,
                  teacher_means: np.ndarray | None = None,
                  teacher_fit_means: np.ndarray | None = None,
                  teacher_fit_stds: np.ndarray | None = None,
                  old_policy_means: np.ndarray | None = None,
                  old_log_std: np.ndarray | None = None,
                  ) -> tuple[Tensor, dict[str, float]]:
    """Total scalar loss (minimized) and per-term diagnostics.

    total = -ppo + value_coef * value_loss - entropy_coef * entropy
            + distill_weight * distill_term
    """
    new_log_probs = gaussian_log_prob_graph(policy_means, log_std, actions)
    ppo = ppo_clip_loss(new_log_probs, old_log_probs, advantages, config.clip_eps)
    v_loss = value_loss_clipped(values, old_values, returns, config.value_clip)
    ent = entropy_graph(log_std, policy_means.shape[1])

    if config.variant == "none":
        distill = None
    elif config.variant == "rpd_mse":
        distill = mse_distill_loss(policy_means, _require(teacher_means, "teacher_means"))
    elif config.variant == "rpd_l1":
        distill = l1_distill_loss(policy_means, _require(teacher_means, "teacher_means"))
    elif config.variant == "rpd_bc":
        distill = bc_nll_loss(policy_means, log_std,
                              _require(teacher_means, "teacher_means"))
    else:  # ppd_kl
        distill = ppd_kl_loss(
            policy_means, log_std,
            _require(teacher_fit_means, "teacher_fit_means"),
            _require(teacher_fit_stds, "teacher_fit_stds"),
            _require(old_policy_means, "old_policy_means"),
            _require(old_log_std, "old_log_std"),
            config.ppd_clip)
        distill = ad.mul(distill, config.ppd_lambda)

    total = ad.add(ad.neg(ppo), ad.mul(v_loss, config.value_coef))
    if config.entropy_coef != 0.0:
        total = ad.add(total, ad.mul(ad.neg(ent), config.entropy_coef))
    if distill is not None and config.distill_weight != 0.0:
        total = ad.add(total, ad.mul(distill, config.distill_weight))

    log_ratio = new_log_probs.value - old_log_probs
    diagnostics = {
        "loss_ppo": ppo.item(),
        "loss_value": v_loss.item(),
        "loss_entropy": ent.item(),
        "loss_distill": distill.item() if distill is not None else 0.0,
        "loss_total": total.item(),
        "approx_kl": float(np.mean(np.expm1(log_ratio) - log_ratio)),
    }
    for term, val in diagnostics.items():
        if not np.isfinite(val):
            raise NumericalFailureError(term)
    return total, diagnostics


def _require(arr, name: str) -> np.ndarray:
    if arr is None:
        raise ConfigError(f"loss variant needs {name} but none were collected")
    return np.asarray(arr)

import numpy as np
import pytest

from rpd import autodiff as ad
from rpd.autodiff import Tensor
from rpd.distributions import GaussianDist, gaussian_kl, gaussian_log_prob
from rpd.errors import ConfigError, NumericalFailureError
from rpd.losses import (LossConfig, bc_nll_loss, gaussian_log_prob_graph,
                        l1_distill_loss, mse_distill_loss, ppd_kl_loss,
                        ppo_clip_loss, rpd_objective, value_loss_clipped)
from rpd.nn import Adam, PolicyValueNet


def t(x):
    return Tensor(np.asarray(x, dtype=np.float64))


# ppo ---------------------------------------------------------------------

def test_ppo_unit_ratio_reduces_to_mean_advantage():
    rng = np.random.default_rng(0)
    lp = rng.standard_normal(16)
    adv = rng.standard_normal(16)
    loss = ppo_clip_loss(t(lp), lp, adv, 0.2)
    assert loss.item() == pytest.approx(adv.mean(), rel=1e-12)


def test_ppo_clip_active():
    # ratio 2 with positive advantage 1 contributes min(2, 1.2) = 1.2
    new = np.array([np.log(2.0)])
    old = np.array([0.0])
    loss = ppo_clip_loss(t(new), old, np.array([1.0]), 0.2)
    assert loss.item() == pytest.approx(1.2, rel=1e-12)


def test_ppo_matches_elementwise_bruteforce():
    rng = np.random.default_rng(7)
    for _ in range(100):
        new = rng.standard_normal(64)
        old = rng.standard_normal(64)
        adv = rng.standard_normal(64)
        eps = rng.uniform(0.05, 0.4)
        got = ppo_clip_loss(t(new), old, adv, eps).item()
        want = 0.0
        for i in range(64):
            r = np.exp(new[i] - old[i])
            want += min(r * adv[i], min(max(r, 1 - eps), 1 + eps) * adv[i])
        want /= 64
        assert got == pytest.approx(want, abs=1e-10)


def test_ppo_ratio_invariance_to_common_shift():
    rng = np.random.default_rng(1)
    new = rng.standard_normal(32)
    old = rng.standard_normal(32)
    adv = rng.standard_normal(32)
    a = ppo_clip_loss(t(new), old, adv, 0.2).item()
    b = ppo_clip_loss(t(new + 3.7), old + 3.7, adv, 0.2).item()
    assert a == pytest.approx(b, rel=1e-12)


# distillation ---------------------------------------------------------------

def test_mse_identity_and_simple_value():
    assert mse_distill_loss(t([[2.0]]), np.array([[2.0]])).item() == 0.0
    assert mse_distill_loss(t([[0.0]]), np.array([[2.0]])).item() == pytest.approx(4.0)


def test_l1_identity_and_simple_value():
    assert l1_distill_loss(t([[2.0]]), np.array([[2.0]])).item() == 0.0
    assert l1_distill_loss(t([[0.0]]), np.array([[2.0]])).item() == pytest.approx(2.0)


def test_mse_l1_match_independent_computation():
    rng = np.random.default_rng(4)
    for _ in range(100):
        mu = rng.standard_normal((64, 7))
        target = rng.standard_normal((64, 7))
        assert mse_distill_loss(t(mu), target).item() == pytest.approx(
            ((mu - target) ** 2).sum() / mu.size, abs=1e-10)
        assert l1_distill_loss(t(mu), target).item() == pytest.approx(
            np.abs(mu - target).sum() / mu.size, abs=1e-10)


def test_mse_l1_nonnegative_zero_iff_equal():
    rng = np.random.default_rng(9)
    mu = rng.standard_normal((8, 3))
    assert mse_distill_loss(t(mu), mu.copy()).item() == 0.0
    assert l1_distill_loss(t(mu), mu.copy()).item() == 0.0
    off = mu + rng.uniform(0.01, 0.1, mu.shape)
    assert mse_distill_loss(t(mu), off).item() > 0.0
    assert l1_distill_loss(t(mu), off).item() > 0.0


def test_bc_nll_mode_density():
    loss = bc_nll_loss(t([[0.0]]), t([0.0]), np.array([[0.0]]))
    assert loss.item() == pytest.approx(0.5 * np.log(2 * np.pi))


def test_bc_nll_shrinking_sigma_decreases_loss_at_mode():
    prev = np.inf
    for log_std in [0.0, -0.5, -1.0, -2.0]:
        loss = bc_nll_loss(t([[0.0]]), t([log_std]), np.array([[0.0]])).item()
        assert loss < prev
        prev = loss


def test_bc_nll_matches_density_oracle():
    rng = np.random.default_rng(12)
    mu = rng.standard_normal((32, 5))
    log_std = rng.uniform(-1, 0.5, 5)
    acts = rng.standard_normal((32, 5))
    got = bc_nll_loss(t(mu), t(log_std), acts).item()
    want = -np.mean([gaussian_log_prob(GaussianDist(mu[i], log_std), acts[i])
                     for i in range(32)])
    assert got == pytest.approx(want, abs=1e-10)


def test_ppd_zero_when_student_equals_teacher():
    mu = np.array([[0.3, -0.7]])
    std = np.array([[0.5, 1.2]])
    loss = ppd_kl_loss(t(mu), t(np.log(std[0])), mu, std, mu, np.log(std[0]), 0.2)
    assert loss.item() == pytest.approx(0.0, abs=1e-14)


def test_ppd_unit_shift_closed_form():
    # teacher N(1,1), student N(0,1), snapshot at the student so the
    # proximal cap (1.2 * 0.5) stays inactive: KL = 0.5
    mu_s = np.array([[0.0]])
    loss = ppd_kl_loss(t(mu_s), t([0.0]), np.array([[1.0]]), np.array([[1.0]]),
                       mu_s, np.array([0.0]), 0.2)
    assert loss.item() == pytest.approx(0.5, rel=1e-12)


def test_ppd_matches_kl_oracle_without_clipping():
    rng = np.random.default_rng(3)
    mu_s = rng.standard_normal((16, 4))
    ls_s = rng.uniform(-0.5, 0.5, 4)
    fit_mu = rng.standard_normal((16, 4))
    fit_std = rng.uniform(0.5, 1.5, (16, 4))
    # snapshot equal to current policy: cap = (1+clip)*KL >= KL, inactive
    got = ppd_kl_loss(t(mu_s), t(ls_s), fit_mu, fit_std, mu_s, ls_s, 0.2).item()
    want = np.mean([
        gaussian_kl(GaussianDist(fit_mu[i], np.log(fit_std[i])),
                    GaussianDist(mu_s[i], ls_s))
        for i in range(16)])
    assert got == pytest.approx(want, abs=1e-10)


def test_ppd_cap_binds_against_snapshot():
    # student far from teacher, snapshot at teacher: cap = 1.2 * 0 = 0
    mu_t = np.array([[1.0]])
    loss = ppd_kl_loss(t([[5.0]]), t([0.0]), mu_t, np.array([[1.0]]),
                       mu_t, np.array([0.0]), 0.2)
    assert loss.item() == pytest.approx(0.0, abs=1e-14)


# value loss ------------------------------------------------------------

def test_value_loss_clipped_formula():
    rng = np.random.default_rng(5)
    v = rng.standard_normal(32)
    old = rng.standard_normal(32)
    ret = rng.standard_normal(32)
    got = value_loss_clipped(t(v), old, ret, 0.2).item()
    clipped = old + np.clip(v - old, -0.2, 0.2)
    want = np.maximum((v - ret) ** 2, (clipped - ret) ** 2).mean()
    assert got == pytest.approx(want, abs=1e-12)


# composed objective -----------------------------------------------------

def batch_inputs(seed=0, rows=16, act_dim=3):
    rng = np.random.default_rng(seed)
    return {
        "actions": rng.standard_normal((rows, act_dim)),
        "old_log_probs": rng.standard_normal(rows),
        "old_values": rng.standard_normal(rows),
        "advantages": rng.standard_normal(rows),
        "returns": rng.standard_normal(rows),
        "teacher_means": rng.standard_normal((rows, act_dim)),
        "teacher_fit_means": rng.standard_normal((rows, act_dim)),
        "teacher_fit_stds": rng.uniform(0.5, 1.5, (rows, act_dim)),
    }


def net_outputs(net, obs):
    return net.forward_graph(obs)


def test_variant_none_is_vanilla_ppo_loss():
    net = PolicyValueNet(4, 3, hidden=(4, 4), seed=0)
    rng = np.random.default_rng(2)
    obs = rng.standard_normal((16, 4))
    data = batch_inputs()
    mean, value, log_std = net_outputs(net, obs)
    total, diags = rpd_objective(
        policy_means=mean, values=value, log_std=log_std,
        actions=data["actions"], old_log_probs=data["old_log_probs"],
        old_values=data["old_values"], advantages=data["advantages"],
        returns=data["returns"], config=LossConfig(variant="none"))
    assert diags["loss_distill"] == 0.0
    want = -diags["loss_ppo"] + 0.5 * diags["loss_value"]
    assert total.item() == pytest.approx(want, rel=1e-12)


def test_zero_distill_weight_equals_variant_none():
    net = PolicyValueNet(4, 3, hidden=(4, 4), seed=0)
    rng = np.random.default_rng(2)
    obs = rng.standard_normal((16, 4))
    data = batch_inputs()

    def total_for(cfg):
        mean, value, log_std = net_outputs(net, obs)
        total, _ = rpd_objective(
            policy_means=mean, values=value, log_std=log_std,
            actions=data["actions"], old_log_probs=data["old_log_probs"],
            old_values=data["old_values"], advantages=data["advantages"],
            returns=data["returns"], teacher_means=data["teacher_means"],
            teacher_fit_means=data["teacher_fit_means"],
            teacher_fit_stds=data["teacher_fit_stds"],
            old_policy_means=data["teacher_means"], old_log_std=np.zeros(3),
            config=cfg)
        return total.item()

    base = total_for(LossConfig(variant="none"))
    for variant in ("rpd_mse", "rpd_l1", "rpd_bc", "ppd_kl"):
        assert total_for(LossConfig(variant=variant, distill_weight=0.0)) \
            == pytest.approx(base, rel=1e-12)


def test_composition_matches_hand_assembled_terms():
    net = PolicyValueNet(4, 3, hidden=(4, 4), seed=1)
    rng = np.random.default_rng(8)
    obs = rng.standard_normal((16, 4))
    data = batch_inputs(seed=3)
    cfg = LossConfig(variant="rpd_mse", distill_weight=0.7, entropy_coef=0.01)
    mean, value, log_std = net_outputs(net, obs)
    total, diags = rpd_objective(
        policy_means=mean, values=value, log_std=log_std,
        actions=data["actions"], old_log_probs=data["old_log_probs"],
        old_values=data["old_values"], advantages=data["advantages"],
        returns=data["returns"], teacher_means=data["teacher_means"],
        config=cfg)
    want = (-diags["loss_ppo"] + 0.5 * diags["loss_value"]
            - 0.01 * diags["loss_entropy"] + 0.7 * diags["loss_distill"])
    assert total.item() == pytest.approx(want, rel=1e-12)
    # each diagnostic equals its independently computed term
    mean2, value2, log_std2 = net_outputs(net, obs)
    lp = gaussian_log_prob_graph(mean2, log_std2, data["actions"])
    assert diags["loss_ppo"] == pytest.approx(
        ppo_clip_loss(lp, data["old_log_probs"], data["advantages"], 0.2).item(),
        rel=1e-12)
    assert diags["loss_distill"] == pytest.approx(
        mse_distill_loss(mean2, data["teacher_means"]).item(), rel=1e-12)


def test_non_finite_term_raises_with_term_name():
    net = PolicyValueNet(4, 3, hidden=(4, 4), seed=0)
    rng = np.random.default_rng(2)
    obs = rng.standard_normal((4, 4))
    data = batch_inputs(rows=4)
    data["advantages"] = np.array([np.nan, 1.0, 1.0, 1.0])
    mean, value, log_std = net_outputs(net, obs)
    with pytest.raises(NumericalFailureError) as err:
        rpd_objective(policy_means=mean, values=value, log_std=log_std,
                      actions=data["actions"], old_log_probs=data["old_log_probs"],
                      old_values=data["old_values"], advantages=data["advantages"],
                      returns=data["returns"], config=LossConfig(variant="none"))
    assert err.value.term == "loss_ppo"


def test_one_mse_step_descends():
    net = PolicyValueNet(4, 3, hidden=(4, 4), seed=5)
    rng = np.random.default_rng(0)
    obs = rng.standard_normal((16, 4))
    target = rng.standard_normal((16, 3))

    def loss_value():
        mean, _, _ = net.forward_graph(obs)
        return mse_distill_loss(mean, target)

    before = loss_value()
    net.params.zero_grad()
    ad.backward(before)
    Adam(net.params, lr=1e-2).step()
    assert loss_value().item() < before.item()


def test_variant_validation():
    with pytest.raises(ConfigError):
        LossConfig(variant="rpd_huber")
    with pytest.raises(ConfigError):
        LossConfig(clip_eps=1.5)


# gradient checks --------------------------------------------------------

def objective_against_params(net, obs, data, cfg):
    mean, value, log_std = net.forward_graph(obs)
    total, _ = rpd_objective(
        policy_means=mean, values=value, log_std=log_std,
        actions=data["actions"], old_log_probs=data["old_log_probs"],
        old_values=data["old_values"], advantages=data["advantages"],
        returns=data["returns"], teacher_means=data["teacher_means"],
        teacher_fit_means=data["teacher_fit_means"],
        teacher_fit_stds=data["teacher_fit_stds"],
        old_policy_means=data["teacher_means"] + 0.1,
        old_log_std=np.full(3, 0.05), config=cfg)
    return total


@pytest.mark.parametrize("variant", ["none", "rpd_mse", "rpd_l1", "rpd_bc", "ppd_kl"])
def test_gradients_match_finite_differences(variant):
    net = PolicyValueNet(4, 3, hidden=(4, 4), seed=7)
    rng = np.random.default_rng(42)
    obs = rng.standard_normal((16, 4))
    data = batch_inputs(seed=9)
    cfg = LossConfig(variant=variant, entropy_coef=0.01)

    total = objective_against_params(net, obs, data, cfg)
    net.params.zero_grad()
    ad.backward(total)
    analytic = [p.grad.copy() for p in net.params]

    h = 1e-4
    worst = 0.0
    for p, g in zip(net.params, analytic):
        flat = p.value.ravel()
        gflat = g.ravel()
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            up = objective_against_params(net, obs, data, cfg).item()
            flat[i] = orig - h
            down = objective_against_params(net, obs, data, cfg).item()
            flat[i] = orig
            fd = (up - down) / (2 * h)
            if abs(fd) < 1e-6 and abs(gflat[i]) < 1e-6:
                continue
            worst = max(worst, abs(gflat[i] - fd) / max(abs(fd), abs(gflat[i])))
    assert worst <= 1e-4

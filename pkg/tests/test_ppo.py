"""PPO building blocks: GAE, Adam, rollout buffer, policy network."""

import numpy as np
import pytest

from tacbench.rl.autodiff import Tensor
from tacbench.rl.nets import OBS_SIZE, PolicyNet, downsample
from tacbench.rl.ppo import (Adam, PPOConfig, RolloutBuffer, clip_gradients,
                             gae, ppo_update)


def test_ppo_config_validation():
    with pytest.raises(ValueError):
        PPOConfig(gamma=0.0)
    with pytest.raises(ValueError):
        PPOConfig(lam=1.5)
    with pytest.raises(ValueError):
        PPOConfig(rollout_steps=64, minibatch_size=128)


def mc_advantages(rewards, values, dones, last_value, gamma):
    """Monte-Carlo advantage oracle: full discounted return minus value."""
    n = len(rewards)
    adv = np.zeros(n)
    ret = last_value
    for t in range(n - 1, -1, -1):
        if dones[t]:
            ret = 0.0
        ret = rewards[t] + gamma * ret
        adv[t] = ret - values[t]
    return adv


def test_gae_lambda_one_equals_monte_carlo():
    rng = np.random.default_rng(0)
    for _ in range(10):
        n = 60
        rewards = rng.normal(size=n)
        values = rng.normal(size=n)
        dones = rng.random(n) < 0.1
        last_value = float(rng.normal())
        gamma = 0.97
        adv, ret = gae(rewards, values, dones, last_value, gamma, lam=1.0)
        want = mc_advantages(rewards, values, dones, last_value, gamma)
        assert np.max(np.abs(adv - want)) < 1e-9
        np.testing.assert_allclose(ret, adv + values)


def test_gae_three_step_hand_oracle():
    # gamma=0.5, lam=0.5, no terminals, bootstrap value 2
    rewards = [1.0, 0.0, 1.0]
    values = [0.5, 1.0, 0.25]
    gamma, lam = 0.5, 0.5
    adv, _ = gae(rewards, values, [False] * 3, 2.0, gamma, lam)
    d2 = 1.0 + gamma * 2.0 - 0.25            # 1.75
    d1 = 0.0 + gamma * 0.25 - 1.0            # -0.875
    d0 = 1.0 + gamma * 1.0 - 0.5             # 1.0
    a2 = d2
    a1 = d1 + gamma * lam * a2
    a0 = d0 + gamma * lam * a1
    np.testing.assert_allclose(adv, [a0, a1, a2], atol=1e-12)


def test_gae_terminal_cuts_bootstrap():
    adv, _ = gae([1.0], [0.0], [True], last_value=100.0, gamma=0.9, lam=0.9)
    assert adv[0] == pytest.approx(1.0)


def test_adam_single_step_closed_form():
    p = Tensor(np.array([1.0]), requires_grad=True)
    opt = Adam([p], lr=0.1)
    p.grad = np.array([2.0])
    opt.step()
    # bias-corrected first step moves by lr * g / (|g| + eps)
    assert p.data[0] == pytest.approx(1.0 - 0.1, abs=1e-6)


def test_adam_skips_missing_grads():
    p = Tensor(np.array([1.0]), requires_grad=True)
    opt = Adam([p], lr=0.1)
    opt.step()
    assert p.data[0] == 1.0
    p.grad = np.array([1.0])
    opt.zero_grad()
    assert p.grad is None


def test_clip_gradients():
    a = Tensor(np.zeros(3), requires_grad=True)
    a.grad = np.array([3.0, 4.0, 0.0])
    total = clip_gradients([a], max_norm=1.0)
    assert total == pytest.approx(5.0)
    assert np.linalg.norm(a.grad) == pytest.approx(1.0, abs=1e-9)


def test_downsample_block_mean():
    x = np.arange(16, dtype=float).reshape(4, 4)
    out = downsample(x, 2)
    np.testing.assert_allclose(out, [[2.5, 4.5], [10.5, 12.5]])
    with pytest.raises(ValueError):
        downsample(np.zeros((30, 32)), 32)


def test_rollout_buffer_batch():
    buf = RolloutBuffer()
    for i in range(4):
        buf.add(np.zeros((8, 8)), None, np.zeros(2), -1.0, float(i), 0.0,
                i == 3)
    batch = buf.batch(0.0, 0.99, 0.95)
    assert batch["images"].shape == (4, 8, 8)
    assert batch["proprios"] is None
    assert batch["advantages"].shape == (4,)


def test_policy_net_forward_shapes():
    net = PolicyNet(act_dim=2, proprio_dim=3, seed=0)
    imgs = np.random.default_rng(0).uniform(size=(5, OBS_SIZE, OBS_SIZE))
    prop = np.zeros((5, 3))
    mu, log_std, value = net.forward(imgs, prop)
    assert mu.shape == (5, 2)
    assert value.shape == (5, 1)
    assert np.all(np.abs(mu.data) <= 1.0)        # tanh-squashed means
    with pytest.raises(ValueError):
        net.forward(imgs, None)                   # proprio required


def test_policy_net_act_deterministic():
    net = PolicyNet(act_dim=2, seed=1)
    img = np.random.default_rng(1).uniform(size=(OBS_SIZE, OBS_SIZE))
    a1, _, v1 = net.act(img, deterministic=True)
    a2, _, v2 = net.act(img, deterministic=True)
    np.testing.assert_array_equal(a1, a2)
    assert v1 == v2


def test_policy_net_save_load_round_trip(tmp_path):
    net = PolicyNet(act_dim=2, proprio_dim=4, seed=2)
    p = tmp_path / "policy.tacb"
    net.save(p)
    back = PolicyNet.load(p)
    assert back.act_dim == 2 and back.proprio_dim == 4
    for name in PolicyNet._NAMES:
        np.testing.assert_array_equal(getattr(back, name).data,
                                      getattr(net, name).data)
    with pytest.raises(ValueError):
        bad = tmp_path / "bad.tacb"
        from tacbench.serial import write_blob
        write_blob(bad, {"type": "translator"}, {})
        PolicyNet.load(bad)


def test_ppo_update_improves_fixed_advantage_direction():
    # single state, positive advantage for positive actions: the mean moves up
    rng = np.random.default_rng(3)
    net = PolicyNet(act_dim=1, seed=3)
    opt = Adam(net.parameters(), lr=1e-2)
    img = np.zeros((OBS_SIZE, OBS_SIZE))
    mu0 = net.act(img, deterministic=True)[0][0]
    cfg = PPOConfig(rollout_steps=64, minibatch_size=32, epochs=2, lr=1e-2)
    for _ in range(5):
        actions, logps = [], []
        for _ in range(64):
            a, lp, _ = net.act(img, rng=rng)
            actions.append(a)
            logps.append(lp)
        actions = np.asarray(actions)
        batch = {
            "images": np.zeros((64, OBS_SIZE, OBS_SIZE)),
            "proprios": None,
            "actions": actions,
            "log_probs": np.asarray(logps),
            "advantages": np.sign(actions[:, 0]),
            "returns": np.zeros(64),
        }
        stats = ppo_update(net, opt, batch, cfg, rng)
    mu1 = net.act(img, deterministic=True)[0][0]
    assert mu1 > mu0
    for key in ("policy_loss", "value_loss", "entropy", "clip_frac",
                "approx_kl"):
        assert key in stats

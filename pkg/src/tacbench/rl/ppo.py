"""Proximal policy optimisation with generalised advantage estimation.

Single-environment rollouts, clipped surrogate objective, Adam, and an
optional learning-curve CSV.  Observations are tactile depth images
block-averaged to 32x32 (see nets.downsample) plus optional proprioception.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .autodiff import Tensor
from .nets import OBS_SIZE, PolicyNet, downsample


@dataclass(frozen=True)
class PPOConfig:
    total_steps: int = 100_000
    rollout_steps: int = 2048
    minibatch_size: int = 256
    epochs: int = 4
    gamma: float = 0.99
    lam: float = 0.95
    clip_eps: float = 0.2
    lr: float = 3e-4
    value_coef: float = 0.5
    entropy_coef: float = 0.0
    max_grad_norm: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError("gamma must be in (0, 1]")
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError("lambda must be in [0, 1]")
        if self.minibatch_size > self.rollout_steps:
            raise ValueError("minibatch larger than the rollout")


def gae(rewards, values, dones, last_value: float,
        gamma: float = 0.99, lam: float = 0.95):
    """Generalised advantage estimates and returns.

    `dones[t]` marks a terminal transition at step t; value bootstrapping is
    cut there.  Returns (advantages, returns) with returns = adv + values.
    """
    rewards = np.asarray(rewards, dtype=float)
    values = np.asarray(values, dtype=float)
    dones = np.asarray(dones, dtype=bool)
    n = len(rewards)
    adv = np.zeros(n)
    next_val = last_value
    running = 0.0
    for t in range(n - 1, -1, -1):
        cont = 0.0 if dones[t] else 1.0
        delta = rewards[t] + gamma * next_val * cont - values[t]
        running = delta + gamma * lam * cont * running
        adv[t] = running
        next_val = values[t]
    return adv, adv + values


class Adam:
    def __init__(self, params: list, lr: float = 3e-4,
                 betas=(0.9, 0.999), eps: float = 1e-8):
        self.params = params
        self.lr = lr
        self.b1, self.b2 = betas
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in params]
        self.v = [np.zeros_like(p.data) for p in params]

    def step(self):
        self.t += 1
        for i, p in enumerate(self.params):
            if p.grad is None:
                continue
            g = p.grad
            self.m[i] = self.b1 * self.m[i] + (1 - self.b1) * g
            self.v[i] = self.b2 * self.v[i] + (1 - self.b2) * g * g
            mhat = self.m[i] / (1 - self.b1 ** self.t)
            vhat = self.v[i] / (1 - self.b2 ** self.t)
            p.data -= self.lr * mhat / (np.sqrt(vhat) + self.eps)

    def zero_grad(self):
        for p in self.params:
            p.grad = None


def clip_gradients(params: list, max_norm: float) -> float:
    total = np.sqrt(sum(float(np.sum(p.grad ** 2))
                        for p in params if p.grad is not None))
    if total > max_norm:
        scale = max_norm / (total + 1e-12)
        for p in params:
            if p.grad is not None:
                p.grad *= scale
    return total


def obs_to_arrays(obs):
    """Observation -> (32x32 image, proprio or None)."""
    return downsample(obs.image.depth, OBS_SIZE), obs.proprio


class RolloutBuffer:
    def __init__(self):
        self.images, self.proprios, self.actions = [], [], []
        self.log_probs, self.rewards, self.values, self.dones = [], [], [], []

    def add(self, image, proprio, action, log_prob, reward, value, done):
        self.images.append(image)
        self.proprios.append(proprio)
        self.actions.append(action)
        self.log_probs.append(log_prob)
        self.rewards.append(reward)
        self.values.append(value)
        self.dones.append(done)

    def __len__(self):
        return len(self.rewards)

    def batch(self, last_value: float, gamma: float, lam: float) -> dict:
        adv, ret = gae(self.rewards, self.values, self.dones, last_value,
                       gamma, lam)
        return {
            "images": np.asarray(self.images),
            "proprios": (None if self.proprios[0] is None
                         else np.asarray(self.proprios)),
            "actions": np.asarray(self.actions),
            "log_probs": np.asarray(self.log_probs),
            "advantages": adv,
            "returns": ret,
        }


def ppo_update(net: PolicyNet, opt: Adam, batch: dict, cfg: PPOConfig,
               rng: np.random.Generator) -> dict:
    """Run cfg.epochs of clipped-surrogate minibatch updates on one batch."""
    n = len(batch["actions"])
    adv = batch["advantages"]
    adv = (adv - adv.mean()) / (adv.std() + 1e-8)

    stats = {"policy_loss": 0.0, "value_loss": 0.0, "entropy": 0.0,
             "clip_frac": 0.0, "approx_kl": 0.0}
    n_updates = 0
    for _ in range(cfg.epochs):
        order = rng.permutation(n)
        for start in range(0, n, cfg.minibatch_size):
            idx = order[start:start + cfg.minibatch_size]
            imgs = batch["images"][idx]
            prop = None if batch["proprios"] is None else batch["proprios"][idx]
            logp, entropy, value = net.log_prob_entropy(
                imgs, prop, batch["actions"][idx])

            ratio = (logp - Tensor(batch["log_probs"][idx])).exp()
            a = Tensor(adv[idx])
            clipped = ratio.maximum(1.0 - cfg.clip_eps).minimum(1.0 + cfg.clip_eps)
            policy_loss = -(ratio * a).minimum(clipped * a).mean()
            verr = value - Tensor(batch["returns"][idx])
            value_loss = (verr * verr).mean()
            loss = (policy_loss + cfg.value_coef * value_loss
                    - cfg.entropy_coef * entropy)

            opt.zero_grad()
            loss.backward()
            clip_gradients(net.parameters(), cfg.max_grad_norm)
            opt.step()

            r = ratio.data
            stats["policy_loss"] += float(policy_loss.data)
            stats["value_loss"] += float(value_loss.data)
            stats["entropy"] += float(entropy.data)
            stats["clip_frac"] += float(np.mean(
                np.abs(r - 1.0) > cfg.clip_eps))
            stats["approx_kl"] += float(np.mean(
                batch["log_probs"][idx] - logp.data))
            n_updates += 1
    return {k: v / max(n_updates, 1) for k, v in stats.items()}


def train(env, cfg: PPOConfig, net: PolicyNet = None,
          curve_path=None, checkpoint_path=None, log=None) -> tuple:
    """Train a policy on one environment for cfg.total_steps env steps.

    Returns (net, history); history rows are per-rollout dicts.  Writes a
    learning-curve CSV and a checkpoint blob when paths are given.
    """
    rng = np.random.default_rng(cfg.seed)
    obs, _ = env.reset(cfg.seed)
    img, prop = obs_to_arrays(obs)
    if net is None:
        net = PolicyNet(act_dim=2, proprio_dim=0 if prop is None else len(prop),
                        seed=cfg.seed)
    opt = Adam(net.parameters(), lr=cfg.lr)

    history = []
    steps_done = 0
    ep_returns, ep_return, episodes = [], 0.0, 0
    successes = 0
    while steps_done < cfg.total_steps:
        buf = RolloutBuffer()
        for _ in range(min(cfg.rollout_steps, cfg.total_steps - steps_done)):
            action, logp, value = net.act(img, prop, rng)
            obs2, reward, done, info = env.step(np.clip(action, -1.0, 1.0))
            buf.add(img, prop, action, logp, reward, value, done)
            ep_return += reward
            steps_done += 1
            if done:
                episodes += 1
                successes += bool(info["trace"].success)
                ep_returns.append(ep_return)
                ep_return = 0.0
                seed = int(rng.integers(2 ** 31 - 1))
                obs2, _ = env.reset(seed)
            img, prop = obs_to_arrays(obs2)

        last_value = 0.0
        if not buf.dones[-1]:
            _, _, last_value = net.act(img, prop, rng, deterministic=True)
        batch = buf.batch(last_value, cfg.gamma, cfg.lam)
        stats = ppo_update(net, opt, batch, cfg, rng)
        row = {"steps": steps_done,
               "mean_return": float(np.mean(ep_returns[-10:])) if ep_returns else 0.0,
               "episodes": episodes, "successes": successes, **stats}
        history.append(row)
        if log:
            log(row)

    if curve_path is not None:
        with open(curve_path, "w", newline="") as f:
            writer = csv.DictWriter(f, fieldnames=list(history[0].keys()))
            writer.writeheader()
            writer.writerows(history)
    if checkpoint_path is not None:
        net.save(checkpoint_path)
    return net, history

"""Small convolutional Gaussian policy/value network.

Input is a single-channel tactile depth image downsampled to 32x32 by
block averaging, optionally concatenated with a proprioception vector.
Two strided 3x3 convolutions feed a 128-unit trunk with a Gaussian action
head (state-independent log-std) and a scalar value head.
"""

from __future__ import annotations

import math

import numpy as np

from ..serial import read_blob, write_blob
from .autodiff import Tensor

OBS_SIZE = 32
LOG_STD_INIT = -0.5
LOG_STD_MIN, LOG_STD_MAX = -4.0, 1.0


def downsample(depth: np.ndarray, size: int = OBS_SIZE) -> np.ndarray:
    """Block-mean downsample to (size, size); dimensions must divide evenly."""
    h, w = depth.shape
    if h % size or w % size:
        raise ValueError(f"image {h}x{w} not divisible into {size}x{size} blocks")
    return depth.reshape(size, h // size, size, w // size).mean(axis=(1, 3))


def _orthogonal(shape, gain, rng) -> np.ndarray:
    a = rng.normal(size=(shape[0], int(np.prod(shape[1:]))))
    u, _, vt = np.linalg.svd(a, full_matrices=False)
    q = u if u.shape == a.shape else vt
    return (gain * q).reshape(shape)


class PolicyNet:
    """conv(1->8, s2) -> conv(8->8, s2) -> fc128 -> {Gaussian mean, value}."""

    def __init__(self, act_dim: int, proprio_dim: int = 0, seed: int = 0):
        self.act_dim = act_dim
        self.proprio_dim = proprio_dim
        rng = np.random.default_rng(seed)
        g = math.sqrt(2.0)

        def param(arr):
            return Tensor(arr, requires_grad=True)

        self.w1 = param(_orthogonal((8, 1, 3, 3), g, rng))
        self.b1 = param(np.zeros(8))
        self.w2 = param(_orthogonal((8, 8, 3, 3), g, rng))
        self.b2 = param(np.zeros(8))
        n_flat = 8 * 7 * 7 + proprio_dim
        self.w3 = param(_orthogonal((n_flat, 128), g, rng))
        self.b3 = param(np.zeros(128))
        self.w_mu = param(_orthogonal((128, act_dim), 0.01, rng))
        self.b_mu = param(np.zeros(act_dim))
        self.w_v = param(_orthogonal((128, 1), 1.0, rng))
        self.b_v = param(np.zeros(1))
        self.log_std = param(np.full(act_dim, LOG_STD_INIT))

    def parameters(self) -> list:
        return [self.w1, self.b1, self.w2, self.b2, self.w3, self.b3,
                self.w_mu, self.b_mu, self.w_v, self.b_v, self.log_std]

    def forward(self, images: np.ndarray, proprio: np.ndarray = None):
        """(mean, log_std, value) tensors for a batch of (N, 32, 32) images."""
        x = Tensor(np.asarray(images)[:, None, :, :])
        h = x.conv2d(self.w1, self.b1, stride=2).relu()
        h = h.conv2d(self.w2, self.b2, stride=2).relu()
        h = h.reshape(h.shape[0], 8 * 7 * 7)
        if self.proprio_dim:
            if proprio is None:
                raise ValueError("network expects a proprioception input")
            h = Tensor.concat([h, Tensor(np.asarray(proprio))], axis=1)
        h = (h @ self.w3 + self.b3).tanh()
        mu = (h @ self.w_mu + self.b_mu).tanh()
        log_std = self.log_std.maximum(LOG_STD_MIN).minimum(LOG_STD_MAX)
        value = h @ self.w_v + self.b_v
        return mu, log_std, value

    def act(self, image: np.ndarray, proprio=None,
            rng: np.random.Generator = None, deterministic: bool = False):
        """Sample one action; returns (action, log_prob, value)."""
        p = None if proprio is None else np.asarray(proprio)[None, :]
        mu, log_std, value = self.forward(image[None, :, :], p)
        mu, std = mu.data[0], np.exp(log_std.data)
        if deterministic:
            a = mu
        else:
            a = mu + std * rng.normal(size=self.act_dim)
        logp = float(-0.5 * np.sum(((a - mu) / std) ** 2
                                   + 2 * np.log(std) + math.log(2 * math.pi)))
        return a, logp, float(value.data[0, 0])

    def log_prob_entropy(self, images, proprio, actions):
        """Differentiable per-sample log-probs, entropy and values."""
        mu, log_std, value = self.forward(images, proprio)
        std = log_std.exp()
        z = (Tensor(np.asarray(actions)) - mu) * (1.0 / std)
        logp = (z * z * -0.5 - log_std
                - 0.5 * math.log(2 * math.pi)).sum(axis=1)
        entropy = (log_std + 0.5 * (1.0 + math.log(2 * math.pi))).sum() \
            * (1.0 / 1.0)
        return logp, entropy, value.reshape(value.shape[0])

    # -- persistence
    _NAMES = ("w1", "b1", "w2", "b2", "w3", "b3",
              "w_mu", "b_mu", "w_v", "b_v", "log_std")

    def save(self, path) -> None:
        header = {"type": "policy", "act_dim": self.act_dim,
                  "proprio_dim": self.proprio_dim}
        write_blob(path, header, {n: getattr(self, n).data for n in self._NAMES})

    @classmethod
    def load(cls, path) -> "PolicyNet":
        header, arrays = read_blob(path)
        if header.get("type") != "policy":
            raise ValueError(f"{path}: not a policy checkpoint")
        net = cls(header["act_dim"], header["proprio_dim"])
        for n in cls._NAMES:
            getattr(net, n).data[...] = arrays[n]
        return net

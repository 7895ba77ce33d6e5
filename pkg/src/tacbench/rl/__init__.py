"""From-scratch policy optimisation: numpy autodiff, small conv nets, PPO."""

from .autodiff import Tensor
from .nets import PolicyNet
from .ppo import PPOConfig, gae, ppo_update, train

__all__ = ["Tensor", "PolicyNet", "PPOConfig", "gae", "ppo_update", "train"]

"""Actor-critic PPO with generalized advantage estimation, from scratch.

The objective per minibatch is
    clipped policy surrogate + value_coef * value MSE - entropy_coef * entropy
minimized with Adam.  Gradients are exact (manual reverse mode through the
MLP backends); finite-difference checks live in the test suite.

Discounting note: gamma applies per agent decision.  In sparse-transition
environments one decision may span several simulator steps; no extra
per-skipped-step discount is applied.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import nets
from .env import SchedulingEnv
from .nets import PolicyParams, batch_backward, batch_forward, log_softmax, softmax

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8
ADV_NORM_EPS = 1e-8


@dataclass(frozen=True)
class PPOConfig:
    learning_rate: float = 1e-4
    n_steps: int = 50
    batch_size: int = 64
    entropy_coef: float = 1e-2
    gae_lambda: float = 0.95
    clip_epsilon: float = 0.2
    surrogate_epochs: int = 10
    gamma: float = 0.99
    value_coef: float = 0.5
    total_steps: int = 100_000
    max_grad_norm: Optional[float] = 0.5
    normalize_advantage: bool = True
    # Episodes end by time limit (clock = T), not by reaching an absorbing
    # state, so the trainer bootstraps the value of the terminal observation
    # into the final reward (the standard truncation correction).  Without it
    # the value target depends on the unobserved episode clock.
    bootstrap_timeouts: bool = True
    # Scale training rewards by a running estimate of the discounted-return
    # standard deviation.  Positive scaling leaves the policy ordering (and
    # the normalized-advantage policy gradient) unchanged; it exists so the
    # value head can reach its targets within the learning-rate budget.
    # Curves and episode returns are always logged in raw reward units.
    normalize_rewards: bool = True

    def __post_init__(self):
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError(f"gamma must be in (0, 1], got {self.gamma}")
        if not 0.0 <= self.gae_lambda <= 1.0:
            raise ValueError(f"gae_lambda must be in [0, 1], got {self.gae_lambda}")
        if self.clip_epsilon <= 0.0:
            raise ValueError(f"clip_epsilon must be > 0, got {self.clip_epsilon}")


@dataclass
class Rollout:
    """Per-step records; rewards[t] is the reward following actions[t]."""

    observations: np.ndarray  # (n, obs_dim)
    actions: np.ndarray       # (n,) int
    rewards: np.ndarray       # (n,)
    values: np.ndarray        # (n,)
    log_probs: np.ndarray     # (n,)
    dones: np.ndarray         # (n,) float 0/1, 1 if the step ended its episode

    def __len__(self) -> int:
        return len(self.actions)


def returns(rewards: Sequence[float], gamma: float) -> np.ndarray:
    """Discounted returns G_t = R_{t+1} + gamma * G_{t+1} over one episode."""
    out = np.zeros(len(rewards))
    acc = 0.0
    for t in reversed(range(len(rewards))):
        acc = rewards[t] + gamma * acc
        out[t] = acc
    return out


def gae(rollout: Rollout, gamma: float, lam: float, bootstrap_value: float = 0.0) -> np.ndarray:
    """Generalized advantage estimates, truncated at episode boundaries.

    bootstrap_value is v(S_n) for the observation following the last record;
    it is ignored when that record ended its episode.
    """
    n = len(rollout)
    adv = np.zeros(n)
    last = 0.0
    for t in reversed(range(n)):
        nonterminal = 1.0 - rollout.dones[t]
        next_value = bootstrap_value if t == n - 1 else rollout.values[t + 1]
        delta = rollout.rewards[t] + gamma * next_value * nonterminal - rollout.values[t]
        last = delta + gamma * lam * nonterminal * last
        adv[t] = last
    return adv


@dataclass
class MiniBatch:
    observations: np.ndarray
    actions: np.ndarray
    old_log_probs: np.ndarray
    advantages: np.ndarray
    value_targets: np.ndarray


def ppo_loss(params: PolicyParams, batch: MiniBatch, config: PPOConfig) -> float:
    """Scalar objective only (used by the finite-difference oracle)."""
    loss, _, _ = _loss_terms(params, batch, config, want_grad=False)
    return loss


def ppo_loss_grad(params: PolicyParams, batch: MiniBatch, config: PPOConfig):
    """(loss, grads, diagnostics) with grads in parameter-array order."""
    return _loss_terms(params, batch, config, want_grad=True)


def _loss_terms(params: PolicyParams, batch: MiniBatch, config: PPOConfig, want_grad: bool):
    X = np.ascontiguousarray(batch.observations, dtype=np.float64)
    n = X.shape[0]
    acts = batch.actions
    adv = batch.advantages
    logits, values, cache = batch_forward(params, X)
    logp_all = log_softmax(logits)
    p = np.exp(logp_all)
    logp_a = logp_all[np.arange(n), acts]

    ratio = np.exp(logp_a - batch.old_log_probs)
    unclipped = ratio * adv
    clipped = np.clip(ratio, 1.0 - config.clip_epsilon, 1.0 + config.clip_epsilon) * adv
    policy_loss = -float(np.minimum(unclipped, clipped).mean())

    err = values - batch.value_targets
    value_loss = float(np.mean(err * err))

    entropy = -np.sum(p * logp_all, axis=1)
    entropy_mean = float(entropy.mean())

    loss = policy_loss + config.value_coef * value_loss - config.entropy_coef * entropy_mean
    diag = {
        "loss": loss,
        "policy_loss": policy_loss,
        "value_loss": value_loss,
        "entropy": entropy_mean,
        "clip_fraction": float(np.mean(np.abs(ratio - 1.0) > config.clip_epsilon)),
        "approx_kl": float(np.mean(batch.old_log_probs - logp_a)),
    }
    if not want_grad:
        return loss, None, diag

    # Gradient flows through the unclipped ratio only where it attains the min.
    pass_through = (unclipped <= clipped).astype(np.float64)
    dlogp_a = -(adv * ratio * pass_through) / n
    dlogits = dlogp_a[:, None] * (np.eye(params.n_actions)[acts] - p)
    # entropy term enters the loss negatively: dH/dlogits = -p * (logp + H)
    dlogits += config.entropy_coef * p * (logp_all + entropy[:, None]) / n
    dvalues = config.value_coef * 2.0 * err / n

    grads = batch_backward(params, cache, dlogits, dvalues)
    return loss, grads, diag


@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    t: int = 0

    @classmethod
    def for_params(cls, params: PolicyParams) -> "AdamState":
        return cls(
            m=[np.zeros_like(a) for a in params.arrays],
            v=[np.zeros_like(a) for a in params.arrays],
        )


def adam_step(params: PolicyParams, grads: list[np.ndarray], state: AdamState, lr: float) -> None:
    state.t += 1
    bc1 = 1.0 - ADAM_BETA1 ** state.t
    bc2 = 1.0 - ADAM_BETA2 ** state.t
    for a, g, m, v in zip(params.arrays, grads, state.m, state.v):
        m *= ADAM_BETA1
        m += (1.0 - ADAM_BETA1) * g
        v *= ADAM_BETA2
        v += (1.0 - ADAM_BETA2) * g * g
        a -= lr * (m / bc1) / (np.sqrt(v / bc2) + ADAM_EPS)


def clip_grads_(grads: list[np.ndarray], max_norm: Optional[float]) -> float:
    total = float(np.sqrt(sum(float(np.sum(g * g)) for g in grads)))
    if max_norm is not None and total > max_norm and total > 0.0:
        scale = max_norm / total
        for g in grads:
            g *= scale
    return total


def ppo_update(
    params: PolicyParams,
    rollout: Rollout,
    config: PPOConfig,
    adam: AdamState,
    bootstrap_value: float,
    rng: np.random.Generator,
) -> dict:
    """surrogate_epochs passes over shuffled minibatches; updates params in place."""
    n = len(rollout)
    advantages = gae(rollout, config.gamma, config.gae_lambda, bootstrap_value)
    if not np.isfinite(advantages).all():
        raise RuntimeError(
            "non-finite advantages in update; reward stream or value head diverged "
            f"(rewards range [{rollout.rewards.min()}, {rollout.rewards.max()}])"
        )
    value_targets = advantages + rollout.values

    mb_size = min(config.batch_size, n)
    diag: dict = {}
    for _ in range(config.surrogate_epochs):
        order = rng.permutation(n)
        for start in range(0, n, mb_size):
            idx = order[start:start + mb_size]
            adv = advantages[idx]
            if config.normalize_advantage:
                adv = (adv - adv.mean()) / (adv.std() + ADV_NORM_EPS)
            batch = MiniBatch(
                observations=rollout.observations[idx],
                actions=rollout.actions[idx],
                old_log_probs=rollout.log_probs[idx],
                advantages=adv,
                value_targets=value_targets[idx],
            )
            loss, grads, diag = ppo_loss_grad(params, batch, config)
            if not np.isfinite(loss):
                raise RuntimeError(f"non-finite loss during update: {diag}")
            diag["grad_norm"] = clip_grads_(grads, config.max_grad_norm)
            adam_step(params, grads, adam, config.learning_rate)
    return diag


class RewardScaler:
    """Running scale of the discounted return, as in SB3's VecNormalize.

    Rewards are divided by the standard deviation of a discounted return
    accumulator (no mean shift, so zero rewards stay zero).  Variance is
    tracked with Welford updates; the scale is 1 until enough data arrives.
    """

    def __init__(self, gamma: float, eps: float = 1e-8):
        self.gamma = gamma
        self.eps = eps
        self.ret = 0.0
        self.count = 0
        self.mean = 0.0
        self.m2 = 0.0

    def scale(self, reward: float, done: bool) -> float:
        self.ret = self.ret * self.gamma + reward
        self.count += 1
        delta = self.ret - self.mean
        self.mean += delta / self.count
        self.m2 += delta * (self.ret - self.mean)
        if done:
            self.ret = 0.0
        if self.count < 2:
            return reward
        return reward / (np.sqrt(self.m2 / self.count) + self.eps)


@dataclass
class TrainingLog:
    """Learning curve plus the raw per-episode data behind it."""

    curve: list[tuple[int, float]] = field(default_factory=list)  # (agent step, mean return)
    episode_returns: list[float] = field(default_factory=list)
    episode_end_steps: list[int] = field(default_factory=list)


CURVE_WINDOW = 100  # moving-average window, in episodes


def train(
    env_factory: Callable[[], SchedulingEnv],
    config: PPOConfig,
    seed: int = 0,
) -> tuple[PolicyParams, TrainingLog]:
    """Collect n_steps transitions per update until total_steps agent decisions.

    total_steps counts decisions, not simulator ticks: a sparse-mode step that
    spans many ticks still counts once.  Fully deterministic for a fixed seed
    on a fixed platform and backend.
    """
    ss = np.random.SeedSequence(seed)
    init_ss, action_ss, shuffle_ss, episode_ss = ss.spawn(4)
    action_rng = np.random.default_rng(action_ss)
    shuffle_rng = np.random.default_rng(shuffle_ss)
    episode_rng = np.random.default_rng(episode_ss)

    env = env_factory()
    obs_dim = env.config.observation_length
    params = init_policy_for_env(env, seed=int(init_ss.generate_state(1)[0]))
    adam = AdamState.for_params(params)
    log = TrainingLog()
    scaler = RewardScaler(config.gamma) if config.normalize_rewards else None

    obs = env.reset(seed=int(episode_rng.integers(2 ** 63)))
    steps_done = 0
    while steps_done < config.total_steps:
        horizon = min(config.n_steps, config.total_steps - steps_done)
        obs_buf = np.empty((horizon, obs_dim))
        act_buf = np.empty(horizon, dtype=np.int64)
        rew_buf = np.empty(horizon)
        val_buf = np.empty(horizon)
        logp_buf = np.empty(horizon)
        done_buf = np.empty(horizon)

        for i in range(horizon):
            flat = obs.ravel()
            probs, value = nets.forward(params, flat)
            action = int(action_rng.choice(params.n_actions, p=probs))
            obs_buf[i] = flat
            act_buf[i] = action
            val_buf[i] = value
            logp_buf[i] = float(np.log(probs[action]))
            result = env.step(action)
            reward = result.reward
            if scaler is not None:
                reward = scaler.scale(reward, result.done)
            done_buf[i] = 1.0 if result.done else 0.0
            if result.done:
                if config.bootstrap_timeouts:
                    _, terminal_value = nets.forward(params, result.observation.ravel())
                    reward += config.gamma * terminal_value
                log.episode_returns.append(env.episode_return)
                log.episode_end_steps.append(steps_done + i + 1)
                obs = env.reset(seed=int(episode_rng.integers(2 ** 63)))
            else:
                obs = result.observation
            rew_buf[i] = reward
        steps_done += horizon

        if done_buf[-1]:
            bootstrap = 0.0
        else:
            _, bootstrap = nets.forward(params, obs.ravel())
        rollout = Rollout(obs_buf, act_buf, rew_buf, val_buf, logp_buf, done_buf)
        ppo_update(params, rollout, config, adam, bootstrap, shuffle_rng)
        if log.episode_returns:
            recent = log.episode_returns[-CURVE_WINDOW:]
            log.curve.append((steps_done, float(np.mean(recent))))
    return params, log


def init_policy_for_env(env: SchedulingEnv, seed: int = 0, hidden: Sequence[int] = (64, 64)) -> PolicyParams:
    cfg = env.config
    return nets.init_policy(
        input_dim=cfg.observation_length,
        n_actions=cfg.n_actions,
        W=cfg.W,
        H=cfg.H,
        hidden=hidden,
        seed=seed,
    )

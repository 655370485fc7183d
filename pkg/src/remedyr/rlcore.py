"""Desk-scale RLVR machinery: GAE, clipped PPO with a KL leash, and a
synthetic preference environment.

The policy is a tabular softmax over a small score alphabet, emitting two
score tokens per episode (after optional zero-reward filler steps). Every
rollout exercises the full path the reward is defined on: the sampled scores
are rendered as a score block, re-parsed, and scored against hidden human
preferences. Gradients are closed-form for the categorical softmax, so no
autodiff framework is involved and runs are bit-reproducible per seed.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .corpus import Label, PreferencePair
from .reward import RewardConfig, shaped_reward
from .verdict import parse_pairwise, render_scores

DEFAULT_ALPHABET = tuple(float(v) for v in range(0, 101, 10))

FILLER_STEP = -1  # step kind for zero-reward placeholder tokens


class TrainingDiverged(RuntimeError):
    """Raised when policy logits blow past the configured bound."""


@dataclass(frozen=True)
class RlConfig:
    gamma: float = 1.0
    gae_lambda: float = 1.0
    clip_eps: float = 0.2
    kl_coeff: float = 0.01
    learning_rate: float = 5.0
    updates: int = 300
    batch_size: int = 256
    rng_seed: int = 0
    filler_len: int = 2
    advantage_norm: bool = True
    value_lr: float = 0.2
    logit_bound: float = 200.0

    def __post_init__(self):
        if not (0.0 < self.gamma <= 1.0):
            raise ValueError("gamma must be in (0,1]")
        if not (0.0 <= self.gae_lambda <= 1.0):
            raise ValueError("gae_lambda must be in [0,1]")
        if self.clip_eps <= 0:
            raise ValueError("clip_eps must be positive")
        if self.kl_coeff < 0:
            raise ValueError("kl_coeff must be non-negative")
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be non-negative")
        if self.updates < 1 or self.batch_size < 1:
            raise ValueError("updates and batch_size must be positive")
        if self.filler_len < 0:
            raise ValueError("filler_len must be non-negative")


@dataclass(frozen=True)
class PolicySnapshot:
    logits: np.ndarray  # (num_contexts, 2, len(alphabet))
    alphabet: tuple[float, ...] = DEFAULT_ALPHABET
    num_contexts: int = 8

    def __post_init__(self):
        if self.logits.shape != (self.num_contexts, 2, len(self.alphabet)):
            raise ValueError(
                f"logits shape {self.logits.shape} does not match "
                f"({self.num_contexts}, 2, {len(self.alphabet)})"
            )
        if not np.all(np.isfinite(self.logits)):
            raise ValueError("non-finite logits")
        if list(self.alphabet) != sorted(set(self.alphabet)):
            raise ValueError("alphabet must be strictly increasing")
        if self.alphabet[0] < 0 or self.alphabet[-1] > 100:
            raise ValueError("alphabet values must lie in [0,100]")

    @staticmethod
    def uniform(num_contexts: int = 8, alphabet: tuple[float, ...] = DEFAULT_ALPHABET) -> "PolicySnapshot":
        return PolicySnapshot(
            logits=np.zeros((num_contexts, 2, len(alphabet))),
            alphabet=alphabet,
            num_contexts=num_contexts,
        )

    def log_probs(self) -> np.ndarray:
        z = self.logits - self.logits.max(axis=-1, keepdims=True)
        return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


@dataclass(frozen=True)
class Trajectory:
    context: int
    tokens: tuple[int, ...]          # alphabet indices; filler steps carry 0
    step_kinds: tuple[int, ...]      # FILLER_STEP, or emission step 0/1
    logprobs_old: tuple[float, ...]
    terminal_reward: float
    rank_reward: int
    values: tuple[float, ...]        # V at each of the T states

    def __post_init__(self):
        T = len(self.tokens)
        if T < 2:
            raise ValueError("trajectory must have at least the two score steps")
        if not (len(self.step_kinds) == len(self.logprobs_old) == len(self.values) == T):
            raise ValueError("per-step field lengths do not match")


@dataclass(frozen=True)
class AdvantageEstimate:
    deltas: tuple[float, ...]
    advantages: tuple[float, ...]
    returns: tuple[float, ...]


@dataclass(frozen=True)
class SyntheticPairEnv:
    noise_sigma: float = 0.0
    num_context_buckets: int = 8
    rng_seed: int = 0

    def __post_init__(self):
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be non-negative")
        if self.num_context_buckets < 2:
            raise ValueError("need at least 2 context buckets")


def env_sample(env: SyntheticPairEnv, rng: np.random.Generator) -> tuple[int, PreferencePair]:
    """Draw a latent pair; observation is the noisy quality gap, bucketed."""
    while True:
        q_a = float(rng.uniform(0.0, 100.0))
        q_b = float(rng.uniform(0.0, 100.0))
        if q_a != q_b:
            break
    obs = (q_a - q_b) + (float(rng.normal(0.0, env.noise_sigma)) if env.noise_sigma > 0 else 0.0)
    width = 200.0 / env.num_context_buckets
    bucket = int(np.clip((obs + 100.0) // width, 0, env.num_context_buckets - 1))
    pair = PreferencePair(
        id="synthetic",
        lang_pair="xx-yy",
        src="synthetic",
        mt_a="a",
        mt_b="b",
        g_a=q_a,
        g_b=q_b,
        label=Label.A_BETTER if q_a > q_b else Label.B_BETTER,
        swapped=False,
    )
    return bucket, pair


def rollout(
    policy: PolicySnapshot,
    env: SyntheticPairEnv,
    batch_size: int,
    filler_len: int,
    rng: np.random.Generator,
    reward_config: RewardConfig = RewardConfig(),
    value_table: np.ndarray | None = None,
) -> list[Trajectory]:
    """Sample trajectories and score them through the render -> parse -> reward path."""
    T = filler_len + 2
    if value_table is None:
        value_table = np.zeros((policy.num_contexts, T + 1))
    log_p = policy.log_probs()
    K = len(policy.alphabet)
    trajectories: list[Trajectory] = []
    for _ in range(batch_size):
        context, pair = env_sample(env, rng)
        probs_a = np.exp(log_p[context, 0])
        probs_b = np.exp(log_p[context, 1])
        a_idx = int(rng.choice(K, p=probs_a / probs_a.sum()))
        b_idx = int(rng.choice(K, p=probs_b / probs_b.sum()))
        rendered = render_scores(policy.alphabet[a_idx], policy.alphabet[b_idx])
        verdict = parse_pairwise(rendered)
        sr = shaped_reward(verdict, pair, reward_config)
        tokens = (0,) * filler_len + (a_idx, b_idx)
        step_kinds = (FILLER_STEP,) * filler_len + (0, 1)
        logprobs_old = (0.0,) * filler_len + (
            float(log_p[context, 0, a_idx]),
            float(log_p[context, 1, b_idx]),
        )
        values = tuple(float(v) for v in value_table[context, :T])
        trajectories.append(
            Trajectory(
                context=context,
                tokens=tokens,
                step_kinds=step_kinds,
                logprobs_old=logprobs_old,
                terminal_reward=sr.r,
                rank_reward=sr.r_rank,
                values=values,
            )
        )
    return trajectories


def gae(trajectory: Trajectory, gamma: float, lam: float) -> AdvantageEstimate:
    """Exponentially weighted advantage estimate with terminal bootstrap 0."""
    T = len(trajectory.tokens)
    rewards = [0.0] * T
    rewards[-1] = trajectory.terminal_reward
    values = list(trajectory.values) + [0.0]
    deltas = [rewards[t] + gamma * values[t + 1] - values[t] for t in range(T)]
    advantages = [0.0] * T
    acc = 0.0
    for t in reversed(range(T)):
        acc = deltas[t] + gamma * lam * acc
        advantages[t] = acc
    returns = [advantages[t] + values[t] for t in range(T)]
    return AdvantageEstimate(tuple(deltas), tuple(advantages), tuple(returns))


def kl_to_reference(policy: PolicySnapshot, ref: PolicySnapshot) -> float:
    """Mean KL(policy || ref) over all (context, emission step) cells."""
    log_p = policy.log_probs()
    log_q = ref.log_probs()
    p = np.exp(log_p)
    return float((p * (log_p - log_q)).sum(axis=-1).mean())


def ppo_loss(
    trajectories: list[Trajectory],
    advantages: list[AdvantageEstimate],
    policy: PolicySnapshot,
    ref_policy: PolicySnapshot,
    config: RlConfig,
) -> tuple[float, np.ndarray]:
    """Clipped surrogate minus the KL penalty, with closed-form gradients.

    Returns (loss, gradient) where loss is the negated objective and the
    gradient is the ascent direction on policy logits.
    """
    if not trajectories:
        raise ValueError("empty batch")
    log_p = policy.log_probs()
    if not np.all(np.isfinite(policy.logits)):
        raise ValueError("non-finite logits")
    p = np.exp(log_p)
    grad = np.zeros_like(policy.logits)

    surrogate_sum = 0.0
    n_tokens = 0
    for traj, adv in zip(trajectories, advantages):
        c = traj.context
        for t, kind in enumerate(traj.step_kinds):
            if kind == FILLER_STEP:
                continue
            a = traj.tokens[t]
            lp_new = log_p[c, kind, a]
            ratio = float(np.exp(lp_new - traj.logprobs_old[t]))
            A = adv.advantages[t]
            unclipped = ratio * A
            clipped = float(np.clip(ratio, 1.0 - config.clip_eps, 1.0 + config.clip_eps)) * A
            surrogate_sum += min(unclipped, clipped)
            n_tokens += 1
            if unclipped <= clipped:
                # active branch depends on the ratio; gradient flows
                g = ratio * A
                grad[c, kind, :] -= g * p[c, kind, :]
                grad[c, kind, a] += g
            # clipped-and-better branch is a constant in theta: zero gradient
    surrogate = surrogate_sum / n_tokens
    grad /= n_tokens

    log_q = ref_policy.log_probs()
    kl_cells = (p * (log_p - log_q)).sum(axis=-1)  # (C, 2)
    kl = float(kl_cells.mean())
    # d/dz KL(p||q) = p * (log(p/q) - KL) per cell
    kl_grad = p * ((log_p - log_q) - kl_cells[..., None])
    grad -= config.kl_coeff * kl_grad / kl_cells.size

    loss = -(surrogate - config.kl_coeff * kl)
    return loss, grad


@dataclass(frozen=True)
class UpdateStats:
    update: int
    mean_reward: float
    mean_rank_reward: float
    kl: float
    loss: float


@dataclass(frozen=True)
class TrainingReport:
    rows: tuple[UpdateStats, ...]
    final_policy: PolicySnapshot
    config: RlConfig
    diverged: bool = False


def train_toy(
    env: SyntheticPairEnv,
    config: RlConfig = RlConfig(),
    reward_config: RewardConfig = RewardConfig(),
) -> TrainingReport:
    """Run the rollout -> GAE -> PPO loop on the synthetic environment."""
    rng = np.random.default_rng(config.rng_seed)
    policy = PolicySnapshot.uniform(num_contexts=env.num_context_buckets)
    ref_policy = replace(policy, logits=policy.logits.copy())
    T = config.filler_len + 2
    value_table = np.zeros((env.num_context_buckets, T + 1))

    rows: list[UpdateStats] = []
    for update in range(config.updates):
        batch = rollout(
            policy,
            env,
            config.batch_size,
            config.filler_len,
            rng,
            reward_config,
            value_table,
        )
        advs = [gae(traj, config.gamma, config.gae_lambda) for traj in batch]
        if config.advantage_norm:
            flat = np.array(
                [
                    adv.advantages[t]
                    for traj, adv in zip(batch, advs)
                    for t, kind in enumerate(traj.step_kinds)
                    if kind != FILLER_STEP
                ]
            )
            mu, sigma = float(flat.mean()), float(flat.std())
            scale = sigma if sigma > 1e-8 else 1.0
            advs = [
                AdvantageEstimate(
                    adv.deltas,
                    tuple((a - mu) / scale for a in adv.advantages),
                    adv.returns,
                )
                for adv in advs
            ]
        loss, grad = ppo_loss(batch, advs, policy, ref_policy, config)
        new_logits = policy.logits + config.learning_rate * grad
        if float(np.abs(new_logits).max()) > config.logit_bound:
            raise TrainingDiverged(
                f"|logit| exceeded {config.logit_bound} at update {update}"
            )
        policy = replace(policy, logits=new_logits)

        # critic: mean-squared-error step of each visited (context, step) cell toward returns
        residual_sum = np.zeros_like(value_table)
        counts = np.zeros_like(value_table)
        for traj, adv in zip(batch, advs):
            for t in range(T):
                residual_sum[traj.context, t] += adv.returns[t] - value_table[traj.context, t]
                counts[traj.context, t] += 1
        mask = counts > 0
        value_table[mask] += config.value_lr * residual_sum[mask] / counts[mask]

        rows.append(
            UpdateStats(
                update=update,
                mean_reward=float(np.mean([t.terminal_reward for t in batch])),
                mean_rank_reward=float(np.mean([t.rank_reward for t in batch])),
                kl=kl_to_reference(policy, ref_policy),
                loss=loss,
            )
        )
    return TrainingReport(tuple(rows), policy, config)

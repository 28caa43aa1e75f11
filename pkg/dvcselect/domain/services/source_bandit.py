"""
UCB bookkeeping per data source and its conversion to sampling probabilities.
"""

import math
from typing import Optional, Sequence

import numpy as np

from ..models.bandit import BanditState, RegretTrace
from ...shared.exceptions import UnsupportedOperationError
from ...shared.logging import get_logger

logger = get_logger("dvcselect.bandit")


def ucb_score(state: BanditState, arm: int) -> float:
    """mean + c * sqrt(2 ln t / n); +inf for an untried arm."""
    pulls = state.arms[arm].pulls
    if pulls == 0:
        return math.inf
    total = state.total_pulls
    bonus = state.exploration * math.sqrt(2.0 * math.log(total) / pulls)
    return state.arms[arm].mean + bonus


def source_probabilities(state: BanditState) -> np.ndarray:
    """Multinomial over sources from UCB scores, floored at floor/K per arm."""
    k = state.num_arms
    epsilon = state.epsilon
    untried = state.untried()
    if len(untried) == k:
        return np.full(k, 1.0 / k)

    probabilities = np.full(k, epsilon)
    if untried:
        # untried arms split everything the tried arms do not hold
        share = (1.0 - epsilon * (k - len(untried))) / len(untried)
        probabilities[untried] = share
        return probabilities

    scores = np.array([ucb_score(state, i) for i in range(k)])
    shifted = scores - scores.min()
    total = shifted.sum()
    normalized = shifted / total if total > 0.0 else np.full(k, 1.0 / k)
    return epsilon + (1.0 - k * epsilon) * normalized


def update_reward(state: BanditState, arm: int, reward: float) -> None:
    """Record one reward, clamped into [0, 1]."""
    reward = float(reward)
    if not math.isfinite(reward):
        raise ValueError(f"reward for arm {arm} is not finite")
    if reward < 0.0 or reward > 1.0:
        state.clamp_warnings += 1
        logger.warning(f"Reward {reward:.4f} for source {arm} clamped into [0, 1]")
        reward = min(max(reward, 0.0), 1.0)
    state.arms[arm].pulls += 1
    state.arms[arm].reward_sum += reward
    state.pull_history.append(arm)


def select_arm(state: BanditState) -> int:
    """Arg-max UCB; the lowest-index untried arm goes first."""
    untried = state.untried()
    if untried:
        return untried[0]
    scores = [ucb_score(state, i) for i in range(state.num_arms)]
    return int(np.argmax(scores))


def analytic_regret_bound(true_means: Sequence[float], horizon: int) -> float:
    """sum_{gap>0} 8 ln T / gap + (1 + pi^2/3) sum gap."""
    best = max(true_means)
    gaps = [best - mu for mu in true_means if best - mu > 0.0]
    if horizon < 1 or not gaps:
        return 0.0
    log_t = math.log(horizon)
    return sum(8.0 * log_t / gap for gap in gaps) + (1.0 + math.pi ** 2 / 3.0) * sum(gaps)


def regret_ledger(state: BanditState, true_means: Optional[Sequence[float]]) -> RegretTrace:
    """Cumulative pseudo-regret of the recorded pulls under known means."""
    if true_means is None:
        raise UnsupportedOperationError("regret needs known arm means (simulation only)")
    if len(true_means) != state.num_arms:
        raise UnsupportedOperationError(
            f"{len(true_means)} means given for {state.num_arms} arms"
        )
    best = max(true_means)
    gaps = np.array([best - mu for mu in true_means])
    cumulative = np.cumsum(gaps[np.asarray(state.pull_history, dtype=np.int64)])
    return RegretTrace(
        cumulative=cumulative.tolist(),
        analytic_bound=analytic_regret_bound(true_means, len(state.pull_history)),
    )


def simulate_bernoulli(
    true_means: Sequence[float],
    horizon: int,
    seed: int = 0,
    exploration: float = 1.0,
) -> RegretTrace:
    """Run UCB on Bernoulli arms and return its regret trace."""
    rng = np.random.default_rng(seed)
    draws = rng.random(horizon)
    k = len(true_means)
    state = BanditState.create(k, exploration)
    # plain-float mirror of the state keeps the inner loop fast
    pulls = [0] * k
    sums = [0.0] * k
    for t in range(horizon):
        if t < k:
            arm = t
        else:
            log_t = math.log(t)
            arm = 0
            best_score = -math.inf
            for i in range(k):
                score = sums[i] / pulls[i] + exploration * math.sqrt(2.0 * log_t / pulls[i])
                if score > best_score:
                    best_score = score
                    arm = i
        reward = 1.0 if draws[t] < true_means[arm] else 0.0
        pulls[arm] += 1
        sums[arm] += reward
        state.pull_history.append(arm)
    for i, arm_state in enumerate(state.arms):
        arm_state.pulls = pulls[i]
        arm_state.reward_sum = sums[i]
    return regret_ledger(state, true_means)

"""Objective math for group-relative policy optimization.

Pure functions over externally supplied per-token log-probabilities: the
staged NLL loss, group-relative advantages, token importance ratios, the
nonnegative per-token KL estimator, and the clipped surrogate objective.
No gradients and no parameter updates happen here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import EmptyRationale, LengthMismatch


@dataclass(frozen=True)
class GrpoParams:
    eps_adv: float = 1e-8  # added to the group std before dividing
    eps_clip: float = 0.2  # ratio clip half-width
    beta: float = 0.04  # KL anchor weight

    def __post_init__(self) -> None:
        if self.eps_adv <= 0 or self.eps_clip <= 0 or self.beta <= 0:
            raise ValueError("eps_adv, eps_clip, and beta must all be positive")


DEFAULT_GRPO_PARAMS = GrpoParams()


def _check_logprobs(name: str, values) -> tuple[float, ...]:
    out = tuple(float(v) for v in values)
    for v in out:
        if not math.isfinite(v) or v > 0.0:
            raise ValueError(f"{name} log-probabilities must be finite and <= 0, got {v}")
    return out


@dataclass(frozen=True)
class RolloutMember:
    """One sampled trace: its reward plus per-token log-probs under the
    current, behavior, and reference policies (equal lengths)."""

    reward: float
    policy: tuple[float, ...]
    old: tuple[float, ...]
    reference: tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "policy", _check_logprobs("policy", self.policy))
        object.__setattr__(self, "old", _check_logprobs("old", self.old))
        object.__setattr__(self, "reference", _check_logprobs("reference", self.reference))
        if not len(self.policy) == len(self.old) == len(self.reference):
            raise LengthMismatch(
                f"logprob lengths differ: policy={len(self.policy)} "
                f"old={len(self.old)} reference={len(self.reference)}"
            )


@dataclass(frozen=True)
class RolloutGroup:
    members: tuple[RolloutMember, ...]

    def __post_init__(self) -> None:
        if not self.members:
            raise ValueError("a rollout group needs at least one member")

    @property
    def rewards(self) -> list[float]:
        return [m.reward for m in self.members]


def sft_nll(rationale, answer) -> float:
    """Negative log-likelihood of rationale tokens plus answer tokens."""
    rationale = list(rationale)
    if not rationale:
        raise EmptyRationale("rationale token logprobs are empty")
    return -(sum(rationale) + sum(answer))


def group_advantages(rewards, eps_adv: float = DEFAULT_GRPO_PARAMS.eps_adv) -> list[float]:
    """Center by the group mean and divide by population std + eps_adv.

    A single-member or zero-variance group degrades to all-zero advantages.
    """
    rewards = [float(r) for r in rewards]
    if not rewards:
        raise ValueError("rewards must be non-empty")
    n = len(rewards)
    mean = sum(rewards) / n
    variance = sum((r - mean) ** 2 for r in rewards) / n
    denom = math.sqrt(variance) + eps_adv
    return [(r - mean) / denom for r in rewards]


def importance_ratios(policy, old) -> list[float]:
    """Per-token exp(policy - old)."""
    policy, old = list(policy), list(old)
    if len(policy) != len(old):
        raise LengthMismatch(f"policy has {len(policy)} tokens, old has {len(old)}")
    return [math.exp(p - o) for p, o in zip(policy, old)]


def kl_token(policy_lp: float, reference_lp: float) -> float:
    """Nonnegative per-token KL estimate: exp(d) - d - 1 with d = ref - policy.

    Zero exactly when the two log-probs agree; convexity keeps it >= 0.
    """
    delta = reference_lp - policy_lp
    return math.exp(delta) - delta - 1.0


def clipped_term(ratio: float, advantage: float, eps_clip: float) -> float:
    """min(ratio * A, clip(ratio, 1-eps, 1+eps) * A); equals the unclipped
    term whenever the ratio already lies inside the clip interval."""
    clipped = min(max(ratio, 1.0 - eps_clip), 1.0 + eps_clip)
    return min(ratio * advantage, clipped * advantage)


def grpo_objective(
    group: RolloutGroup,
    params: GrpoParams = DEFAULT_GRPO_PARAMS,
    advantages: list[float] | None = None,
) -> float:
    """Clipped surrogate with per-token KL anchor, double-normalized:
    mean over members of the per-member token mean.

    The sequence-level advantage is broadcast to all of a member's tokens.
    ``advantages`` overrides the reward-derived values (test seam).
    """
    if advantages is None:
        advantages = group_advantages(group.rewards, params.eps_adv)
    if len(advantages) != len(group.members):
        raise ValueError(
            f"got {len(advantages)} advantages for {len(group.members)} members"
        )

    total = 0.0
    for member, advantage in zip(group.members, advantages):
        if not member.policy:
            continue
        token_sum = 0.0
        for p, o, ref in zip(member.policy, member.old, member.reference):
            ratio = math.exp(p - o)
            token_sum += clipped_term(ratio, advantage, params.eps_clip)
            token_sum -= params.beta * kl_token(p, ref)
        total += token_sum / len(member.policy)
    return total / len(group.members)


def load_group_fixture(obj: dict) -> tuple[RolloutGroup, GrpoParams]:
    """Build a group and params from the grpo-check fixture shape:
    {"members": [{"reward", "policy", "old", "reference"}], "params": {...}?}"""
    members = tuple(
        RolloutMember(
            reward=float(m["reward"]),
            policy=tuple(m["policy"]),
            old=tuple(m["old"]),
            reference=tuple(m["reference"]),
        )
        for m in obj["members"]
    )
    raw = obj.get("params") or {}
    params = GrpoParams(
        eps_adv=float(raw.get("eps_adv", DEFAULT_GRPO_PARAMS.eps_adv)),
        eps_clip=float(raw.get("eps_clip", DEFAULT_GRPO_PARAMS.eps_clip)),
        beta=float(raw.get("beta", DEFAULT_GRPO_PARAMS.beta)),
    )
    return RolloutGroup(members=members), params

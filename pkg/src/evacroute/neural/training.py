"""REINFORCE training with a greedy rollout baseline.

Per batch, the gradient estimator is the mean over instances of
(cost(sampled) - cost(baseline greedy)) * grad log-prob of the sampled
sequence. The baseline is a frozen copy of the policy, replaced by the
current policy whenever a one-sided paired t-test on a held-out set
says the current one decodes cheaper. Plain SGD, fixed learning rate.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field

import torch
from scipy import stats

from ..instances import DemandModel
from .model import (
    AttentionPolicy,
    NeuralSolverError,
    PolicyParams,
    build_model,
    params_from_model,
    rollout,
)


class NonFiniteLoss(NeuralSolverError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 128
    n_epochs: int = 8
    instances_per_epoch: int = 2000
    learning_rate: float = 0.02
    baseline_update_significance: float = 0.05
    instance_size_n: int = 10
    capacity: int = 20
    seed: int = 0
    n_heldout: int = 100
    demand_model: DemandModel = field(default_factory=DemandModel)

    def __post_init__(self):
        for name in ("batch_size", "n_epochs", "instances_per_epoch", "instance_size_n",
                     "capacity", "n_heldout"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if not 0 < self.baseline_update_significance < 1:
            raise ValueError("baseline_update_significance must be in (0, 1)")


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    mean_sample_cost: float
    mean_greedy_cost: float
    baseline_swapped: bool


@dataclass(frozen=True)
class TrainResult:
    params: PolicyParams
    history: tuple[EpochStats, ...]


def sample_instances(
    n: int, count: int, generator: torch.Generator, model: DemandModel
) -> tuple[torch.Tensor, torch.Tensor]:
    """Uniform unit-square coordinates and household-size demands.

    Matches the deployment distribution: demands are rounded-half-away
    normal draws clamped to the household range, depot demand zero.
    """
    coords = torch.rand(count, n + 1, 2, generator=generator)
    draws = torch.randn(count, n, generator=generator) * model.std_dev + model.mean
    sizes = torch.sign(draws) * torch.floor(draws.abs() + 0.5)
    sizes = sizes.clamp(model.min_size, model.max_size).long()
    demands = torch.cat([torch.zeros(count, 1, dtype=torch.long), sizes], dim=1)
    return coords, demands


def greedy_costs(model: AttentionPolicy, coords, demands, capacity) -> torch.Tensor:
    with torch.no_grad():
        _, _, lengths = rollout(model, coords, demands, capacity, mode="greedy")
    return lengths


def train_reinforce(cfg: TrainConfig, init: PolicyParams | None = None) -> TrainResult:
    """Train a policy; returns the final params and the per-epoch curve."""
    if init is None:
        init = PolicyParams.init_random(seed=cfg.seed)
    policy = build_model(init)
    baseline = copy.deepcopy(policy)
    sampler = torch.Generator().manual_seed(cfg.seed)
    heldout_gen = torch.Generator().manual_seed(cfg.seed + 0x7E57)
    heldout = sample_instances(cfg.instance_size_n, cfg.n_heldout, heldout_gen, cfg.demand_model)
    baseline_eval = greedy_costs(baseline, *heldout, cfg.capacity)

    history: list[EpochStats] = []
    n_batches = math.ceil(cfg.instances_per_epoch / cfg.batch_size)

    for epoch in range(cfg.n_epochs):
        epoch_sample_costs: list[float] = []
        for _ in range(n_batches):
            coords, demands = sample_instances(
                cfg.instance_size_n, cfg.batch_size, sampler, cfg.demand_model
            )
            with torch.no_grad():
                _, _, base_cost = rollout(baseline, coords, demands, cfg.capacity, mode="greedy")
            _, log_prob, cost = rollout(
                policy, coords, demands, cfg.capacity, mode="sample", generator=sampler
            )
            advantage = cost - base_cost
            loss = (advantage.detach() * log_prob).mean()
            if not torch.isfinite(loss):
                raise NonFiniteLoss(
                    f"epoch {epoch}: loss={loss.item()}, "
                    f"mean cost={cost.mean().item()}, mean logp={log_prob.mean().item()}"
                )
            policy.zero_grad(set_to_none=True)
            loss.backward()
            with torch.no_grad():
                for p in policy.parameters():
                    if p.grad is not None:
                        p -= cfg.learning_rate * p.grad
            epoch_sample_costs.append(float(cost.mean()))

        current_eval = greedy_costs(policy, *heldout, cfg.capacity)
        swapped = _baseline_due(current_eval, baseline_eval, cfg.baseline_update_significance)
        if swapped:
            baseline.load_state_dict(policy.state_dict())
            baseline_eval = current_eval
        history.append(EpochStats(
            epoch=epoch,
            mean_sample_cost=float(sum(epoch_sample_costs) / len(epoch_sample_costs)),
            mean_greedy_cost=float(current_eval.mean()),
            baseline_swapped=swapped,
        ))

    return TrainResult(params=params_from_model(policy, init), history=tuple(history))


def _baseline_due(current: torch.Tensor, baseline: torch.Tensor, alpha: float) -> bool:
    cur, base = current.numpy(), baseline.numpy()
    if cur.mean() >= base.mean():
        return False
    if (cur == base).all():
        return False
    p = stats.ttest_rel(cur, base, alternative="less").pvalue
    return bool(p < alpha)


def history_csv(history) -> str:
    lines = ["epoch,mean_sample_cost,mean_greedy_cost,baseline_swapped"]
    for row in history:
        lines.append(
            f"{row.epoch},{row.mean_sample_cost:.6f},{row.mean_greedy_cost:.6f},"
            f"{int(row.baseline_swapped)}"
        )
    return "\n".join(lines) + "\n"

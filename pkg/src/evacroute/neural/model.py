"""Attention-based routing policy: graph encoder and masked decoder.

The encoder is a small transformer over node features (x, y,
demand/capacity; zero demand for the depot). The decoder builds routes
autoregressively: a context query (graph embedding, current node,
remaining capacity) attends over the nodes, and infeasible actions are
masked, so every decoded plan is capacity-feasible by construction.
Normalization uses per-instance statistics over the node dimension so
that encoding an instance is independent of batch composition.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import torch
from torch import nn

from ..instances import NormalizedInstance
from ..solver import DemandExceedsCapacity, FleetPlan, SolverError, make_route

TANH_CLIP = 10.0
NODE_FEATURES = 3


class NeuralSolverError(SolverError):
    pass


class ShapeMismatch(NeuralSolverError):
    pass


@dataclass(frozen=True)
class PolicyParams:
    """Architecture hyperparameters plus the flat weight vector."""

    embed_dim: int = 128
    n_heads: int = 8
    n_encoder_layers: int = 3
    feedforward_dim: int = 512
    weights: np.ndarray = field(default=None, compare=False)
    seed: int = 0

    def __post_init__(self):
        if self.embed_dim % self.n_heads != 0:
            raise ShapeMismatch(
                f"embed_dim {self.embed_dim} not divisible by n_heads {self.n_heads}"
            )
        expected = parameter_count(
            self.embed_dim, self.n_heads, self.n_encoder_layers, self.feedforward_dim
        )
        if self.weights is None:
            raise ShapeMismatch("weights vector is required; use init_random")
        w = np.asarray(self.weights, dtype=np.float32).reshape(-1)
        if w.size != expected:
            raise ShapeMismatch(f"weight vector has {w.size} entries, expected {expected}")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @classmethod
    def init_random(
        cls,
        embed_dim: int = 128,
        n_heads: int = 8,
        n_encoder_layers: int = 3,
        feedforward_dim: int = 512,
        seed: int = 0,
    ) -> "PolicyParams":
        with torch.random.fork_rng():
            torch.manual_seed(seed)
            model = AttentionPolicy(embed_dim, n_heads, n_encoder_layers, feedforward_dim)
        vec = nn.utils.parameters_to_vector(model.parameters())
        return cls(
            embed_dim=embed_dim,
            n_heads=n_heads,
            n_encoder_layers=n_encoder_layers,
            feedforward_dim=feedforward_dim,
            weights=vec.detach().numpy().astype(np.float32),
            seed=seed,
        )


class NodeNorm(nn.Module):
    """Affine normalization over the node dimension, per instance."""

    def __init__(self, dim: int, eps: float = 1e-5):
        super().__init__()
        self.weight = nn.Parameter(torch.ones(dim))
        self.bias = nn.Parameter(torch.zeros(dim))
        self.eps = eps

    def forward(self, x: torch.Tensor) -> torch.Tensor:  # [B, N, D]
        mean = x.mean(dim=1, keepdim=True)
        var = x.var(dim=1, unbiased=False, keepdim=True)
        return (x - mean) / torch.sqrt(var + self.eps) * self.weight + self.bias


class MultiHeadAttention(nn.Module):
    def __init__(self, embed_dim: int, n_heads: int):
        super().__init__()
        self.n_heads = n_heads
        self.head_dim = embed_dim // n_heads
        self.wq = nn.Linear(embed_dim, embed_dim, bias=False)
        self.wk = nn.Linear(embed_dim, embed_dim, bias=False)
        self.wv = nn.Linear(embed_dim, embed_dim, bias=False)
        self.wo = nn.Linear(embed_dim, embed_dim, bias=False)

    def forward(self, x: torch.Tensor) -> torch.Tensor:  # self-attention, [B, N, D]
        b, n, d = x.shape
        h, hd = self.n_heads, self.head_dim
        q = self.wq(x).view(b, n, h, hd).transpose(1, 2)
        k = self.wk(x).view(b, n, h, hd).transpose(1, 2)
        v = self.wv(x).view(b, n, h, hd).transpose(1, 2)
        attn = torch.softmax(q @ k.transpose(-2, -1) / math.sqrt(hd), dim=-1)
        out = (attn @ v).transpose(1, 2).reshape(b, n, d)
        return self.wo(out)


class EncoderLayer(nn.Module):
    def __init__(self, embed_dim: int, n_heads: int, ff_dim: int):
        super().__init__()
        self.mha = MultiHeadAttention(embed_dim, n_heads)
        self.norm1 = NodeNorm(embed_dim)
        self.ff = nn.Sequential(
            nn.Linear(embed_dim, ff_dim), nn.ReLU(), nn.Linear(ff_dim, embed_dim)
        )
        self.norm2 = NodeNorm(embed_dim)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        x = self.norm1(x + self.mha(x))
        return self.norm2(x + self.ff(x))


class AttentionPolicy(nn.Module):
    """Encoder plus the decoder projections; stateless across instances."""

    def __init__(self, embed_dim: int, n_heads: int, n_layers: int, ff_dim: int):
        super().__init__()
        self.embed_dim = embed_dim
        self.n_heads = n_heads
        self.head_dim = embed_dim // n_heads
        self.node_proj = nn.Linear(NODE_FEATURES, embed_dim)
        self.layers = nn.ModuleList(
            EncoderLayer(embed_dim, n_heads, ff_dim) for _ in range(n_layers)
        )
        self.ctx_proj = nn.Linear(2 * embed_dim + 1, embed_dim, bias=False)
        self.glimpse_k = nn.Linear(embed_dim, embed_dim, bias=False)
        self.glimpse_v = nn.Linear(embed_dim, embed_dim, bias=False)
        self.glimpse_out = nn.Linear(embed_dim, embed_dim, bias=False)
        self.logit_k = nn.Linear(embed_dim, embed_dim, bias=False)

    def encode(self, feats: torch.Tensor) -> torch.Tensor:  # [B, N, 3] -> [B, N, D]
        x = self.node_proj(feats)
        for layer in self.layers:
            x = layer(x)
        return x

    def precompute(self, h: torch.Tensor):
        b, n, d = h.shape
        heads, hd = self.n_heads, self.head_dim
        return {
            "graph": h.mean(dim=1),
            "gk": self.glimpse_k(h).view(b, n, heads, hd).transpose(1, 2),
            "gv": self.glimpse_v(h).view(b, n, heads, hd).transpose(1, 2),
            "lk": self.logit_k(h),
        }

    def step_log_probs(
        self,
        h: torch.Tensor,
        cache: dict,
        current: torch.Tensor,
        remaining_frac: torch.Tensor,
        mask: torch.Tensor,
    ) -> torch.Tensor:
        """Log-probabilities over actions (0 = depot, i = house i-1).

        mask is True where an action is forbidden; at least one action
        per row must stay legal.
        """
        b, n, d = h.shape
        heads, hd = self.n_heads, self.head_dim
        cur_emb = h.gather(1, current.view(b, 1, 1).expand(b, 1, d)).squeeze(1)
        ctx = torch.cat([cache["graph"], cur_emb, remaining_frac.unsqueeze(1)], dim=1)
        q = self.ctx_proj(ctx).view(b, heads, 1, hd)
        compat = q @ cache["gk"].transpose(-2, -1) / math.sqrt(hd)  # [B, H, 1, N]
        compat = compat.masked_fill(mask.view(b, 1, 1, n), float("-inf"))
        glimpse = (torch.softmax(compat, dim=-1) @ cache["gv"]).transpose(1, 2).reshape(b, d)
        q_final = self.glimpse_out(glimpse)
        logits = (q_final.unsqueeze(1) * cache["lk"]).sum(-1) / math.sqrt(d)  # [B, N]
        logits = torch.tanh(logits) * TANH_CLIP
        logits = logits.masked_fill(mask, float("-inf"))
        return torch.log_softmax(logits, dim=-1)


def parameter_count(embed_dim: int, n_heads: int, n_layers: int, ff_dim: int) -> int:
    with torch.device("meta"):
        model = AttentionPolicy(embed_dim, n_heads, n_layers, ff_dim)
    return sum(p.numel() for p in model.parameters())


def build_model(params: PolicyParams, dtype: torch.dtype = torch.float32) -> AttentionPolicy:
    model = AttentionPolicy(
        params.embed_dim, params.n_heads, params.n_encoder_layers, params.feedforward_dim
    ).to(dtype)
    vec = torch.as_tensor(np.array(params.weights), dtype=dtype)
    nn.utils.vector_to_parameters(vec, model.parameters())
    return model


def params_from_model(model: AttentionPolicy, like: PolicyParams) -> PolicyParams:
    vec = nn.utils.parameters_to_vector(model.parameters())
    return PolicyParams(
        embed_dim=like.embed_dim,
        n_heads=like.n_heads,
        n_encoder_layers=like.n_encoder_layers,
        feedforward_dim=like.feedforward_dim,
        weights=vec.detach().numpy().astype(np.float32),
        seed=like.seed,
    )


@dataclass
class DecoderState:
    """Per-step decoding state; the mask rule lives in feasible_mask."""

    visited: np.ndarray  # bool per house
    remaining_capacity: int
    current_position: int  # 0 = depot, i = house i-1
    partial_routes: list[list[int]]

    def mask(self, demands: tuple[int, ...]) -> np.ndarray:
        m = feasible_mask(
            torch.as_tensor(self.visited).unsqueeze(0),
            torch.as_tensor(demands, dtype=torch.long),
            torch.tensor([self.remaining_capacity]),
            torch.tensor([self.current_position]),
        )
        return m.squeeze(0).numpy()


def feasible_mask(
    visited: torch.Tensor,  # [B, n] bool
    demands: torch.Tensor,  # [n] or [B, n] long, houses only
    remaining: torch.Tensor,  # [B] long
    current: torch.Tensor,  # [B] long, 0 = depot
) -> torch.Tensor:
    """True = forbidden. Houses are masked when visited or over capacity;
    the depot is masked right after a depot visit to rule out idling."""
    if demands.dim() == 1:
        demands = demands.unsqueeze(0)
    house_mask = visited | (demands > remaining.unsqueeze(1))
    depot_mask = (current == 0).unsqueeze(1)
    return torch.cat([depot_mask, house_mask], dim=1)


def _instance_tensors(inst: NormalizedInstance, dtype: torch.dtype):
    coords = torch.tensor(
        [inst.base.depot, *inst.base.houses], dtype=dtype
    )
    demands = torch.tensor([0, *inst.base.demands], dtype=torch.long)
    return coords, demands


def _features(coords: torch.Tensor, demands: torch.Tensor, capacity: int) -> torch.Tensor:
    return torch.cat(
        [coords, (demands.to(coords.dtype) / capacity).unsqueeze(-1)], dim=-1
    )


def rollout(
    model: AttentionPolicy,
    coords: torch.Tensor,  # [B, N, 2], row 0 = depot
    demands: torch.Tensor,  # [B, N] long, depot 0
    capacity: int,
    mode: str = "greedy",
    generator: torch.Generator | None = None,
    forced: torch.Tensor | None = None,
    record_steps: list | None = None,
    embeddings: torch.Tensor | None = None,
):
    """Batched autoregressive decode.

    Returns (actions [B, T], log_prob [B], tour_length [B]). Finished
    rows pad with depot actions, which add zero length and zero log-prob.
    ``forced`` replays a fixed action tensor (teacher forcing), keeping
    the result differentiable for gradient checks.
    """
    b, n_nodes, _ = coords.shape
    n = n_nodes - 1
    house_demands = demands[:, 1:]
    if int(house_demands.max()) > capacity:
        raise DemandExceedsCapacity(
            f"house demand {int(house_demands.max())} exceeds capacity {capacity}"
        )

    if embeddings is None:
        h = model.encode(_features(coords, demands, capacity))
    else:
        h = embeddings
    cache = model.precompute(h)

    visited = torch.zeros(b, n, dtype=torch.bool)
    remaining = torch.full((b,), capacity, dtype=torch.long)
    current = torch.zeros(b, dtype=torch.long)
    finished = torch.zeros(b, dtype=torch.bool)

    actions: list[torch.Tensor] = []
    log_prob = torch.zeros(b, dtype=h.dtype)
    max_steps = 2 * n + 1 if forced is None else forced.shape[1]

    for t in range(max_steps):
        if forced is None and bool(finished.all()):
            break
        mask = feasible_mask(visited, house_demands, remaining, current)
        # finished rows: keep exactly the depot legal so they idle at cost 0
        mask[finished] = True
        mask[finished, 0] = False

        logp = model.step_log_probs(h, cache, current, remaining.to(h.dtype) / capacity, mask)
        if record_steps is not None:
            record_steps.append(logp.detach().clone())

        if forced is not None:
            action = forced[:, t]
        elif mode == "greedy":
            action = logp.argmax(dim=1)
        elif mode == "sample":
            action = torch.multinomial(logp.exp(), 1, generator=generator).squeeze(1)
        else:
            raise ValueError(f"unknown mode {mode!r}")

        step_lp = logp.gather(1, action.unsqueeze(1)).squeeze(1)
        log_prob = log_prob + torch.where(finished, torch.zeros_like(step_lp), step_lp)
        actions.append(action)

        is_house = action > 0
        idx = (action - 1).clamp(min=0)
        newly = is_house & ~finished
        visited = visited | (
            torch.nn.functional.one_hot(idx, n).bool() & newly.unsqueeze(1)
        )
        picked = house_demands.gather(1, idx.unsqueeze(1)).squeeze(1)
        remaining = torch.where(is_house, remaining - picked, torch.full_like(remaining, capacity))
        current = action
        finished = visited.all(dim=1)

    if not bool(finished.all()) and forced is None:
        raise NeuralSolverError("decoding failed to terminate")  # pragma: no cover

    action_mat = torch.stack(actions, dim=1) if actions else torch.zeros(b, 0, dtype=torch.long)
    lengths = _tour_lengths(coords, action_mat)
    return action_mat, log_prob, lengths


def _tour_lengths(coords: torch.Tensor, actions: torch.Tensor) -> torch.Tensor:
    """Manhattan length of depot -> actions... -> depot, per batch row."""
    b = coords.shape[0]
    depot_col = torch.zeros(b, 1, dtype=torch.long)
    seq = torch.cat([depot_col, actions, depot_col], dim=1)
    path = coords.gather(1, seq.unsqueeze(-1).expand(-1, -1, 2))
    return (path[:, 1:] - path[:, :-1]).abs().sum(dim=(1, 2))


def _plan_from_actions(
    actions: torch.Tensor, inst: NormalizedInstance, capacity: int
) -> FleetPlan:
    routes = []
    segment: list[int] = []
    for a in actions.squeeze(0).tolist():
        if a == 0:
            if segment:
                routes.append(make_route(segment, inst))
            segment = []
        else:
            segment.append(a - 1)
    if segment:
        routes.append(make_route(segment, inst))
    return FleetPlan(routes=tuple(routes), instance_ref=inst.base.name, capacity=capacity)


def encode(
    inst: NormalizedInstance,
    params: PolicyParams,
    capacity: int | None = None,
    dtype: torch.dtype = torch.float32,
) -> np.ndarray:
    """One embedding per node; row 0 is the depot, row i is house i-1.

    ``capacity`` scales the demand feature and should match the capacity
    later passed to the decoder; it defaults to the max house demand.
    """
    model = build_model(params, dtype)
    coords, demands = _instance_tensors(inst, dtype)
    if capacity is None:
        capacity = max(int(d) for d in inst.base.demands)
    with torch.no_grad():
        h = model.encode(_features(coords.unsqueeze(0), demands.unsqueeze(0), capacity))
    return h.squeeze(0).numpy()


def _check_embeddings(embeddings: np.ndarray, inst: NormalizedInstance, params: PolicyParams):
    expected = (inst.base.n_houses + 1, params.embed_dim)
    if tuple(embeddings.shape) != expected:
        raise ShapeMismatch(f"embeddings shape {tuple(embeddings.shape)}, expected {expected}")


def decode_greedy(
    embeddings: np.ndarray,
    inst: NormalizedInstance,
    capacity: int,
    params: PolicyParams,
) -> FleetPlan:
    """Highest-probability unmasked action at every step; always feasible."""
    _check_embeddings(embeddings, inst, params)
    model = build_model(params)
    coords, demands = _instance_tensors(inst, torch.float32)
    with torch.no_grad():
        actions, _, _ = rollout(
            model, coords.unsqueeze(0), demands.unsqueeze(0), capacity, mode="greedy",
            embeddings=torch.as_tensor(embeddings, dtype=torch.float32).unsqueeze(0),
        )
    return _plan_from_actions(actions, inst, capacity)


def decode_sample(
    embeddings: np.ndarray,
    inst: NormalizedInstance,
    capacity: int,
    params: PolicyParams,
    seed: int,
) -> tuple[FleetPlan, float]:
    """Sample actions from the masked softmax; deterministic under seed."""
    _check_embeddings(embeddings, inst, params)
    model = build_model(params)
    coords, demands = _instance_tensors(inst, torch.float32)
    gen = torch.Generator().manual_seed(seed)
    with torch.no_grad():
        actions, log_prob, _ = rollout(
            model, coords.unsqueeze(0), demands.unsqueeze(0), capacity, mode="sample",
            generator=gen,
            embeddings=torch.as_tensor(embeddings, dtype=torch.float32).unsqueeze(0),
        )
    return _plan_from_actions(actions, inst, capacity), float(log_prob.item())


def solve_greedy(inst: NormalizedInstance, capacity: int, params: PolicyParams) -> FleetPlan:
    """Encode + greedy decode with the demand feature scaled by this capacity."""
    model = build_model(params)
    coords, demands = _instance_tensors(inst, torch.float32)
    with torch.no_grad():
        actions, _, _ = rollout(
            model, coords.unsqueeze(0), demands.unsqueeze(0), capacity, mode="greedy"
        )
    return _plan_from_actions(actions, inst, capacity)


def sequence_log_prob(
    model: AttentionPolicy,
    inst: NormalizedInstance,
    capacity: int,
    actions: list[int],
) -> torch.Tensor:
    """Differentiable summed log-probability of a fixed action sequence.

    Runs the decoder with teacher forcing in the model's dtype; the
    returned scalar backpropagates to the model's parameters.
    """
    dtype = next(model.parameters()).dtype
    coords, demands = _instance_tensors(inst, dtype)
    forced = torch.tensor(actions, dtype=torch.long).unsqueeze(0)
    _, log_prob, _ = rollout(
        model, coords.unsqueeze(0), demands.unsqueeze(0), capacity, forced=forced
    )
    return log_prob.squeeze(0)

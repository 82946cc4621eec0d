"""Per-source-hub behavior-cloning policies over topology edges.

Each hub with outgoing edges gets one recurrent policy conditioned on the
target hub's embedding; all of that hub's outgoing segments are its training
data. Segment boundaries are stochastically perturbed during training
(canonical / truncated / preroll), observations get small additive noise on
the raster channels, and action labels are smoothed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import nn
from .maze.env import N_ACTIONS
from .maze.raster import VIEW_SIZE
from .maze.trajectory import Trajectory
from .topology import BehaviorTopology, Segment

MODEL_KIND = "policy"
OBS_DIM = VIEW_SIZE + 2


class DeadEdgeError(RuntimeError):
    """No policy exists for the requested source hub."""


@dataclass
class PolicyTrainConfig:
    lr: float = 1e-3
    epochs: int = 200
    min_epochs: int = 10
    check_every: int = 5
    plateau_patience: int = 40
    plateau_rel: float = 1e-4
    p_canonical: float = 0.8
    p_truncated: float = 0.1
    p_preroll: float = 0.1
    max_perturbation: int = 3
    obs_noise: float = 0.01
    label_smoothing: float = 0.05
    max_segments_per_edge: int = 4
    enc_hidden: int = 128
    gru_hidden: int = 64
    seed: int = 0


@dataclass
class EdgeTrainingSegment:
    base: Segment
    variant: str            # canonical | truncated | preroll
    perturbation: int       # steps removed or prepended
    observations: list
    actions: list


def perturb_segment(segment: Segment, rng: np.random.Generator,
                    trajectory: Trajectory | None = None,
                    p_canonical: float = 0.8, p_truncated: float = 0.1,
                    p_preroll: float = 0.1, max_perturbation: int = 3) -> EdgeTrainingSegment:
    """Draw a boundary-perturbed copy of an edge segment.

    Truncation drops up to `max_perturbation` leading steps but never empties
    the segment; preroll prepends true predecessor steps from the origin
    trajectory and falls back to canonical at the trajectory start.
    """
    if len(segment.actions) < 1:
        raise ValueError("segment must contain at least one action")
    total = p_canonical + p_truncated + p_preroll
    r = rng.random() * total
    if r < p_canonical:
        variant = "canonical"
    elif r < p_canonical + p_truncated:
        variant = "truncated"
    else:
        variant = "preroll"

    if variant == "truncated":
        room = len(segment.actions) - 1
        if room < 1:
            variant = "canonical"
        else:
            cut = min(int(rng.integers(1, max_perturbation + 1)), room)
            return EdgeTrainingSegment(segment, "truncated", cut,
                                       segment.observations[cut:], segment.actions[cut:])
    if variant == "preroll":
        room = segment.begin
        if room < 1 or trajectory is None:
            variant = "canonical"
        else:
            ext = min(int(rng.integers(1, max_perturbation + 1)), room)
            start = segment.begin - ext
            obs = trajectory.observations[start:segment.begin] + segment.observations
            actions = trajectory.actions[start:segment.begin] + segment.actions
            return EdgeTrainingSegment(segment, "preroll", ext, obs, actions)
    return EdgeTrainingSegment(segment, "canonical", 0,
                               segment.observations, segment.actions)


class EdgePolicy:
    """Observation encoder -> GRU -> action head, conditioned on a target embedding."""

    def __init__(self, rng: np.random.Generator, emb_dim: int,
                 enc_hidden: int = 128, gru_hidden: int = 64):
        self.emb_dim = emb_dim
        self.enc_hidden = enc_hidden
        self.gru_hidden = gru_hidden
        in_dim = OBS_DIM + emb_dim
        self.enc_w = nn.init_weight(rng, in_dim, enc_hidden, "pol.enc_w")
        self.enc_b = nn.init_bias(enc_hidden, "pol.enc_b")
        self.gru = nn.GruCellParams.create(rng, enc_hidden, gru_hidden, "pol.gru")
        self.head_w = nn.init_weight(rng, gru_hidden, N_ACTIONS, "pol.head_w")
        self.head_b = nn.init_bias(N_ACTIONS, "pol.head_b")

    def parameters(self) -> list[nn.Tensor]:
        return [self.enc_w, self.enc_b, *self.gru.tensors().values(), self.head_w, self.head_b]

    def tensors(self) -> dict[str, np.ndarray]:
        return {p.name: p.data for p in self.parameters()}

    def load_tensors(self, tensors: dict[str, np.ndarray]) -> None:
        for p in self.parameters():
            p.data = np.array(tensors[p.name], dtype=np.float64)

    def step(self, x, h):
        """One policy step on (batch, OBS_DIM + emb_dim) inputs; returns (logits, h)."""
        enc = nn.relu(nn.matmul(x, self.enc_w) + self.enc_b)
        h = nn.gru_step(self.gru, enc, h)
        logits = nn.matmul(h, self.head_w) + self.head_b
        return logits, h

    def initial_memory(self) -> np.ndarray:
        return np.zeros((1, self.gru_hidden))

    def act(self, obs_vec: np.ndarray, target_emb: np.ndarray, memory: np.ndarray):
        """Action distribution for one observation; returns (probs, new memory)."""
        x = np.concatenate([obs_vec, target_emb])[None, :]
        logits, h = self.step(nn.Tensor(x), nn.Tensor(memory))
        return nn.softmax_np(logits.data)[0], h.data


@dataclass
class PolicyBank:
    emb_dim: int
    policies: dict = field(default_factory=dict)          # hub id -> EdgePolicy
    train_losses: dict = field(default_factory=dict)      # hub id -> per-epoch losses

    def act(self, source_hub: int, target_emb: np.ndarray, obs_vec: np.ndarray,
            memory: np.ndarray):
        policy = self.policies.get(source_hub)
        if policy is None:
            raise DeadEdgeError(f"no policy for source hub {source_hub}")
        return policy.act(obs_vec, target_emb, memory)


def _segments_for_hub(topology: BehaviorTopology, hub_id: int, cap: int) -> list[Segment]:
    segs = []
    for target in topology.out_neighbors(hub_id):
        segs.extend(topology.segments[(hub_id, target)][:cap])
    return segs


def _greedy_exact(policy: EdgePolicy, segs: list[Segment], embeddings: np.ndarray) -> bool:
    for seg in segs:
        memory = policy.initial_memory()
        emb = embeddings[seg.target]
        for obs, action in zip(seg.observations[:-1], seg.actions):
            probs, memory = policy.act(obs.as_vector(), emb, memory)
            if int(np.argmax(probs)) != action:
                return False
    return True


def train_policy_for_hub(topology: BehaviorTopology, trajectories: list[Trajectory],
                         hub_id: int, embeddings: np.ndarray,
                         config: PolicyTrainConfig, rng: np.random.Generator):
    segs = _segments_for_hub(topology, hub_id, config.max_segments_per_edge)
    policy = EdgePolicy(rng, embeddings.shape[1], config.enc_hidden, config.gru_hidden)
    opt = nn.Adam(policy.parameters(), lr=config.lr)
    losses: list[float] = []
    best = np.inf
    stale = 0

    for epoch in range(config.epochs):
        variants = [perturb_segment(s, rng, trajectories[s.traj_id],
                                    config.p_canonical, config.p_truncated,
                                    config.p_preroll, config.max_perturbation)
                    for s in segs]
        n = len(variants)
        t_max = max(len(v.actions) for v in variants)
        xs = np.zeros((n, t_max, OBS_DIM + embeddings.shape[1]))
        acts = np.zeros((n, t_max), dtype=np.intp)
        mask = np.zeros((n, t_max))
        for i, v in enumerate(variants):
            emb = embeddings[v.base.target]
            for t in range(len(v.actions)):
                vec = v.observations[t].as_vector()
                if config.obs_noise > 0:
                    noisy = vec.copy()
                    noisy[:VIEW_SIZE] += rng.normal(0.0, config.obs_noise, size=VIEW_SIZE)
                    vec = noisy
                xs[i, t] = np.concatenate([vec, emb])
            acts[i, :len(v.actions)] = v.actions
            mask[i, :len(v.actions)] = 1.0
        total = mask.sum()

        with nn.Tape() as tape:
            h = nn.Tensor(np.zeros((n, config.gru_hidden)))
            loss = None
            for t in range(t_max):
                w = mask[:, t]
                if w.sum() == 0:
                    break
                logits, h = policy.step(nn.Tensor(xs[:, t]), h)
                ce = nn.softmax_cross_entropy(logits, acts[:, t], sample_weight=w,
                                              label_smoothing=config.label_smoothing)
                term = nn.tensor.scale(ce, w.sum() / total)
                loss = term if loss is None else nn.tensor.add(loss, term)
            if not np.isfinite(loss.data):
                raise nn.NonFiniteError(f"non-finite policy loss for hub {hub_id}")
            grads = nn.backprop(tape, loss)
        opt.step(grads)
        losses.append(float(loss.data))

        if losses[-1] < best * (1.0 - config.plateau_rel):
            best = losses[-1]
            stale = 0
        else:
            stale += 1
        if epoch + 1 >= config.min_epochs:
            if (epoch + 1) % config.check_every == 0 and _greedy_exact(policy, segs, embeddings):
                break
            if stale >= config.plateau_patience:
                break
    return policy, losses


def train_policies(topology: BehaviorTopology, trajectories: list[Trajectory],
                   embeddings: np.ndarray, config: PolicyTrainConfig,
                   log=None) -> PolicyBank:
    """One policy per hub with out-degree >= 1, trained independently."""
    bank = PolicyBank(emb_dim=embeddings.shape[1])
    sources = sorted({s for s, _t in topology.edges})
    for hub_id in sources:
        rng = np.random.default_rng(np.random.SeedSequence([config.seed, 0x90, hub_id]))
        policy, losses = train_policy_for_hub(topology, trajectories, hub_id,
                                              embeddings, config, rng)
        bank.policies[hub_id] = policy
        bank.train_losses[hub_id] = losses
        if log is not None:
            log(f"policy hub={hub_id} epochs={len(losses)} "
                f"first={losses[0]:.4f} last={losses[-1]:.4f}")
    return bank


def save_bank(bank: PolicyBank, out_dir: Path) -> None:
    from .nn.io import save_params

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    index = {"emb_dim": bank.emb_dim, "hubs": sorted(bank.policies)}
    for hub_id, policy in bank.policies.items():
        save_params(out_dir / f"policy_{hub_id:04d}.bin", MODEL_KIND,
                    {"hub_id": np.array([float(hub_id)]), **policy.tensors()})
    (out_dir / "index.json").write_text(json.dumps(index))


def load_bank(out_dir: Path, enc_hidden: int = 128, gru_hidden: int = 64) -> PolicyBank:
    from .nn.io import load_params

    out_dir = Path(out_dir)
    index = json.loads((out_dir / "index.json").read_text())
    bank = PolicyBank(emb_dim=index["emb_dim"])
    rng = np.random.default_rng(0)
    for hub_id in index["hubs"]:
        _kind, tensors = load_params(out_dir / f"policy_{hub_id:04d}.bin", expect_kind=MODEL_KIND)
        policy = EdgePolicy(rng, index["emb_dim"], enc_hidden, gru_hidden)
        policy.load_tensors(tensors)
        bank.policies[hub_id] = policy
    return bank

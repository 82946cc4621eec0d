"""Behavior topology: tolerance-bucketed latent clusters, hub detection,
collapse of trajectories to hub-visit sequences, and edge/segment extraction.

A cluster becomes a hub when demonstrations converge into it from at least
two distinct predecessor clusters, diverge out of it into at least two
distinct successor clusters, or when any trajectory starts or terminates
there. Edges exist exactly where some demonstration travels between two
hubs with no other hub in between; the intervening (observation, action)
span is kept as a training segment for that edge.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .maze.env import Goal
from .maze.trajectory import Trajectory

ClusterId = tuple[int, ...]

START, TERMINAL, CONVERGENCE, DIVERGENCE = "start", "terminal", "convergence", "divergence"


class TopologyError(RuntimeError):
    pass


def bucket_of(z: np.ndarray, epsilon: float) -> ClusterId:
    """Per-coordinate tolerance bucket of a latent vector."""
    if epsilon <= 0.0:
        raise ValueError("tolerance must be positive")
    return tuple(int(math.floor(v / epsilon)) for v in z)


@dataclass
class LatentTrajectory:
    traj_id: int
    start_id: int
    goal: Goal
    success: bool
    zs: np.ndarray  # (T+1, latent_dim)


@dataclass
class Hub:
    id: int
    cluster: ClusterId
    representative: np.ndarray
    kinds: frozenset
    terminal_meta: frozenset = frozenset()   # {(Goal, y)}; non-empty iff terminal
    start_ids: frozenset = frozenset()       # start configs whose reset state lands here

    def __post_init__(self):
        if (TERMINAL in self.kinds) != bool(self.terminal_meta):
            raise TopologyError("terminal metadata must accompany the terminal kind")


@dataclass
class Segment:
    source: int
    target: int
    traj_id: int
    begin: int  # step index of the source hub visit
    end: int    # step index of the target hub visit; actions begin..end-1
    observations: list = field(default_factory=list, repr=False)
    actions: list = field(default_factory=list, repr=False)

    def key(self):
        return (self.source, self.target, self.traj_id, self.begin, self.end)


@dataclass
class BehaviorTopology:
    epsilon: float
    latent_dim: int
    hubs: list[Hub]
    edges: set
    segments: dict  # (source, target) -> list[Segment]

    def __post_init__(self):
        self.cluster_to_hub = {h.cluster: h.id for h in self.hubs}
        self._out = {}
        for s, t in self.edges:
            self._out.setdefault(s, []).append(t)
        for v in self._out.values():
            v.sort()

    def out_neighbors(self, hub_id: int) -> list[int]:
        return self._out.get(hub_id, [])

    def hub_of_cluster(self, cluster: ClusterId) -> int | None:
        return self.cluster_to_hub.get(cluster)

    def start_hubs(self) -> list[Hub]:
        return [h for h in self.hubs if START in h.kinds]

    def goal_hubs(self, goal: Goal) -> list[int]:
        """Terminal-success hubs whose stored goal labels match."""
        return [h.id for h in self.hubs if (goal, 1) in h.terminal_meta]

    def max_segment_len(self, edge) -> int:
        return max(len(s.actions) for s in self.segments[edge])


def encode_dataset(env, dataset, encoder) -> list[LatentTrajectory]:
    """Encode every trajectory (successes first, then failures, in dataset order)."""
    from .maze.trajectory import replay_states

    out = []
    needs_state = getattr(encoder, "name", "") == "oracle"
    for tid, traj in enumerate(dataset.trajectories):
        encoder.begin_episode()
        states = replay_states(env, traj) if needs_state else [None] * (len(traj) + 1)
        zs = np.stack([
            encoder.encode(obs, state)
            for obs, state in zip(traj.observations, states)
        ])
        out.append(LatentTrajectory(tid, traj.start_id, traj.goal, traj.success, zs))
    return out


def detect_hubs(latent_trajectories: list[LatentTrajectory], epsilon: float) -> list[Hub]:
    if not latent_trajectories:
        return []
    order: list[ClusterId] = []
    preds: dict[ClusterId, set] = {}
    succs: dict[ClusterId, set] = {}
    sums: dict[ClusterId, np.ndarray] = {}
    counts: dict[ClusterId, int] = {}
    starts: dict[ClusterId, set] = {}
    terminals: dict[ClusterId, set] = {}

    for lt in latent_trajectories:
        clusters = [bucket_of(z, epsilon) for z in lt.zs]
        for t, c in enumerate(clusters):
            if c not in counts:
                order.append(c)
                counts[c] = 0
                sums[c] = np.zeros_like(lt.zs[0])
                preds[c] = set()
                succs[c] = set()
            counts[c] += 1
            sums[c] += lt.zs[t]
            if t > 0:
                preds[c].add(clusters[t - 1])
            if t < len(clusters) - 1:
                succs[c].add(clusters[t + 1])
        starts.setdefault(clusters[0], set()).add(lt.start_id)
        terminals.setdefault(clusters[-1], set()).add((lt.goal, int(lt.success)))

    hubs: list[Hub] = []
    for c in order:
        kinds = set()
        if c in starts:
            kinds.add(START)
        if c in terminals:
            kinds.add(TERMINAL)
        if len(preds[c]) >= 2:
            kinds.add(CONVERGENCE)
        if len(succs[c]) >= 2:
            kinds.add(DIVERGENCE)
        if not kinds:
            continue
        hubs.append(Hub(
            id=len(hubs),
            cluster=c,
            representative=sums[c] / counts[c],
            kinds=frozenset(kinds),
            terminal_meta=frozenset(terminals.get(c, ())),
            start_ids=frozenset(starts.get(c, ())),
        ))
    return hubs


def collapse_to_hub_sequence(lt: LatentTrajectory, topology_or_hubs, epsilon: float) -> list[tuple[int, int]]:
    """Hub visits as (hub_id, step_index); consecutive repeats collapse to one."""
    if isinstance(topology_or_hubs, BehaviorTopology):
        cluster_to_hub = topology_or_hubs.cluster_to_hub
    else:
        cluster_to_hub = {h.cluster: h.id for h in topology_or_hubs}
    visits: list[tuple[int, int]] = []
    last = None
    for t, z in enumerate(lt.zs):
        hub = cluster_to_hub.get(bucket_of(z, epsilon))
        if hub is not None and hub != last:
            visits.append((hub, t))
            last = hub
    if not visits or visits[0][1] != 0:
        raise TopologyError("trajectory start is not a hub; starts must seed hubs")
    return visits


def build_topology(dataset, latent_trajectories: list[LatentTrajectory],
                   hubs: list[Hub], epsilon: float) -> BehaviorTopology:
    trajectories = dataset.trajectories
    latent_dim = latent_trajectories[0].zs.shape[1]
    topo = BehaviorTopology(epsilon=epsilon, latent_dim=latent_dim, hubs=hubs,
                            edges=set(), segments={})
    for lt in latent_trajectories:
        visits = collapse_to_hub_sequence(lt, hubs, epsilon)
        traj = trajectories[lt.traj_id]
        for (h_a, t_a), (h_b, t_b) in zip(visits, visits[1:]):
            seg = Segment(
                source=h_a, target=h_b, traj_id=lt.traj_id, begin=t_a, end=t_b,
                observations=traj.observations[t_a:t_b + 1],
                actions=traj.actions[t_a:t_b],
            )
            topo.edges.add((h_a, h_b))
            topo.segments.setdefault((h_a, h_b), []).append(seg)
    # rebuild adjacency now that edges exist
    topo.__post_init__()
    return topo


# -- serialization ----------------------------------------------------------

def _fmt_floats(arr: np.ndarray) -> str:
    return ",".join(repr(float(v)) for v in arr)


def _fmt_meta(meta: frozenset) -> str:
    return ";".join(f"{g}:{y}" for g, y in sorted(meta, key=lambda m: (str(m[0]), m[1])))


def save_topology(topo: BehaviorTopology, path: Path) -> None:
    lines = ["behavior-topology v1",
             f"epsilon {topo.epsilon!r}",
             f"latent_dim {topo.latent_dim}",
             f"hubs {len(topo.hubs)}"]
    for h in topo.hubs:
        lines.append(
            f"hub {h.id} kinds={','.join(sorted(h.kinds))}"
            f" starts={','.join(str(s) for s in sorted(h.start_ids))}"
            f" terminal={_fmt_meta(h.terminal_meta)}"
            f" cluster={','.join(str(c) for c in h.cluster)}"
            f" repr={_fmt_floats(h.representative)}"
        )
    edges = sorted(topo.edges)
    lines.append(f"edges {len(edges)}")
    for s, t in edges:
        lines.append(f"edge {s} {t} segments={len(topo.segments[(s, t)])}")
    segs = sorted((seg for lst in topo.segments.values() for seg in lst), key=Segment.key)
    lines.append(f"segments {len(segs)}")
    for seg in segs:
        lines.append(f"segment {seg.source} {seg.target} traj={seg.traj_id} span={seg.begin}:{seg.end}")
    body = "\n".join(lines) + "\n"
    digest = hashlib.sha256(body.encode()).hexdigest()
    Path(path).write_text(body + f"checksum {digest}\n")


def _parse_meta(text: str) -> frozenset:
    if not text:
        return frozenset()
    out = set()
    for part in text.split(";"):
        goal_text, y = part.rsplit(":", 1)
        out.add((Goal.parse(goal_text), int(y)))
    return frozenset(out)


def load_topology(path: Path, trajectories: list[Trajectory]) -> BehaviorTopology:
    text = Path(path).read_text()
    body, _, tail = text.rpartition("checksum ")
    if not body or hashlib.sha256(body.encode()).hexdigest() != tail.strip():
        raise TopologyError(f"{path}: checksum mismatch")
    lines = body.splitlines()
    if lines[0] != "behavior-topology v1":
        raise TopologyError(f"{path}: unknown format or version")
    epsilon = float(lines[1].split()[1])
    latent_dim = int(lines[2].split()[1])
    idx = 3
    n_hubs = int(lines[idx].split()[1]); idx += 1
    hubs = []
    for _ in range(n_hubs):
        fields = dict(kv.split("=", 1) for kv in lines[idx].split()[2:])
        hub_id = int(lines[idx].split()[1])
        hubs.append(Hub(
            id=hub_id,
            cluster=tuple(int(v) for v in fields["cluster"].split(",")),
            representative=np.array([float(v) for v in fields["repr"].split(",")]),
            kinds=frozenset(fields["kinds"].split(",")),
            terminal_meta=_parse_meta(fields["terminal"]),
            start_ids=frozenset(int(s) for s in fields["starts"].split(",") if s),
        ))
        idx += 1
    n_edges = int(lines[idx].split()[1]); idx += 1
    edges = set()
    for _ in range(n_edges):
        parts = lines[idx].split()
        edges.add((int(parts[1]), int(parts[2])))
        idx += 1
    n_segs = int(lines[idx].split()[1]); idx += 1
    segments: dict = {}
    for _ in range(n_segs):
        parts = lines[idx].split()
        src, dst = int(parts[1]), int(parts[2])
        traj_id = int(parts[3].split("=")[1])
        begin, end = (int(v) for v in parts[4].split("=")[1].split(":"))
        traj = trajectories[traj_id]
        seg = Segment(src, dst, traj_id, begin, end,
                      observations=traj.observations[begin:end + 1],
                      actions=traj.actions[begin:end])
        segments.setdefault((src, dst), []).append(seg)
        idx += 1
    return BehaviorTopology(epsilon=epsilon, latent_dim=latent_dim, hubs=hubs,
                            edges=edges, segments=segments)


def matches_hub(z: np.ndarray, hub: Hub, epsilon: float, tol: float) -> bool:
    """Runtime hub matching: exact bucket, else within tol of the representative."""
    if bucket_of(z, epsilon) == hub.cluster:
        return True
    return bool(np.max(np.abs(z - hub.representative)) <= tol)

"""Ground-truth latent backend for exactly-verifiable end-to-end runs.

Maps the task-relevant ground-truth fields (pose, held item, door phases,
barrel contents) injectively into a 64-dim vector. Distinct field values
sit 10 tolerance-widths apart and every coordinate is placed mid-bucket,
so per-coordinate bucketing can never merge distinct task states or split
equal ones. The step counter is deliberately excluded: revisiting the same
task state must produce the same latent.
"""

from __future__ import annotations

import numpy as np

from ..maze.env import EnvState, Observation

ALL_FIELDS = ("position", "orientation", "held", "doors", "barrel")
MEMORYLESS_FIELDS = ("position", "orientation")
SPACING = 10  # buckets between distinct codes; >= 10 guarantees separation


def held_code(held) -> int:
    if held is None:
        return 0
    kind, color = held
    return 1 + color if kind == "key" else 5 + color


class OracleEncoder:
    """Deterministic injective feature map over EnvState."""

    name = "oracle"

    def __init__(self, latent_dim: int = 64, epsilon: float = 1e-3,
                 fields: tuple[str, ...] = ALL_FIELDS):
        unknown = set(fields) - set(ALL_FIELDS)
        if unknown:
            raise ValueError(f"unknown oracle fields {unknown}")
        self.latent_dim = latent_dim
        self.epsilon = epsilon
        self.fields = tuple(fields)

    def begin_episode(self) -> None:
        pass

    def codes(self, state: EnvState) -> list[int]:
        out: list[int] = []
        if "position" in self.fields:
            out.extend(state.pos)
        if "orientation" in self.fields:
            out.append(state.orientation)
        if "held" in self.fields:
            out.append(held_code(state.held))
        if "doors" in self.fields:
            out.extend(state.door_phase)
        if "barrel" in self.fields:
            slots = list(state.barrel[:2]) + [-1] * (2 - len(state.barrel[:2]))
            out.extend(s + 1 for s in slots)
        return out

    def encode(self, obs: Observation | None, state: EnvState) -> np.ndarray:
        if state is None:
            raise ValueError("oracle encoding needs the ground-truth state")
        codes = self.codes(state)
        if len(codes) > self.latent_dim:
            raise ValueError("latent dimension too small for the feature map")
        # mid-bucket placement: value / epsilon == SPACING * code + 0.5
        z = np.full(self.latent_dim, 0.5 * self.epsilon)
        for i, code in enumerate(codes):
            z[i] = (SPACING * code + 0.5) * self.epsilon
        return z

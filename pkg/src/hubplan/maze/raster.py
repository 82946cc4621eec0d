"""Egocentric channel-plane raster of the maze state.

A 7x7 window in the agent's frame, agent at the bottom-center cell looking
"up". Cells hidden behind walls, closed doors, or the barrel are occluded
and encode as all-zero planes. Held items contribute nothing, so two states
differing only in the carried object rasterize identically.

Channel planes (12): 0 wall, 1 open floor, 2 barrel, 3-6 key presence by
color, 7-10 door/diamond color, 11 door phase (1.0 locked, 0.5 half-open).
A cell with a color plane set and the phase plane clear is a diamond; open
doors are removed and render as floor.
"""

from __future__ import annotations

import numpy as np

from .env import DIR, HALF_OPEN, LOCKED, Observation

VIEW_W = 7
VIEW_H = 7
N_CHANNELS = 12
AGENT_VIEW_POS = (3, 6)
VIEW_SIZE = VIEW_W * VIEW_H * N_CHANNELS

CH_WALL = 0
CH_FLOOR = 1
CH_BARREL = 2
CH_KEY = 3      # 3..6 by color
CH_OBJ = 7      # 7..10 door or diamond color
CH_PHASE = 11


def _world_cell(env, state, vx: int, vy: int):
    fx, fy = DIR[state.orientation]
    rx, ry = DIR[(state.orientation + 1) % 4]
    df = AGENT_VIEW_POS[1] - vy
    dr = vx - AGENT_VIEW_POS[0]
    return (state.pos[0] + fx * df + rx * dr, state.pos[1] + fy * df + ry * dr)


def _transparent(env, state, cell) -> bool:
    if not env.in_bounds(cell) or env.wall[cell]:
        return False
    if cell == env.barrel_cell:
        return False
    dc = env._door_at.get(cell)
    if dc is not None and state.door_phase[dc] in (LOCKED, HALF_OPEN):
        return False
    return True


def _visibility(env, state) -> np.ndarray:
    vis = np.zeros((VIEW_W, VIEW_H), dtype=bool)
    ax, ay = AGENT_VIEW_POS
    vis[ax, ay] = True
    cells = sorted(
        ((vx, vy) for vx in range(VIEW_W) for vy in range(VIEW_H)),
        key=lambda c: abs(c[0] - ax) + abs(c[1] - ay),
    )
    for vx, vy in cells:
        if (vx, vy) == (ax, ay):
            continue
        sx = int(np.sign(ax - vx))
        sy = int(np.sign(ay - vy))
        for cand in {(vx + sx, vy), (vx, vy + sy), (vx + sx, vy + sy)}:
            if cand == (vx, vy):
                continue
            if vis[cand] and _transparent(env, state, _world_cell(env, state, *cand)):
                vis[vx, vy] = True
                break
    return vis


def rasterize(env, state) -> Observation:
    planes = np.zeros((VIEW_W, VIEW_H, N_CHANNELS), dtype=np.float64)
    vis = _visibility(env, state)
    for vx in range(VIEW_W):
        for vy in range(VIEW_H):
            if not vis[vx, vy]:
                continue
            cell = _world_cell(env, state, vx, vy)
            if not env.in_bounds(cell):
                continue
            if env.wall[cell]:
                planes[vx, vy, CH_WALL] = 1.0
                continue
            if cell == env.barrel_cell:
                planes[vx, vy, CH_BARREL] = 1.0
                continue
            dc = env._door_at.get(cell)
            if dc is not None and state.door_phase[dc] in (LOCKED, HALF_OPEN):
                planes[vx, vy, CH_OBJ + dc] = 1.0
                planes[vx, vy, CH_PHASE] = 1.0 if state.door_phase[dc] == LOCKED else 0.5
                continue
            occupied = False
            for c in range(4):
                if state.key_present[c] and env.key_home[c] == cell:
                    planes[vx, vy, CH_KEY + c] = 1.0
                    occupied = True
                    break
                if state.diamond_present[c] and env.diamond_home[c] == cell:
                    planes[vx, vy, CH_OBJ + c] = 1.0
                    occupied = True
                    break
            if not occupied:
                planes[vx, vy, CH_FLOOR] = 1.0

    barrel_vec = np.zeros(2, dtype=np.int64)
    for i, c in enumerate(state.barrel[:2]):
        barrel_vec[i] = c + 1
    return Observation(view=planes.ravel(), barrel_vec=barrel_vec)


def channel_weights(object_boost: float = 4.0) -> np.ndarray:
    """Per-element weights for raster reconstruction: object planes boosted."""
    w = np.ones((VIEW_W, VIEW_H, N_CHANNELS), dtype=np.float64)
    w[:, :, CH_BARREL:] = object_boost
    return w.ravel()

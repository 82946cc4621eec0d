from .env import (
    ACTION_NAMES,
    BACKWARD,
    BLUE,
    COLOR_NAMES,
    DEFAULT_MAP,
    DIR,
    DOOR_REQUIREMENTS,
    FORWARD,
    GREEN,
    HALF_OPEN,
    HORIZON,
    LOCKED,
    N_ACTIONS,
    OPEN,
    PICKUP,
    PURPLE,
    RED,
    TOGGLE,
    TURN_LEFT,
    TURN_RIGHT,
    EnvState,
    Goal,
    MazeEnv,
    MazeError,
    Observation,
    StartConfig,
    TerminalStateError,
    all_goals,
    door_requirements,
)
from .raster import AGENT_VIEW_POS, N_CHANNELS, VIEW_H, VIEW_SIZE, VIEW_W, channel_weights, rasterize
from .trajectory import Trajectory, load_trajectory, replay_check, replay_states, save_trajectory

"""Torus grid world: positions, simultaneous movement, capture, episodes.

Coordinates follow ``x`` to the right and ``y`` upward: ``UP`` adds one to
``y`` and ``RIGHT`` adds one to ``x``, both modulo the grid dimensions.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Protocol, Sequence

import numpy as np


class Action(enum.IntEnum):
    UP = 0
    DOWN = 1
    LEFT = 2
    RIGHT = 3
    STILL = 4


MOVES = (Action.UP, Action.DOWN, Action.LEFT, Action.RIGHT)

# (dx, dy) per action, indexed by Action value
DELTAS = ((0, 1), (0, -1), (-1, 0), (1, 0), (0, 0))


@dataclass(frozen=True)
class GridPosition:
    x: int
    y: int


@dataclass(frozen=True)
class WorldConfig:
    width: int = 100
    height: int = 100
    num_predators: int = 3
    num_prey: int = 2
    time_limit: int = 1000

    def __post_init__(self):
        if self.width < 2 or self.height < 2:
            raise ValueError("width and height must be >= 2")
        if self.num_predators < 1 or self.num_prey < 1:
            raise ValueError("num_predators and num_prey must be >= 1")
        if self.time_limit < 1:
            raise ValueError("time_limit must be >= 1")

    @property
    def max_distance(self) -> int:
        return self.width // 2 + self.height // 2


@dataclass
class WorldState:
    predator_positions: list[GridPosition]
    prey_positions: list[GridPosition]
    prey_alive: list[bool]
    step: int = 0
    # captures[i][j] == 1 when predator i was on prey j's cell as it died
    captures: list[list[int]] = field(default_factory=list)

    def copy(self) -> "WorldState":
        return WorldState(
            list(self.predator_positions),
            list(self.prey_positions),
            list(self.prey_alive),
            self.step,
            [list(row) for row in self.captures],
        )


@dataclass
class EpisodeOutcome:
    captures: np.ndarray  # (num_predators, num_prey) ints in {0, 1}
    final_distances: np.ndarray  # (num_predators, num_prey) ints >= 0
    steps_used: int


class PredatorController(Protocol):
    def reset(self) -> None: ...

    def act(self, predator_index: int, state: WorldState, cfg: WorldConfig) -> Action: ...


class PreyController(Protocol):
    def act(self, prey_index: int, state: WorldState, cfg: WorldConfig, rng) -> Action: ...


def torus_manhattan(a: GridPosition, b: GridPosition, cfg: WorldConfig) -> int:
    dx = abs(a.x - b.x)
    dy = abs(a.y - b.y)
    return min(dx, cfg.width - dx) + min(dy, cfg.height - dy)


def _axis_offset(src: int, dst: int, dim: int) -> int:
    d = (dst - src) % dim
    # exactly half-way stays positive
    if 2 * d > dim:
        d -= dim
    return d


def torus_offset(src: GridPosition, dst: GridPosition, cfg: WorldConfig) -> tuple[int, int]:
    """Signed shortest per-axis offset from ``src`` to ``dst``."""
    return _axis_offset(src.x, dst.x, cfg.width), _axis_offset(src.y, dst.y, cfg.height)


def move(pos: GridPosition, action: Action, cfg: WorldConfig) -> GridPosition:
    dx, dy = DELTAS[action]
    return GridPosition((pos.x + dx) % cfg.width, (pos.y + dy) % cfg.height)


def initial_state(
    predator_positions: Sequence[GridPosition],
    prey_positions: Sequence[GridPosition],
    cfg: WorldConfig,
) -> WorldState:
    """Build a step-0 state; prey starting on a predator's cell are caught at once."""
    if len(predator_positions) != cfg.num_predators or len(prey_positions) != cfg.num_prey:
        raise ValueError("position counts do not match WorldConfig")
    state = WorldState(
        list(predator_positions),
        list(prey_positions),
        [True] * cfg.num_prey,
        0,
        [[0] * cfg.num_prey for _ in range(cfg.num_predators)],
    )
    _resolve_captures(state)
    return state


def random_start(cfg: WorldConfig, rng: np.random.Generator) -> WorldState:
    """Uniform random start cells, drawn predators first then prey, x then y."""
    pred = rng.integers(0, [cfg.width, cfg.height], size=(cfg.num_predators, 2))
    prey = rng.integers(0, [cfg.width, cfg.height], size=(cfg.num_prey, 2))
    return initial_state(
        [GridPosition(int(x), int(y)) for x, y in pred],
        [GridPosition(int(x), int(y)) for x, y in prey],
        cfg,
    )


def _resolve_captures(state: WorldState) -> None:
    for j, prey in enumerate(state.prey_positions):
        if not state.prey_alive[j]:
            continue
        for i, pred in enumerate(state.predator_positions):
            if pred == prey:
                state.captures[i][j] = 1
                state.prey_alive[j] = False


def step_world(
    state: WorldState,
    predator_actions: Sequence[Action],
    prey_actions: Sequence[Action | None],
    cfg: WorldConfig,
) -> WorldState:
    """Advance one simultaneous step and return the new state.

    Actions for dead prey are ignored (``None`` is accepted for them).
    Capture is co-location after the move; swapping cells is not a capture.
    """
    if len(predator_actions) != len(state.predator_positions):
        raise ValueError("predator action count does not match predator count")
    if len(prey_actions) != len(state.prey_positions):
        raise ValueError("prey action count does not match prey count")
    new = state.copy()
    new.predator_positions = [
        move(p, a, cfg) for p, a in zip(state.predator_positions, predator_actions)
    ]
    for j, a in enumerate(prey_actions):
        if state.prey_alive[j]:
            if a == Action.STILL:
                raise ValueError("prey cannot take the STILL action")
            new.prey_positions[j] = move(state.prey_positions[j], a, cfg)
    new.step = state.step + 1
    _resolve_captures(new)
    return new


def outcome_of(state: WorldState, cfg: WorldConfig) -> EpisodeOutcome:
    caps = np.array(state.captures, dtype=np.int64).reshape(cfg.num_predators, cfg.num_prey)
    dist = np.zeros_like(caps)
    for j, prey in enumerate(state.prey_positions):
        if not state.prey_alive[j]:
            continue
        for i, pred in enumerate(state.predator_positions):
            dist[i, j] = torus_manhattan(pred, prey, cfg)
    return EpisodeOutcome(caps, dist, state.step)


class PresampledStream:
    """Tie-break stream backed by a pre-drawn block of uniforms.

    Each live prey consumes exactly two values per step (nearest-predator tie,
    then move tie), read at fixed offsets so the compiled simulator can replay
    the same block.
    """

    def __init__(self, draws: np.ndarray):
        self.draws = draws  # (time_limit, num_prey, 2)
        self._step = 0
        self._prey = 0
        self._k = 0

    def seek(self, step: int, prey: int) -> None:
        self._step, self._prey, self._k = step, prey, 0

    def random(self) -> float:
        v = float(self.draws[self._step, self._prey, self._k])
        self._k += 1
        return v


def draw_episode_randomness(cfg: WorldConfig, rng: np.random.Generator):
    """Draw start positions and the tie-break block for one episode."""
    start = random_start(cfg, rng)
    draws = rng.random((cfg.time_limit, cfg.num_prey, 2))
    return start, draws


def run_episode(
    controllers: Sequence[PredatorController],
    prey_policy: PreyController,
    cfg: WorldConfig,
    rng: np.random.Generator,
    trace: list | None = None,
) -> EpisodeOutcome:
    """Simulate one episode from random start cells.

    When ``trace`` is a list, one record per state (step 0 included) is
    appended; see :func:`trace_record`.
    """
    if len(controllers) != cfg.num_predators:
        raise ValueError("controller count does not match num_predators")
    state, draws = draw_episode_randomness(cfg, rng)
    return run_from(state, draws, controllers, prey_policy, cfg, trace)


def run_from(state, draws, controllers, prey_policy, cfg, trace=None) -> EpisodeOutcome:
    stream = PresampledStream(draws)
    for c in controllers:
        c.reset()
    while state.step < cfg.time_limit and any(state.prey_alive):
        pred_actions = [c.act(i, state, cfg) for i, c in enumerate(controllers)]
        prey_actions: list[Action | None] = []
        for j in range(cfg.num_prey):
            if state.prey_alive[j]:
                stream.seek(state.step, j)
                prey_actions.append(prey_policy.act(j, state, cfg, stream))
            else:
                prey_actions.append(None)
        if trace is not None:
            trace.append(trace_record(state, pred_actions, prey_actions, controllers))
        state = step_world(state, pred_actions, prey_actions, cfg)
    if trace is not None:
        trace.append(trace_record(state, None, None, controllers))
    return outcome_of(state, cfg)


def trace_record(state: WorldState, pred_actions, prey_actions, controllers) -> dict:
    """One replay-trace line: the state plus the actions chosen from it.

    The final record of an episode carries ``null`` actions and modules.
    """
    if pred_actions is None:
        modules = None
    else:
        modules = [getattr(c, "last_module", 0) for c in controllers]
    return {
        "step": state.step,
        "predators": [[p.x, p.y] for p in state.predator_positions],
        "prey": [[p.x, p.y] for p in state.prey_positions],
        "prey_alive": list(state.prey_alive),
        "predator_actions": None if pred_actions is None else [a.name for a in pred_actions],
        "prey_actions": None
        if prey_actions is None
        else [None if a is None else a.name for a in prey_actions],
        "modules": modules,
    }

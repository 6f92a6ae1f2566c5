"""Predator sensors and the network-backed predator controller."""
from __future__ import annotations

from .genome import Genome
from .network import Network, select_action
from .world import Action, WorldConfig, WorldState, torus_manhattan, torus_offset

BIAS = 1.0
EATEN = 1.0


def sensor_count(cfg: WorldConfig) -> int:
    return 2 * (cfg.num_predators - 1) + 2 * cfg.num_prey + 1


def build_sensors(predator_index: int, state: WorldState, cfg: WorldConfig) -> list[float]:
    """Normalised offsets to other predators, then prey, each group nearest first.

    Offsets are divided by half the grid dimension. Eaten prey read
    (1.0, 1.0) and sort after every live prey. Equal distances keep agent
    index order. The last entry is the bias.
    """
    me = state.predator_positions[predator_index]
    hx, hy = cfg.width / 2, cfg.height / 2

    others = [
        (torus_manhattan(me, p, cfg), i, p)
        for i, p in enumerate(state.predator_positions)
        if i != predator_index
    ]
    others.sort(key=lambda t: (t[0], t[1]))
    values: list[float] = []
    for _, _, p in others:
        dx, dy = torus_offset(me, p, cfg)
        values += [dx / hx, dy / hy]

    live = [
        (torus_manhattan(me, p, cfg), j, p)
        for j, p in enumerate(state.prey_positions)
        if state.prey_alive[j]
    ]
    live.sort(key=lambda t: (t[0], t[1]))
    for _, _, p in live:
        dx, dy = torus_offset(me, p, cfg)
        values += [dx / hx, dy / hy]
    values += [EATEN, EATEN] * (cfg.num_prey - len(live))
    values.append(BIAS)
    return values


class NetworkController:
    """Adapts a :class:`Network` to the world's predator-controller interface."""

    def __init__(self, network: Network):
        self.network = network
        self.last_module = 0

    @classmethod
    def from_genome(cls, genome: Genome) -> "NetworkController":
        return cls(Network(genome))

    def reset(self) -> None:
        self.network.reset()
        self.last_module = 0

    def act(self, predator_index: int, state: WorldState, cfg: WorldConfig) -> Action:
        choice = self.network.activate(build_sensors(predator_index, state, cfg))
        self.last_module = choice.module_index
        return select_action(choice)

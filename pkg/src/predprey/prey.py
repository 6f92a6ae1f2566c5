"""Scripted prey that flees the closest predator."""
from __future__ import annotations

from .world import MOVES, Action, WorldConfig, WorldState, move, torus_manhattan


def choose_prey_action(prey_index: int, state: WorldState, cfg: WorldConfig, rng) -> Action:
    """Move that maximises distance from the nearest (unmoved) predator.

    ``rng`` only needs a ``random()`` method. Exactly two values are drawn per
    call, one per tie-break, whether or not a tie occurs.
    """
    here = state.prey_positions[prey_index]
    dists = [torus_manhattan(here, p, cfg) for p in state.predator_positions]
    best = min(dists)
    u_pred = rng.random()
    u_move = rng.random()
    nearest = [i for i, d in enumerate(dists) if d == best]
    target = state.predator_positions[nearest[min(int(u_pred * len(nearest)), len(nearest) - 1)]]

    after = [torus_manhattan(move(here, a, cfg), target, cfg) for a in MOVES]
    far = max(after)
    options = [a for a, d in zip(MOVES, after) if d == far]
    return options[min(int(u_move * len(options)), len(options) - 1)]


class PreyPolicy:
    """Stateless flee controller; randomness comes from the stream it is handed."""

    def act(self, prey_index: int, state: WorldState, cfg: WorldConfig, rng) -> Action:
        return choose_prey_action(prey_index, state, cfg, rng)

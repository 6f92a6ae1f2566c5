"""The compiled batch simulator must agree exactly with the pure-Python path."""
import numpy as np
import pytest

from factories import random_genome
from predprey.agents import NetworkController
from predprey.fastsim import PackedNetworks, simulate_batch
from predprey.genome import initial_genome
from predprey.network import Network
from predprey.prey import PreyPolicy
from predprey.world import WorldConfig, draw_episode_randomness, run_from


@pytest.mark.parametrize(
    "cfg",
    [
        WorldConfig(width=8, height=8, time_limit=150),
        WorldConfig(width=20, height=12, time_limit=300),
        WorldConfig(width=5, height=7, num_predators=2, num_prey=3, time_limit=100),
    ],
)
def test_kernel_matches_python(cfg):
    rng = np.random.default_rng(cfg.width * 100 + cfg.height)
    n_in = 2 * (cfg.num_predators - 1) + 2 * cfg.num_prey + 1
    genomes = [random_genome(rng, num_inputs=n_in, num_modules=int(rng.integers(1, 3)), steps=15) for _ in range(8)]
    packed = PackedNetworks([Network(g) for g in genomes])
    n_eps = 40
    teams = rng.integers(0, len(genomes), size=(n_eps, cfg.num_predators))
    starts, draws = zip(*(draw_episode_randomness(cfg, np.random.default_rng([7, e])) for e in range(n_eps)))
    fast = simulate_batch(packed, teams, list(starts), np.stack(draws), cfg)
    caught = 0
    for e in range(n_eps):
        ctrls = [NetworkController.from_genome(genomes[k]) for k in teams[e]]
        ref = run_from(starts[e].copy(), draws[e], ctrls, PreyPolicy(), cfg)
        assert fast[e].steps_used == ref.steps_used
        assert np.array_equal(fast[e].captures, ref.captures)
        assert np.array_equal(fast[e].final_distances, ref.final_distances)
        caught += int(ref.captures.sum())
    assert caught > 0  # the comparison exercised capture handling


def test_kernel_rejects_wrong_signature():
    rng = np.random.default_rng(0)
    packed = PackedNetworks([Network(initial_genome(5, 1, None, rng))])
    cfg = WorldConfig(width=6, height=6, time_limit=5)
    start, draws = draw_episode_randomness(cfg, rng)
    with pytest.raises(ValueError):
        simulate_batch(packed, np.zeros((1, 3), dtype=int), [start], draws[None], cfg)

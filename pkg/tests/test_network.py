import math
from dataclasses import replace

import numpy as np
import pytest

from factories import random_feedforward_genome, random_genome
from oracles import feedforward_outputs
from predprey.genome import HIDDEN, INPUT, OUTPUT, Genome, LinkGene, NeuronGene, initial_genome
from predprey.network import ModuleChoice, Network, select_action
from predprey.world import Action


def hand_genome(num_inputs, num_modules, links, hidden=()):
    n_out = 5 if num_modules == 1 else 12
    neurons = [NeuronGene(i, INPUT) for i in range(num_inputs)]
    neurons += [NeuronGene(num_inputs + o, OUTPUT) for o in range(n_out)]
    neurons += [NeuronGene(h, HIDDEN) for h in hidden]
    return Genome(
        tuple(neurons),
        tuple(LinkGene(k, s, t, w) for k, (s, t, w) in enumerate(links)),
        num_modules,
        num_inputs,
    )


def test_build_initial_networks():
    rng = np.random.default_rng(0)
    n1 = Network(initial_genome(9, 1, None, rng))
    assert (n1.num_inputs, n1.num_outputs, n1.num_neurons) == (9, 5, 14)
    n2 = Network(initial_genome(9, 2, None, rng))
    assert n2.num_outputs == 12


def test_disabled_link_absent():
    g = hand_genome(1, 1, [(0, 1, 1.0), (0, 2, 1.0)])
    g = replace(g, links=(g.links[0], replace(g.links[1], enabled=False)))
    net = Network(g)
    out = net.activate([1.0])
    assert out.policy_outputs[0] == pytest.approx(math.tanh(1.0))
    assert out.policy_outputs[1] == 0.0
    assert len(net.in_src) == 1


def test_single_link_zero_input():
    g = hand_genome(1, 1, [(0, 3, 1.0)])
    assert Network(g).activate([0.0]).policy_outputs[2] == 0.0


def test_one_module_always_module_zero():
    rng = np.random.default_rng(4)
    net = Network(initial_genome(9, 1, None, rng))
    for _ in range(50):
        assert net.activate(rng.uniform(-1, 1, 9)).module_index == 0


def _arbitration_genome(pref0, pref1):
    # input 0 is a constant 1; preference outputs are neurons 1+5 and 1+11
    return hand_genome(
        1,
        2,
        [(0, 6, math.atanh(pref0)), (0, 12, math.atanh(pref1)), (0, 1, 0.5), (0, 10, 0.5)],
    )


def test_module_arbitration():
    a = Network(_arbitration_genome(0.7, 0.3)).activate([1.0])
    assert a.module_index == 0
    assert select_action(a) == Action.UP
    b = Network(_arbitration_genome(0.3, 0.7)).activate([1.0])
    assert b.module_index == 1
    # module 1 policy neurons are local 7..11; neuron 10 is its Right output
    assert select_action(b) == Action.RIGHT


def test_preference_tie_goes_to_module_zero():
    assert Network(_arbitration_genome(0.5, 0.5)).activate([1.0]).module_index == 0


def test_input_length_checked():
    net = Network(hand_genome(2, 1, [(0, 2, 1.0)]))
    with pytest.raises(ValueError):
        net.activate([1.0])


def test_select_action():
    assert select_action(ModuleChoice(0, (0.9, 0.1, 0, 0, 0))) == Action.UP
    assert select_action(ModuleChoice(0, (0.2,) * 5)) == Action.UP
    assert select_action(ModuleChoice(0, (0, 0, 0, 0, 1))) == Action.STILL


def test_reset():
    rng = np.random.default_rng(8)
    g = random_genome(rng, steps=20)
    net = Network(g)
    x = rng.uniform(-1, 1, 9)
    first = net.activate(x)
    net.reset()
    assert net.activate(x) == first
    fresh = Network(g)
    before = list(fresh.activations)
    fresh.reset()
    assert fresh.activations == before


def test_recurrent_state_carries_over():
    # hidden neuron 3 with a self-loop feeding output 1
    g = hand_genome(1, 1, [(0, 7, 1.0), (7, 7, 0.9), (7, 1, 1.0)], hidden=(7,))
    net = Network(g)
    h1 = math.tanh(1.0)
    h2 = math.tanh(1.0 + 0.9 * h1)
    assert net.activate([1.0]).policy_outputs[0] == pytest.approx(math.tanh(h1))
    assert net.activate([1.0]).policy_outputs[0] == pytest.approx(math.tanh(h2))
    net.reset()
    assert net.activate([1.0]).policy_outputs[0] == pytest.approx(math.tanh(h1))


def test_feedforward_matches_bruteforce():
    rng = np.random.default_rng(2024)
    for _ in range(200):
        g = random_feedforward_genome(rng, num_modules=int(rng.integers(1, 3)))
        x = rng.uniform(-1, 1, 9)
        net = Network(g)
        net.activate(x)
        assert np.allclose(net.outputs(), feedforward_outputs(g, x), atol=1e-9, rtol=0)


def test_deterministic_sequences():
    rng = np.random.default_rng(6)
    g = random_genome(rng, num_modules=2, steps=25)
    xs = rng.uniform(-1, 1, (30, 9))
    a, b = Network(g), Network(g)
    assert [a.activate(x) for x in xs] == [b.activate(x) for x in xs]


def test_preference_shift_leaves_choice_unchanged():
    rng = np.random.default_rng(12)
    for _ in range(50):
        g = initial_genome(9, 2, None, rng)
        x = rng.uniform(-1, 1, 9)
        x[-1] = 1.0
        base = Network(g).activate(x).module_index
        # adding the same pre-activation offset to both preference neurons
        # (through the bias input) keeps their order since tanh is monotone
        shift = 0.3
        links = tuple(
            replace(l, weight=l.weight + shift) if l.source == 8 and l.target in (9 + 5, 9 + 11) else l
            for l in g.links
        )
        assert Network(replace(g, links=links)).activate(x).module_index == base


def test_one_and_two_module_nets_agree_when_module_zero_wins():
    rng = np.random.default_rng(21)
    g1 = initial_genome(9, 1, None, rng)
    w = {(l.source, l.target): l.weight for l in g1.links}
    links = []
    for k, (s, t) in enumerate((s, t) for s in range(9) for t in range(9, 21)):
        o = t - 9
        if o < 5:
            weight = w[(s, 9 + o)]
        elif o == 5:
            weight = 5.0 if s == 8 else 0.0  # module 0 preference saturates high
        elif o == 11:
            weight = -5.0 if s == 8 else 0.0
        else:
            weight = 0.0
        links.append(LinkGene(k, s, t, weight))
    g2 = replace(initial_genome(9, 2, None, rng), links=tuple(links))
    n1, n2 = Network(g1), Network(g2)
    for x in rng.uniform(-1, 1, (100, 9)):
        x[-1] = 1.0
        c1, c2 = n1.activate(x), n2.activate(x)
        assert c2.module_index == 0
        assert select_action(c1) == select_action(c2)

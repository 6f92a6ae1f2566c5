"""Executable phenotype for a genome, with preference-neuron module arbitration."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .genome import INPUT, OUTPUT, Genome
from .world import Action


@dataclass(frozen=True)
class ModuleChoice:
    module_index: int
    policy_outputs: tuple[float, ...]


def _evaluation_order(n_inputs: int, n_neurons: int, edges: list[tuple[int, int]]) -> list[int]:
    """Topological order of non-input neurons; cycles are cut at the lowest index."""
    preds: dict[int, set[int]] = {n: set() for n in range(n_inputs, n_neurons)}
    for s, t in edges:
        if s >= n_inputs and s != t:
            preds[t].add(s)
    order: list[int] = []
    done: set[int] = set()
    remaining = set(preds)
    while remaining:
        ready = [n for n in remaining if preds[n] <= done]
        nxt = min(ready) if ready else min(remaining)
        order.append(nxt)
        done.add(nxt)
        remaining.discard(nxt)
    return order


class Network:
    """Flattened neuron graph with persistent activations.

    Neurons are indexed locally: inputs first, then outputs, then hidden
    neurons in genome order. One call to :meth:`activate` is one synchronous
    pass in topological order; links whose source has not yet been computed
    in the current pass (recurrent links, self-loops) see last step's value.
    Hidden and output neurons use tanh.
    """

    def __init__(self, genome: Genome):
        genome.validate()
        self.num_inputs = genome.num_inputs
        self.num_modules = genome.num_modules
        self.num_outputs = genome.num_outputs
        self.policy_outputs = genome.policy_outputs_per_module
        ins = [n.id for n in genome.neurons if n.layer_role == INPUT]
        outs = [n.id for n in genome.neurons if n.layer_role == OUTPUT]
        hidden = [n.id for n in genome.neurons if n.layer_role not in (INPUT, OUTPUT)]
        local = {nid: k for k, nid in enumerate(ins + outs + hidden)}
        self.num_neurons = len(local)

        edges = [(local[l.source], local[l.target], l.weight) for l in genome.links if l.enabled]
        self.order = _evaluation_order(self.num_inputs, self.num_neurons, [(s, t) for s, t, _ in edges])
        incoming: dict[int, list[tuple[int, float]]] = {n: [] for n in self.order}
        for s, t, w in edges:
            incoming[t].append((s, w))
        self.in_ptr = [0]
        self.in_src: list[int] = []
        self.in_w: list[float] = []
        for n in self.order:
            for s, w in incoming[n]:
                self.in_src.append(s)
                self.in_w.append(w)
            self.in_ptr.append(len(self.in_src))
        self.activations = [0.0] * self.num_neurons

    def reset(self) -> None:
        self.activations = [0.0] * self.num_neurons

    def activate(self, inputs) -> ModuleChoice:
        if len(inputs) != self.num_inputs:
            raise ValueError(f"expected {self.num_inputs} inputs, got {len(inputs)}")
        act = self.activations
        for k in range(self.num_inputs):
            act[k] = float(inputs[k])
        src, w, ptr = self.in_src, self.in_w, self.in_ptr
        for pos, n in enumerate(self.order):
            s = 0.0
            for e in range(ptr[pos], ptr[pos + 1]):
                s += w[e] * act[src[e]]
            act[n] = math.tanh(s)
        return self.choose_module()

    def outputs(self) -> list[float]:
        base = self.num_inputs
        return self.activations[base : base + self.num_outputs]

    def choose_module(self) -> ModuleChoice:
        out = self.outputs()
        p = self.policy_outputs
        if self.num_modules == 1:
            return ModuleChoice(0, tuple(out[:p]))
        width = p + 1
        best, best_pref = 0, out[p]
        for m in range(1, self.num_modules):
            pref = out[m * width + p]
            if pref > best_pref:
                best, best_pref = m, pref
        return ModuleChoice(best, tuple(out[best * width : best * width + p]))

    def packed(self):
        """Arrays consumed by the compiled simulator."""
        return (
            np.asarray(self.order, dtype=np.int64),
            np.asarray(self.in_ptr, dtype=np.int64),
            np.asarray(self.in_src, dtype=np.int64),
            np.asarray(self.in_w, dtype=np.float64),
        )


def build_network(genome: Genome) -> Network:
    return Network(genome)


def activate(net: Network, inputs) -> ModuleChoice:
    return net.activate(inputs)


def reset(net: Network) -> None:
    net.reset()


def select_action(choice: ModuleChoice) -> Action:
    """Argmax over (Up, Down, Left, Right, Still); ties go to the lowest index."""
    outs = choice.policy_outputs
    best = 0
    for k in range(1, len(outs)):
        if outs[k] > outs[best]:
            best = k
    return Action(best)

"""NEAT-style genomes with innovation bookkeeping, mutation and aligned crossover.

Neuron ids are laid out identically in every genome of a run: inputs take
``0 .. num_inputs-1``, outputs follow, hidden neurons get ids handed out by
the :class:`InnovationRegistry`. Output order per module is the five policy
neurons (Up, Down, Left, Right, Still) followed by the module's preference
neuron when there are two modules.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, replace

import numpy as np

POLICY_OUTPUTS = 5
INPUT, HIDDEN, OUTPUT = "input", "hidden", "output"

WEIGHT_SIGMA = 1.0


@dataclass(frozen=True)
class NeuronGene:
    id: int
    layer_role: str


@dataclass(frozen=True)
class LinkGene:
    innovation: int
    source: int
    target: int
    weight: float
    enabled: bool = True


def num_outputs_for(num_modules: int, policy_outputs: int = POLICY_OUTPUTS) -> int:
    if num_modules not in (1, 2):
        raise ValueError(f"num_modules must be 1 or 2, got {num_modules}")
    return num_modules * (policy_outputs + (1 if num_modules >= 2 else 0))


@dataclass(frozen=True)
class Genome:
    neurons: tuple[NeuronGene, ...]
    links: tuple[LinkGene, ...]
    num_modules: int
    num_inputs: int
    policy_outputs_per_module: int = POLICY_OUTPUTS

    @property
    def num_outputs(self) -> int:
        return num_outputs_for(self.num_modules, self.policy_outputs_per_module)

    @property
    def signature(self) -> tuple[int, int, int]:
        return (self.num_inputs, self.num_modules, self.policy_outputs_per_module)

    def innovations(self) -> set[int]:
        return {l.innovation for l in self.links}

    def neuron_ids(self) -> set[int]:
        return {n.id for n in self.neurons}

    def to_dict(self) -> dict:
        return {
            "num_inputs": self.num_inputs,
            "num_modules": self.num_modules,
            "policy_outputs_per_module": self.policy_outputs_per_module,
            "neurons": [[n.id, n.layer_role] for n in self.neurons],
            "links": [
                [l.innovation, l.source, l.target, l.weight, l.enabled] for l in self.links
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Genome":
        g = cls(
            neurons=tuple(NeuronGene(int(i), str(r)) for i, r in d["neurons"]),
            links=tuple(
                LinkGene(int(n), int(s), int(t), float(w), bool(e)) for n, s, t, w, e in d["links"]
            ),
            num_modules=int(d["num_modules"]),
            num_inputs=int(d["num_inputs"]),
            policy_outputs_per_module=int(d.get("policy_outputs_per_module", POLICY_OUTPUTS)),
        )
        g.validate()
        return g

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "Genome":
        return cls.from_dict(json.loads(text))

    def validate(self) -> None:
        """Raise ValueError if any structural invariant is broken."""
        ids = [n.id for n in self.neurons]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate neuron ids")
        roles = {n.id: n.layer_role for n in self.neurons}
        expect_in = list(range(self.num_inputs))
        expect_out = list(range(self.num_inputs, self.num_inputs + self.num_outputs))
        if [i for i in ids if roles[i] == INPUT] != expect_in:
            raise ValueError("input neurons missing or misnumbered")
        if [i for i in ids if roles[i] == OUTPUT] != expect_out:
            raise ValueError("output neurons missing or misnumbered")
        innovs = [l.innovation for l in self.links]
        if innovs != sorted(innovs) or len(set(innovs)) != len(innovs):
            raise ValueError("links must be sorted by unique innovation number")
        pairs = set()
        for l in self.links:
            if l.source not in roles or l.target not in roles:
                raise ValueError(f"link {l.innovation} references a missing neuron")
            if roles[l.target] == INPUT:
                raise ValueError(f"link {l.innovation} targets an input neuron")
            if l.enabled:
                if (l.source, l.target) in pairs:
                    raise ValueError(f"duplicate enabled link {l.source}->{l.target}")
                pairs.add((l.source, l.target))


class InnovationRegistry:
    """Hands out innovation numbers and hidden-neuron ids.

    Identical structural events within one generation get identical numbers;
    :meth:`new_generation` forgets the events but keeps the counters running.
    """

    def __init__(self, num_inputs: int, num_modules: int):
        n_out = num_outputs_for(num_modules)
        self.num_inputs = num_inputs
        self.num_modules = num_modules
        self.next_innovation = num_inputs * n_out
        self.next_neuron = num_inputs + n_out
        self._links: dict[tuple[int, int], int] = {}
        self._splices: dict[int, tuple[int, int, int]] = {}

    def new_generation(self) -> None:
        self._links.clear()
        self._splices.clear()

    def fresh_innovation(self) -> int:
        n = self.next_innovation
        self.next_innovation += 1
        return n

    def fresh_neuron(self) -> int:
        n = self.next_neuron
        self.next_neuron += 1
        return n

    def link(self, source: int, target: int) -> int:
        key = (source, target)
        if key not in self._links:
            self._links[key] = self.fresh_innovation()
        return self._links[key]

    def splice(self, innovation: int) -> tuple[int, int, int]:
        """Return (neuron id, in-link innovation, out-link innovation) for a split."""
        if innovation not in self._splices:
            self._splices[innovation] = (
                self.fresh_neuron(),
                self.fresh_innovation(),
                self.fresh_innovation(),
            )
        return self._splices[innovation]

    def state(self) -> dict:
        return {"next_innovation": self.next_innovation, "next_neuron": self.next_neuron}


def initial_genome(num_inputs: int, num_modules: int, registry: InnovationRegistry | None, rng) -> Genome:
    """Fully connected input-to-output genome with no hidden neurons.

    Initial link innovations are ``input * num_outputs + output`` for every
    genome, so fresh populations align under crossover.
    """
    if num_inputs < 1:
        raise ValueError("num_inputs must be >= 1")
    n_out = num_outputs_for(num_modules)
    neurons = [NeuronGene(i, INPUT) for i in range(num_inputs)]
    neurons += [NeuronGene(num_inputs + o, OUTPUT) for o in range(n_out)]
    weights = rng.uniform(-1.0, 1.0, size=num_inputs * n_out)
    links = [
        LinkGene(i * n_out + o, i, num_inputs + o, float(weights[i * n_out + o]))
        for i in range(num_inputs)
        for o in range(n_out)
    ]
    return Genome(tuple(neurons), tuple(links), num_modules, num_inputs)


def mutate_weights(g: Genome, per_link_rate: float, rng, sigma: float = WEIGHT_SIGMA) -> Genome:
    if not g.links:
        return g
    hit = rng.random(len(g.links)) < per_link_rate
    if not hit.any():
        return g
    noise = rng.normal(0.0, 1.0, size=len(g.links)) * sigma
    links = tuple(
        replace(l, weight=l.weight + float(noise[k])) if hit[k] else l for k, l in enumerate(g.links)
    )
    return replace(g, links=links)


def _insert_sorted(links: list[LinkGene], new: list[LinkGene]) -> tuple[LinkGene, ...]:
    return tuple(sorted(links + new, key=lambda l: l.innovation))


def mutate_add_link(g: Genome, registry: InnovationRegistry, rng) -> Genome:
    """Add one link between a random ordered pair not joined by an enabled link.

    Sources may be any neuron, targets any non-input neuron; self-loops and
    recurrent links are allowed.
    """
    connected = {(l.source, l.target) for l in g.links if l.enabled}
    sources = [n.id for n in g.neurons]
    targets = [n.id for n in g.neurons if n.layer_role != INPUT]
    free = [(s, t) for s in sources for t in targets if (s, t) not in connected]
    if not free:
        return g
    s, t = free[int(rng.integers(len(free)))]
    innov = registry.link(s, t)
    if innov in g.innovations():
        innov = registry.fresh_innovation()
    weight = float(rng.uniform(-1.0, 1.0))
    return replace(g, links=_insert_sorted(list(g.links), [LinkGene(innov, s, t, weight)]))


def mutate_splice_neuron(g: Genome, registry: InnovationRegistry, rng) -> Genome:
    """Split a random enabled link with a new hidden neuron (in 1.0, out old weight)."""
    enabled = [k for k, l in enumerate(g.links) if l.enabled]
    if not enabled:
        return g
    k = enabled[int(rng.integers(len(enabled)))]
    old = g.links[k]
    neuron, in_innov, out_innov = registry.splice(old.innovation)
    if neuron in g.neuron_ids() or {in_innov, out_innov} & g.innovations():
        # this genome already carries the registered split; make a distinct one
        neuron = registry.fresh_neuron()
        in_innov, out_innov = registry.fresh_innovation(), registry.fresh_innovation()
    links = list(g.links)
    links[k] = replace(old, enabled=False)
    new_links = [
        LinkGene(in_innov, old.source, neuron, 1.0),
        LinkGene(out_innov, neuron, old.target, old.weight),
    ]
    return replace(
        g,
        neurons=g.neurons + (NeuronGene(neuron, HIDDEN),),
        links=_insert_sorted(links, new_links),
    )


def crossover(parent_a: Genome, parent_b: Genome, rng) -> Genome:
    """Align links by innovation; ``parent_a`` is treated as the fitter parent.

    Matching genes come from either parent with equal probability; disjoint
    and excess genes come from ``parent_a`` only.
    """
    if parent_a.signature != parent_b.signature:
        raise ValueError(f"parent signatures differ: {parent_a.signature} vs {parent_b.signature}")
    other = {l.innovation: l for l in parent_b.links}
    coins = rng.random(len(parent_a.links)) < 0.5
    links: list[LinkGene] = []
    for k, la in enumerate(parent_a.links):
        lb = other.get(la.innovation)
        links.append(lb if lb is not None and coins[k] else la)

    # a matching gene from b may re-enable a pair a already links by another innovation
    seen: set[tuple[int, int]] = set()
    for k, l in enumerate(links):
        if l.enabled:
            if (l.source, l.target) in seen:
                links[k] = replace(l, enabled=False)
            else:
                seen.add((l.source, l.target))

    referenced = {n for l in links for n in (l.source, l.target)}
    roles = {n.id: n.layer_role for n in parent_a.neurons}
    roles.update({n.id: n.layer_role for n in parent_b.neurons if n.id not in roles})
    neurons = [n for n in parent_a.neurons if n.layer_role != HIDDEN]
    hidden = sorted(i for i in referenced if roles[i] == HIDDEN)
    neurons += [NeuronGene(i, HIDDEN) for i in hidden]
    return Genome(
        tuple(neurons),
        tuple(links),
        parent_a.num_modules,
        parent_a.num_inputs,
        parent_a.policy_outputs_per_module,
    )

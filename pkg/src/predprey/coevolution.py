"""Cooperative coevolution of predator sub-populations under NSGA-II.

Every random stream is derived from the master seed plus a fixed key, so a
run is reproducible and can be resumed from any checkpoint:

* initial genomes: ``(seed, 0, INIT, role)``
* team formation: ``(seed, generation, TEAMS)``
* one episode: ``(seed, generation, EPISODE, round, team)``
* reproduction: ``(seed, generation, BREED, role)``
"""
from __future__ import annotations

import json
import logging
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import nsga2
from .agents import sensor_count
from .fastsim import PackedNetworks, simulate_batch
from .genome import (
    Genome,
    InnovationRegistry,
    crossover,
    initial_genome,
    mutate_add_link,
    mutate_splice_neuron,
    mutate_weights,
)
from .network import Network
from .objectives import ObjectiveVector, SelectionScheme, assemble, labels_for, team_catch
from .world import EpisodeOutcome, WorldConfig, draw_episode_randomness

log = logging.getLogger(__name__)

INIT, TEAMS, EPISODE, BREED = 0, 1, 2, 3

# episodes per compiled-simulator call; bounds the tie-break block in memory
BATCH = 512


@dataclass
class EvolutionConfig:
    mu: int = 200
    lam: int = 200
    generations: int = 300
    trials: int = 10
    scheme: SelectionScheme = SelectionScheme.BOTH
    num_modules: int = 1
    weight_rate: float = 0.05
    add_link_rate: float = 0.40
    splice_rate: float = 0.20
    crossover_rate: float = 0.50
    seed: int = 0

    def __post_init__(self):
        self.scheme = SelectionScheme(self.scheme)
        self.validate()

    def validate(self) -> None:
        for name in ("mu", "lam", "generations", "trials"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be >= 1, got {getattr(self, name)}")
        for name in ("weight_rate", "add_link_rate", "splice_rate", "crossover_rate"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if self.num_modules not in (1, 2):
            raise ValueError(f"num_modules must be 1 or 2, got {self.num_modules}")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["scheme"] = self.scheme.value
        return d


@dataclass
class Member:
    id: int
    genome: Genome


@dataclass
class SubPopulation:
    role_index: int
    members: list[Member]

    def ids(self) -> list[int]:
        return [m.id for m in self.members]


@dataclass(frozen=True)
class TeamAssignment:
    members: tuple[int, ...]  # genotype id per role
    round: int
    index: int


def stream(*key: int) -> np.random.Generator:
    return np.random.default_rng(list(key))


def form_teams(subpops: Sequence[SubPopulation], trials: int, rng) -> list[TeamAssignment]:
    """Shuffle-and-zip rounds: every genotype lands in exactly ``trials`` teams."""
    sizes = {len(s.members) for s in subpops}
    if len(sizes) != 1:
        raise ValueError(f"sub-populations differ in size: {sorted(sizes)}")
    teams: list[TeamAssignment] = []
    for r in range(trials):
        columns = [[s.members[k].id for k in rng.permutation(len(s.members))] for s in subpops]
        for t, ids in enumerate(zip(*columns)):
            teams.append(TeamAssignment(tuple(int(i) for i in ids), r, t))
    return teams


@dataclass
class Evaluation:
    fitness: dict[int, ObjectiveVector]
    mean_team_catch: dict[int, float]
    teams: list[TeamAssignment]
    outcomes: list[EpisodeOutcome]


def evaluate_teams(
    subpops: Sequence[SubPopulation],
    teams: Sequence[TeamAssignment],
    world_cfg: WorldConfig,
    seed: int,
    generation: int,
) -> list[EpisodeOutcome]:
    index: dict[int, int] = {}
    nets: list[Network] = []
    for s in subpops:
        for m in s.members:
            index[m.id] = len(nets)
            nets.append(Network(m.genome))
    packed = PackedNetworks(nets)
    outcomes: list[EpisodeOutcome] = []
    for lo in range(0, len(teams), BATCH):
        chunk = teams[lo : lo + BATCH]
        starts, draws = [], []
        for t in chunk:
            st, dr = draw_episode_randomness(world_cfg, stream(seed, generation, EPISODE, t.round, t.index))
            starts.append(st)
            draws.append(dr)
        table = np.array([[index[i] for i in t.members] for t in chunk], dtype=np.int64)
        outcomes += simulate_batch(packed, table, starts, np.stack(draws), world_cfg)
    return outcomes


def evaluate_generation(
    subpops: Sequence[SubPopulation],
    cfg: EvolutionConfig,
    world_cfg: WorldConfig,
    generation: int = 0,
) -> Evaluation:
    """Form teams, run one episode per team and score every genotype."""
    teams = form_teams(subpops, cfg.trials, stream(cfg.seed, generation, TEAMS))
    outcomes = evaluate_teams(subpops, teams, world_cfg, cfg.seed, generation)
    per: dict[int, list[EpisodeOutcome]] = {}
    role: dict[int, int] = {}
    for t, o in zip(teams, outcomes):
        for i, gid in enumerate(t.members):
            per.setdefault(gid, []).append(o)
            role[gid] = i
    fitness = {gid: assemble(cfg.scheme, role[gid], outs) for gid, outs in per.items()}
    catches = {gid: float(np.mean([team_catch(o) for o in outs])) for gid, outs in per.items()}
    return Evaluation(fitness, catches, teams, outcomes)


def breed(
    pool: Sequence[nsga2.RankedIndividual],
    genomes: dict[int, Genome],
    cfg: EvolutionConfig,
    registry: InnovationRegistry,
    rng,
) -> Genome:
    """Crossover or clone, then splice, then add-link, then weight perturbation."""
    a = nsga2.tournament_pick(pool, rng)
    if rng.random() < cfg.crossover_rate:
        b = nsga2.tournament_pick(pool, rng)
        child = crossover(genomes[a], genomes[b], rng)
    else:
        child = genomes[a]
    if rng.random() < cfg.splice_rate:
        child = mutate_splice_neuron(child, registry, rng)
    if rng.random() < cfg.add_link_rate:
        child = mutate_add_link(child, registry, rng)
    return mutate_weights(child, cfg.weight_rate, rng)


class Coevolution:
    """Run state: sub-populations awaiting evaluation plus id/innovation counters."""

    def __init__(self, cfg: EvolutionConfig, world_cfg: WorldConfig):
        self.cfg = cfg
        self.world_cfg = world_cfg
        self.num_inputs = sensor_count(world_cfg)
        self.registry = InnovationRegistry(self.num_inputs, cfg.num_modules)
        self.generation = 0
        self.next_id = 0
        self.subpops: list[SubPopulation] = []
        for role in range(world_cfg.num_predators):
            rng = stream(cfg.seed, 0, INIT, role)
            members = [
                Member(self._new_id(), initial_genome(self.num_inputs, cfg.num_modules, self.registry, rng))
                for _ in range(cfg.mu)
            ]
            self.subpops.append(SubPopulation(role, members))

    def _new_id(self) -> int:
        self.next_id += 1
        return self.next_id - 1

    def advance_generation(self, fitness: dict[int, ObjectiveVector]) -> list[list[nsga2.RankedIndividual]]:
        """Select survivors and breed children in every sub-population.

        The first generation has no children yet, so all members are parents.
        Afterwards the pool holds mu parents plus lam children and mu survive.
        Returns the ranked survivors per sub-population.
        """
        self.registry.new_generation()
        survivors_all = []
        for sp in self.subpops:
            missing = [m.id for m in sp.members if m.id not in fitness]
            if missing:
                raise KeyError(f"no fitness for genotypes {missing[:5]}")
            vals = [fitness[m.id].values for m in sp.members]
            ranked = nsga2.rank_population(vals, sp.ids())
            if self.generation == 0:
                survivors = ranked
            else:
                keep = set(nsga2.select_parents(ranked, self.cfg.mu))
                survivors = [r for r in ranked if r.id in keep]
            genomes = {m.id: m.genome for m in sp.members}
            rng = stream(self.cfg.seed, self.generation, BREED, sp.role_index)
            children = [
                Member(self._new_id(), breed(survivors, genomes, self.cfg, self.registry, rng))
                for _ in range(self.cfg.lam)
            ]
            keep_ids = {r.id for r in survivors}
            sp.members = [m for m in sp.members if m.id in keep_ids] + children
            survivors_all.append(survivors)
        self.generation += 1
        return survivors_all

    def evaluate(self) -> Evaluation:
        return evaluate_generation(self.subpops, self.cfg, self.world_cfg, self.generation)

    # checkpointing -------------------------------------------------------

    def state_dict(self) -> dict:
        return {
            "config": self.cfg.to_dict(),
            "world": asdict(self.world_cfg),
            "generation": self.generation,
            "next_id": self.next_id,
            "registry": self.registry.state(),
            "subpops": [
                {"role": sp.role_index, "members": [[m.id, m.genome.to_dict()] for m in sp.members]}
                for sp in self.subpops
            ],
        }

    def save(self, path: Path, log_state: dict | None = None) -> None:
        d = self.state_dict()
        if log_state is not None:
            d["log"] = log_state
        tmp = Path(path).with_suffix(".tmp")
        tmp.write_text(json.dumps(d))
        tmp.replace(path)

    @classmethod
    def load(cls, path: Path) -> "Coevolution":
        d = json.loads(Path(path).read_text())
        cfg = EvolutionConfig(**d["config"])
        world_cfg = WorldConfig(**d["world"])
        obj = cls.__new__(cls)
        obj.cfg = cfg
        obj.world_cfg = world_cfg
        obj.num_inputs = sensor_count(world_cfg)
        obj.registry = InnovationRegistry(obj.num_inputs, cfg.num_modules)
        obj.registry.next_innovation = d["registry"]["next_innovation"]
        obj.registry.next_neuron = d["registry"]["next_neuron"]
        obj.generation = d["generation"]
        obj.next_id = d["next_id"]
        obj.subpops = [
            SubPopulation(sp["role"], [Member(i, Genome.from_dict(g)) for i, g in sp["members"]])
            for sp in d["subpops"]
        ]
        return obj


@dataclass
class RunLog:
    labels: tuple[str, ...]
    num_subpops: int
    rows: list[dict] = field(default_factory=list)
    wall_clock: list[float] = field(default_factory=list)
    champions: list[Genome] = field(default_factory=list)
    champion_ids: list[int] = field(default_factory=list)
    team_log: list[tuple[int, TeamAssignment]] = field(default_factory=list)

    def columns(self) -> list[str]:
        cols = ["generation"]
        for p in range(self.num_subpops):
            for lab in self.labels:
                cols += [f"pop{p}_{lab}_best", f"pop{p}_{lab}_mean"]
        cols.append("champion_mean_captures")
        return cols


def generation_row(generation: int, subpops, ev: Evaluation, labels) -> dict:
    """Statistics for one evaluated generation.

    The champion is the sub-population 0 genotype with the highest mean team
    captures over its trials (first one on ties).
    """
    row: dict = {"generation": generation}
    for sp in subpops:
        vals = np.array([ev.fitness[m.id].values for m in sp.members])
        for k, lab in enumerate(labels):
            row[f"pop{sp.role_index}_{lab}_best"] = float(vals[:, k].max())
            row[f"pop{sp.role_index}_{lab}_mean"] = float(vals[:, k].mean())
    row["champion_mean_captures"] = max(ev.mean_team_catch[m.id] for m in subpops[0].members)
    return row


def champions(subpops, ev: Evaluation) -> list[Member]:
    """Per sub-population genotype with the highest mean team captures."""
    out = []
    for sp in subpops:
        best = max(sp.members, key=lambda m: ev.mean_team_catch[m.id])
        out.append(best)
    return out


def run_evolution(
    cfg: EvolutionConfig,
    world_cfg: WorldConfig,
    *,
    log_teams: bool = False,
    checkpoint: Path | None = None,
    resume: Coevolution | None = None,
    on_generation: Callable[[dict], None] | None = None,
) -> RunLog:
    """Evaluate, log and reproduce for ``cfg.generations`` generations.

    With ``checkpoint`` set, state is saved after every generation and an
    existing checkpoint from the same configuration is resumed, rows included.
    """
    labels = labels_for(cfg.scheme, world_cfg.num_prey)
    run = RunLog(labels, world_cfg.num_predators)
    evo = resume
    if evo is None and checkpoint is not None and Path(checkpoint).exists():
        evo = _resume_from(checkpoint, cfg, world_cfg, run)
    if evo is None:
        evo = Coevolution(cfg, world_cfg)
    while evo.generation < cfg.generations:
        t0 = time.perf_counter()
        g = evo.generation
        ev = evo.evaluate()
        row = generation_row(g, evo.subpops, ev, labels)
        run.rows.append(row)
        if log_teams:
            run.team_log += [(g, t) for t in ev.teams]
        if g == cfg.generations - 1:
            champs = champions(evo.subpops, ev)
            run.champions = [m.genome for m in champs]
            run.champion_ids = [m.id for m in champs]
        evo.advance_generation(ev.fitness)
        run.wall_clock.append(time.perf_counter() - t0)
        if checkpoint is not None:
            evo.save(checkpoint, {
                "rows": run.rows,
                "wall_clock": run.wall_clock,
                "champions": [[i, g.to_dict()] for i, g in zip(run.champion_ids, run.champions)],
            })
        log.info("generation %d champion captures %.3f", g, row["champion_mean_captures"])
        if on_generation is not None:
            on_generation(row)
    return run


def _resume_from(path: Path, cfg: EvolutionConfig, world_cfg: WorldConfig, run: RunLog) -> Coevolution:
    evo = Coevolution.load(path)
    saved = {k: v for k, v in evo.cfg.to_dict().items() if k != "generations"}
    wanted = {k: v for k, v in cfg.to_dict().items() if k != "generations"}
    if saved != wanted or evo.world_cfg != world_cfg:
        raise ValueError(f"checkpoint {path} was written by a different configuration")
    if evo.generation > cfg.generations:
        raise ValueError(f"checkpoint {path} is already past generation {cfg.generations}")
    d = json.loads(Path(path).read_text())
    run.rows += d.get("log", {}).get("rows", [])
    run.wall_clock += d.get("log", {}).get("wall_clock", [])
    for gid, g in d.get("log", {}).get("champions", []):
        run.champion_ids.append(gid)
        run.champions.append(Genome.from_dict(g))
    evo.cfg = cfg
    log.info("resuming from %s at generation %d", path, evo.generation)
    return evo

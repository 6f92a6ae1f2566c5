"""Acceptance gates. Each test reports one PASS/FAIL line in the terminal summary.

The desk-scale evolution gate runs 60 evolutionary runs and takes a while.
Point PREDPREY_ACCEPTANCE_DIR at a directory to keep its results and reuse
them on the next invocation; by default a temporary directory is used.
"""
import csv
import itertools
import json
import math
import os
from collections import Counter
from pathlib import Path

import numpy as np
import pytest

from factories import random_feedforward_genome
from oracles import feedforward_outputs, layered_fronts_bf
from predprey.cli import main
from predprey.experiment import build_spec, run_experiment
from predprey.genome import (
    INPUT,
    OUTPUT,
    Genome,
    InnovationRegistry,
    LinkGene,
    NeuronGene,
    crossover,
    initial_genome,
    mutate_add_link,
    mutate_splice_neuron,
    mutate_weights,
)
from predprey.network import Network
from predprey.nsga2 import crowding_distance, sort_fronts
from predprey.prey import choose_prey_action
from predprey.world import MOVES, GridPosition as P, WorldConfig, initial_state, move, torus_manhattan

DESK = {"grid": 20, "pop": 50, "trials": 5, "generations": 60, "runs": 10, "seed": 1000}
ACCEPTANCE_KEY = pytest.StashKey[list]()
DESK_SETUPS = ("Team1M", "Individual1M", "Both1M", "Team2M", "Individual2M", "Both2M")


@pytest.fixture
def report(request):
    lines = request.config.stash.setdefault(ACCEPTANCE_KEY, [])

    def _report(label, ok, detail=""):
        line = f"{'PASS' if ok else 'FAIL'}  {label}" + (f": {detail}" if detail else "")
        lines.append(line)
        print(line)
        return ok

    return _report


# 1 ---------------------------------------------------------------------


def _desk_results(tmp_root: Path) -> dict[str, dict]:
    root = Path(os.environ.get("PREDPREY_ACCEPTANCE_DIR") or tmp_root)
    finals = {}
    for name in DESK_SETUPS:
        spec = build_spec(name, {**DESK, "out": root})
        summary = spec.run_dir / "summary.csv"
        if not (summary.exists() and _cached_matches(spec)):
            run_experiment(spec)
        with open(summary) as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == DESK["generations"]
        finals[name] = {k: float(v) for k, v in rows[-1].items()}
    return finals


def _cached_matches(spec) -> bool:
    for r in range(spec.num_runs):
        meta = spec.run_dir / f"run_{r:03d}_meta.json"
        if not meta.exists():
            return False
        m = json.loads(meta.read_text())
        if m["evolution"]["seed"] != spec.run_seed(r) or m["evolution"]["generations"] != DESK["generations"]:
            return False
        if m["evolution"]["mu"] != DESK["pop"] or m["evolution"]["trials"] != DESK["trials"]:
            return False
        if m["world"]["width"] != DESK["grid"] or m["world"]["time_limit"] != spec.world.time_limit:
            return False
    return True


@pytest.fixture(scope="module")
def desk(tmp_path_factory):
    return _desk_results(tmp_path_factory.mktemp("desk"))


def _fmt(s):
    return f"{s['mean_champion_captures']:.3f} [{s['ci95_low']:.3f}, {s['ci95_high']:.3f}]"


def _below(lo, hi):
    return lo["ci95_high"] < hi["ci95_low"] and lo["mean_champion_captures"] < hi["mean_champion_captures"]


@pytest.mark.slow
def test_c1a_team_selection_inferior(desk, report):
    t, i, b = desk["Team1M"], desk["Individual1M"], desk["Both1M"]
    ok = _below(t, i) and _below(t, b)
    detail = f"Team1M {_fmt(t)} vs Individual1M {_fmt(i)}, Both1M {_fmt(b)}"
    assert report("1A desk trend: Team1M below Individual1M and Both1M", ok, detail), detail


@pytest.mark.slow
def test_c1b_two_modules_superior(desk, report):
    pairs = [(f"{s}1M", f"{s}2M") for s in ("Individual", "Team", "Both")]
    ok = _below(desk["Team1M"], desk["Team2M"]) and all(
        desk[m2]["mean_champion_captures"] >= desk[m1]["mean_champion_captures"] for m1, m2 in pairs
    )
    detail = "; ".join(f"{m1} {_fmt(desk[m1])} vs {m2} {_fmt(desk[m2])}" for m1, m2 in pairs)
    assert report("1B desk trend: every 2M at least its 1M, Team2M above Team1M", ok, detail), detail


@pytest.mark.slow
def test_c1c_ceiling(desk, report):
    best = max(("Individual2M", "Team2M", "Both2M"), key=lambda s: desk[s]["mean_champion_captures"])
    ok = desk[best]["mean_champion_captures"] >= 1.8
    detail = f"best 2M setup {best} {_fmt(desk[best])}"
    assert report("1C desk ceiling: some 2M setup reaches 1.8", ok, detail), detail


# 2 ---------------------------------------------------------------------


def test_c2_sort_fronts_matches_oracle(report):
    rng = np.random.default_rng(2)
    mismatches = 0
    for k in range(1000):
        n = int(rng.integers(1, 101))
        m = int(rng.integers(2, 7))
        # alternate coarse integer grids (many ties) and continuous values
        pop = rng.integers(0, 4, size=(n, m)).tolist() if k % 2 else rng.normal(size=(n, m)).tolist()
        mismatches += [sorted(f) for f in sort_fronts(pop)] != layered_fronts_bf(pop)
    assert report("2 sort_fronts vs brute-force layering", mismatches == 0, f"{mismatches} mismatches / 1000")


# 3 ---------------------------------------------------------------------


def test_c3_crowding_hand_cases(report):
    d2 = crowding_distance([(0, 1), (1, 0)])
    d3 = crowding_distance([(0, 2), (1, 1), (2, 0)])
    d4 = crowding_distance([(1, 1)] * 4)
    ok = (
        d2 == [math.inf, math.inf]
        and d3[0] == d3[2] == math.inf
        and abs(d3[1] - 2.0) <= 1e-12
        and d4.count(math.inf) == 2
        and all(abs(x) <= 1e-12 for x in d4 if x != math.inf)
    )
    assert report("3 crowding distance hand cases", ok, f"{d2} {d3} {d4}")


# 4 ---------------------------------------------------------------------


def test_c4_prey_policy_oracle(report):
    cfg = WorldConfig(width=10, height=10, num_prey=1)
    rng = np.random.default_rng(4)
    outside = 0
    chosen = Counter()
    expected = Counter()
    variance = Counter()
    for _ in range(10_000):
        xy = rng.integers(0, 10, size=(4, 2))
        preds = [P(int(x), int(y)) for x, y in xy[:3]]
        prey = P(int(xy[3, 0]), int(xy[3, 1]))
        state = initial_state(preds, [prey], cfg)
        state.prey_alive = [True]
        a = choose_prey_action(0, state, cfg, rng)

        dists = [torus_manhattan(prey, p, cfg) for p in preds]
        nearest = [p for p, d in zip(preds, dists) if d == min(dists)]
        prob = dict.fromkeys(MOVES, 0.0)
        for p in nearest:
            after = {m: torus_manhattan(move(prey, m, cfg), p, cfg) for m in MOVES}
            best = [m for m in MOVES if after[m] == max(after.values())]
            for m in best:
                prob[m] += 1.0 / (len(nearest) * len(best))
        outside += prob[a] == 0.0
        if max(prob.values()) < 1.0:
            chosen[a] += 1
            for m in MOVES:
                expected[m] += prob[m]
                variance[m] += prob[m] * (1.0 - prob[m])
    z = {m.name: (chosen[m] - expected[m]) / math.sqrt(variance[m]) for m in MOVES}
    ok = outside == 0 and all(abs(v) <= 3.0 for v in z.values())
    detail = f"{outside} outside argmax set; tie-break z-scores " + ", ".join(f"{k} {v:+.2f}" for k, v in z.items())
    assert report("4 prey policy vs brute force", ok, detail), detail


# 5 ---------------------------------------------------------------------


def test_c5_torus_metric_axioms(report):
    cfg = WorldConfig(width=10, height=10)
    cells = [P(x, y) for x in range(10) for y in range(10)]
    d = np.array([[torus_manhattan(a, b, cfg) for b in cells] for a in cells])
    violations = int((d != d.T).sum())
    violations += int((np.diag(d) != 0).sum()) + int(((d == 0) & ~np.eye(100, dtype=bool)).sum())
    # d[i,k] <= d[i,j] + d[j,k] for every triple
    violations += int((d[:, None, :] > d[:, :, None] + d[None, :, :]).sum())
    violations += int((d > 10).sum())
    assert report("5 torus metric axioms on 10x10", violations == 0, f"{violations} violations, max {d.max()}")


# 6 ---------------------------------------------------------------------


def test_c6_network_matches_graph_evaluation(report):
    rng = np.random.default_rng(6)
    worst = 0.0
    for _ in range(1000):
        g = random_feedforward_genome(rng, num_modules=int(rng.integers(1, 3)))
        g = mutate_weights(g, 0.5, rng)
        x = rng.uniform(-1, 1, g.num_inputs)
        net = Network(g)
        net.activate(x)
        worst = max(worst, float(np.max(np.abs(net.outputs() - np.array(feedforward_outputs(g, x))))))
    assert report("6 phenotype vs brute-force graph evaluation", worst <= 1e-9, f"max abs error {worst:.2e}")


# 7 ---------------------------------------------------------------------


def test_c7_crossover_provenance(report):
    rng = np.random.default_rng(7)
    bad = 0
    for _ in range(1000):
        modules = int(rng.integers(1, 3))
        reg = InnovationRegistry(9, modules)
        base = initial_genome(9, modules, reg, rng)
        pair = []
        for _ in range(2):
            g = base
            for _ in range(int(rng.integers(0, 8))):
                g = mutate_splice_neuron(g, reg, rng) if rng.random() < 0.4 else mutate_add_link(g, reg, rng)
            pair.append(mutate_weights(g, 0.3, rng))
        a, b = pair
        child = crossover(a, b, rng)
        bad += not child.innovations() <= a.innovations() | b.innovations()
        bad += not set(child.neuron_ids()) <= set(a.neuron_ids()) | set(b.neuron_ids())
        same = crossover(a, a, rng)
        bad += same.links != a.links or sorted(same.neuron_ids()) != sorted(a.neuron_ids())
    assert report("7 crossover provenance and self-crossover", bad == 0, f"{bad} violations / 1000 pairs")


# 8 ---------------------------------------------------------------------


def test_c8_exact_participation(tmp_path, report):
    args = ["run", "custom", "--seed", "8", "--generations", "5", "--runs", "1", "--grid", "20",
            "--pop", "20", "--trials", "4", "--log-teams", "--out", str(tmp_path)]
    assert main(args) == 0
    with open(tmp_path / "custom" / "run_000_teams.csv") as fh:
        rows = list(csv.DictReader(fh))
    bad = 0
    for gen, group in itertools.groupby(rows, key=lambda r: r["generation"]):
        group = list(group)
        counts = Counter((k, r[k]) for r in group for k in ("pop0", "pop1", "pop2"))
        pool = 20 if gen == "0" else 40
        bad += len(counts) != 3 * pool or set(counts.values()) != {4}
    gens = len({r["generation"] for r in rows})
    ok = bad == 0 and gens == 5
    assert report("8 exact participation from team log", ok, f"{gens} generations, {bad} with wrong counts")


# 9 ---------------------------------------------------------------------


def test_c9_determinism(tmp_path, report):
    files = ("run_000.csv", "run_000_trace.jsonl", "summary.csv")
    outputs = []
    for tag in ("a", "b"):
        args = ["run", "custom", "--seed", "42", "--generations", "5", "--runs", "1", "--grid", "20",
                "--pop", "20", "--trials", "3", "--modules", "2", "--out", str(tmp_path / tag)]
        assert main(args) == 0
        outputs.append([(tmp_path / tag / "custom" / f).read_bytes() for f in files])
    ok = outputs[0] == outputs[1]
    assert report("9 byte-identical CSVs and traces for seed 42", ok, ", ".join(files))


# 10 --------------------------------------------------------------------


def _two_module_genome(pref0, pref1):
    """One constant input; module 0 votes Up, module 1 votes Right."""
    neurons = [NeuronGene(0, INPUT)] + [NeuronGene(1 + o, OUTPUT) for o in range(12)]
    links = [(0, 6, math.atanh(pref0)), (0, 12, math.atanh(pref1)), (0, 1, 0.5), (0, 10, 0.5)]
    return Genome(tuple(neurons), tuple(LinkGene(k, s, t, w) for k, (s, t, w) in enumerate(links)), 2, 1)


def test_c10_module_arbitration(report):
    a = Network(_two_module_genome(0.7, 0.3)).activate([1.0])
    b = Network(_two_module_genome(0.3, 0.7)).activate([1.0])
    ok = a.module_index == 0 and b.module_index == 1
    ok = ok and int(np.argmax(a.policy_outputs)) == 0 and int(np.argmax(b.policy_outputs)) == 3
    assert report("10 module arbitration 0.7/0.3", ok, f"modules {a.module_index}, {b.module_index}")

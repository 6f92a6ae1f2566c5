"""Experiment harness: named setups, batch runs, CSV logs, champion replay.

Output layout for ``run <name> --out DIR``::

    DIR/<name>/run_000.csv             per-generation statistics
    DIR/<name>/run_000_meta.json       configuration and wall-clock timings
    DIR/<name>/run_000_champions.json  final champion genome per sub-population
    DIR/<name>/run_000_trace.jsonl     replay of the champion team
    DIR/<name>/run_000_teams.csv       team membership (only with --log-teams)
    DIR/<name>/summary.csv             mean and 95% CI of champion captures
"""
from __future__ import annotations

import csv
import json
import logging
import math
import os
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .agents import NetworkController, sensor_count
from .coevolution import EPISODE, EvolutionConfig, RunLog, run_evolution, stream
from .genome import Genome
from .objectives import SelectionScheme
from .prey import PreyPolicy
from .world import EpisodeOutcome, WorldConfig, run_episode

log = logging.getLogger(__name__)

OUT_ENV = "PREDPREY_OUT"
DEFAULT_OUT = "results"

SETUPS: dict[str, tuple[SelectionScheme, int]] = {
    "Individual1M": (SelectionScheme.INDIVIDUAL, 1),
    "Individual2M": (SelectionScheme.INDIVIDUAL, 2),
    "Team1M": (SelectionScheme.TEAM, 1),
    "Team2M": (SelectionScheme.TEAM, 2),
    "Both1M": (SelectionScheme.BOTH, 1),
    "Both2M": (SelectionScheme.BOTH, 2),
}


class ConfigError(ValueError):
    """Invalid experiment configuration; the message names the field."""


@dataclass
class ExperimentSpec:
    name: str
    evolution: EvolutionConfig
    world: WorldConfig = field(default_factory=WorldConfig)
    num_runs: int = 30
    out_dir: Path = Path(DEFAULT_OUT)
    log_teams: bool = False
    checkpoint: bool = False

    def run_seed(self, run: int) -> int:
        return self.evolution.seed + run

    @property
    def run_dir(self) -> Path:
        return Path(self.out_dir) / self.name


def build_spec(name: str, overrides: dict) -> ExperimentSpec:
    """Defaults, then ``overrides`` (flat keys as in the config file)."""
    if name != "custom" and name not in SETUPS:
        raise ConfigError(f"name: unknown experiment {name!r}; expected one of {sorted(SETUPS)} or 'custom'")
    ov = {k.replace("-", "_"): v for k, v in overrides.items() if v is not None}
    evo_kw: dict = {}
    world_kw: dict = {}
    if name in SETUPS:
        scheme, modules = SETUPS[name]
        for key, bound in (("scheme", scheme.value), ("modules", modules)):
            if key in ov and str(ov[key]).lower() != str(bound).lower():
                raise ConfigError(f"{key}: {name} fixes {key}={bound}, got {ov[key]}")
        evo_kw.update(scheme=scheme, num_modules=modules)
    else:
        if "scheme" in ov:
            try:
                evo_kw["scheme"] = SelectionScheme.parse(str(ov["scheme"]))
            except ValueError as e:
                raise ConfigError(f"scheme: {e}") from None
        if "modules" in ov:
            evo_kw["num_modules"] = _int(ov, "modules")

    simple = {
        "seed": ("seed", evo_kw),
        "generations": ("generations", evo_kw),
        "trials": ("trials", evo_kw),
        "time_limit": ("time_limit", world_kw),
        "predators": ("num_predators", world_kw),
        "prey": ("num_prey", world_kw),
    }
    for key, (target, bucket) in simple.items():
        if key in ov:
            bucket[target] = _int(ov, key)
    if "pop" in ov:
        evo_kw["mu"] = evo_kw["lam"] = _int(ov, "pop")
    for key in ("mu", "lam"):
        if key in ov:
            evo_kw[key] = _int(ov, key)
    if "grid" in ov:
        world_kw["width"] = world_kw["height"] = _int(ov, "grid")
    for key in ("width", "height"):
        if key in ov:
            world_kw[key] = _int(ov, key)
    for key in ("weight", "add_link", "splice", "crossover"):
        full = f"rates.{key}"
        if full in ov:
            try:
                evo_kw[f"{key}_rate"] = float(ov[full])
            except (TypeError, ValueError):
                raise ConfigError(f"{full}: expected a number, got {ov[full]!r}") from None
            if not 0.0 <= evo_kw[f"{key}_rate"] <= 1.0:
                raise ConfigError(f"{full}: rate must lie in [0, 1], got {ov[full]}")

    for key in ("seed", "generations", "trials", "mu", "lam", "num_modules"):
        if key in evo_kw and evo_kw[key] < (0 if key == "seed" else 1):
            raise ConfigError(f"{key}: must be positive, got {evo_kw[key]}")
    if "num_modules" in evo_kw and evo_kw["num_modules"] not in (1, 2):
        raise ConfigError(f"modules: must be 1 or 2, got {evo_kw['num_modules']}")
    try:
        world = WorldConfig(**world_kw)
    except ValueError as e:
        raise ConfigError(f"world: {e}") from None
    try:
        evolution = EvolutionConfig(**evo_kw)
    except ValueError as e:
        raise ConfigError(str(e)) from None

    runs = _int(ov, "runs") if "runs" in ov else 30
    if runs < 1:
        raise ConfigError(f"runs: must be positive, got {runs}")
    out = Path(ov.get("out") or os.environ.get(OUT_ENV) or DEFAULT_OUT)
    return ExperimentSpec(
        name=name,
        evolution=evolution,
        world=world,
        num_runs=runs,
        out_dir=out,
        log_teams=bool(ov.get("log_teams", False)),
        checkpoint=bool(ov.get("checkpoint", False)),
    )


def _int(ov: dict, key: str) -> int:
    v = ov[key]
    try:
        if isinstance(v, bool) or float(v) != int(float(v)):
            raise ValueError
        return int(float(v))
    except (TypeError, ValueError):
        raise ConfigError(f"{key}: expected an integer, got {v!r}") from None


def load_config_file(path: Path) -> dict:
    """Flat JSON object; a nested ``rates`` object is flattened to ``rates.*`` keys."""
    data = json.loads(Path(path).read_text())
    if not isinstance(data, dict):
        raise ConfigError(f"config: {path} must hold a JSON object")
    flat = {k: v for k, v in data.items() if k != "rates"}
    for k, v in (data.get("rates") or {}).items():
        flat[f"rates.{k}"] = v
    return flat


# running ---------------------------------------------------------------


def write_run_csv(path: Path, run: RunLog) -> None:
    cols = run.columns()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for row in run.rows:
            w.writerow([row[c] for c in cols])


def read_champion_series(path: Path) -> list[float]:
    with open(path, newline="") as fh:
        return [float(r["champion_mean_captures"]) for r in csv.DictReader(fh)]


def summarize(series: Sequence[Sequence[float]]) -> list[dict]:
    """Per-generation mean and normal-approximation 95% CI across runs."""
    arr = np.asarray(series, dtype=float)
    n = arr.shape[0]
    out = []
    for g in range(arr.shape[1]):
        col = arr[:, g]
        mean = float(col.mean())
        se = float(col.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
        out.append(
            {
                "generation": g,
                "runs": n,
                "mean_champion_captures": mean,
                "ci95_low": mean - 1.96 * se,
                "ci95_high": mean + 1.96 * se,
            }
        )
    return out


def write_summary(path: Path, rows: list[dict]) -> None:
    cols = ["generation", "runs", "mean_champion_captures", "ci95_low", "ci95_high"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for r in rows:
            w.writerow([r[c] for c in cols])


def write_champions(path: Path, run: RunLog, spec: ExperimentSpec, seed: int) -> None:
    payload = {
        "experiment": spec.name,
        "seed": seed,
        "world": asdict(spec.world),
        "champions": [
            {"role": i, "id": gid, "genome": g.to_dict()}
            for i, (gid, g) in enumerate(zip(run.champion_ids, run.champions))
        ],
    }
    Path(path).write_text(json.dumps(payload, indent=1) + "\n")


def load_genomes(paths: Sequence[Path]) -> list[Genome]:
    """Genomes from champion files and/or single-genome JSON files, in order."""
    genomes: list[Genome] = []
    for p in paths:
        data = json.loads(Path(p).read_text())
        if "champions" in data:
            genomes += [Genome.from_dict(c["genome"]) for c in data["champions"]]
        else:
            genomes.append(Genome.from_dict(data))
    return genomes


def replay_champion(
    genomes: Sequence[Genome],
    world: WorldConfig,
    seed_key: Sequence[int],
    trace_path: Path | None = None,
) -> tuple[EpisodeOutcome, list[dict]]:
    """Re-run one episode with the pure-Python simulator and record its trace.

    ``seed_key`` is the stream key; pass ``(seed, generation, EPISODE, round,
    team)`` to reproduce a specific evaluation episode.
    """
    if len(genomes) != world.num_predators:
        raise ValueError(f"need {world.num_predators} genomes, got {len(genomes)}")
    for g in genomes:
        if g.num_inputs != sensor_count(world):
            raise ValueError(
                f"genome expects {g.num_inputs} inputs but the world provides {sensor_count(world)}"
            )
    ctrls = [NetworkController.from_genome(g) for g in genomes]
    trace: list[dict] = []
    outcome = run_episode(ctrls, PreyPolicy(), world, stream(*seed_key), trace=trace)
    if trace_path is not None:
        write_trace(trace_path, trace)
    return outcome, trace


def write_trace(path: Path, trace: list[dict]) -> None:
    with open(path, "w") as fh:
        for rec in trace:
            fh.write(json.dumps(rec, separators=(",", ":")) + "\n")


def run_experiment(spec: ExperimentSpec) -> int:
    out = spec.run_dir
    out.mkdir(parents=True, exist_ok=True)
    series = []
    for r in range(spec.num_runs):
        seed = spec.run_seed(r)
        evo = replace(spec.evolution, seed=seed)
        stem = out / f"run_{r:03d}"
        log.info("%s run %d/%d (seed %d)", spec.name, r + 1, spec.num_runs, seed)
        ckpt = stem.with_name(stem.name + "_checkpoint.json") if spec.checkpoint else None
        run = run_evolution(evo, spec.world, log_teams=spec.log_teams, checkpoint=ckpt)
        write_run_csv(stem.with_suffix(".csv"), run)
        write_champions(stem.with_name(stem.name + "_champions.json"), run, spec, seed)
        replay_champion(
            run.champions,
            spec.world,
            (seed, evo.generations, EPISODE, 0, 0),
            stem.with_name(stem.name + "_trace.jsonl"),
        )
        if spec.log_teams:
            with open(stem.with_name(stem.name + "_teams.csv"), "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["generation", "round", "team"] + [f"pop{i}" for i in range(spec.world.num_predators)])
                for g, t in run.team_log:
                    w.writerow([g, t.round, t.index, *t.members])
        meta = {
            "experiment": spec.name,
            "run": r,
            "evolution": evo.to_dict(),
            "world": asdict(spec.world),
            "wall_clock_seconds": run.wall_clock,
        }
        stem.with_name(stem.name + "_meta.json").write_text(json.dumps(meta, indent=1) + "\n")
        series.append([row["champion_mean_captures"] for row in run.rows])
    write_summary(out / "summary.csv", summarize(series))
    return 0

"""Capture and distance fitness functions and per-scheme objective vectors.

All objectives are maximised. Vectors for one scheme always carry the same
labels in the same order:

* ``individual``: IndCatch, IndDist0, IndDist1
* ``team``: TeamCatch, TeamDist0, TeamDist1
* ``both``: the individual labels followed by the team labels
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .world import EpisodeOutcome


class SelectionScheme(str, enum.Enum):
    INDIVIDUAL = "individual"
    TEAM = "team"
    BOTH = "both"

    @classmethod
    def parse(cls, text: str) -> "SelectionScheme":
        try:
            return cls(text.lower())
        except ValueError:
            raise ValueError(f"unknown selection scheme {text!r}") from None


@dataclass(frozen=True)
class ObjectiveVector:
    labels: tuple[str, ...]
    values: tuple[float, ...]

    def __len__(self) -> int:
        return len(self.values)


def ind_catch(outcome: EpisodeOutcome, i: int) -> float:
    return float(outcome.captures[i].sum())


def team_catch(outcome: EpisodeOutcome) -> float:
    return float(outcome.captures.max(axis=0).sum())


def ind_dist(outcome: EpisodeOutcome, i: int, j: int) -> float:
    return -float(outcome.final_distances[i, j])


def team_dist(outcome: EpisodeOutcome, j: int) -> float:
    return -float(outcome.final_distances[:, j].sum()) / outcome.final_distances.shape[0]


def labels_for(scheme: SelectionScheme, num_prey: int = 2) -> tuple[str, ...]:
    ind = ("IndCatch",) + tuple(f"IndDist{j}" for j in range(num_prey))
    team = ("TeamCatch",) + tuple(f"TeamDist{j}" for j in range(num_prey))
    scheme = SelectionScheme(scheme)
    if scheme is SelectionScheme.INDIVIDUAL:
        return ind
    if scheme is SelectionScheme.TEAM:
        return team
    return ind + team


def trial_vector(scheme: SelectionScheme, i: int, outcome: EpisodeOutcome) -> ObjectiveVector:
    scheme = SelectionScheme(scheme)
    num_prey = outcome.captures.shape[1]
    values: list[float] = []
    if scheme in (SelectionScheme.INDIVIDUAL, SelectionScheme.BOTH):
        values.append(ind_catch(outcome, i))
        values += [ind_dist(outcome, i, j) for j in range(num_prey)]
    if scheme in (SelectionScheme.TEAM, SelectionScheme.BOTH):
        values.append(team_catch(outcome))
        values += [team_dist(outcome, j) for j in range(num_prey)]
    return ObjectiveVector(labels_for(scheme, num_prey), tuple(values))


def aggregate_trials(per_trial: Sequence[ObjectiveVector]) -> ObjectiveVector:
    """Component-wise arithmetic mean."""
    if not per_trial:
        raise ValueError("cannot aggregate an empty list of trials")
    labels = per_trial[0].labels
    if any(v.labels != labels for v in per_trial):
        raise ValueError("trial vectors carry different labels")
    mean = np.mean([v.values for v in per_trial], axis=0)
    return ObjectiveVector(labels, tuple(float(x) for x in mean))


def assemble(
    scheme: SelectionScheme, i: int, trial_outcomes: Sequence[EpisodeOutcome]
) -> ObjectiveVector:
    return aggregate_trials([trial_vector(scheme, i, o) for o in trial_outcomes])

"""Time-varying bipartite person-location networks and observation episodes.

An Episode bundles person/location registries, one mobility snapshot per time
step, initial compartment assignments, and (optionally) a series of observed
infection counts. Episodes are immutable in practice: nothing in the pipeline
mutates one after construction, so they are safe to share across workers.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .autodiff import Tensor
from .streams import stream

GENDERS = ("male", "female")
AGE_GROUPS = ("children", "youths", "adults", "seniors")
CITY_TIERS = ("first", "second", "third")
LOCATION_CATEGORIES = (
    "households", "workplaces", "hotels", "supermarkets", "banks",
    "restaurants", "parks", "barber_shops", "trains", "buses", "airplanes",
)

COMPARTMENTS = ("S", "E", "I", "R")

# one-hot person block + one-hot location block, each with a node-kind bit
FEATURE_DIM = 1 + len(GENDERS) + len(AGE_GROUPS) + 1 + len(CITY_TIERS) + len(LOCATION_CATEGORIES)


class ConfigError(ValueError):
    pass


class EpisodeParseError(ValueError):
    pass


@dataclass(frozen=True)
class PersonAttr:
    gender: str
    age_group: str

    def __post_init__(self):
        if self.gender not in GENDERS:
            raise ConfigError(f"unknown gender {self.gender!r}")
        if self.age_group not in AGE_GROUPS:
            raise ConfigError(f"unknown age_group {self.age_group!r}")


@dataclass(frozen=True)
class LocationAttr:
    category: str
    city_tier: str

    def __post_init__(self):
        if self.category not in LOCATION_CATEGORIES:
            raise ConfigError(f"unknown category {self.category!r}")
        if self.city_tier not in CITY_TIERS:
            raise ConfigError(f"unknown city_tier {self.city_tier!r}")


@dataclass
class MobilitySnapshot:
    time_index: int
    edges: list  # list of (person_id, location_id)


@dataclass
class Episode:
    persons: dict  # id -> PersonAttr
    locations: dict  # id -> LocationAttr
    snapshots: list  # MobilitySnapshot, time_index 1..T
    initial_state: dict  # id -> "S"|"E"|"I"|"R"
    observed_infections: list | None = None
    episode_id: str = ""

    @property
    def n_persons(self) -> int:
        return len(self.persons)

    @property
    def n_steps(self) -> int:
        return len(self.snapshots)

    def person_ids(self) -> list:
        return sorted(self.persons)

    def location_ids(self) -> list:
        return sorted(self.locations)

    def validate(self) -> None:
        if not self.snapshots:
            raise EpisodeParseError("episode has no snapshots (T >= 1 required)")
        for i, snap in enumerate(self.snapshots):
            if snap.time_index != i + 1:
                raise EpisodeParseError(
                    f"snapshot {i}: time_index {snap.time_index}, expected {i + 1}")
            seen = set()
            for pid, lid in snap.edges:
                if pid not in self.persons:
                    raise EpisodeParseError(
                        f"snapshot t={snap.time_index}: unknown person {pid!r}")
                if lid not in self.locations:
                    raise EpisodeParseError(
                        f"snapshot t={snap.time_index}: unknown location {lid!r}")
                if pid in seen:
                    raise EpisodeParseError(
                        f"snapshot t={snap.time_index}: person {pid!r} in two places")
                seen.add(pid)
        if set(self.initial_state) != set(self.persons):
            raise EpisodeParseError("initial_state must cover every person exactly once")
        for pid, state in self.initial_state.items():
            if state not in COMPARTMENTS:
                raise EpisodeParseError(f"initial_state[{pid!r}] = {state!r} invalid")
        if self.observed_infections is not None:
            if len(self.observed_infections) != self.n_steps:
                raise EpisodeParseError(
                    f"observed_infections length {len(self.observed_infections)} != T={self.n_steps}")
            if any(v < 0 for v in self.observed_infections):
                raise EpisodeParseError("observed_infections must be non-negative")


# ---------------------------------------------------------------------------
# synthetic generation

@dataclass
class GeneratorConfig:
    """Settings for synthetic episode generation.

    Mobility model: every person has a home location; at each step they stay
    where they were with probability ``revisit_prob``, otherwise they pick
    uniformly among the locations active that step. ``active_fraction_schedule``
    (one fraction per step, or None for all-active) shrinks the active set to
    make mobility genuinely time-varying.
    """
    n_persons: int = 100
    n_locations: int = 5
    n_steps: int = 14
    initial_infected: int = 5
    initial_exposed: int = 0
    revisit_prob: float = 0.6
    active_fraction_schedule: list | None = None

    def validate(self) -> None:
        if self.n_persons <= 0 or self.n_locations <= 0 or self.n_steps <= 0:
            raise ConfigError("n_persons, n_locations, n_steps must be positive")
        if self.initial_infected + self.initial_exposed > self.n_persons:
            raise ConfigError("initial infected+exposed exceed population")
        if self.active_fraction_schedule is not None and \
                len(self.active_fraction_schedule) != self.n_steps:
            raise ConfigError("active_fraction_schedule length must equal n_steps")


def generate_synthetic_episode(config: GeneratorConfig, seed: int,
                               episode_id: str = "") -> Episode:
    """Deterministic in (config, seed); every person has an edge every step."""
    config.validate()
    rng = stream(seed, 0)
    n, m, t_max = config.n_persons, config.n_locations, config.n_steps

    persons = {}
    for i in range(n):
        persons[f"p{i}"] = PersonAttr(
            gender=GENDERS[rng.integers(len(GENDERS))],
            age_group=AGE_GROUPS[rng.integers(len(AGE_GROUPS))],
        )
    locations = {}
    for j in range(m):
        locations[f"l{j}"] = LocationAttr(
            category=LOCATION_CATEGORIES[rng.integers(len(LOCATION_CATEGORIES))],
            city_tier=CITY_TIERS[rng.integers(len(CITY_TIERS))],
        )

    home = rng.integers(m, size=n)
    current = home.copy()
    snapshots = []
    for t in range(1, t_max + 1):
        if config.active_fraction_schedule is None:
            n_active = m
        else:
            frac = config.active_fraction_schedule[t - 1]
            n_active = max(1, min(m, math.ceil(frac * m)))
        stay = rng.random(n) < config.revisit_prob
        moves = rng.integers(n_active, size=n)
        current = np.where(stay, current, moves)
        # persons parked at a now-inactive location are relocated too
        current = np.where(current < n_active, current, moves)
        edges = [(f"p{i}", f"l{int(current[i])}") for i in range(n)]
        snapshots.append(MobilitySnapshot(time_index=t, edges=edges))

    order = rng.permutation(n)
    initial_state = {f"p{i}": "S" for i in range(n)}
    for i in order[:config.initial_infected]:
        initial_state[f"p{i}"] = "I"
    for i in order[config.initial_infected:config.initial_infected + config.initial_exposed]:
        initial_state[f"p{i}"] = "E"

    ep = Episode(persons=persons, locations=locations, snapshots=snapshots,
                 initial_state=initial_state, episode_id=episode_id)
    ep.validate()
    return ep


# ---------------------------------------------------------------------------
# JSON persistence (schema_version 1)

def episode_to_dict(episode: Episode) -> dict:
    return {
        "schema_version": 1,
        "persons": {pid: {"gender": a.gender, "age_group": a.age_group}
                    for pid, a in sorted(episode.persons.items())},
        "locations": {lid: {"category": a.category, "city_tier": a.city_tier}
                      for lid, a in sorted(episode.locations.items())},
        "snapshots": [{"t": s.time_index, "edges": [[p, l] for p, l in s.edges]}
                      for s in episode.snapshots],
        "initial_state": {pid: episode.initial_state[pid]
                          for pid in sorted(episode.initial_state)},
        **({"observed_infections": [int(v) for v in episode.observed_infections]}
           if episode.observed_infections is not None else {}),
    }


def episode_from_dict(doc: dict, episode_id: str = "") -> Episode:
    if not isinstance(doc, dict):
        raise EpisodeParseError("episode document must be a JSON object")
    version = doc.get("schema_version")
    if version != 1:
        raise EpisodeParseError(f"unsupported schema_version {version!r}")
    for key in ("persons", "locations", "snapshots", "initial_state"):
        if key not in doc:
            raise EpisodeParseError(f"missing required field {key!r}")
    try:
        persons = {pid: PersonAttr(**attrs) for pid, attrs in doc["persons"].items()}
        locations = {lid: LocationAttr(**attrs) for lid, attrs in doc["locations"].items()}
    except (TypeError, ConfigError) as exc:
        raise EpisodeParseError(f"bad attribute record: {exc}") from exc
    snapshots = []
    for rec in doc["snapshots"]:
        if "t" not in rec or "edges" not in rec:
            raise EpisodeParseError("snapshot record needs keys 't' and 'edges'")
        snapshots.append(MobilitySnapshot(
            time_index=int(rec["t"]),
            edges=[(str(p), str(l)) for p, l in rec["edges"]]))
    ep = Episode(
        persons=persons,
        locations=locations,
        snapshots=snapshots,
        initial_state={str(k): str(v) for k, v in doc["initial_state"].items()},
        observed_infections=(list(doc["observed_infections"])
                             if "observed_infections" in doc else None),
        episode_id=episode_id,
    )
    ep.validate()
    return ep


def save_episode(episode: Episode, path) -> None:
    with open(path, "w") as f:
        json.dump(episode_to_dict(episode), f, indent=1, sort_keys=True)
        f.write("\n")


def load_episode(path) -> Episode:
    try:
        with open(path) as f:
            doc = json.load(f)
    except json.JSONDecodeError as exc:
        raise EpisodeParseError(f"{path}: malformed JSON at line {exc.lineno}") from exc
    from pathlib import Path
    return episode_from_dict(doc, episode_id=Path(path).stem)


# ---------------------------------------------------------------------------
# graph view

def person_feature(attr: PersonAttr) -> np.ndarray:
    v = np.zeros(FEATURE_DIM)
    v[0] = 1.0
    v[1 + GENDERS.index(attr.gender)] = 1.0
    v[1 + len(GENDERS) + AGE_GROUPS.index(attr.age_group)] = 1.0
    return v


def location_feature(attr: LocationAttr) -> np.ndarray:
    base = 1 + len(GENDERS) + len(AGE_GROUPS)
    v = np.zeros(FEATURE_DIM)
    v[base] = 1.0
    v[base + 1 + CITY_TIERS.index(attr.city_tier)] = 1.0
    v[base + 1 + len(CITY_TIERS) + LOCATION_CATEGORIES.index(attr.category)] = 1.0
    return v


def snapshot_to_graph(snapshot: MobilitySnapshot, episode: Episode):
    """Symmetric 0/1 adjacency and one-hot node features for one snapshot.

    Node order is persons (sorted by id) then locations (sorted by id), so
    shapes are constant across t for a fixed episode.
    """
    pids = episode.person_ids()
    lids = episode.location_ids()
    p_index = {pid: i for i, pid in enumerate(pids)}
    l_index = {lid: len(pids) + j for j, lid in enumerate(lids)}
    n_nodes = len(pids) + len(lids)
    adj = np.zeros((n_nodes, n_nodes))
    for pid, lid in snapshot.edges:
        if pid not in p_index or lid not in l_index:
            raise EpisodeParseError(f"edge ({pid!r}, {lid!r}) not in episode registries")
        i, j = p_index[pid], l_index[lid]
        adj[i, j] = 1.0
        adj[j, i] = 1.0
    feats = np.zeros((n_nodes, FEATURE_DIM))
    for pid, i in p_index.items():
        feats[i] = person_feature(episode.persons[pid])
    for lid, j in l_index.items():
        feats[j] = location_feature(episode.locations[lid])
    return Tensor(adj), Tensor(feats)

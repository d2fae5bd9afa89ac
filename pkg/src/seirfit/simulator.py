"""Stochastic agent-level SEIR simulation over mobility episodes.

Per step, a susceptible agent at location l becomes exposed with probability
beta_eff * I_l / N_l, an exposed agent becomes infectious with probability
kappa, and an infectious agent recovers with probability gamma. Updates are
synchronous: all draws at step t use the compartment counts of step t-1, so
the result is independent of agent iteration order. One simulation costs
O(N*T) agent-steps.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .mobility import (AGE_GROUPS, CITY_TIERS, GENDERS, LOCATION_CATEGORIES,
                       Episode, LocationAttr, PersonAttr)
from .streams import stream

N_BETA_GENDER = len(GENDERS)
N_BETA_AGE = len(AGE_GROUPS)
N_BETA_TIER = len(CITY_TIERS)
N_BETA_CATEGORY = len(LOCATION_CATEGORIES)

# flattened parameter layout: gender betas, age betas, tier betas,
# category betas, kappa, gamma
THETA_DIM = N_BETA_GENDER + N_BETA_AGE + N_BETA_TIER + N_BETA_CATEGORY + 2

_S, _E, _I, _R = 0, 1, 2, 3
_STATE_CODE = {"S": _S, "E": _E, "I": _I, "R": _R}


@dataclass
class ThetaSeir:
    """Additive transmission-rate components plus global kappa and gamma."""
    beta_gender: np.ndarray  # (2,)
    beta_age: np.ndarray     # (4,)
    beta_tier: np.ndarray    # (3,)
    beta_category: np.ndarray  # (11,)
    kappa: float
    gamma: float

    def __post_init__(self):
        self.beta_gender = np.asarray(self.beta_gender, dtype=np.float64)
        self.beta_age = np.asarray(self.beta_age, dtype=np.float64)
        self.beta_tier = np.asarray(self.beta_tier, dtype=np.float64)
        self.beta_category = np.asarray(self.beta_category, dtype=np.float64)
        self.kappa = float(self.kappa)
        self.gamma = float(self.gamma)

    def validate(self) -> None:
        if not (0.0 <= self.kappa <= 1.0 and 0.0 <= self.gamma <= 1.0):
            raise ValueError("kappa and gamma must lie in [0, 1]")
        # the additive composition is monotone in each component, so checking
        # the extreme corners covers the whole attribute cross-product
        lo = (self.beta_gender.min() + self.beta_age.min()
              + self.beta_tier.min() + self.beta_category.min())
        hi = (self.beta_gender.max() + self.beta_age.max()
              + self.beta_tier.max() + self.beta_category.max())
        if lo < 0.0 or hi > 1.0:
            raise ValueError(f"composed beta range [{lo:.4f}, {hi:.4f}] leaves [0, 1]")

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.beta_gender, self.beta_age, self.beta_tier,
                               self.beta_category, [self.kappa], [self.gamma]])

    @staticmethod
    def from_vector(vec) -> "ThetaSeir":
        vec = np.asarray(vec, dtype=np.float64).reshape(-1)
        if vec.size != THETA_DIM:
            raise ValueError(f"theta vector length {vec.size}, expected {THETA_DIM}")
        o = 0
        parts = []
        for n in (N_BETA_GENDER, N_BETA_AGE, N_BETA_TIER, N_BETA_CATEGORY):
            parts.append(vec[o:o + n].copy())
            o += n
        return ThetaSeir(*parts, kappa=vec[o], gamma=vec[o + 1])

    def mean_effective_beta(self) -> float:
        """Mean of beta(s, a, t, c) over the full attribute cross-product."""
        return float(self.beta_gender.mean() + self.beta_age.mean()
                     + self.beta_tier.mean() + self.beta_category.mean())


def effective_beta(person: PersonAttr, location: LocationAttr,
                   theta: ThetaSeir) -> float:
    """Additive composition of the four matching beta components."""
    return float(theta.beta_gender[GENDERS.index(person.gender)]
                 + theta.beta_age[AGE_GROUPS.index(person.age_group)]
                 + theta.beta_tier[CITY_TIERS.index(location.city_tier)]
                 + theta.beta_category[LOCATION_CATEGORIES.index(location.category)])


def transition_probs(location_counts, beta_eff: float, theta: ThetaSeir):
    """(pSE, pEI, pIR) for one location given its current counts.

    ``location_counts`` is (S, E, I, R) at the location. An empty location has
    pSE = 0 by definition.
    """
    s, e, i, r = location_counts
    n = s + e + i + r
    p_se = 0.0 if n == 0 else min(1.0, max(0.0, beta_eff * i / n))
    return p_se, min(1.0, max(0.0, theta.kappa)), min(1.0, max(0.0, theta.gamma))


@dataclass
class Trajectory:
    counts: np.ndarray          # (T+1, 4) aggregate S, E, I, R
    theta_used: ThetaSeir
    seed: int
    episode_id: str = ""
    per_location: np.ndarray | None = None  # (T+1, L, 4) when recorded

    @property
    def infections(self) -> np.ndarray:
        """I_t for t = 1..T (excludes the initial state)."""
        return self.counts[1:, _I]


# ---------------------------------------------------------------------------
# compiled episode view

class CompiledEpisode:
    """Index arrays extracted once per episode for vectorized stepping."""

    def __init__(self, episode: Episode):
        self.episode = episode
        pids = episode.person_ids()
        lids = episode.location_ids()
        self.n = len(pids)
        self.m = len(lids)
        self.t_max = episode.n_steps
        p_index = {pid: i for i, pid in enumerate(pids)}
        l_index = {lid: j for j, lid in enumerate(lids)}
        self.gender_idx = np.array([GENDERS.index(episode.persons[p].gender) for p in pids])
        self.age_idx = np.array([AGE_GROUPS.index(episode.persons[p].age_group) for p in pids])
        self.tier_idx = np.array([CITY_TIERS.index(episode.locations[l].city_tier) for l in lids])
        self.cat_idx = np.array([LOCATION_CATEGORIES.index(episode.locations[l].category) for l in lids])
        self.loc_of = np.full((self.t_max, self.n), -1, dtype=np.int64)
        for t, snap in enumerate(episode.snapshots):
            for pid, lid in snap.edges:
                self.loc_of[t, p_index[pid]] = l_index[lid]
        self.init_states = np.array([_STATE_CODE[episode.initial_state[p]] for p in pids])


def step(agent_states: np.ndarray, loc_of: np.ndarray, compiled: CompiledEpisode,
         theta: ThetaSeir, rng: np.random.Generator) -> np.ndarray:
    """One synchronous transition of all agents; returns the next state array."""
    prev = agent_states
    present = loc_of >= 0
    loc_safe = np.where(present, loc_of, 0)
    n_loc = np.bincount(loc_safe[present], minlength=compiled.m).astype(np.float64)
    i_loc = np.bincount(loc_safe[present & (prev == _I)], minlength=compiled.m).astype(np.float64)
    frac_i = np.divide(i_loc, n_loc, out=np.zeros_like(i_loc), where=n_loc > 0)

    person_beta = theta.beta_gender[compiled.gender_idx] + theta.beta_age[compiled.age_idx]
    loc_beta = theta.beta_tier[compiled.tier_idx] + theta.beta_category[compiled.cat_idx]
    p_se = np.clip((person_beta + loc_beta[loc_safe]) * frac_i[loc_safe], 0.0, 1.0)
    p_se = np.where(present, p_se, 0.0)

    u = rng.random(prev.shape[0])
    nxt = prev.copy()
    nxt[(prev == _S) & (u < p_se)] = _E
    nxt[(prev == _E) & (u < theta.kappa)] = _I
    nxt[(prev == _I) & (u < theta.gamma)] = _R
    return nxt


def _aggregate(states: np.ndarray) -> np.ndarray:
    return np.bincount(states, minlength=4)


def simulate(episode: Episode | CompiledEpisode, theta: ThetaSeir, seed: int,
             record_per_location: bool = False) -> Trajectory:
    """Deterministic in (episode, theta, seed)."""
    theta.validate()
    compiled = episode if isinstance(episode, CompiledEpisode) else CompiledEpisode(episode)
    rng = stream(seed)
    states = compiled.init_states.copy()
    counts = np.zeros((compiled.t_max + 1, 4), dtype=np.int64)
    counts[0] = _aggregate(states)
    per_loc = None
    if record_per_location:
        per_loc = np.zeros((compiled.t_max + 1, compiled.m, 4), dtype=np.int64)
    for t in range(compiled.t_max):
        if per_loc is not None:
            _record_per_location(per_loc, t, states, compiled.loc_of[t], compiled.m)
        states = step(states, compiled.loc_of[t], compiled, theta, rng)
        counts[t + 1] = _aggregate(states)
    if per_loc is not None:
        _record_per_location(per_loc, compiled.t_max, states,
                             compiled.loc_of[compiled.t_max - 1], compiled.m)
    return Trajectory(counts=counts, theta_used=theta, seed=int(seed),
                      episode_id=compiled.episode.episode_id, per_location=per_loc)


def _record_per_location(per_loc, t, states, loc_of, m):
    present = loc_of >= 0
    for c in range(4):
        sel = present & (states == c)
        per_loc[t, :, c] = np.bincount(loc_of[sel], minlength=m)


# ---------------------------------------------------------------------------
# theta sampling

@dataclass
class ThetaPrior:
    """Sampling ranges for theta: uniform betas, normal dwell times.

    Dwell times are specified in hours and converted to simulation steps via
    ``hours_per_step`` (one step per reporting day by default). Rates are the
    reciprocals of the sampled dwell times, rejection-resampled until they lie
    in (0, 1].
    """
    beta_low: float = 0.0
    beta_high: float = 0.1
    kappa_dwell_hours_mean: float = 96.0
    kappa_dwell_hours_sigma: float = 24.0
    gamma_dwell_hours_mean: float = 84.0
    gamma_dwell_hours_sigma: float = 24.0
    hours_per_step: float = 24.0

    def _rate(self, mean_h: float, sigma_h: float, rng: np.random.Generator) -> float:
        while True:
            dwell_steps = rng.normal(mean_h, sigma_h) / self.hours_per_step
            if dwell_steps >= 1.0:  # rate = 1/dwell in (0, 1]
                return 1.0 / dwell_steps


def sample_theta(prior: ThetaPrior, rng: np.random.Generator) -> ThetaSeir:
    theta = ThetaSeir(
        beta_gender=rng.uniform(prior.beta_low, prior.beta_high, N_BETA_GENDER),
        beta_age=rng.uniform(prior.beta_low, prior.beta_high, N_BETA_AGE),
        beta_tier=rng.uniform(prior.beta_low, prior.beta_high, N_BETA_TIER),
        beta_category=rng.uniform(prior.beta_low, prior.beta_high, N_BETA_CATEGORY),
        kappa=prior._rate(prior.kappa_dwell_hours_mean, prior.kappa_dwell_hours_sigma, rng),
        gamma=prior._rate(prior.gamma_dwell_hours_mean, prior.gamma_dwell_hours_sigma, rng),
    )
    theta.validate()
    return theta


# ---------------------------------------------------------------------------
# batch dataset construction

@dataclass
class SimulationDataset:
    records: list = field(default_factory=list)  # Trajectory
    thetas: list = field(default_factory=list)   # the K sampled ThetaSeir

    def __len__(self) -> int:
        return len(self.records)

    def simulation_count(self) -> int:
        return len(self.records)

    def save_jsonl(self, path) -> None:
        with open(path, "w") as f:
            for traj in self.records:
                rec = {
                    "episode_id": traj.episode_id,
                    "theta_vector": [float(v) for v in traj.theta_used.to_vector()],
                    "seed": traj.seed,
                    "counts": traj.counts.tolist(),
                }
                f.write(json.dumps(rec) + "\n")

    @staticmethod
    def load_jsonl(path) -> "SimulationDataset":
        ds = SimulationDataset()
        with open(path) as f:
            for line in f:
                rec = json.loads(line)
                ds.records.append(Trajectory(
                    counts=np.asarray(rec["counts"], dtype=np.int64),
                    theta_used=ThetaSeir.from_vector(rec["theta_vector"]),
                    seed=int(rec["seed"]),
                    episode_id=rec["episode_id"]))
        return ds


def _cell_seed(base_seed: int, *key: int) -> int:
    """Integer seed for one batch cell, drawn from its own Philox stream."""
    return int(stream(base_seed, 1, *key).integers(2 ** 62))


def simulate_batch(episodes: list, k: int, replicates: int, base_seed: int,
                   prior: ThetaPrior | None = None,
                   thetas: list | None = None) -> SimulationDataset:
    """One trajectory per (episode, theta sample, replicate).

    The k theta samples are shared across episodes.
    Pass ``thetas`` to reuse an externally sampled candidate set, e.g. for
    budget-matched comparisons against grid search.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if thetas is None:
        prior = prior or ThetaPrior()
        theta_rng = stream(base_seed, 0)
        thetas = [sample_theta(prior, theta_rng) for _ in range(k)]
    elif len(thetas) != k:
        raise ValueError(f"got {len(thetas)} thetas, expected k={k}")
    ds = SimulationDataset(thetas=list(thetas))
    for e_idx, episode in enumerate(episodes):
        compiled = CompiledEpisode(episode)
        for k_idx, theta in enumerate(thetas):
            for r_idx in range(replicates):
                seed = _cell_seed(base_seed, e_idx, k_idx, r_idx)
                ds.records.append(simulate(compiled, theta, seed))
    return ds


def l2_error(predicted_infections, observed_infections) -> float:
    """Sum over steps of squared infection-count differences."""
    pred = np.asarray(predicted_infections, dtype=np.float64)
    obs = np.asarray(observed_infections, dtype=np.float64)
    if pred.shape != obs.shape:
        raise ValueError(f"length mismatch {pred.shape} vs {obs.shape}")
    return float(((pred - obs) ** 2).sum())

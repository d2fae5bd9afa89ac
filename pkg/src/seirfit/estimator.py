"""Parameter estimation: vanilla grid search and gradient-based fitting.

Grid search simulates every candidate parameter set and keeps the argmin of
the summed squared infection error. The gradient route freezes a trained
surrogate, treats the flattened SEIR parameter vector as the only learnable
leaf, and minimizes the per-step mean squared infection error plus an
optional quadratic pull toward a prior center, with every iterate projected
onto hard box bounds.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .mobility import Episode
from .optim import AdaGrad
from .simulator import (THETA_DIM, N_BETA_GENDER, N_BETA_AGE, N_BETA_TIER,
                        N_BETA_CATEGORY, CompiledEpisode, ThetaSeir, l2_error,
                        simulate)
from .streams import stream
from .surrogate import SurrogateModel

N_BETA = N_BETA_GENDER + N_BETA_AGE + N_BETA_TIER + N_BETA_CATEGORY


def default_bounds(beta_low: float = 0.0, beta_high: float = 0.1,
                   rate_low: float = 1e-3, rate_high: float = 1.0):
    lo = np.concatenate([np.full(N_BETA, beta_low), [rate_low, rate_low]])
    hi = np.concatenate([np.full(N_BETA, beta_high), [rate_high, rate_high]])
    return lo, hi


@dataclass
class PriorSpec:
    center: np.ndarray            # length THETA_DIM
    lam: float = 0.0
    lower: np.ndarray = field(default_factory=lambda: default_bounds()[0])
    upper: np.ndarray = field(default_factory=lambda: default_bounds()[1])

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=np.float64).reshape(-1)
        self.lower = np.asarray(self.lower, dtype=np.float64).reshape(-1)
        self.upper = np.asarray(self.upper, dtype=np.float64).reshape(-1)
        if self.center.size != THETA_DIM:
            raise ValueError(f"prior center length {self.center.size} != {THETA_DIM}")
        if self.lam < 0:
            raise ValueError("lambda must be non-negative")
        if np.any(self.center < self.lower) or np.any(self.center > self.upper):
            raise ValueError("prior center must lie within the box bounds")


@dataclass
class FitConfig:
    lr: float = 0.02
    max_iters: int = 500
    restarts: int = 10
    jitter: float = 0.15       # restart inits are jittered by this fraction of the box
    min_improvement: float = 1e-8
    patience: int = 25
    seed: int = 0


@dataclass
class FitResult:
    theta_star: ThetaSeir
    theta_vector: np.ndarray
    loss_trace: list           # best-so-far loss per iteration of the winning restart
    data_term: float
    prior_term: float
    iterations: int
    restart_losses: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "theta": {
                "beta_gender": self.theta_star.beta_gender.tolist(),
                "beta_age": self.theta_star.beta_age.tolist(),
                "beta_tier": self.theta_star.beta_tier.tolist(),
                "beta_category": self.theta_star.beta_category.tolist(),
                "kappa": self.theta_star.kappa,
                "gamma": self.theta_star.gamma,
            },
            "theta_vector": self.theta_vector.tolist(),
            "loss_trace": self.loss_trace,
            "data_term": self.data_term,
            "prior_term": self.prior_term,
            "iterations": self.iterations,
            "restart_losses": self.restart_losses,
        }


def episode_initial_counts(episode: Episode) -> np.ndarray:
    counts = np.zeros(4)
    order = {"S": 0, "E": 1, "I": 2, "R": 3}
    for state in episode.initial_state.values():
        counts[order[state]] += 1
    return counts


# ---------------------------------------------------------------------------
# vanilla grid search

def grid_search(episodes: list, candidates: list, base_seed: int,
                replicates: int = 1):
    """Simulate every candidate on every episode; argmin of summed L2 error.

    Ties break toward the lowest candidate index. Returns
    (best_theta, per-candidate errors, simulation count).
    """
    if not candidates:
        raise ValueError("need at least one candidate")
    for ep in episodes:
        if ep.observed_infections is None:
            raise ValueError(f"episode {ep.episode_id!r} has no observed infections")
    compiled = [CompiledEpisode(ep) for ep in episodes]
    errors = np.zeros(len(candidates))
    sim_count = 0
    for ci, theta in enumerate(candidates):
        for ei, comp in enumerate(compiled):
            preds = np.zeros((replicates, comp.t_max))
            for r in range(replicates):
                seed = int(stream(base_seed, 2, ci, ei, r).integers(2 ** 62))
                preds[r] = simulate(comp, theta, seed).infections
                sim_count += 1
            errors[ci] += l2_error(preds.mean(axis=0),
                                   episodes[ei].observed_infections)
    best = int(np.argmin(errors))
    return candidates[best], errors, sim_count


# ---------------------------------------------------------------------------
# gradient-based fitting through the frozen surrogate

def _objective_rows(model: SurrogateModel, theta: Tensor, episode_data: list,
                    prior: PriorSpec):
    """Joint objective over a batch of restart rows.

    Rows are independent: the scalar loss is the sum of per-row objectives,
    so elementwise adaptive-gradient steps on the stacked theta matrix are
    identical to optimizing each restart separately. Returns the scalar loss
    node plus per-row data and prior terms as arrays.
    """
    n_rows = theta.shape[0]
    data_rows = None
    for x0, obs, pop, embeddings, t_max in episode_data:
        preds = model.forward_rollout(np.tile(x0, (n_rows, 1)), theta, t_max,
                                      embeddings=embeddings, mode="autoregressive")
        ep_rows = None
        for t, pred in enumerate(preds):
            i_hat = ad.scale(ad.slice_cols(pred, 2, 3), pop)  # denormalized
            diff = ad.sub(i_hat, Tensor(np.full((n_rows, 1), obs[t])))
            sq = ad.mul(diff, diff)
            ep_rows = sq if ep_rows is None else ad.add(ep_rows, sq)
        ep_rows = ad.scale(ep_rows, 1.0 / t_max)
        data_rows = ep_rows if data_rows is None else ad.add(data_rows, ep_rows)
    if prior.lam > 0.0:
        d = ad.sub(theta, Tensor(np.tile(prior.center, (n_rows, 1))))
        prior_rows = ad.scale(ad.matmul(ad.mul(d, d),
                                        Tensor(np.ones((THETA_DIM, 1)))), prior.lam)
        total_rows = ad.add(data_rows, prior_rows)
        prior_vals = prior_rows.data[:, 0].copy()
    else:
        total_rows = data_rows
        prior_vals = np.zeros(n_rows)
    return ad.tsum(total_rows), data_rows.data[:, 0].copy(), prior_vals


def _prepare_episode_data(episodes: list, episode_embeddings: dict | None,
                          model: SurrogateModel) -> list:
    data = []
    for ep in episodes:
        if ep.observed_infections is None:
            raise ValueError(f"episode {ep.episode_id!r} has no observed infections")
        counts0 = episode_initial_counts(ep)
        pop = counts0.sum()
        emb = None
        if model.config.graph_mode != "none":
            if episode_embeddings is None or ep.episode_id not in episode_embeddings:
                raise ValueError(f"missing embeddings for episode {ep.episode_id!r}")
            emb = episode_embeddings[ep.episode_id]
        data.append((counts0 / pop, np.asarray(ep.observed_infections, dtype=np.float64),
                     float(pop), emb, ep.n_steps))
    return data


def fit_theta(model: SurrogateModel, episodes: list, init_theta: np.ndarray | None,
              prior: PriorSpec, config: FitConfig | None = None,
              episode_embeddings: dict | None = None) -> FitResult:
    """Optimize the SEIR parameter vector against observed infections.

    The surrogate weights stay frozen; only the theta leaf receives
    gradients. Adaptive-gradient steps are followed by projection onto the
    box bounds. All restarts run as rows of one stacked parameter matrix
    (mathematically identical to separate runs); the best iterate wins.
    """
    config = config or FitConfig()
    episode_data = _prepare_episode_data(episodes, episode_embeddings, model)
    lo, hi = prior.lower, prior.upper
    if init_theta is None:
        init_theta = prior.center if prior.lam > 0 else (lo + hi) / 2.0
    init_theta = np.asarray(init_theta, dtype=np.float64).reshape(-1)
    rng = stream(config.seed, 20)

    n_rows = config.restarts
    inits = np.tile(init_theta, (n_rows, 1))
    if n_rows > 1:
        inits[1:] += (rng.uniform(-1.0, 1.0, (n_rows - 1, THETA_DIM))
                      * config.jitter * (hi - lo))
    inits = np.clip(inits, lo, hi)

    theta = Tensor(inits, requires_grad=True)
    opt = AdaGrad([theta], lr=config.lr)
    row_best = [None] * n_rows  # (loss, vec, data, prior, iter)
    since_improve = np.zeros(n_rows, dtype=np.int64)
    trace = []
    iters = 0
    for it in range(config.max_iters):
        loss, data_vals, prior_vals = _objective_rows(model, theta, episode_data, prior)
        totals = data_vals + prior_vals
        if not np.all(np.isfinite(totals)):
            raise RuntimeError(f"non-finite loss at iteration {it}; trace={trace}")
        for r in range(n_rows):
            if row_best[r] is None or totals[r] < row_best[r][0] - config.min_improvement:
                row_best[r] = (totals[r], theta.data[r].copy(), data_vals[r],
                               prior_vals[r], it)
                since_improve[r] = 0
            else:
                since_improve[r] += 1
        trace.append(min(rb[0] for rb in row_best))
        iters = it + 1
        if np.all(since_improve >= config.patience):
            break
        ad.backward(loss)
        opt.step()
        theta.data = np.clip(theta.data, lo.reshape(1, -1), hi.reshape(1, -1))

    winner = min(row_best, key=lambda rb: rb[0])
    return FitResult(theta_star=ThetaSeir.from_vector(winner[1]),
                     theta_vector=winner[1], loss_trace=trace,
                     data_term=winner[2], prior_term=winner[3], iterations=iters,
                     restart_losses=[float(rb[0]) for rb in row_best])


# ---------------------------------------------------------------------------
# evaluation and sweeps

def evaluate(theta: ThetaSeir, test_episodes: list, replicates: int,
             base_seed: int) -> float:
    """Average over episodes of the summed squared infection error, with
    predictions taken as the mean infection series over replicates."""
    if replicates < 1:
        raise ValueError("replicates must be >= 1")
    total = 0.0
    for ei, ep in enumerate(test_episodes):
        comp = CompiledEpisode(ep)
        preds = np.zeros((replicates, comp.t_max))
        for r in range(replicates):
            seed = int(stream(base_seed, 3, ei, r).integers(2 ** 62))
            preds[r] = simulate(comp, theta, seed).infections
        total += l2_error(preds.mean(axis=0), ep.observed_infections)
    return total / len(test_episodes)


def lambda_sweep(model: SurrogateModel, fit_episodes: list, dev_episodes: list,
                 prior_center: np.ndarray, lambdas: list,
                 config: FitConfig | None = None,
                 episode_embeddings: dict | None = None,
                 eval_replicates: int = 10, eval_seed: int = 0) -> list:
    """(lambda, dev error) rows: fit at each trade-off weight, score on dev."""
    if not lambdas:
        raise ValueError("lambda grid must be non-empty")
    rows = []
    for lam in lambdas:
        prior = PriorSpec(center=prior_center, lam=float(lam))
        result = fit_theta(model, fit_episodes, None, prior, config,
                           episode_embeddings=episode_embeddings)
        err = evaluate(result.theta_star, dev_episodes, eval_replicates, eval_seed)
        rows.append((float(lam), err))
    return rows

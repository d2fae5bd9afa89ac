"""Command-line harness for the estimation pipeline.

Verbs cover the full protocol: ``generate`` synthetic episodes with held-out
truth, ``simulate`` a training set of trajectories, ``train-encoder`` /
``train-surrogate``, ``fit`` the SEIR parameter vector, ``evaluate`` on test
episodes, ``pipeline`` for all stages in order, ``compare`` for the
budget-matched grid-search benchmark, and ``ablate`` for the lambda,
incorporation, and graph-mode sweeps. Every stage reads and writes files
under one output directory and is deterministic in (config, seed).
"""

from __future__ import annotations

import argparse
import copy
import json
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .encoder import (EncoderConfig, classification_accuracy, encode_graph,
                      save_encoder, train_encoder)
from .estimator import (FitConfig, PriorSpec, default_bounds, evaluate,
                        fit_theta, l2_error, lambda_sweep)
from .mobility import (ConfigError, Episode, GeneratorConfig,
                       generate_synthetic_episode, load_episode, save_episode,
                       snapshot_to_graph)
from .plots import plot_trajectories
from .simulator import (CompiledEpisode, SimulationDataset, ThetaPrior,
                        ThetaSeir, sample_theta, simulate, simulate_batch)
from .streams import stream
from .surrogate import (SurrogateConfig, load_surrogate, prediction_error,
                        save_surrogate, train_surrogate, training_curve_csv)

DEFAULT_CONFIG = {
    "dataset": {
        "n_episodes": 10,
        "split": [0.8, 0.1, 0.1],
        "generator": {
            "n_persons": 300,
            "n_locations": 6,
            "n_steps": 12,
            "initial_infected": 20,
            "initial_exposed": 15,
            "revisit_prob": 0.6,
            "active_fraction_schedule": None,
        },
        # optional [infected, exposed] pairs cycled over episodes so initial
        # conditions vary; falls back to the generator values
        "initial_mixes": None,
    },
    "simulation": {
        "k": 40,
        "replicates": 1,
        "prior": {
            "beta_low": 0.0,
            "beta_high": 0.1,
            "kappa_dwell_hours_mean": 96.0,
            "kappa_dwell_hours_sigma": 24.0,
            "gamma_dwell_hours_mean": 84.0,
            "gamma_dwell_hours_sigma": 24.0,
            "hours_per_step": 24.0,
        },
    },
    "encoder": {
        "embed_dim": 16,
        "epochs": 40,
        "lr": 0.005,
        "batch_size": 8,
        "cluster_cap": 64,
    },
    "surrogate": {
        "hidden": 16,
        "incorporation_mode": "each",
        "graph_mode": "none",
        "optimizer": "adam",
        "lr": 3e-3,
        "epochs": 120,
        "ar_epochs": 0,
        "ar_lr": 1e-3,
        "batch_size": 16,
        "clip_norm": 1.0,
        "init_range": 0.08,
        "dropout": 0.0,
        "val_fraction": 0.1,
    },
    "estimation": {
        "lam": 0.0,
        "prior_center": None,       # default: box middle
        "beta_low": 0.0,
        "beta_high": 0.1,
        "rate_low": 1e-3,
        "rate_high": 1.0,
        "lr": 0.02,
        "max_iters": 300,
        "restarts": 10,
        "jitter": 0.15,
        "patience": 25,
    },
    "evaluation": {
        "replicates": 4,
        "smooth_window": 0,
    },
    "compare": {
        "k_grid": [20, 100],
        "replicates": {"20": 5, "100": 2, "500": 2},
        "anchor_lam": {"20": 2000.0, "100": 200.0, "500": 40.0},
        "jitter": 0.08,
        "max_iters": 200,
    },
    "ablate": {
        "lambda_grid": [0.0, 30.0, 100.0, 300.0, 1000.0],
        "incorporation_modes": ["each", "first", "hadamard"],
        "graph_modes": ["none", "constant", "varying"],
        "test_k": 25,
    },
}


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause


# ---------------------------------------------------------------------------
# config plumbing

def merge_config(base: dict, override: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        where = f"{path}.{key}" if path else key
        if key not in base:
            raise ConfigError(f"unknown config key {where!r}")
        if isinstance(base[key], dict) and isinstance(value, dict) \
                and path not in ("compare",):
            out[key] = merge_config(base[key], value, where)
        else:
            out[key] = copy.deepcopy(value)
    return out


def load_config(path: str | None) -> dict:
    if path is None:
        return copy.deepcopy(DEFAULT_CONFIG)
    with open(path) as f:
        user = json.load(f)
    config = merge_config(DEFAULT_CONFIG, user)
    fractions = config["dataset"]["split"]
    if len(fractions) != 3 or abs(sum(fractions) - 1.0) > 1e-9:
        raise ConfigError(f"split fractions {fractions} must be 3 values summing to 1")
    return config


def _prior(config: dict) -> ThetaPrior:
    return ThetaPrior(**config["simulation"]["prior"])


def _surrogate_config(config: dict, seed: int, **overrides) -> SurrogateConfig:
    fields = dict(config["surrogate"])
    fields.update(overrides)
    return SurrogateConfig(seed=seed, **fields)


def _fit_config(config: dict, seed: int, **overrides) -> FitConfig:
    est = config["estimation"]
    fields = dict(lr=est["lr"], max_iters=est["max_iters"], restarts=est["restarts"],
                  jitter=est["jitter"], patience=est["patience"], seed=seed)
    fields.update(overrides)
    return FitConfig(**fields)


def _prior_spec(config: dict, lam: float | None = None,
                center: np.ndarray | None = None) -> PriorSpec:
    est = config["estimation"]
    lo, hi = default_bounds(beta_low=est["beta_low"], beta_high=est["beta_high"],
                            rate_low=est["rate_low"], rate_high=est["rate_high"])
    if center is None:
        center = (np.asarray(est["prior_center"], dtype=np.float64)
                  if est["prior_center"] is not None else (lo + hi) / 2.0)
    return PriorSpec(center=center, lam=est["lam"] if lam is None else lam,
                     lower=lo, upper=hi)


# ---------------------------------------------------------------------------
# manifest and file layout

class Manifest:
    def __init__(self, config: dict, seed: int, out: Path):
        self.doc = {
            "schema_version": 1,
            "version": __version__,
            "numpy_version": np.__version__,
            "seed": seed,
            "config": config,
            "stages": [],
            "simulation_ledger": {},
        }
        self.path = out / "manifest.json"

    def record_stage(self, name: str, seconds: float) -> None:
        self.doc["stages"].append({"name": name, "seconds": round(seconds, 3)})

    def add_simulations(self, label: str, count: int) -> None:
        ledger = self.doc["simulation_ledger"]
        ledger[label] = ledger.get(label, 0) + count

    def save(self) -> None:
        with open(self.path, "w") as f:
            json.dump(self.doc, f, indent=1, sort_keys=True)
            f.write("\n")


def _episode_dir(out: Path, split: str) -> Path:
    return out / "episodes" / split


def _load_split(out: Path, split: str) -> list:
    manifest_path = out / "split_manifest.json"
    if not manifest_path.exists():
        raise FileNotFoundError(f"{manifest_path} missing; run generate first")
    with open(manifest_path) as f:
        doc = json.load(f)
    return [load_episode(_episode_dir(out, split) / f"{eid}.json")
            for eid in doc[split]]


def _load_truth(out: Path) -> ThetaSeir:
    with open(out / "truth.json") as f:
        return ThetaSeir.from_vector(json.load(f)["theta_vector"])


def _load_embeddings(out: Path) -> dict:
    path = out / "embeddings.json"
    if not path.exists():
        raise FileNotFoundError(f"{path} missing; run train-encoder first")
    with open(path) as f:
        doc = json.load(f)
    return {eid: np.asarray(rows, dtype=np.float64) for eid, rows in doc.items()}


def _write_csv(path: Path, header: list, rows: list) -> None:
    with open(path, "w") as f:
        f.write(",".join(header) + "\n")
        for row in rows:
            f.write(",".join(_fmt(v) for v in row) + "\n")


def _fmt(value) -> str:
    if isinstance(value, float):
        return format(value, ".10g")
    return str(value)


def _pmap(fn, items, workers: int):
    if workers <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# stages

def cmd_generate(config: dict, seed: int, out: Path, manifest: Manifest) -> None:
    ds_cfg = config["dataset"]
    n = ds_cfg["n_episodes"]
    mixes = ds_cfg["initial_mixes"]
    prior = _prior(config)
    truth = sample_theta(prior, stream(seed, 41))

    episodes = []
    for i in range(n):
        gen_fields = dict(ds_cfg["generator"])
        if mixes:
            infected, exposed = mixes[i % len(mixes)]
            gen_fields["initial_infected"] = infected
            gen_fields["initial_exposed"] = exposed
        gen = GeneratorConfig(**gen_fields)
        ep_seed = int(stream(seed, 40, i).integers(2 ** 31))
        ep = generate_synthetic_episode(gen, ep_seed, f"ep{i:03d}")
        obs_seed = int(stream(seed, 42, i).integers(2 ** 62))
        ep.observed_infections = [int(v) for v in simulate(ep, truth, obs_seed).infections]
        manifest.add_simulations("observations", 1)
        episodes.append(ep)

    order = stream(seed, 43).permutation(n)
    n_train = int(round(ds_cfg["split"][0] * n))
    n_dev = int(round(ds_cfg["split"][1] * n))
    splits = {
        "train": sorted(episodes[i].episode_id for i in order[:n_train]),
        "dev": sorted(episodes[i].episode_id for i in order[n_train:n_train + n_dev]),
        "test": sorted(episodes[i].episode_id for i in order[n_train + n_dev:]),
    }
    by_id = {ep.episode_id: ep for ep in episodes}
    for split, ids in splits.items():
        directory = _episode_dir(out, split)
        directory.mkdir(parents=True, exist_ok=True)
        for eid in ids:
            save_episode(by_id[eid], directory / f"{eid}.json")
    with open(out / "split_manifest.json", "w") as f:
        json.dump({**splits, "seed": seed, "fractions": ds_cfg["split"]},
                  f, indent=1, sort_keys=True)
        f.write("\n")
    with open(out / "truth.json", "w") as f:
        json.dump({"theta_vector": [float(v) for v in truth.to_vector()]},
                  f, indent=1, sort_keys=True)
        f.write("\n")


def cmd_simulate(config: dict, seed: int, out: Path, manifest: Manifest) -> None:
    train_eps = _load_split(out, "train")
    sim = config["simulation"]
    ds = simulate_batch(train_eps, k=sim["k"], replicates=sim["replicates"],
                        base_seed=seed, prior=_prior(config))
    ds.save_jsonl(out / "dataset.jsonl")
    manifest.add_simulations("training_set", ds.simulation_count())


def _episode_graphs(episodes: list) -> list:
    graphs = []
    for ep in episodes:
        for t, snap in enumerate(ep.snapshots):
            adj, feats = snapshot_to_graph(snap, ep)
            graphs.append((adj, feats, t))
    return graphs


def _compute_embeddings(encoder, episodes: list) -> dict:
    embeddings = {}
    for ep in episodes:
        rows = []
        for snap in ep.snapshots:
            adj, feats = snapshot_to_graph(snap, ep)
            rows.append(encode_graph(encoder, adj, feats).data[0].tolist())
        embeddings[ep.episode_id] = rows
    return embeddings


def cmd_train_encoder(config: dict, seed: int, out: Path, manifest: Manifest) -> None:
    episodes = []
    for split in ("train", "dev", "test"):
        episodes.extend(_load_split(out, split))
    sizes = {(ep.n_persons, len(ep.locations)) for ep in episodes}
    if len(sizes) != 1:
        raise ConfigError(f"episodes must share one graph size, got {sorted(sizes)}")
    train_ids = set(ep.episode_id for ep in _load_split(out, "train"))
    train_graphs = _episode_graphs([ep for ep in episodes
                                    if ep.episode_id in train_ids])
    enc_cfg = EncoderConfig(seed=seed, **config["encoder"])
    encoder, history = train_encoder(train_graphs, enc_cfg)
    save_encoder(encoder, out / "encoder.json")
    _write_csv(out / "encoder_curve.csv", ["epoch", "train_loss"],
               [(i + 1, loss) for i, loss in enumerate(history)])
    embeddings = _compute_embeddings(encoder, episodes)
    with open(out / "embeddings.json", "w") as f:
        json.dump(embeddings, f, sort_keys=True)
        f.write("\n")
    accuracy = classification_accuracy(encoder, train_graphs)
    with open(out / "encoder_metrics.json", "w") as f:
        json.dump({"train_accuracy": accuracy,
                   "chance": 1.0 / encoder.n_classes}, f, sort_keys=True)
        f.write("\n")


def cmd_train_surrogate(config: dict, seed: int, out: Path, manifest: Manifest) -> None:
    ds = SimulationDataset.load_jsonl(out / "dataset.jsonl")
    srg_cfg = _surrogate_config(config, seed)
    embeddings = None
    if srg_cfg.graph_mode != "none":
        if srg_cfg.hidden != config["encoder"]["embed_dim"]:
            raise ConfigError("surrogate hidden width must equal encoder embed_dim "
                              "when graph embeddings are used")
        embeddings = _load_embeddings(out)
    result = train_surrogate(ds, srg_cfg, episode_embeddings=embeddings)
    save_surrogate(result.model, out / "surrogate.json")
    training_curve_csv(result.history, out / "surrogate_curve.csv")
    with open(out / "surrogate_metrics.json", "w") as f:
        json.dump({"best_val_loss": result.best_val_loss,
                   "best_epoch": result.best_epoch}, f, sort_keys=True)
        f.write("\n")


def cmd_fit(config: dict, seed: int, out: Path, manifest: Manifest) -> None:
    model = load_surrogate(out / "surrogate.json")
    train_eps = _load_split(out, "train")
    embeddings = _load_embeddings(out) if model.config.graph_mode != "none" else None
    result = fit_theta(model, train_eps, None, _prior_spec(config),
                       _fit_config(config, seed), episode_embeddings=embeddings)
    with open(out / "fit.json", "w") as f:
        json.dump(result.to_dict(), f, indent=1, sort_keys=True)
        f.write("\n")


def cmd_evaluate(config: dict, seed: int, out: Path, manifest: Manifest,
                 workers: int = 1) -> None:
    with open(out / "fit.json") as f:
        theta = ThetaSeir.from_vector(json.load(f)["theta_vector"])
    test_eps = _load_split(out, "test")
    replicates = config["evaluation"]["replicates"]
    smooth = config["evaluation"]["smooth_window"]

    def score(item):
        ei, ep = item
        compiled = CompiledEpisode(ep)
        preds = np.zeros((replicates, compiled.t_max))
        for r in range(replicates):
            sim_seed = int(stream(seed, 3, ei, r).integers(2 ** 62))
            preds[r] = simulate(compiled, theta, sim_seed).infections
        mean_pred = preds.mean(axis=0)
        return ep.episode_id, mean_pred, l2_error(mean_pred, ep.observed_infections)

    results = _pmap(score, list(enumerate(test_eps)), workers)
    manifest.add_simulations("evaluation", replicates * len(test_eps))
    rows = [(eid, err) for eid, _, err in results]
    _write_csv(out / "metrics.csv", ["episode_id", "l2_error"], rows)

    surrogate_path = out / "surrogate.json"
    model = load_surrogate(surrogate_path) if surrogate_path.exists() else None
    embeddings = (_load_embeddings(out)
                  if model is not None and model.config.graph_mode != "none" else None)
    for (eid, mean_pred, _), ep in zip(results, test_eps):
        series = {"observed": ep.observed_infections,
                  "simulated at fit": mean_pred}
        if model is not None:
            counts0 = np.zeros(4)
            order = {"S": 0, "E": 1, "I": 2, "R": 3}
            for state in ep.initial_state.values():
                counts0[order[state]] += 1
            pop = counts0.sum()
            emb = None if embeddings is None else np.asarray(embeddings[eid])
            preds = model.forward_rollout(counts0 / pop,
                                          theta.to_vector().reshape(1, -1),
                                          ep.n_steps, embeddings=emb)
            series["surrogate rollout"] = [p.data[0, 2] * pop for p in preds]
        plot_trajectories(out / f"trajectory_{eid}.svg", series, title=eid,
                          smooth_window=smooth)


def cmd_pipeline(config: dict, seed: int, out: Path, workers: int = 1) -> Manifest:
    manifest = Manifest(config, seed, out)
    stages = [
        ("generate", lambda: cmd_generate(config, seed, out, manifest)),
        ("simulate", lambda: cmd_simulate(config, seed, out, manifest)),
        ("train-surrogate", lambda: cmd_train_surrogate(config, seed, out, manifest)),
        ("fit", lambda: cmd_fit(config, seed, out, manifest)),
        ("evaluate", lambda: cmd_evaluate(config, seed, out, manifest, workers)),
    ]
    if config["surrogate"]["graph_mode"] != "none":
        stages.insert(2, ("train-encoder",
                          lambda: cmd_train_encoder(config, seed, out, manifest)))
    for name, stage in stages:
        start = time.perf_counter()
        try:
            stage()
        except BaseException as exc:
            manifest.record_stage(name, time.perf_counter() - start)
            manifest.save()
            raise StageError(name, exc) from exc
        manifest.record_stage(name, time.perf_counter() - start)
    manifest.save()
    return manifest


# ---------------------------------------------------------------------------
# budget-matched comparison

def cmd_compare(config: dict, seed: int, out: Path, workers: int = 1) -> Manifest:
    manifest = Manifest(config, seed, out)
    fit_eps = _load_split(out, "train")
    test_eps = _load_split(out, "test")
    cmp_cfg = config["compare"]
    prior = _prior(config)
    replicates = config["evaluation"]["replicates"]
    rows = []
    start = time.perf_counter()
    for k in cmp_cfg["k_grid"]:
        reps = int(cmp_cfg["replicates"].get(str(k), 1))
        anchor_lam = float(cmp_cfg["anchor_lam"].get(str(k), 0.0))
        rng = stream(seed, 50, k)
        thetas = [sample_theta(prior, rng) for _ in range(k)]
        ds = simulate_batch(fit_eps, k=k, replicates=reps,
                            base_seed=seed * 1000 + k, thetas=thetas)
        n_sims = ds.simulation_count()
        manifest.add_simulations(f"vanilla_K{k}", n_sims)
        manifest.add_simulations(f"surrogate_K{k}", n_sims)

        # vanilla arm scores the shared simulations against the observations
        errors = np.zeros(k)
        for e_idx, ep in enumerate(fit_eps):
            obs = np.asarray(ep.observed_infections, dtype=np.float64)
            for ci in range(k):
                base = (e_idx * k + ci) * reps
                mean_inf = np.mean([ds.records[base + r].counts[1:, 2]
                                    for r in range(reps)], axis=0)
                errors[ci] += l2_error(mean_inf, obs)
        vanilla_theta = thetas[int(np.argmin(errors))]

        # surrogate arm trains on the same simulations and refines the winner
        srg_cfg = _surrogate_config(config, seed)
        embeddings = _load_embeddings(out) if srg_cfg.graph_mode != "none" else None
        model = train_surrogate(ds, srg_cfg, episode_embeddings=embeddings).model
        pspec = _prior_spec(config, lam=anchor_lam,
                            center=vanilla_theta.to_vector())
        fit = fit_theta(model, fit_eps, vanilla_theta.to_vector(), pspec,
                        _fit_config(config, seed, jitter=cmp_cfg["jitter"],
                                    max_iters=cmp_cfg["max_iters"]),
                        episode_embeddings=embeddings)

        vanilla_err = evaluate(vanilla_theta, test_eps, replicates, seed * 7 + k)
        surrogate_err = evaluate(fit.theta_star, test_eps, replicates, seed * 7 + k)
        rows.append((k, vanilla_err, surrogate_err, n_sims, n_sims))
    _write_csv(out / "compare.csv",
               ["K", "vanilla_error", "surrogate_error",
                "vanilla_simulations", "surrogate_simulations"], rows)
    manifest.record_stage("compare", time.perf_counter() - start)
    manifest.save()
    return manifest


# ---------------------------------------------------------------------------
# ablations

def cmd_ablate(config: dict, seed: int, out: Path, which: str) -> Manifest:
    manifest = Manifest(config, seed, out)
    ab_cfg = config["ablate"]
    start = time.perf_counter()
    if which == "lambda":
        model = load_surrogate(out / "surrogate.json")
        embeddings = (_load_embeddings(out)
                      if model.config.graph_mode != "none" else None)
        fit_eps = _load_split(out, "train")
        dev_eps = _load_split(out, "dev")
        spec = _prior_spec(config)
        rows = lambda_sweep(model, fit_eps, dev_eps, spec.center,
                            ab_cfg["lambda_grid"], _fit_config(config, seed),
                            episode_embeddings=embeddings,
                            eval_replicates=config["evaluation"]["replicates"],
                            eval_seed=seed * 13 + 1)
        manifest.add_simulations(
            "lambda_dev_evaluations",
            len(rows) * len(dev_eps) * config["evaluation"]["replicates"])
        _write_csv(out / "ablate_lambda.csv", ["lambda", "dev_error"], rows)
    elif which in ("incorporation", "graph"):
        ds = SimulationDataset.load_jsonl(out / "dataset.jsonl")
        test_eps = _load_split(out, "test")
        test_ds = simulate_batch(test_eps, k=ab_cfg["test_k"], replicates=1,
                                 base_seed=seed * 17 + 3, prior=_prior(config))
        manifest.add_simulations("ablation_test_set", test_ds.simulation_count())
        rows = []
        if which == "incorporation":
            variants = [("incorporation_mode", m)
                        for m in ab_cfg["incorporation_modes"]]
        else:
            variants = [("graph_mode", m) for m in ab_cfg["graph_modes"]]
        for field_name, mode in variants:
            srg_cfg = _surrogate_config(config, seed, **{field_name: mode})
            embeddings = (_load_embeddings(out)
                          if srg_cfg.graph_mode != "none" else None)
            result = train_surrogate(ds, srg_cfg, episode_embeddings=embeddings)
            err = prediction_error(result.model, test_ds,
                                   episode_embeddings=embeddings)
            rows.append((mode, err, result.best_val_loss))
        _write_csv(out / f"ablate_{which}.csv",
                   ["mode", "test_error", "val_loss"], rows)
    else:
        raise ConfigError(f"unknown ablation {which!r}")
    manifest.record_stage(f"ablate-{which}", time.perf_counter() - start)
    manifest.save()
    return manifest


# ---------------------------------------------------------------------------
# entry point

def _stage_runner(name: str, fn, config, seed, out, workers):
    manifest = Manifest(config, seed, out)
    start = time.perf_counter()
    try:
        if name == "evaluate":
            fn(config, seed, out, manifest, workers)
        else:
            fn(config, seed, out, manifest)
    except BaseException as exc:
        manifest.record_stage(name, time.perf_counter() - start)
        manifest.save()
        raise StageError(name, exc) from exc
    manifest.record_stage(name, time.perf_counter() - start)
    manifest.save()


def main(argv: list | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="seirfit",
        description="SEIR parameter estimation via a differentiable surrogate")
    parser.add_argument("--config", default=None, help="JSON config path")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", default="runs/latest", help="output directory")
    parser.add_argument("--workers", type=int, default=1)
    sub = parser.add_subparsers(dest="verb", required=True)
    for verb in ("generate", "simulate", "train-encoder", "train-surrogate",
                 "fit", "evaluate", "pipeline", "compare"):
        sub.add_parser(verb)
    ablate = sub.add_parser("ablate")
    ablate.add_argument("which", choices=["lambda", "incorporation", "graph"])

    args = parser.parse_args(argv)
    try:
        config = load_config(args.config)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        if args.verb == "pipeline":
            cmd_pipeline(config, args.seed, out, args.workers)
        elif args.verb == "compare":
            cmd_compare(config, args.seed, out, args.workers)
        elif args.verb == "ablate":
            cmd_ablate(config, args.seed, out, args.which)
        else:
            stage_fns = {
                "generate": cmd_generate,
                "simulate": cmd_simulate,
                "train-encoder": cmd_train_encoder,
                "train-surrogate": cmd_train_surrogate,
                "fit": cmd_fit,
                "evaluate": cmd_evaluate,
            }
            _stage_runner(args.verb, stage_fns[args.verb], config, args.seed,
                          out, args.workers)
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ConfigError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())

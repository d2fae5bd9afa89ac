"""Command-line harness: config handling, stage outputs, and error paths."""

import json

import numpy as np
import pytest

from seirfit.cli import DEFAULT_CONFIG, load_config, main, merge_config
from seirfit.mobility import ConfigError, load_episode


SMALL_CONFIG = {
    "dataset": {
        "n_episodes": 5,
        "split": [0.6, 0.2, 0.2],
        "generator": {"n_persons": 40, "n_locations": 3, "n_steps": 5,
                      "initial_infected": 5, "initial_exposed": 3},
    },
    "simulation": {"k": 6},
    "surrogate": {"hidden": 8, "epochs": 8, "batch_size": 6},
    "estimation": {"max_iters": 15, "restarts": 2},
    "evaluation": {"replicates": 2},
}


def write_config(tmp_path, overrides=None):
    doc = json.loads(json.dumps(SMALL_CONFIG))
    for section, fields in (overrides or {}).items():
        doc.setdefault(section, {}).update(fields)
    path = tmp_path / "config.json"
    path.write_text(json.dumps(doc))
    return str(path)


class TestConfig:
    def test_deep_merge_keeps_unrelated_defaults(self):
        merged = merge_config(DEFAULT_CONFIG, {"surrogate": {"hidden": 4}})
        assert merged["surrogate"]["hidden"] == 4
        assert merged["surrogate"]["epochs"] == DEFAULT_CONFIG["surrogate"]["epochs"]
        assert merged["simulation"] == DEFAULT_CONFIG["simulation"]

    def test_unknown_key_reported_with_path(self):
        with pytest.raises(ConfigError, match="surrogate.hiden"):
            merge_config(DEFAULT_CONFIG, {"surrogate": {"hiden": 4}})

    def test_split_fractions_must_sum_to_one(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"dataset": {"split": [0.5, 0.2, 0.2]}}))
        with pytest.raises(ConfigError):
            load_config(str(path))

    def test_missing_config_file_is_a_clean_failure(self, tmp_path, capsys):
        code = main(["--config", str(tmp_path / "nope.json"),
                     "--out", str(tmp_path / "run"), "generate"])
        assert code == 1
        assert "error:" in capsys.readouterr().err


class TestGenerate:
    def test_outputs_and_split_partition(self, tmp_path):
        out = tmp_path / "run"
        code = main(["--config", write_config(tmp_path), "--seed", "3",
                     "--out", str(out), "generate"])
        assert code == 0
        with open(out / "split_manifest.json") as f:
            doc = json.load(f)
        ids = doc["train"] + doc["dev"] + doc["test"]
        assert sorted(ids) == [f"ep{i:03d}" for i in range(5)]
        assert len(doc["train"]) == 3
        ep = load_episode(out / "episodes" / "train" / f"{doc['train'][0]}.json")
        assert len(ep.observed_infections) == 5
        with open(out / "truth.json") as f:
            truth = json.load(f)
        assert len(truth["theta_vector"]) == 22

    def test_deterministic_across_directories(self, tmp_path):
        cfg = write_config(tmp_path)
        a, b = tmp_path / "a", tmp_path / "b"
        main(["--config", cfg, "--seed", "5", "--out", str(a), "generate"])
        main(["--config", cfg, "--seed", "5", "--out", str(b), "generate"])
        assert (a / "truth.json").read_bytes() == (b / "truth.json").read_bytes()
        name = "episodes/train/" + json.load(open(a / "split_manifest.json"))["train"][0] + ".json"
        assert (a / name).read_bytes() == (b / name).read_bytes()


class TestStageOrdering:
    def test_simulate_before_generate_fails_cleanly(self, tmp_path, capsys):
        code = main(["--config", write_config(tmp_path),
                     "--out", str(tmp_path / "run"), "simulate"])
        assert code == 1
        assert "generate" in capsys.readouterr().err

    def test_fit_without_surrogate_fails_cleanly(self, tmp_path, capsys):
        cfg = write_config(tmp_path)
        out = str(tmp_path / "run")
        main(["--config", cfg, "--out", out, "generate"])
        code = main(["--config", cfg, "--out", out, "fit"])
        assert code == 1


class TestPipeline:
    def test_end_to_end_outputs(self, tmp_path):
        out = tmp_path / "run"
        code = main(["--config", write_config(tmp_path), "--seed", "2",
                     "--out", str(out), "pipeline"])
        assert code == 0
        with open(out / "manifest.json") as f:
            manifest = json.load(f)
        stage_names = [s["name"] for s in manifest["stages"]]
        assert stage_names == ["generate", "simulate", "train-surrogate",
                               "fit", "evaluate"]
        ledger = manifest["simulation_ledger"]
        assert ledger["observations"] == 5
        assert ledger["training_set"] == 3 * 6  # train episodes x theta samples
        assert ledger["evaluation"] == 2 * 1    # replicates x test episodes

        metrics = (out / "metrics.csv").read_text().strip().split("\n")
        assert metrics[0] == "episode_id,l2_error"
        assert len(metrics) == 2  # header plus one test episode
        assert (out / "surrogate_curve.csv").exists()
        with open(out / "fit.json") as f:
            fit = json.load(f)
        assert len(fit["theta_vector"]) == 22
        svgs = list(out.glob("trajectory_*.svg"))
        assert len(svgs) == 1

    def test_encoder_stage_included_for_graph_modes(self, tmp_path):
        cfg = write_config(tmp_path, {
            "surrogate": {"graph_mode": "constant", "hidden": 8},
            "encoder": {"embed_dim": 8, "epochs": 2},
        })
        out = tmp_path / "run"
        code = main(["--config", cfg, "--seed", "1", "--out", str(out), "pipeline"])
        assert code == 0
        with open(out / "manifest.json") as f:
            manifest = json.load(f)
        assert "train-encoder" in [s["name"] for s in manifest["stages"]]
        assert (out / "encoder.json").exists()
        with open(out / "embeddings.json") as f:
            embeddings = json.load(f)
        assert set(embeddings) == {f"ep{i:03d}" for i in range(5)}
        rows = np.asarray(embeddings["ep000"])
        assert rows.shape == (5, 8)

    def test_hidden_width_must_match_embed_dim(self, tmp_path, capsys):
        cfg = write_config(tmp_path, {
            "surrogate": {"graph_mode": "constant", "hidden": 12},
            "encoder": {"embed_dim": 8, "epochs": 2},
        })
        code = main(["--config", cfg, "--out", str(tmp_path / "run"), "pipeline"])
        assert code == 1
        assert "embed_dim" in capsys.readouterr().err

    def test_failed_stage_still_writes_manifest(self, tmp_path):
        cfg = write_config(tmp_path, {
            "surrogate": {"graph_mode": "constant", "hidden": 12},
            "encoder": {"embed_dim": 8, "epochs": 2},
        })
        out = tmp_path / "run"
        main(["--config", cfg, "--out", str(out), "pipeline"])
        with open(out / "manifest.json") as f:
            manifest = json.load(f)
        assert manifest["stages"][-1]["name"] == "train-surrogate"


class TestCompareAndAblate:
    def test_compare_writes_equal_budgets(self, tmp_path):
        cfg = write_config(tmp_path, {
            "compare": {"k_grid": [4], "replicates": {"4": 1},
                        "anchor_lam": {"4": 100.0}, "jitter": 0.05,
                        "max_iters": 10},
        })
        out = tmp_path / "run"
        main(["--config", cfg, "--seed", "1", "--out", str(out), "pipeline"])
        code = main(["--config", cfg, "--seed", "1", "--out", str(out), "compare"])
        assert code == 0
        lines = (out / "compare.csv").read_text().strip().split("\n")
        assert lines[0] == "K,vanilla_error,surrogate_error,vanilla_simulations,surrogate_simulations"
        k, _, _, v_sims, s_sims = lines[1].split(",")
        assert k == "4"
        assert v_sims == s_sims

    def test_lambda_ablation_covers_grid(self, tmp_path):
        cfg = write_config(tmp_path, {
            "ablate": {"lambda_grid": [0.0, 50.0], "test_k": 3},
            "estimation": {"max_iters": 8, "restarts": 2},
        })
        out = tmp_path / "run"
        main(["--config", cfg, "--seed", "1", "--out", str(out), "pipeline"])
        code = main(["--config", cfg, "--seed", "1", "--out", str(out),
                     "ablate", "lambda"])
        assert code == 0
        lines = (out / "ablate_lambda.csv").read_text().strip().split("\n")
        assert lines[0] == "lambda,dev_error"
        assert [l.split(",")[0] for l in lines[1:]] == ["0", "50"]

    def test_incorporation_ablation_lists_modes(self, tmp_path):
        cfg = write_config(tmp_path, {
            "ablate": {"incorporation_modes": ["each", "first"], "test_k": 3},
        })
        out = tmp_path / "run"
        main(["--config", cfg, "--seed", "1", "--out", str(out), "pipeline"])
        code = main(["--config", cfg, "--seed", "1", "--out", str(out),
                     "ablate", "incorporation"])
        assert code == 0
        lines = (out / "ablate_incorporation.csv").read_text().strip().split("\n")
        assert [l.split(",")[0] for l in lines[1:]] == ["each", "first"]

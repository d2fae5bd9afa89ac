"""Graph pooling encoder: normalization, assignments, training, persistence."""

import numpy as np
import pytest

from seirfit.autodiff import Tensor
from seirfit.encoder import (EncoderConfig, classification_accuracy,
                             cluster_schedule, encode_graph, init_encoder,
                             load_encoder, normalized_adjacency,
                             normalized_adjacency_np, save_encoder,
                             train_encoder)
from seirfit.mobility import (ConfigError, GeneratorConfig,
                              generate_synthetic_episode, snapshot_to_graph)


def episode_graphs(n_persons=20, n_locations=6, n_steps=4, seed=0, **kwargs):
    cfg = GeneratorConfig(n_persons=n_persons, n_locations=n_locations,
                          n_steps=n_steps, initial_infected=2, **kwargs)
    ep = generate_synthetic_episode(cfg, seed)
    return [(*snapshot_to_graph(snap, ep), t)
            for t, snap in enumerate(ep.snapshots)], ep


class TestClusterSchedule:
    def test_quarter_of_nodes_with_floor_and_cap(self):
        assert cluster_schedule(8, 64) == (4, 1)
        assert cluster_schedule(100, 64) == (25, 1)
        assert cluster_schedule(1000, 64) == (64, 1)


class TestNormalization:
    def test_numpy_and_tensor_paths_agree(self):
        rng = np.random.default_rng(0)
        adj = (rng.random((7, 7)) < 0.4).astype(float)
        adj = np.triu(adj, 1)
        adj = adj + adj.T
        np.testing.assert_allclose(normalized_adjacency(Tensor(adj)).data,
                                   normalized_adjacency_np(adj), atol=1e-12)

    def test_row_scaling_bounded(self):
        adj = np.ones((4, 4)) - np.eye(4)
        norm = normalized_adjacency_np(adj)
        assert np.all(norm >= 0)
        np.testing.assert_allclose(norm.sum(axis=1), 1.0, atol=1e-12)


class TestForward:
    def test_embedding_shape_and_assignment_row_sums(self):
        graphs, _ = episode_graphs()
        adj, feats, _ = graphs[0]
        model = init_encoder(adj.shape[0], feats.shape[1], 4,
                             EncoderConfig(embed_dim=8, seed=1))
        emb, assignments = model.forward(adj, feats, collect_assignments=True)
        assert emb.shape == (1, 8)
        assert len(assignments) == 2
        for s in assignments:
            np.testing.assert_allclose(s.data.sum(axis=1), 1.0, atol=1e-9)

    def test_feature_width_checked(self):
        graphs, _ = episode_graphs()
        adj, feats, _ = graphs[0]
        model = init_encoder(adj.shape[0], feats.shape[1] + 1, 4,
                             EncoderConfig(embed_dim=8))
        with pytest.raises(ValueError):
            model.forward(adj, feats)

    def test_encode_deterministic(self):
        graphs, _ = episode_graphs()
        adj, feats, _ = graphs[0]
        model = init_encoder(adj.shape[0], feats.shape[1], 4,
                             EncoderConfig(embed_dim=8, seed=2))
        a = encode_graph(model, adj, feats).data
        b = encode_graph(model, adj, feats).data
        np.testing.assert_array_equal(a, b)


class TestTraining:
    def test_loss_decreases_on_separable_snapshots(self):
        # one active-location count per step makes the label recoverable
        graphs, _ = episode_graphs(
            n_persons=16, n_locations=8, n_steps=4, revisit_prob=0.1,
            active_fraction_schedule=[1.0, 0.6, 0.35, 0.13])
        model, history = train_encoder(
            graphs, EncoderConfig(embed_dim=8, epochs=40, lr=0.02,
                                  batch_size=4, seed=0))
        assert history[-1] < history[0]
        assert classification_accuracy(model, graphs) > 1.0 / 4

    def test_needs_multiple_labels(self):
        graphs, _ = episode_graphs()
        singleton = [g for g in graphs if g[2] == 0]
        with pytest.raises(ConfigError):
            train_encoder(singleton, EncoderConfig())

    def test_empty_input_rejected(self):
        with pytest.raises(ConfigError):
            train_encoder([], EncoderConfig())


class TestPersistence:
    def test_save_load_preserves_embeddings(self, tmp_path):
        graphs, _ = episode_graphs()
        model, _ = train_encoder(graphs, EncoderConfig(embed_dim=8, epochs=3,
                                                       batch_size=4, seed=3))
        path = tmp_path / "encoder.json"
        save_encoder(model, path)
        loaded = load_encoder(path)
        adj, feats, _ = graphs[1]
        np.testing.assert_allclose(encode_graph(loaded, adj, feats).data,
                                   encode_graph(model, adj, feats).data,
                                   atol=1e-12)

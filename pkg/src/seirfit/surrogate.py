"""LSTM surrogate of the SEIR simulator.

A 3-layer LSTM with residual connections predicts next-step compartment
counts (normalized by population) from the previous step's counts, the
snapshot's graph embedding, and the flattened SEIR parameter vector. The
parameter vector can be injected every step ("each"), only at the first step
("first"), or multiplied elementwise into a feed-forward image of the counts
("hadamard"); the graph embedding can be per-step ("varying"), frozen at the
first step ("constant"), or absent ("none").
"""

from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .checkpoint import load_checkpoint, save_checkpoint
from .optim import SGD, Adam, clip_gradients
from .simulator import THETA_DIM, SimulationDataset
from .streams import stream

INCORPORATION_MODES = ("each", "first", "hadamard")
GRAPH_MODES = ("none", "constant", "varying")

N_LAYERS = 3


OPTIMIZERS = ("adam", "sgd")


@dataclass
class SurrogateConfig:
    hidden: int = 128
    incorporation_mode: str = "each"
    graph_mode: str = "varying"
    # plain SGD tends to stall at a mean-predicting solution on this loss and
    # never picks up sensitivity to the epidemic parameters, so the adaptive
    # optimizer is the default
    optimizer: str = "adam"
    lr: float = 3e-3
    epochs: int = 200
    # optional fine-tuning phase where the model's own predictions are fed
    # back as inputs, matching how the estimator rolls the model out
    ar_epochs: int = 0
    ar_lr: float = 1e-3
    batch_size: int = 256
    clip_norm: float = 1.0
    init_range: float = 0.08
    dropout: float = 0.0  # between layers, training only
    val_fraction: float = 0.1
    seed: int = 0

    def validate(self) -> None:
        if self.incorporation_mode not in INCORPORATION_MODES:
            raise ValueError(f"unknown incorporation_mode {self.incorporation_mode!r}")
        if self.graph_mode not in GRAPH_MODES:
            raise ValueError(f"unknown graph_mode {self.graph_mode!r}")
        if self.optimizer not in OPTIMIZERS:
            raise ValueError(f"unknown optimizer {self.optimizer!r}")


def lstm_cell(h_prev: Tensor, c_prev: Tensor, x_t: Tensor, h_graph: Tensor,
              theta_vec: Tensor, params: tuple) -> tuple:
    """Layer-1 LSTM cell over the stacked input [h_prev; x_t; h_graph; theta]."""
    z = ad.concat_cols([h_prev, x_t, h_graph, theta_vec])
    return _cell(h_prev, c_prev, z, params)


def _cell(h_prev: Tensor, c_prev: Tensor, z: Tensor, params: tuple) -> tuple:
    weight, bias = params
    k = h_prev.shape[1]
    gates = ad.add_bias(ad.matmul(z, weight), bias)
    i_t = ad.sigmoid(ad.slice_cols(gates, 0, k))
    f_t = ad.sigmoid(ad.slice_cols(gates, k, 2 * k))
    o_t = ad.sigmoid(ad.slice_cols(gates, 2 * k, 3 * k))
    l_t = ad.tanh(ad.slice_cols(gates, 3 * k, 4 * k))
    c_t = ad.add(ad.mul(f_t, c_prev), ad.mul(i_t, l_t))
    h_t = ad.mul(o_t, ad.tanh(c_t))
    return h_t, c_t


def readout(h_t: Tensor, heads: tuple) -> Tensor:
    """Shared projection then four scalar heads; (B, 4) in normalized units."""
    fc_w, fc_b, head_mat = heads
    h_hat = ad.add_bias(ad.matmul(h_t, fc_w), fc_b)
    return ad.matmul(h_hat, head_mat)


class SurrogateModel:
    """Trained gate weights, readout heads, and mode configuration."""

    def __init__(self, config: SurrogateConfig, params: dict | None = None):
        config.validate()
        self.config = config
        self.theta_dim = THETA_DIM
        k = config.hidden
        if params is not None:
            self.params = params
            return
        rng = stream(config.seed, 10)
        r = config.init_range

        def uniform(shape):
            return Tensor(rng.uniform(-r, r, size=shape), requires_grad=True)

        in1 = self._layer1_width()
        self.params = {"lstm0.W": uniform((k + in1, 4 * k)),
                       "lstm0.b": uniform((1, 4 * k))}
        for layer in range(1, N_LAYERS):
            self.params[f"lstm{layer}.W"] = uniform((2 * k, 4 * k))
            self.params[f"lstm{layer}.b"] = uniform((1, 4 * k))
        self.params["fc.W"] = uniform((k, k))
        self.params["fc.b"] = uniform((1, k))
        self.params["heads"] = uniform((k, 4))
        if config.incorporation_mode == "hadamard":
            self.params["ffn.W1"] = uniform((4, k))
            self.params["ffn.b1"] = uniform((1, k))
            self.params["ffn.W2"] = uniform((k, self.theta_dim))
            self.params["ffn.b2"] = uniform((1, self.theta_dim))

    def _layer1_width(self) -> int:
        k = self.config.hidden
        if self.config.incorporation_mode == "hadamard":
            return self.theta_dim + k  # FFN(x) * theta block plus graph block
        return 4 + k + self.theta_dim  # raw counts, graph block, theta block

    def parameters(self) -> list:
        return [self.params[name] for name in sorted(self.params)]

    # -- forward ------------------------------------------------------------

    def _step_block(self, x_t: Tensor, theta: Tensor, t_index: int) -> list:
        mode = self.config.incorporation_mode
        if mode == "hadamard":
            hid = ad.relu(ad.add_bias(ad.matmul(x_t, self.params["ffn.W1"]),
                                      self.params["ffn.b1"]))
            mapped = ad.add_bias(ad.matmul(hid, self.params["ffn.W2"]),
                                 self.params["ffn.b2"])
            return [ad.mul(mapped, theta)]
        if mode == "first" and t_index > 1:
            theta = Tensor(np.zeros(theta.shape))
        return [x_t, theta]

    def step(self, state: list, x_t: Tensor, h_graph: Tensor, theta: Tensor,
             t_index: int, dropout_rng=None) -> Tensor:
        """Advance all layers one step in place; returns the (B, 4) prediction."""
        block = self._step_block(x_t, theta, t_index)
        z = ad.concat_cols([state[0][0]] + block[:1] + [h_graph] + block[1:])
        h, c = _cell(state[0][0], state[0][1], z,
                     (self.params["lstm0.W"], self.params["lstm0.b"]))
        state[0] = (h, c)
        below = h
        for layer in range(1, N_LAYERS):
            below = self._dropout(below, dropout_rng)
            z = ad.concat_cols([state[layer][0], below])
            h, c = _cell(state[layer][0], state[layer][1], z,
                         (self.params[f"lstm{layer}.W"], self.params[f"lstm{layer}.b"]))
            h = ad.add(h, below)  # residual connection between layers
            state[layer] = (h, c)
            below = h
        delta = readout(below, (self.params["fc.W"], self.params["fc.b"],
                                self.params["heads"]))
        # the readout predicts the change in counts; adding the current
        # counts back keeps autoregressive rollouts anchored to the state
        return ad.add(x_t, delta)

    def _dropout(self, h: Tensor, rng) -> Tensor:
        p = self.config.dropout
        if rng is None or p <= 0.0:
            return h
        mask = (rng.random(h.shape) >= p) / (1.0 - p)
        return ad.mul(h, Tensor(mask))

    def initial_state(self, batch: int) -> list:
        k = self.config.hidden
        zero = lambda: Tensor(np.zeros((batch, k)))
        return [(zero(), zero()) for _ in range(N_LAYERS)]

    def graph_inputs(self, embeddings: np.ndarray | None, t_max: int,
                     batch: int) -> list:
        """Per-step (B, K) embedding constants according to graph_mode."""
        k = self.config.hidden
        mode = self.config.graph_mode
        if mode == "none":
            z = Tensor(np.zeros((batch, k)))
            return [z] * t_max
        if embeddings is None:
            raise ValueError(f"graph_mode={mode!r} requires snapshot embeddings")
        emb = np.asarray(embeddings, dtype=np.float64)
        if emb.shape != (t_max, k):
            raise ValueError(f"embeddings shape {emb.shape}, expected {(t_max, k)}")
        if mode == "constant":
            row = np.tile(emb[0], (batch, 1))
            t0 = Tensor(row)
            return [t0] * t_max
        return [Tensor(np.tile(emb[t], (batch, 1))) for t in range(t_max)]

    def forward_rollout(self, x0: np.ndarray, theta: Tensor | np.ndarray,
                        t_max: int, embeddings: np.ndarray | None = None,
                        mode: str = "autoregressive",
                        teacher_inputs: np.ndarray | None = None) -> list:
        """Per-step (B, 4) predictions in normalized units.

        ``teacher_forced`` feeds the provided simulated inputs each step;
        ``autoregressive`` feeds the model's own previous prediction. ``theta``
        may be a leaf Tensor so gradients can flow into it.
        """
        x0 = np.atleast_2d(np.asarray(x0, dtype=np.float64))
        batch = x0.shape[0]
        if not isinstance(theta, Tensor):
            theta = Tensor(np.atleast_2d(np.asarray(theta, dtype=np.float64)))
        if theta.shape != (batch, self.theta_dim):
            raise ValueError(f"theta shape {theta.shape}, expected {(batch, self.theta_dim)}")
        graph_in = self.graph_inputs(embeddings, t_max, batch)
        state = self.initial_state(batch)
        preds = []
        x_t = Tensor(x0)
        for t in range(1, t_max + 1):
            if mode == "teacher_forced":
                if teacher_inputs is None:
                    raise ValueError("teacher_forced mode needs teacher_inputs")
                x_t = Tensor(teacher_inputs[:, t - 1, :])
            pred = self.step(state, x_t, graph_in[t - 1], theta, t)
            preds.append(pred)
            if mode == "autoregressive":
                x_t = pred
        return preds


# ---------------------------------------------------------------------------
# training

@dataclass
class TrainingResult:
    model: "SurrogateModel"
    history: list  # (epoch, train_loss, val_loss)
    best_val_loss: float
    best_epoch: int


def _dataset_arrays(dataset: SimulationDataset):
    """Stacked normalized inputs/targets; trajectories must share T."""
    if not dataset.records:
        raise ValueError("empty simulation dataset")
    t_max = dataset.records[0].counts.shape[0] - 1
    xs, ys, thetas, ep_ids, pops = [], [], [], [], []
    for traj in dataset.records:
        if traj.counts.shape[0] - 1 != t_max:
            raise ValueError("all trajectories must share the same T for batching")
        n = float(traj.counts[0].sum())
        xs.append(traj.counts[:-1] / n)
        ys.append(traj.counts[1:] / n)
        thetas.append(traj.theta_used.to_vector())
        ep_ids.append(traj.episode_id)
        pops.append(n)
    return (np.asarray(xs), np.asarray(ys), np.asarray(thetas), ep_ids,
            np.asarray(pops), t_max)


def _batch_loss(model: SurrogateModel, xs, ys, theta_mat, emb_per_step,
                dropout_rng=None, autoregressive: bool = False) -> Tensor:
    batch, t_max = xs.shape[0], xs.shape[1]
    state = model.initial_state(batch)
    theta = Tensor(theta_mat)
    loss = None
    x_t = Tensor(xs[:, 0, :])
    for t in range(1, t_max + 1):
        if not autoregressive:
            x_t = Tensor(xs[:, t - 1, :])
        pred = model.step(state, x_t, emb_per_step[t - 1], theta, t,
                          dropout_rng=dropout_rng)
        term = ad.mse(pred, Tensor(ys[:, t - 1, :]))
        loss = term if loss is None else ad.add(loss, term)
        if autoregressive:
            x_t = pred
    return ad.scale(loss, 1.0 / t_max)


def _embedding_steps(model, episode_embeddings, ep_ids, idx, t_max):
    """Per-step (B, K) constant tensors for a batch of trajectories."""
    k = model.config.hidden
    batch = len(idx)
    if model.config.graph_mode == "none":
        z = Tensor(np.zeros((batch, k)))
        return [z] * t_max
    rows = np.zeros((t_max, batch, k))
    for j, i in enumerate(idx):
        emb = episode_embeddings[ep_ids[i]]
        if model.config.graph_mode == "constant":
            rows[:, j, :] = emb[0]
        else:
            rows[:, j, :] = emb
    return [Tensor(rows[t]) for t in range(t_max)]


def train_surrogate(dataset: SimulationDataset, config: SurrogateConfig,
                    episode_embeddings: dict | None = None) -> TrainingResult:
    """Fit the surrogate to simulated trajectories; keeps the best-validation
    parameters. ``episode_embeddings`` maps episode_id to a (T, K) array of
    frozen encoder embeddings (required unless graph_mode is "none")."""
    config.validate()
    xs, ys, theta_mat, ep_ids, _, t_max = _dataset_arrays(dataset)
    model = SurrogateModel(config)
    if config.graph_mode != "none" and episode_embeddings is None:
        raise ValueError(f"graph_mode={config.graph_mode!r} requires episode_embeddings")

    rng = stream(config.seed, 11)
    m = xs.shape[0]
    perm = rng.permutation(m)
    n_val = max(1, int(round(config.val_fraction * m)))
    val_idx, train_idx = perm[:n_val], perm[n_val:]
    if train_idx.size == 0:
        train_idx = val_idx

    params = model.parameters()
    make_opt = Adam if config.optimizer == "adam" else SGD
    drop_rng = stream(config.seed, 12) if config.dropout > 0 else None

    def eval_loss(idx, autoregressive=False) -> float:
        total = 0.0
        for start in range(0, len(idx), config.batch_size):
            sel = idx[start:start + config.batch_size]
            emb = _embedding_steps(model, episode_embeddings, ep_ids, sel, t_max)
            loss = _batch_loss(model, xs[sel], ys[sel], theta_mat[sel], emb,
                               autoregressive=autoregressive)
            total += loss.item() * len(sel)
        return total / len(idx)

    def run_phase(n_epochs, lr, autoregressive, epoch_offset):
        opt = make_opt(params, lr=lr)
        best_val = eval_loss(val_idx, autoregressive)
        best_epoch = epoch_offset
        best_params = {k_: v.data.copy() for k_, v in model.params.items()}
        rows = []
        for epoch in range(1, n_epochs + 1):
            order = train_idx.copy()
            rng.shuffle(order)
            train_loss = 0.0
            for start in range(0, len(order), config.batch_size):
                sel = order[start:start + config.batch_size]
                emb = _embedding_steps(model, episode_embeddings, ep_ids, sel, t_max)
                loss = _batch_loss(model, xs[sel], ys[sel], theta_mat[sel], emb,
                                   dropout_rng=drop_rng, autoregressive=autoregressive)
                ad.backward(loss)
                clip_gradients(params, config.clip_norm)
                opt.step()
                train_loss += loss.item() * len(sel)
            val_loss = eval_loss(val_idx, autoregressive)
            rows.append((epoch_offset + epoch, train_loss / len(order), val_loss))
            if val_loss < best_val:
                best_val = val_loss
                best_epoch = epoch_offset + epoch
                best_params = {k_: v.data.copy() for k_, v in model.params.items()}
        for name, data in best_params.items():
            model.params[name].data = data
        return rows, best_val, best_epoch

    history, best_val, best_epoch = run_phase(config.epochs, config.lr, False, 0)
    if config.ar_epochs > 0:
        ar_rows, best_val, best_epoch = run_phase(config.ar_epochs, config.ar_lr,
                                                  True, config.epochs)
        history += ar_rows
    return TrainingResult(model=model, history=history,
                          best_val_loss=best_val, best_epoch=best_epoch)


def prediction_error(model: SurrogateModel, dataset: SimulationDataset,
                     episode_embeddings: dict | None = None,
                     infections_only: bool = True,
                     mode: str = "autoregressive") -> float:
    """Mean per-trajectory squared L2 error in raw counts.

    ``autoregressive`` rolls the model forward on its own predictions, which
    is how the estimator consumes it; ``teacher_forced`` scores one-step-ahead
    predictions from simulated inputs.
    """
    xs, ys, theta_mat, ep_ids, pops, t_max = _dataset_arrays(dataset)
    total = 0.0
    for i in range(xs.shape[0]):
        emb = _embedding_steps(model, episode_embeddings, ep_ids, [i], t_max)
        state = model.initial_state(1)
        theta = Tensor(theta_mat[i:i + 1])
        err = 0.0
        x_t = Tensor(xs[i:i + 1, 0, :])
        for t in range(1, t_max + 1):
            if mode == "teacher_forced":
                x_t = Tensor(xs[i:i + 1, t - 1, :])
            pred = model.step(state, x_t, emb[t - 1], theta, t)
            diff = (pred.data[0] - ys[i, t - 1]) * pops[i]
            err += float((diff[2] ** 2) if infections_only else (diff ** 2).sum())
            if mode != "teacher_forced":
                x_t = pred
        total += err
    return total / xs.shape[0]


# ---------------------------------------------------------------------------
# persistence

def save_surrogate(model: SurrogateModel, path) -> None:
    save_checkpoint(path, model.params, {"config": asdict(model.config),
                                         "theta_dim": model.theta_dim})


def load_surrogate(path) -> SurrogateModel:
    params, meta = load_checkpoint(path)
    config = SurrogateConfig(**meta["config"])
    return SurrogateModel(config, params=params)


def training_curve_csv(history: list, path) -> None:
    with open(path, "w") as f:
        f.write("epoch,train_loss,val_loss\n")
        for epoch, train, val in history:
            f.write(f"{epoch},{train:.10g},{val:.10g}\n")

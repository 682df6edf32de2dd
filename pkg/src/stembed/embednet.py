"""Bottleneck severity/age classifier over basis features, in plain numpy.

Four hidden layers (affine -> ReLU -> batch-norm), a skip connection from
layer 1 to layer 3, linear bottleneck projections on the inputs of layers 2
and 3, dropout on the outputs of layers 1-3 during training, and a 25-dim
final hidden layer whose activations are the embedding. One softmax head for
the primary task (severity or age), an optional second head over speaker IDs
combined through an interpolated cross-entropy cost.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, asdict

import numpy as np

BN_EPS = 1e-8
BOTTLENECK_DIM = 25


class ConfigurationError(Exception):
    pass


class DataError(Exception):
    pass


@dataclass
class NetworkConfig:
    input_dim: int
    num_primary_classes: int
    hidden_dims: tuple = (2000, 2000, 2000, BOTTLENECK_DIM)
    linear_bottleneck_dim: int = 200
    dropout_rate: float = 0.2
    use_speaker_task: bool = False
    num_speakers: int = 0
    mtl_weight: float = 0.0
    learning_rate: float = 1e-3
    momentum: float = 0.9
    batch_size: int = 64
    epochs: int = 20
    seed: int = 0

    def __post_init__(self):
        self.hidden_dims = tuple(self.hidden_dims)
        if len(self.hidden_dims) != 4:
            raise ConfigurationError("hidden_dims must have length 4")
        if self.hidden_dims[3] != BOTTLENECK_DIM:
            raise ConfigurationError(f"last hidden dim must be {BOTTLENECK_DIM}")
        if self.hidden_dims[0] != self.hidden_dims[2]:
            raise ConfigurationError("skip connection requires hidden_dims[0] == hidden_dims[2]")
        if not 0.0 <= self.mtl_weight <= 1.0:
            raise ConfigurationError("mtl_weight must be in [0, 1]")
        if self.mtl_weight > 0 and not self.use_speaker_task:
            raise ConfigurationError("mtl_weight > 0 requires the speaker task")
        if self.use_speaker_task and self.num_speakers < 1:
            raise ConfigurationError("speaker task requires num_speakers >= 1")


@dataclass
class TrainingRecord:
    feature: np.ndarray
    primary_label: int
    speaker_label: int | None = None


def _uniform_init(rng, fan_in, shape):
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


class EmbeddingNetwork:
    """Parameter container with forward in train or infer mode."""

    def __init__(self, config: NetworkConfig, rng=None):
        self.config = config
        rng = rng or np.random.default_rng(config.seed)
        h1, h2, h3, h4 = config.hidden_dims
        p = config.linear_bottleneck_dim
        d = config.input_dim
        self.params = {
            "W1": _uniform_init(rng, d, (d, h1)), "b1": np.zeros(h1),
            "g1": np.ones(h1), "be1": np.zeros(h1),
            "P2": _uniform_init(rng, h1, (h1, p)),
            "W2": _uniform_init(rng, p, (p, h2)), "b2": np.zeros(h2),
            "g2": np.ones(h2), "be2": np.zeros(h2),
            "P3": _uniform_init(rng, h2, (h2, p)),
            "W3": _uniform_init(rng, p, (p, h3)), "b3": np.zeros(h3),
            "g3": np.ones(h3), "be3": np.zeros(h3),
            "W4": _uniform_init(rng, h3, (h3, h4)), "b4": np.zeros(h4),
            "g4": np.ones(h4), "be4": np.zeros(h4),
            "Wp": _uniform_init(rng, h4, (h4, config.num_primary_classes)),
            "bp": np.zeros(config.num_primary_classes),
        }
        if config.use_speaker_task:
            self.params["Ws"] = _uniform_init(rng, h4, (h4, config.num_speakers))
            self.params["bs"] = np.zeros(config.num_speakers)
        self.running = {}
        for i, width in enumerate(config.hidden_dims, start=1):
            self.running[f"rm{i}"] = np.zeros(width)
            self.running[f"rv{i}"] = np.ones(width)
        self.bn_momentum = 0.9

    # -- batch norm -------------------------------------------------------

    def _bn_forward(self, r, layer, mode, update_running):
        g = self.params[f"g{layer}"]
        be = self.params[f"be{layer}"]
        if mode == "train":
            mu = r.mean(axis=0)
            var = r.var(axis=0)
            if update_running:
                m = self.bn_momentum
                self.running[f"rm{layer}"] = m * self.running[f"rm{layer}"] + (1 - m) * mu
                self.running[f"rv{layer}"] = m * self.running[f"rv{layer}"] + (1 - m) * var
        else:
            mu = self.running[f"rm{layer}"]
            var = self.running[f"rv{layer}"]
        inv_std = 1.0 / np.sqrt(var + BN_EPS)
        xhat = (r - mu) * inv_std
        return g * xhat + be, (xhat, inv_std, g, mode)

    @staticmethod
    def _bn_backward(dout, cache):
        xhat, inv_std, g, mode = cache
        dg = (dout * xhat).sum(axis=0)
        dbe = dout.sum(axis=0)
        dxhat = dout * g
        if mode == "train":
            n = dout.shape[0]
            dr = inv_std / n * (n * dxhat - dxhat.sum(axis=0) - xhat * (dxhat * xhat).sum(axis=0))
        else:
            dr = dxhat * inv_std
        return dr, dg, dbe

    # -- forward ----------------------------------------------------------

    def forward(self, x, mode="infer", dropout_rng=None, update_running=False):
        """Returns (primary logits, speaker logits or None, bottleneck, cache)."""
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        if x.shape[1] != self.config.input_dim:
            raise ValueError(f"feature dim {x.shape[1]} != configured {self.config.input_dim}")
        p = self.params
        cache = {"x": x, "mode": mode}
        rate = self.config.dropout_rate

        def dropout(h, key):
            if mode == "train" and dropout_rng is not None and rate > 0:
                mask = (dropout_rng.random(h.shape) >= rate) / (1.0 - rate)
            else:
                mask = None
            cache[key] = mask
            return h if mask is None else h * mask

        z1 = x @ p["W1"] + p["b1"]
        r1 = np.maximum(z1, 0.0)
        h1, cache["bn1"] = self._bn_forward(r1, 1, mode, update_running)
        d1 = dropout(h1, "mask1")

        u2 = d1 @ p["P2"]
        z2 = u2 @ p["W2"] + p["b2"]
        r2 = np.maximum(z2, 0.0)
        h2, cache["bn2"] = self._bn_forward(r2, 2, mode, update_running)
        d2 = dropout(h2, "mask2")

        u3 = d2 @ p["P3"]
        z3 = u3 @ p["W3"] + p["b3"]
        r3 = np.maximum(z3, 0.0)
        bn3_out, cache["bn3"] = self._bn_forward(r3, 3, mode, update_running)
        h3 = bn3_out + h1  # skip connection, post batch-norm
        d3 = dropout(h3, "mask3")

        z4 = d3 @ p["W4"] + p["b4"]
        r4 = np.maximum(z4, 0.0)
        btn, cache["bn4"] = self._bn_forward(r4, 4, mode, update_running)

        logits_p = btn @ p["Wp"] + p["bp"]
        logits_s = btn @ p["Ws"] + p["bs"] if "Ws" in p else None
        cache.update(z1=z1, z2=z2, z3=z3, z4=z4, d1=d1, d2=d2, d3=d3,
                     u2=u2, u3=u3, btn=btn)
        return logits_p, logits_s, btn, cache

    # -- persistence ------------------------------------------------------

    def save(self, path):
        arrays = {f"param__{k}": v for k, v in self.params.items()}
        arrays.update({f"run__{k}": v for k, v in self.running.items()})
        cfg = asdict(self.config)
        cfg["hidden_dims"] = list(cfg["hidden_dims"])
        arrays["config_json"] = np.frombuffer(
            json.dumps(cfg, sort_keys=True).encode("utf-8"), dtype=np.uint8)
        arrays["format_version"] = np.array([1], dtype=np.int64)
        np.savez(path, **arrays)

    @classmethod
    def load(cls, path):
        data = np.load(path)
        cfg = json.loads(bytes(data["config_json"]).decode("utf-8"))
        net = cls(NetworkConfig(**cfg))
        for k in list(net.params):
            net.params[k] = data[f"param__{k}"]
        for k in list(net.running):
            net.running[k] = data[f"run__{k}"]
        return net


# ---------------------------------------------------------------------------
# loss and gradients

def _log_softmax(logits):
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def softmax(logits):
    return np.exp(_log_softmax(logits))


def cross_entropy(logits, labels):
    """Mean negative log-likelihood, max-subtraction stabilized."""
    logp = _log_softmax(np.atleast_2d(logits))
    return -logp[np.arange(logp.shape[0]), labels].mean()


def mtl_loss(primary_logits, speaker_logits, primary_labels, speaker_labels, lam):
    """(1 - lam) * CE_primary + lam * CE_speaker, averaged over the batch."""
    if lam > 0 and speaker_logits is None:
        raise ConfigurationError("mtl_weight > 0 but no speaker head outputs given")
    loss = (1.0 - lam) * cross_entropy(primary_logits, primary_labels)
    if lam > 0:
        loss += lam * cross_entropy(speaker_logits, speaker_labels)
    return loss


def forward(net: EmbeddingNetwork, batch, mode="infer"):
    """Spec-level forward: (primary logits, speaker logits or None, bottleneck)."""
    lp, ls, btn, _ = net.forward(batch, mode=mode)
    return lp, ls, btn


def backward(net: EmbeddingNetwork, batch, primary_labels, speaker_labels=None,
             lam=0.0, dropout_rng=None, update_running=False):
    """Train-mode forward plus full backprop. Returns (loss, grads dict)."""
    x = np.atleast_2d(np.asarray(batch, dtype=np.float64))
    yp = np.asarray(primary_labels)
    lp, ls, btn, cache = net.forward(x, mode="train", dropout_rng=dropout_rng,
                                     update_running=update_running)
    loss = mtl_loss(lp, ls, yp, speaker_labels, lam)
    p = net.params
    n = x.shape[0]
    grads = {}

    probs_p = softmax(lp)
    probs_p[np.arange(n), yp] -= 1.0
    dlp = probs_p * ((1.0 - lam) / n)
    grads["Wp"] = cache["btn"].T @ dlp
    grads["bp"] = dlp.sum(axis=0)
    dbtn = dlp @ p["Wp"].T
    if ls is not None:
        if lam > 0:
            ys = np.asarray(speaker_labels)
            probs_s = softmax(ls)
            probs_s[np.arange(n), ys] -= 1.0
            dls = probs_s * (lam / n)
        else:
            dls = np.zeros_like(ls)
        grads["Ws"] = cache["btn"].T @ dls
        grads["bs"] = dls.sum(axis=0)
        dbtn = dbtn + dls @ p["Ws"].T

    dr4, grads["g4"], grads["be4"] = net._bn_backward(dbtn, cache["bn4"])
    dz4 = dr4 * (cache["z4"] > 0)
    grads["W4"] = cache["d3"].T @ dz4
    grads["b4"] = dz4.sum(axis=0)
    dd3 = dz4 @ p["W4"].T
    dh3 = dd3 if cache["mask3"] is None else dd3 * cache["mask3"]

    dr3, grads["g3"], grads["be3"] = net._bn_backward(dh3, cache["bn3"])
    dz3 = dr3 * (cache["z3"] > 0)
    grads["W3"] = cache["u3"].T @ dz3
    grads["b3"] = dz3.sum(axis=0)
    du3 = dz3 @ p["W3"].T
    grads["P3"] = cache["d2"].T @ du3
    dd2 = du3 @ p["P3"].T
    dh2 = dd2 if cache["mask2"] is None else dd2 * cache["mask2"]

    dr2, grads["g2"], grads["be2"] = net._bn_backward(dh2, cache["bn2"])
    dz2 = dr2 * (cache["z2"] > 0)
    grads["W2"] = cache["u2"].T @ dz2
    grads["b2"] = dz2.sum(axis=0)
    du2 = dz2 @ p["W2"].T
    grads["P2"] = cache["d1"].T @ du2
    dd1 = du2 @ p["P2"].T
    dh1 = dd1 if cache["mask1"] is None else dd1 * cache["mask1"]
    dh1 = dh1 + dh3  # skip connection feeds layer-1 output straight into h3

    dr1, grads["g1"], grads["be1"] = net._bn_backward(dh1, cache["bn1"])
    dz1 = dr1 * (cache["z1"] > 0)
    grads["W1"] = cache["x"].T @ dz1
    grads["b1"] = dz1.sum(axis=0)
    return loss, grads


# ---------------------------------------------------------------------------
# training

def _as_arrays(records):
    X = np.stack([np.asarray(r.feature, dtype=np.float64).ravel() for r in records])
    yp = np.array([r.primary_label for r in records], dtype=np.int64)
    if all(r.speaker_label is not None for r in records):
        ys = np.array([r.speaker_label for r in records], dtype=np.int64)
    else:
        ys = None
    return X, yp, ys


def train(records, cfg: NetworkConfig):
    """Minibatch SGD with momentum; deterministic given cfg.seed.

    Returns (network, log) where log is a list of per-epoch dicts with keys
    epoch, loss, primary_acc, speaker_acc.
    """
    if not records:
        raise DataError("no training records")
    X, yp, ys = _as_arrays(records)
    counts = np.bincount(yp, minlength=cfg.num_primary_classes)
    if np.any(counts == 0):
        raise DataError(f"classes with no records: {np.flatnonzero(counts == 0).tolist()}")
    if cfg.use_speaker_task and ys is None:
        raise DataError("speaker task enabled but some records lack speaker labels")
    lam = cfg.mtl_weight if cfg.use_speaker_task else 0.0

    rng = np.random.default_rng(cfg.seed)
    net = EmbeddingNetwork(cfg, rng=rng)
    velocity = {k: np.zeros_like(v) for k, v in net.params.items()}
    n = X.shape[0]
    log = []
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        epoch_loss = 0.0
        n_batches = 0
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            loss, grads = backward(net, X[idx], yp[idx],
                                   None if ys is None else ys[idx],
                                   lam, dropout_rng=rng, update_running=True)
            if not np.isfinite(loss):
                raise FloatingPointError(f"non-finite loss at epoch {epoch}: {loss}")
            for k, g in grads.items():
                velocity[k] = cfg.momentum * velocity[k] - cfg.learning_rate * g
                net.params[k] = net.params[k] + velocity[k]
            epoch_loss += loss
            n_batches += 1
        lp, ls, _, _ = net.forward(X, mode="infer")
        primary_acc = float(np.mean(lp.argmax(axis=1) == yp))
        speaker_acc = float(np.mean(ls.argmax(axis=1) == ys)) if ls is not None and ys is not None else float("nan")
        log.append({"epoch": epoch, "loss": epoch_loss / n_batches,
                    "primary_acc": primary_acc, "speaker_acc": speaker_acc})
    return net, log


def write_training_log(log, path):
    with open(path, "w", encoding="utf-8") as fh:
        for row in log:
            fh.write(f"{row['epoch']}\t{row['loss']:.6f}\t"
                     f"{row['primary_acc']:.4f}\t{row['speaker_acc']:.4f}\n")


def extract_embedding(net: EmbeddingNetwork, feature):
    """25-dim bottleneck activations for one feature vector, infer mode."""
    vec = np.asarray(getattr(feature, "vector", feature), dtype=np.float64)
    _, _, btn, _ = net.forward(vec[None, :], mode="infer")
    return btn[0]


def classify(net: EmbeddingNetwork, feature):
    """(predicted primary class, posterior); ties break to the lowest index."""
    vec = np.asarray(getattr(feature, "vector", feature), dtype=np.float64)
    lp, _, _, _ = net.forward(vec[None, :], mode="infer")
    posterior = softmax(lp)[0]
    return int(np.argmax(posterior)), posterior

"""The three classifiers: batch ELM, streaming RLS ELM, and the sparse
error-driven online model (real and Q8.8 fixed-point backends).

All three share one fixed random hidden layer drawn from the per-neuron
LFSR streams, so the base seed is the only source of model randomness and
accuracy comparisons isolate the training rule rather than the
initialization. The batch and streaming models materialize the input
weights and apply a sigmoid; the sparse online model never materializes
them (rows are regenerated in bounded chunks) and thresholds the
preactivation into binary hidden states.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numpy as np

from . import fxp, linalg
from .datasets import NUM_CLASSES, Dataset
from .opcount import active_counter
from .prng import DEFAULT_BASE_SEED, SeedPlan, gen_weight_row

DEFAULT_LAMBDA = 1e-3
DEFAULT_ETA_REAL = 0.01
DEFAULT_ETA_FXP16 = 1.0 / 256.0
DEFAULT_W_MAX = 8.0
DEFAULT_EPOCHS = 5
CALIBRATION_SAMPLES = 100

ROW_CHUNK = 128


def one_hot(labels: np.ndarray, classes: int = NUM_CLASSES) -> np.ndarray:
    """Targets with {0, 1} coding, one row per label."""
    t = np.zeros((len(labels), classes))
    t[np.arange(len(labels)), labels] = 1.0
    return t


def sigmoid(z: np.ndarray) -> np.ndarray:
    """Numerically stable logistic function (no overflow at either tail)."""
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


class ElmClassifier:
    """Single-hidden-layer classifier trained by a closed-form ridge solve.

    Input weights and biases are fixed at construction, regenerated from
    the LFSR plan (one row of input_dim weights plus a trailing bias per
    neuron) and converted to reals.
    """

    kind = "elm"

    def __init__(self, hidden_count: int, input_dim: int,
                 base_seed: int = DEFAULT_BASE_SEED,
                 lam: float = DEFAULT_LAMBDA,
                 classes: int = NUM_CLASSES):
        self.plan = SeedPlan(base_seed, hidden_count)
        self.input_dim = input_dim
        self.classes = classes
        self.lam = lam
        w_in = np.empty((hidden_count, input_dim))
        bias = np.empty(hidden_count)
        for i in range(hidden_count):
            raws = gen_weight_row(self.plan, i, input_dim + 1)
            w_in[i] = raws[:input_dim] / fxp.ONE
            bias[i] = raws[input_dim] / fxp.ONE
        self.w_in = w_in
        self.bias = bias
        self.w_out: np.ndarray | None = None

    @property
    def hidden_count(self) -> int:
        return self.plan.neuron_count

    def hidden(self, x: np.ndarray) -> np.ndarray:
        """Sigmoid hidden activations for one sample."""
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.input_dim,):
            raise ValueError(f"expected {self.input_dim} features, got {x.shape}")
        return sigmoid(self.w_in @ x + self.bias)

    def hidden_matrix(self, features: np.ndarray) -> np.ndarray:
        counter = active_counter()
        if counter is not None:
            n = features.shape[0]
            counter.count("hidden",
                          mults=n * self.hidden_count * self.input_dim,
                          adds=n * self.hidden_count * self.input_dim)
        return sigmoid(features @ self.w_in.T + self.bias)

    def fit_from_hidden(self, h: np.ndarray, t: np.ndarray,
                        lam: float) -> np.ndarray:
        """Solve the output weights for given hidden responses and targets."""
        self.w_out = linalg.ridge_solve(h, t, lam)
        return self.w_out

    def fit(self, train: Dataset, lam: float | None = None) -> "ElmClassifier":
        lam = self.lam if lam is None else lam
        h = self.hidden_matrix(train.features)
        self.fit_from_hidden(h, one_hot(train.labels, self.classes), lam)
        return self

    def _require_fitted(self):
        if self.w_out is None:
            raise RuntimeError("model has no output weights yet; fit it first")

    def scores_matrix(self, features: np.ndarray) -> np.ndarray:
        self._require_fitted()
        return self.hidden_matrix(features) @ self.w_out

    def predict_labels(self, features: np.ndarray) -> np.ndarray:
        return np.argmax(self.scores_matrix(features), axis=1)


class OsElmClassifier(ElmClassifier):
    """Streaming variant: batch init on the first samples, then per-sample
    recursive least-squares updates of the output weights."""

    kind = "oselm"

    def __init__(self, hidden_count: int, input_dim: int,
                 base_seed: int = DEFAULT_BASE_SEED,
                 lam: float = DEFAULT_LAMBDA,
                 classes: int = NUM_CLASSES):
        super().__init__(hidden_count, input_dim, base_seed, lam, classes)
        self.p: np.ndarray | None = None
        self.n0 = 0

    def init_from_hidden(self, h0: np.ndarray, t0: np.ndarray,
                         lam: float | None = None) -> "OsElmClassifier":
        """Initialize from hidden responses: p = (H0ᵀH0 + λI)⁻¹, w = p H0ᵀ T0."""
        lam = self.lam if lam is None else lam
        g = linalg.gram(h0)
        g[np.diag_indices_from(g)] += lam
        L = linalg.cholesky_factor(g)
        eye = np.eye(g.shape[0])
        p = linalg.solve_upper(L.T, linalg.solve_lower(L, eye))
        self.p = (p + p.T) / 2.0
        self.w_out = self.p @ (h0.T @ t0)
        self.n0 = h0.shape[0]
        return self

    def init_batch(self, batch: Dataset,
                   lam: float | None = None) -> "OsElmClassifier":
        return self.init_from_hidden(self.hidden_matrix(batch.features),
                                     one_hot(batch.labels, self.classes), lam)

    def _require_initialized(self):
        if self.p is None:
            raise RuntimeError("streaming model not initialized; "
                               "call init_batch first")

    def update_from_hidden(self, h: np.ndarray, target: np.ndarray) -> None:
        """Fold one hidden response into p and the output weights (RLS)."""
        self._require_initialized()
        hp = self.p @ h
        denom = 1.0 + float(h @ hp)
        k = hp / denom
        # outer(k, hp) = outer(hp, hp)/denom, so p stays symmetric.
        self.p -= np.outer(k, hp)
        self.w_out += np.outer(k, target - h @ self.w_out)

    def update(self, x: np.ndarray, y: int) -> None:
        """Fold one labeled sample into the model (one RLS step)."""
        target = np.zeros(self.classes)
        target[y] = 1.0
        self.update_from_hidden(self.hidden(x), target)

    def train_step(self, x: np.ndarray, y: int) -> tuple[bool, int]:
        """Predict, then fold the sample in. Returns (True, pre-update label)."""
        self._require_initialized()
        y_hat = int(np.argmax(self.hidden(x) @ self.w_out))
        self.update(x, y)
        return True, y_hat

    def fit_stream(self, train: Dataset, n0: int | None = None,
                   lam: float | None = None) -> "OsElmClassifier":
        """Init on the first n0 samples, then stream the rest one by one."""
        if n0 is None:
            n0 = min(self.hidden_count, len(train))
        n0 = min(n0, len(train))
        head = Dataset(train.features[:n0], train.labels[:n0], name=train.name)
        self.init_batch(head, lam)
        for i in range(n0, len(train)):
            self.update(train.features[i], int(train.labels[i]))
        return self


class SplrClassifier:
    """Online classifier with binary hidden states and sparse additive updates.

    Hidden bits come from thresholding the LFSR-projected preactivation;
    on a misclassification the true class column gains eta at every active
    row and the predicted column loses eta, clipped to [-w_max, +w_max].
    Nothing else ever changes, so a correct prediction is a strict no-op.

    backend='real' keeps float64 output weights; backend='fxp16' keeps
    Q8.8 raws and runs the hidden dot products through the wide-accumulator
    fixed-point pipeline.
    """

    kind = "splr"
    BACKENDS = ("real", "fxp16")

    def __init__(self, hidden_count: int, input_dim: int,
                 base_seed: int = DEFAULT_BASE_SEED,
                 threshold: float | None = None,
                 eta: float | None = None,
                 w_max: float = DEFAULT_W_MAX,
                 backend: str = "real",
                 classes: int = NUM_CLASSES):
        if backend not in self.BACKENDS:
            raise ValueError(f"unknown backend {backend!r}; expected one of "
                             f"{self.BACKENDS}")
        if w_max <= 0:
            raise ValueError(f"w_max must be positive, got {w_max}")
        self.plan = SeedPlan(base_seed, hidden_count)
        self.input_dim = input_dim
        self.classes = classes
        self.backend = backend
        self.threshold = threshold
        self.w_max = w_max
        if eta is None:
            eta = DEFAULT_ETA_FXP16 if backend == "fxp16" else DEFAULT_ETA_REAL
        self.eta = eta
        if backend == "fxp16":
            self.eta_raw = fxp.from_real(eta)
            self.w_max_raw = fxp.from_real(w_max)
            self.w_out = np.zeros((hidden_count, classes), dtype=np.int16)
        else:
            self.w_out = np.zeros((hidden_count, classes))

    @property
    def hidden_count(self) -> int:
        return self.plan.neuron_count

    # -- fixed random layer ------------------------------------------------

    def _row_chunk(self, start: int, stop: int) -> tuple[np.ndarray, np.ndarray]:
        """Raw weight rows [start, stop) plus their trailing bias raws."""
        rows = np.empty((stop - start, self.input_dim + 1), dtype=np.int16)
        for i in range(start, stop):
            rows[i - start] = gen_weight_row(self.plan, i, self.input_dim + 1)
        return rows[:, :-1], rows[:, -1]

    def _require_threshold(self) -> float:
        if self.threshold is None:
            raise RuntimeError("threshold not set; call calibrate_threshold "
                               "on training data or pass one explicitly")
        return self.threshold

    def _theta_acc(self) -> float | int:
        """Threshold at wide-accumulator scale for the fxp16 comparison."""
        theta = self._require_threshold()
        if not math.isfinite(theta):
            return theta  # sentinel passes straight through the comparison
        return fxp.from_real(theta) << fxp.FRAC_BITS

    def calibrate_threshold(self, train: Dataset,
                            samples: int = CALIBRATION_SAMPLES) -> float:
        """Freeze the threshold at the median preactivation of the first
        `samples` training samples (real-valued, pooled over neurons)."""
        take = min(samples, len(train))
        x = train.features[:take]
        pre = np.empty((take, self.hidden_count))
        for start in range(0, self.hidden_count, ROW_CHUNK):
            stop = min(start + ROW_CHUNK, self.hidden_count)
            w_raw, b_raw = self._row_chunk(start, stop)
            pre[:, start:stop] = x @ (w_raw.T / fxp.ONE) + b_raw / fxp.ONE
        self.threshold = float(np.median(pre))
        return self.threshold

    def hidden(self, x: np.ndarray) -> np.ndarray:
        """Binary hidden vector for one sample (uint8 zeros and ones)."""
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.input_dim,):
            raise ValueError(f"expected {self.input_dim} features, got {x.shape}")
        return self.hidden_bits(x[None, :])[0]

    def hidden_bits(self, features: np.ndarray) -> np.ndarray:
        """Binary hidden states for a batch, regenerating weight rows in
        chunks so the full input-weight matrix never exists at once."""
        n = features.shape[0]
        m = self.hidden_count
        bits = np.empty((n, m), dtype=np.uint8)
        if self.backend == "fxp16":
            theta_acc = self._theta_acc()
            x_raw = fxp.quantize_array(features).astype(np.int64)
            for start in range(0, m, ROW_CHUNK):
                stop = min(start + ROW_CHUNK, m)
                w_raw, b_raw = self._row_chunk(start, stop)
                acc = x_raw @ w_raw.T.astype(np.int64)
                acc += b_raw.astype(np.int64) * fxp.ONE
                bits[:, start:stop] = acc > theta_acc
        else:
            theta = self._require_threshold()
            for start in range(0, m, ROW_CHUNK):
                stop = min(start + ROW_CHUNK, m)
                w_raw, b_raw = self._row_chunk(start, stop)
                pre = features @ (w_raw.T / fxp.ONE) + b_raw / fxp.ONE
                bits[:, start:stop] = pre > theta
        counter = active_counter()
        if counter is not None:
            counter.count("hidden", mults=n * m * self.input_dim,
                          adds=n * m * (self.input_dim + 1),
                          comparisons=n * m)
        return bits

    # -- prediction and the error-driven update -----------------------------

    def predict(self, h: np.ndarray) -> tuple[np.ndarray, int]:
        """Class scores (sums of active rows, no multiplies) and the argmax
        label, ties broken toward the lowest index."""
        active = np.flatnonzero(h)
        if self.backend == "fxp16":
            scores = self.w_out[active].sum(axis=0, dtype=np.int64) \
                if active.size else np.zeros(self.classes, dtype=np.int64)
        else:
            scores = self.w_out[active].sum(axis=0) \
                if active.size else np.zeros(self.classes)
        counter = active_counter()
        if counter is not None:
            counter.count("predict", adds=int(active.size) * self.classes,
                          comparisons=self.classes - 1)
        return scores, int(np.argmax(scores))

    def apply_error_update(self, h: np.ndarray, y: int, y_hat: int) -> None:
        """Add eta to column y and subtract it from column y_hat at every
        active row, clipping to the weight bound. Addition-only."""
        active = np.flatnonzero(h)
        if self.backend == "fxp16":
            up = self.w_out[active, y].astype(np.int32) + self.eta_raw
            down = self.w_out[active, y_hat].astype(np.int32) - self.eta_raw
            self.w_out[active, y] = np.clip(up, -self.w_max_raw, self.w_max_raw)
            self.w_out[active, y_hat] = np.clip(down, -self.w_max_raw,
                                                self.w_max_raw)
        else:
            self.w_out[active, y] = np.clip(
                self.w_out[active, y] + self.eta, -self.w_max, self.w_max)
            self.w_out[active, y_hat] = np.clip(
                self.w_out[active, y_hat] - self.eta, -self.w_max, self.w_max)
        counter = active_counter()
        if counter is not None:
            counter.count("update", adds=2 * int(active.size),
                          weight_writes=2 * int(active.size))

    def step_with_hidden(self, h: np.ndarray, y: int) -> tuple[bool, int]:
        _, y_hat = self.predict(h)
        if y_hat == y:
            return False, y_hat
        self.apply_error_update(h, y, y_hat)
        return True, y_hat

    def train_step(self, x: np.ndarray, y: int) -> tuple[bool, int]:
        """One online step: predict, and update only if the prediction is
        wrong. Returns (updated, predicted label)."""
        return self.step_with_hidden(self.hidden(x), y)

    def predict_labels(self, features: np.ndarray) -> np.ndarray:
        bits = self.hidden_bits(features)
        # Weight magnitudes are bounded, so float64 sums of the selected
        # rows are exact and match the per-sample summation bit for bit.
        scores = bits.astype(np.float64) @ self.w_out.astype(np.float64)
        return np.argmax(scores, axis=1)


# -- the loss the update rule descends ---------------------------------------

def wta_loss(o: np.ndarray, y: int, y_hat: int) -> float:
    """Squared winner-margin loss: half the squared gap between the
    predicted winner's score and the true class's score."""
    o = np.asarray(o, dtype=np.float64)
    return 0.5 * float(o[y_hat] - o[y]) ** 2


def wta_grad(h: np.ndarray, o: np.ndarray, y: int, y_hat: int) -> np.ndarray:
    """Gradient of wta_loss w.r.t. the output weights: nonzero only in
    columns y and y_hat, scaled by the binary hidden vector."""
    h = np.asarray(h, dtype=np.float64)
    o = np.asarray(o, dtype=np.float64)
    gap = float(o[y_hat] - o[y])
    grad = np.zeros((h.size, len(o)))
    grad[:, y_hat] = gap * h
    grad[:, y] = -gap * h
    return grad


# -- training and evaluation harness -----------------------------------------

@dataclass
class EpochStats:
    updates: int
    correct: int
    seen: int

    @property
    def accuracy(self) -> float:
        return self.correct / self.seen if self.seen else 0.0


@dataclass
class Metrics:
    accuracy: float
    confusion: np.ndarray
    per_class_recall: np.ndarray


def train_epoch(model, train: Dataset, shuffle_seed: int) -> EpochStats:
    """One pass over a deterministic shuffle of the training set.

    Works for any model exposing train_step(x, y) -> (updated, y_hat);
    the sparse online model additionally gets its hidden bits precomputed
    for the whole pass, which is exact because they do not depend on the
    mutable output weights.
    """
    order = np.random.default_rng(shuffle_seed).permutation(len(train))
    updates = correct = 0
    if isinstance(model, SplrClassifier):
        bits = model.hidden_bits(train.features)
        for i in order:
            updated, y_hat = model.step_with_hidden(bits[i], int(train.labels[i]))
            updates += updated
            correct += y_hat == train.labels[i]
    else:
        for i in order:
            updated, y_hat = model.train_step(train.features[i],
                                              int(train.labels[i]))
            updates += updated
            correct += y_hat == train.labels[i]
    return EpochStats(updates=updates, correct=correct, seen=len(train))


def train_epochs(model: SplrClassifier, train: Dataset, epochs: int,
                 shuffle_seed: int) -> list[EpochStats]:
    """Run several epochs, computing the hidden bits only once."""
    if model.threshold is None:
        model.calibrate_threshold(train)
    bits = model.hidden_bits(train.features)
    history = []
    for epoch in range(epochs):
        order = np.random.default_rng(shuffle_seed + epoch).permutation(len(train))
        updates = correct = 0
        for i in order:
            updated, y_hat = model.step_with_hidden(bits[i], int(train.labels[i]))
            updates += updated
            correct += y_hat == train.labels[i]
        history.append(EpochStats(updates, correct, len(train)))
    return history


def evaluate(model, test: Dataset) -> Metrics:
    """Accuracy, confusion matrix, and per-class recall on a dataset."""
    predicted = model.predict_labels(test.features)
    classes = getattr(model, "classes", NUM_CLASSES)
    confusion = np.zeros((classes, classes), dtype=np.int64)
    np.add.at(confusion, (test.labels, predicted), 1)
    row_totals = confusion.sum(axis=1)
    recall = np.divide(np.diag(confusion), row_totals,
                       out=np.zeros(classes), where=row_totals > 0)
    return Metrics(accuracy=float(np.trace(confusion)) / len(test),
                   confusion=confusion, per_class_recall=recall)


# -- checkpoints --------------------------------------------------------------

CKPT_MAGIC = b"SPLRELM\x01"
_CKPT_HEADER = struct.Struct("<8sBIIIdddH")
_BACKEND_TAGS = {"real": 0, "fxp16": 1, "elm": 2, "oselm": 3}
_TAG_BACKENDS = {v: k for k, v in _BACKEND_TAGS.items()}


def _model_tag(model) -> int:
    if isinstance(model, SplrClassifier):
        return _BACKEND_TAGS[model.backend]
    return _BACKEND_TAGS[model.kind]


def save_checkpoint(model, path) -> None:
    """Write the output weights plus everything needed to rebuild the model.

    Layout: header (magic, backend tag byte, D, M, C as u32, then threshold,
    eta, w_max as f64, base_seed as u16, all little-endian) followed by the
    M x C output weights row-major: i2 raws for the fxp16 backend, f8
    otherwise. For the least-squares models the eta slot carries lambda and
    the threshold slot is zero. The base seed regenerates the input weights,
    so a checkpoint fully reconstructs its model.
    """
    if isinstance(model, SplrClassifier):
        model._require_threshold()
        theta, eta, w_max = model.threshold, model.eta, model.w_max
    else:
        model._require_fitted()
        theta, eta, w_max = 0.0, model.lam, 0.0
    header = _CKPT_HEADER.pack(
        CKPT_MAGIC, _model_tag(model), model.input_dim, model.hidden_count,
        model.classes, theta, eta, w_max, model.plan.base_seed)
    if isinstance(model, SplrClassifier) and model.backend == "fxp16":
        body = model.w_out.astype("<i2").tobytes()
    else:
        body = model.w_out.astype("<f8").tobytes()
    with open(path, "wb") as f:
        f.write(header)
        f.write(body)


def load_checkpoint(path):
    """Rebuild a model from a checkpoint written by save_checkpoint."""
    with open(path, "rb") as f:
        raw = f.read()
    if len(raw) < _CKPT_HEADER.size:
        raise ValueError(f"{path}: too short for a checkpoint header")
    magic, tag, d, m, c, theta, eta, w_max, base_seed = \
        _CKPT_HEADER.unpack(raw[:_CKPT_HEADER.size])
    if magic != CKPT_MAGIC:
        raise ValueError(f"{path}: bad checkpoint magic {magic!r}")
    if tag not in _TAG_BACKENDS:
        raise ValueError(f"{path}: unknown backend tag {tag}")
    kind = _TAG_BACKENDS[tag]
    body = raw[_CKPT_HEADER.size:]
    if kind == "fxp16":
        w_out = np.frombuffer(body, dtype="<i2").astype(np.int16)
    else:
        w_out = np.frombuffer(body, dtype="<f8").astype(np.float64)
    if w_out.size != m * c:
        raise ValueError(f"{path}: expected {m * c} weights, found {w_out.size}")
    w_out = w_out.reshape(m, c)
    if kind in ("real", "fxp16"):
        model = SplrClassifier(m, d, base_seed=base_seed, threshold=theta,
                               eta=eta, w_max=w_max, backend=kind, classes=c)
        model.w_out = w_out.copy()
    elif kind == "elm":
        model = ElmClassifier(m, d, base_seed=base_seed, lam=eta, classes=c)
        model.w_out = w_out.copy()
    else:
        model = OsElmClassifier(m, d, base_seed=base_seed, lam=eta, classes=c)
        model.w_out = w_out.copy()
    return model

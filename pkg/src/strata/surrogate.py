"""Desk-scale method-name predictor built on summed subtoken embeddings.

A method is the mean of its identifier-token vectors, each token being the sum
of its first five subtoken embeddings. Every target subtoken gets an
independent logistic output. Training is plain per-example SGD, so an
embedding row moves only when its subtoken occurs in the current example.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import IO, Iterable, Sequence

import numpy as np

from strata.corpus import MethodUnit, compute_stats, parse_method
from strata.embedding import (
    MAX_SUBTOKENS,
    EmbeddingTable,
    compose_token,
    fmt,
    read_embeddings,
    write_embeddings,
)
from strata.metrics import MicroF1

log = logging.getLogger(__name__)

OUT_MAGIC = "STRATA-OUT"


@dataclass(frozen=True)
class TrainConfig:
    dim: int = 64
    init_range: float = 0.1
    learning_rate: float = 0.05
    epochs: int = 10
    threshold: float = 0.5
    seed: int = 0

    def __post_init__(self) -> None:
        if self.dim < 1:
            raise ValueError("dim must be positive")
        if self.init_range <= 0 or self.learning_rate <= 0:
            raise ValueError("init_range and learning_rate must be positive")
        if self.epochs < 0:
            raise ValueError("epochs must be non-negative")
        if not 0.0 < self.threshold < 1.0:
            raise ValueError("threshold must lie in (0, 1)")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")


def featurize(method: MethodUnit, embeddings: EmbeddingTable) -> np.ndarray:
    """Mean over identifier tokens of their composed token vectors."""
    tokens = [subs for subs in method.identifier_subtokens if subs]
    if not tokens:
        return np.zeros(embeddings.dim)
    return sum(compose_token(subs, embeddings) for subs in tokens) / len(tokens)


class SurrogateModel:
    """Trainable embeddings plus one logistic output per target subtoken.

    Row ``len(subtokens)`` of ``emb`` is the UNK row.
    """

    def __init__(self, subtokens: Sequence[str], emb: np.ndarray, targets: Sequence[str],
                 weights: np.ndarray, bias: np.ndarray, config: TrainConfig | None = None) -> None:
        self.subtokens = tuple(subtokens)
        self.index = {s: i for i, s in enumerate(self.subtokens)}
        self.emb = np.array(emb, dtype=np.float64)
        self.targets = tuple(targets)
        self.target_index = {t: i for i, t in enumerate(self.targets)}
        self.weights = np.array(weights, dtype=np.float64)
        self.bias = np.array(bias, dtype=np.float64)
        self.config = config or TrainConfig(dim=self.emb.shape[1])
        if self.emb.shape != (len(self.subtokens) + 1, self.dim):
            raise ValueError("embedding matrix must have one row per subtoken plus UNK")
        if self.weights.shape != (len(self.targets), self.dim) or self.bias.shape != (len(self.targets),):
            raise ValueError("output weights do not match embedding dimension")
        self._cache: dict[str, tuple[np.ndarray, np.ndarray]] = {}
        self.history: list[tuple[int, float, float]] = []  # (epoch, loss, train_f1)

    @property
    def dim(self) -> int:
        return self.emb.shape[1]

    @property
    def unk_row(self) -> int:
        return len(self.subtokens)

    @property
    def embeddings(self) -> EmbeddingTable:
        return EmbeddingTable(self.subtokens, self.emb[:-1], self.emb[-1])

    def copy(self) -> "SurrogateModel":
        return SurrogateModel(self.subtokens, self.emb, self.targets, self.weights, self.bias, self.config)

    # features --------------------------------------------------------------

    def features(self, method: MethodUnit) -> tuple[np.ndarray, np.ndarray]:
        """Row indices and weights with ``h = weights @ emb[rows]``."""
        hit = self._cache.get(method.source)
        if hit is not None:
            return hit
        tokens = [subs for subs in method.identifier_subtokens if subs]
        rows: list[int] = []
        for subs in tokens:
            rows.extend(self.index.get(s, self.unk_row) for s in subs[:MAX_SUBTOKENS])
        idx = np.array(rows, dtype=np.intp)
        w = np.full(len(rows), 1.0 / len(tokens)) if tokens else np.zeros(0)
        if len(self._cache) > 200_000:
            self._cache.clear()
        self._cache[method.source] = (idx, w)
        return idx, w

    def method_vector(self, method: MethodUnit) -> np.ndarray:
        idx, w = self.features(method)
        if not len(idx):
            return np.zeros(self.dim)
        return w @ self.emb[idx]

    def scores(self, methods: Sequence[MethodUnit]) -> np.ndarray:
        """Sigmoid scores, shape ``(len(methods), len(targets))``."""
        h = np.stack([self.method_vector(m) for m in methods]) if methods else np.zeros((0, self.dim))
        return _sigmoid(h @ self.weights.T + self.bias)

    def label_vector(self, subtokens: Iterable[str]) -> np.ndarray:
        y = np.zeros(len(self.targets))
        for s in subtokens:
            j = self.target_index.get(s)
            if j is not None:
                y[j] = 1.0
        return y

    # loss and gradient -----------------------------------------------------

    def loss_and_grads(self, method: MethodUnit, labels: np.ndarray | None = None):
        """Summed binary cross-entropy over targets and its gradients.

        Returns ``(loss, rows, d_rows, d_weights, d_bias)`` where ``d_rows`` holds
        one gradient per entry of ``rows`` (duplicates are not merged).
        """
        y = self.label_vector(method.target_subtokens) if labels is None else labels
        idx, w = self.features(method)
        h = w @ self.emb[idx] if len(idx) else np.zeros(self.dim)
        z = self.weights @ h + self.bias
        loss = float(np.sum(np.logaddexp(0.0, z) - y * z))
        dz = _sigmoid(z) - y
        dh = dz @ self.weights
        return loss, idx, np.outer(w, dh), np.outer(dz, h), dz

    def sgd_step(self, method: MethodUnit, lr: float, labels: np.ndarray | None = None) -> float:
        loss, idx, d_rows, d_w, d_b = self.loss_and_grads(method, labels)
        if len(idx):
            np.add.at(self.emb, idx, -lr * d_rows)
        self.weights -= lr * d_w
        self.bias -= lr * d_b
        return loss


def _sigmoid(z: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def predict(model: SurrogateModel, method: MethodUnit, threshold: float | None = None) -> frozenset[str]:
    return predict_many(model, [method], threshold)[0]


def predict_many(model: SurrogateModel, methods: Sequence[MethodUnit],
                 threshold: float | None = None) -> list[frozenset[str]]:
    """Targets scoring at least ``threshold``; the argmax when none do.

    Argmax ties go to the lexicographically smallest target.
    """
    threshold = model.config.threshold if threshold is None else threshold
    if not methods:
        return []
    probs = model.scores(methods)
    order = np.argsort(np.array(model.targets, dtype=object), kind="stable")
    out = []
    for row in probs:
        hits = np.flatnonzero(row >= threshold)
        if len(hits):
            out.append(frozenset(model.targets[j] for j in hits))
        else:
            best = order[np.argmax(row[order])]
            out.append(frozenset((model.targets[best],)))
    return out


# -- training ------------------------------------------------------------------


@dataclass
class TrainResult:
    model: SurrogateModel
    pre: EmbeddingTable
    post: EmbeddingTable
    log: list[tuple[int, float, float]] = field(default_factory=list)


def init_model(methods: Sequence[MethodUnit], config: TrainConfig) -> SurrogateModel:
    stats = compute_stats(methods)
    subtokens = sorted(stats.counts)
    targets = sorted({s for m in methods for s in m.target_subtokens})
    if not targets:
        raise ValueError("empty target space")
    rng = np.random.default_rng(config.seed)
    r = config.init_range
    emb = rng.uniform(-r, r, size=(len(subtokens) + 1, config.dim))
    weights = rng.uniform(-r, r, size=(len(targets), config.dim))
    bias = np.zeros(len(targets))
    return SurrogateModel(subtokens, emb, targets, weights, bias, config)


def train_f1(model: SurrogateModel, methods: Sequence[MethodUnit]) -> float:
    acc = MicroF1()
    for m, pred in zip(methods, predict_many(model, methods)):
        acc.add(pred, m.target_subtokens)
    return acc.f1


def run_epochs(model: SurrogateModel, methods: Sequence[MethodUnit], epochs: int, lr: float,
               rng: np.random.Generator, start_epoch: int = 1) -> list[tuple[int, float, float]]:
    labels = [model.label_vector(m.target_subtokens) for m in methods]
    rows = []
    for epoch in range(start_epoch, start_epoch + epochs):
        total = 0.0
        for i in rng.permutation(len(methods)):
            total += model.sgd_step(methods[i], lr, labels[i])
        mean_loss = total / len(methods)
        f1 = train_f1(model, methods)
        log.info("epoch %d loss %.4f train_f1 %.4f", epoch, mean_loss, f1)
        rows.append((epoch, mean_loss, f1))
    return rows


def train(methods: Sequence[MethodUnit], config: TrainConfig | None = None) -> TrainResult:
    """Train from a seeded uniform initialisation; snapshots bracket the run."""
    config = config or TrainConfig()
    if not methods:
        raise ValueError("empty corpus")
    model = init_model(methods, config)
    pre = model.embeddings
    order_rng = np.random.default_rng([config.seed, 1])
    rows = run_epochs(model, methods, config.epochs, config.learning_rate, order_rng)
    model.history = rows
    return TrainResult(model, pre, model.embeddings, rows)


def perturbed_units(records: Iterable) -> list[MethodUnit]:
    """Re-lex perturbed sources; the label is the method name in the source."""
    return [parse_method(r.method_id, r.new_source, analyze=False) for r in records]


def finetune_adversarial(model: SurrogateModel, adv_records: Sequence, epochs: int = 1,
                         learning_rate: float | None = None, seed: int | None = None) -> SurrogateModel:
    """Continue training a copy of ``model`` on perturbed methods, labels unchanged."""
    if not adv_records:
        raise ValueError("no adversarial records")
    units = perturbed_units(adv_records)
    tuned = model.copy()
    lr = model.config.learning_rate if learning_rate is None else learning_rate
    rng = np.random.default_rng([model.config.seed if seed is None else seed, 2])
    tuned.history = run_epochs(tuned, units, epochs, lr, rng)
    return tuned


# -- model file ------------------------------------------------------------------


def write_model(model: SurrogateModel, fh: IO[str]) -> None:
    write_embeddings(model.embeddings, fh)
    fh.write(f"{OUT_MAGIC} v1 {len(model.targets)}\n")
    for j, t in enumerate(model.targets):
        fh.write(t + " " + " ".join(fmt(x) for x in model.weights[j]) + " " + fmt(model.bias[j]) + "\n")


def read_model(fh: IO[str], config: TrainConfig | None = None) -> SurrogateModel:
    table = read_embeddings(fh)
    header = fh.readline().split()
    if len(header) != 3 or header[0] != OUT_MAGIC:
        raise ValueError("missing output-weights section")
    if header[1] != "v1":
        raise ValueError(f"unsupported model format version {header[1]}")
    count = int(header[2])
    targets, weights, bias = [], [], []
    for _ in range(count):
        parts = fh.readline().split()
        if len(parts) != table.dim + 2:
            raise ValueError("malformed output-weights row")
        targets.append(parts[0])
        weights.append([float(x) for x in parts[1:-1]])
        bias.append(float(parts[-1]))
    emb = np.vstack([table.matrix, table.unk_vector[None, :]])
    config = config or TrainConfig(dim=table.dim)
    if config.dim != table.dim:
        config = replace(config, dim=table.dim)
    return SurrogateModel(table.subtokens, emb, targets,
                          np.array(weights).reshape(count, table.dim), np.array(bias), config)


def save_model(model: SurrogateModel, path: Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        write_model(model, fh)


def load_model(path: Path, config: TrainConfig | None = None) -> SurrogateModel:
    with open(path, encoding="utf-8") as fh:
        return read_model(fh, config)

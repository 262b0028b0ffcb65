"""Differentiable scalar models over token-embedding sequences.

A model maps an ``m x D`` embedding matrix to one scalar picked by a
:class:`TargetSelector` and returns the exact gradient of that scalar with
respect to every input entry.  :class:`ReferenceModelParams` is the bundled
mean-pool / tanh / softmax classifier; :class:`LinearSurrogate` is an exactly
linear model used to check path methods, whose Riemann sums telescope.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol, Sequence

import numpy as np

from .embeddings import EmbeddingStore
from .errors import ContractError, NumericError, TrainingError

CLASS_PROBABILITY = "class_probability"
CLASS_LOGIT = "class_logit"
POSITION_LOGIT = "position_logit"
SELECTOR_KINDS = (CLASS_PROBABILITY, CLASS_LOGIT, POSITION_LOGIT)

PARAMS_FORMAT = "pathgrad-reference-model"
PARAMS_VERSION = 1


@dataclass(frozen=True)
class TokenSequence:
    ids: tuple[int, ...]
    text: str = ""

    def __post_init__(self):
        object.__setattr__(self, "ids", tuple(int(i) for i in self.ids))
        if len(self.ids) < 2:
            raise ContractError("a token sequence holds at least CLS and SEP")

    def __len__(self) -> int:
        return len(self.ids)

    def replace(self, positions, token_id: int) -> "TokenSequence":
        ids = list(self.ids)
        for p in positions:
            ids[p] = token_id
        return TokenSequence(tuple(ids), self.text)


@dataclass(frozen=True)
class TargetSelector:
    """Which scalar of the model output is attributed.

    ``index`` is the class index for the class kinds and the token position
    for ``position_logit``; ``head`` picks the start (0) or end (1) head.
    """

    kind: str = CLASS_PROBABILITY
    index: int = 0
    head: int = 0

    def __post_init__(self):
        if self.kind not in SELECTOR_KINDS:
            raise ContractError(f"selector kind must be one of {SELECTOR_KINDS}, got {self.kind!r}")
        if self.index < 0:
            raise ContractError("selector index must be nonnegative")
        if self.head not in (0, 1):
            raise ContractError("selector head must be 0 (start) or 1 (end)")

    def to_dict(self) -> dict:
        return {"kind": self.kind, "index": self.index, "head": self.head}


class DifferentiableModel(Protocol):
    n_classes: int

    def forward(self, embeddings: np.ndarray, selector: TargetSelector) -> float: ...

    def grad(self, embeddings: np.ndarray, selector: TargetSelector) -> np.ndarray: ...

    def target_probability(self, embeddings: np.ndarray, selector: TargetSelector) -> float: ...

    def predict(self, embeddings: np.ndarray) -> int: ...


def _softmax(z: np.ndarray) -> np.ndarray:
    e = np.exp(z - np.max(z))
    return e / e.sum()


def _check_finite(*arrays: np.ndarray) -> None:
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise NumericError("non-finite intermediate value in model evaluation")


@dataclass(frozen=True)
class ReferenceModelParams:
    """Mean-pool -> tanh hidden layer -> linear -> softmax, plus two per-token position heads.

    The position heads score token ``p`` as
    ``tanh((x_p + mean(x)) @ w_hidden + b_hidden) @ w_pos[:, head] + b_pos[head]``.

    Shapes: ``embedding`` V x D, ``w_hidden`` D x H, ``b_hidden`` H,
    ``w_out`` H x C, ``b_out`` C, ``w_pos`` H x 2, ``b_pos`` 2.
    """

    embedding: np.ndarray
    w_hidden: np.ndarray
    b_hidden: np.ndarray
    w_out: np.ndarray
    b_out: np.ndarray
    w_pos: np.ndarray
    b_pos: np.ndarray

    def __post_init__(self):
        for name in self._fields():
            arr = np.array(getattr(self, name), dtype=np.float64)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        d, h = self.w_hidden.shape
        c = self.w_out.shape[1]
        ok = (
            self.embedding.ndim == 2
            and self.embedding.shape[1] == d
            and self.b_hidden.shape == (h,)
            and self.w_out.shape == (h, c)
            and self.b_out.shape == (c,)
            and self.w_pos.shape == (h, 2)
            and self.b_pos.shape == (2,)
        )
        if not ok:
            raise ContractError("inconsistent reference model parameter shapes")
        _check_finite(*(getattr(self, n) for n in self._fields()))

    @staticmethod
    def _fields() -> tuple[str, ...]:
        return ("embedding", "w_hidden", "b_hidden", "w_out", "b_out", "w_pos", "b_pos")

    @property
    def dim(self) -> int:
        return self.w_hidden.shape[0]

    @property
    def hidden(self) -> int:
        return self.w_hidden.shape[1]

    @property
    def n_classes(self) -> int:
        return self.w_out.shape[1]

    def _check_input(self, x: np.ndarray, selector: TargetSelector) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.dim or x.shape[0] < 1:
            raise ContractError(f"expected an m x {self.dim} embedding matrix, got {x.shape}")
        _check_finite(x)
        if selector.kind == POSITION_LOGIT:
            if selector.index >= x.shape[0]:
                raise ContractError(f"position {selector.index} out of range for m={x.shape[0]}")
        elif selector.index >= self.n_classes:
            raise ContractError(f"class {selector.index} out of range for C={self.n_classes}")
        return x

    def class_logits(self, x: np.ndarray) -> np.ndarray:
        a = np.tanh(x.mean(axis=0) @ self.w_hidden + self.b_hidden)
        z = a @ self.w_out + self.b_out
        _check_finite(z)
        return z

    def probabilities(self, x: np.ndarray) -> np.ndarray:
        return _softmax(self.class_logits(np.asarray(x, dtype=np.float64)))

    def position_logits(self, x: np.ndarray, head: int = 0) -> np.ndarray:
        # each token's hidden input is its own embedding plus the sequence mean
        x = np.asarray(x, dtype=np.float64)
        a = np.tanh((x + x.mean(axis=0)) @ self.w_hidden + self.b_hidden)
        s = a @ self.w_pos[:, head] + self.b_pos[head]
        _check_finite(s)
        return s

    def forward(self, embeddings: np.ndarray, selector: TargetSelector) -> float:
        x = self._check_input(embeddings, selector)
        if selector.kind == POSITION_LOGIT:
            return float(self.position_logits(x, selector.head)[selector.index])
        z = self.class_logits(x)
        if selector.kind == CLASS_LOGIT:
            return float(z[selector.index])
        return float(_softmax(z)[selector.index])

    def grad(self, embeddings: np.ndarray, selector: TargetSelector) -> np.ndarray:
        x = self._check_input(embeddings, selector)
        m = x.shape[0]
        if selector.kind == POSITION_LOGIT:
            p = selector.index
            a = np.tanh((x[p] + x.mean(axis=0)) @ self.w_hidden + self.b_hidden)
            dx = self.w_hidden @ (self.w_pos[:, selector.head] * (1.0 - a * a))
            g = np.tile(dx / m, (m, 1))
            g[p] += dx
            _check_finite(g)
            return g
        a = np.tanh(x.mean(axis=0) @ self.w_hidden + self.b_hidden)
        z = a @ self.w_out + self.b_out
        _check_finite(z)
        dz = np.zeros(self.n_classes)
        if selector.kind == CLASS_LOGIT:
            dz[selector.index] = 1.0
        else:
            prob = _softmax(z)
            dz = -prob[selector.index] * prob
            dz[selector.index] += prob[selector.index]
        du = (self.w_out @ dz) * (1.0 - a * a)
        dpool = self.w_hidden @ du
        g = np.tile(dpool / m, (m, 1))
        _check_finite(g)
        return g

    def target_probability(self, embeddings: np.ndarray, selector: TargetSelector) -> float:
        x = np.asarray(embeddings, dtype=np.float64)
        if selector.kind == POSITION_LOGIT:
            return float(_softmax(self.position_logits(x, selector.head))[selector.index])
        return float(self.probabilities(x)[selector.index])

    def predict(self, embeddings: np.ndarray) -> int:
        return int(np.argmax(self.class_logits(np.asarray(embeddings, dtype=np.float64))))

    def to_dict(self) -> dict:
        doc = {"format": PARAMS_FORMAT, "version": PARAMS_VERSION}
        for name in self._fields():
            arr = getattr(self, name)
            doc[name] = {"shape": list(arr.shape), "data": [float(v) for v in arr.ravel()]}
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "ReferenceModelParams":
        if doc.get("format") != PARAMS_FORMAT or doc.get("version") != PARAMS_VERSION:
            raise ContractError("not a pathgrad reference model document (format/version mismatch)")
        arrays = {
            name: np.array(doc[name]["data"], dtype=np.float64).reshape(doc[name]["shape"])
            for name in cls._fields()
        }
        return cls(**arrays)


def save_params(params: ReferenceModelParams, path: str | Path) -> None:
    # json writes floats with repr(), which round-trips float64 exactly
    Path(path).write_text(json.dumps(params.to_dict()) + "\n", encoding="utf-8")


def load_params(path: str | Path) -> ReferenceModelParams:
    return ReferenceModelParams.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def zero_params(vocab_size: int, dim: int, hidden: int, n_classes: int = 2) -> ReferenceModelParams:
    return ReferenceModelParams(
        embedding=np.zeros((vocab_size, dim)),
        w_hidden=np.zeros((dim, hidden)),
        b_hidden=np.zeros(hidden),
        w_out=np.zeros((hidden, n_classes)),
        b_out=np.zeros(n_classes),
        w_pos=np.zeros((hidden, 2)),
        b_pos=np.zeros(2),
    )


def random_params(rng: np.random.Generator, vocab_size: int, dim: int, hidden: int,
                  n_classes: int = 2, embedding: np.ndarray | None = None) -> ReferenceModelParams:
    if embedding is None:
        embedding = rng.normal(0.0, 1.0, (vocab_size, dim))
    return ReferenceModelParams(
        embedding=embedding,
        w_hidden=rng.normal(0.0, 1.0 / np.sqrt(dim), (dim, hidden)),
        b_hidden=np.zeros(hidden),
        w_out=rng.normal(0.0, 1.0 / np.sqrt(hidden), (hidden, n_classes)),
        b_out=np.zeros(n_classes),
        w_pos=rng.normal(0.0, 1.0 / np.sqrt(hidden), (hidden, 2)),
        b_pos=np.zeros(2),
    )


@dataclass(frozen=True)
class LinearSurrogate:
    """Two-class model whose class-1 logit is ``sum_ij coef_ij x_ij + bias``; class 0 logit is 0."""

    coef: np.ndarray
    bias: float = 0.0
    n_classes: int = 2

    def __post_init__(self):
        object.__setattr__(self, "coef", np.array(self.coef, dtype=np.float64))

    def _check(self, x: np.ndarray, selector: TargetSelector) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != self.coef.shape:
            raise ContractError(f"expected shape {self.coef.shape}, got {x.shape}")
        if selector.kind == POSITION_LOGIT or selector.index > 1:
            raise ContractError("linear surrogate supports class selectors for classes 0 and 1")
        return x

    def _logits(self, x: np.ndarray) -> np.ndarray:
        return np.array([0.0, float(np.sum(self.coef * x)) + self.bias])

    def forward(self, embeddings, selector):
        z = self._logits(self._check(embeddings, selector))
        if selector.kind == CLASS_LOGIT:
            return float(z[selector.index])
        return float(_softmax(z)[selector.index])

    def grad(self, embeddings, selector):
        x = self._check(embeddings, selector)
        if selector.kind == CLASS_LOGIT:
            return self.coef.copy() if selector.index == 1 else np.zeros_like(x)
        p = _softmax(self._logits(x))
        sign = 1.0 if selector.index == 1 else -1.0
        return sign * p[0] * p[1] * self.coef

    def target_probability(self, embeddings, selector):
        return float(_softmax(self._logits(np.asarray(embeddings, dtype=np.float64)))[selector.index])

    def predict(self, embeddings):
        return int(np.argmax(self._logits(np.asarray(embeddings, dtype=np.float64))))


def forward(params: DifferentiableModel, embeddings: np.ndarray, selector: TargetSelector) -> float:
    return params.forward(embeddings, selector)


def grad_embeddings(params: DifferentiableModel, embeddings: np.ndarray,
                    selector: TargetSelector) -> np.ndarray:
    return params.grad(embeddings, selector)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 50
    learning_rate: float = 0.1
    seed: int = 7
    hidden: int = 32
    dim: int = 16
    n_classes: int = 2


def train_reference(
    corpus: Sequence[tuple[TokenSequence, int]],
    store: EmbeddingStore,
    config: TrainConfig = TrainConfig(),
) -> ReferenceModelParams:
    """Per-example SGD on cross-entropy; embeddings are trained jointly, starting from `store`."""
    if not corpus:
        raise TrainingError("training corpus is empty")
    labels = {int(y) for _, y in corpus}
    if len(labels) < 2:
        raise TrainingError(f"degenerate corpus: only class(es) {sorted(labels)} present")
    if max(labels) >= config.n_classes:
        raise TrainingError(f"label {max(labels)} out of range for {config.n_classes} classes")
    if store.dim != config.dim:
        raise TrainingError(f"store dimension {store.dim} != configured D={config.dim}")

    rng = np.random.default_rng(config.seed)
    init = random_params(rng, store.size, config.dim, config.hidden, config.n_classes,
                         embedding=store.vectors)
    if config.epochs == 0:
        return init

    emb = init.embedding.copy()
    w1, b1 = init.w_hidden.copy(), init.b_hidden.copy()
    w2, b2 = init.w_out.copy(), init.b_out.copy()
    lr = config.learning_rate
    for _ in range(config.epochs):
        for n in rng.permutation(len(corpus)):
            seq, label = corpus[n]
            ids = np.asarray(seq.ids)
            pooled = emb[ids].mean(axis=0)
            a = np.tanh(pooled @ w1 + b1)
            prob = _softmax(a @ w2 + b2)
            dz = prob.copy()
            dz[label] -= 1.0
            du = (w2 @ dz) * (1.0 - a * a)
            dpool = w1 @ du
            w2 -= lr * np.outer(a, dz)
            b2 -= lr * dz
            w1 -= lr * np.outer(pooled, du)
            b1 -= lr * du
            np.add.at(emb, ids, -lr * dpool / len(ids))
        _check_finite(emb, w1, w2)
    return ReferenceModelParams(emb, w1, b1, w2, b2, init.w_pos, init.b_pos)


def training_accuracy(params: ReferenceModelParams, corpus: Sequence[tuple[TokenSequence, int]]) -> float:
    hits = sum(params.predict(params.embedding[list(seq.ids)]) == y for seq, y in corpus)
    return hits / len(corpus)


def measure_baseline_output(
    params: DifferentiableModel,
    store: EmbeddingStore,
    baseline_token: int,
    lengths: Sequence[int],
    class_index: int = 0,
) -> list[tuple[int, float]]:
    """|p(class) - 1/C| on ``[CLS] + length * [baseline] + [SEP]`` for each length."""
    if not 0 <= baseline_token < store.size:
        raise ContractError(f"baseline token id {baseline_token} out of range")
    selector = TargetSelector(CLASS_PROBABILITY, class_index)
    report = []
    for length in lengths:
        ids = [store.cls_id, *([baseline_token] * length), store.sep_id]
        p = params.forward(store.embed(ids), selector)
        report.append((int(length), abs(p - 1.0 / params.n_classes)))
    return report

"""Riemann-sum accumulation of gradients along per-token paths."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .embeddings import EmbeddingStore
from .errors import ContractError
from .model import CLASS_PROBABILITY, DifferentiableModel, TargetSelector, TokenSequence
from .paths import (
    InterpolationPath,
    PathSpec,
    build_dig_path,
    build_ig_path,
    build_udig_path,
    upsample,
)

DELTA_EPS = 1e-6


@dataclass
class AttributionResult:
    raw: np.ndarray
    word_scores: np.ndarray
    f_input: float
    f_baseline: float
    delta_percent: float | None
    delta_abs: float
    spec: PathSpec
    selector: TargetSelector
    paths: list[InterpolationPath] = field(default_factory=list, repr=False)
    timings: dict[str, float] = field(default_factory=dict)

    @property
    def delta_defined(self) -> bool:
        return self.delta_percent is not None

    def to_dict(self, tokens: Sequence[str] = (), emit_raw: bool = False,
                trace_paths: bool = False) -> dict:
        doc = {
            "tokens": list(tokens),
            "word_scores": [float(s) for s in self.word_scores],
            "delta_percent": self.delta_percent if self.delta_defined else "undefined-small-denominator",
            "delta_abs": self.delta_abs,
            "f_input": self.f_input,
            "f_baseline": self.f_baseline,
            "spec": self.spec.to_dict(),
            "selector": self.selector.to_dict(),
        }
        if emit_raw:
            doc["raw"] = [[float(v) for v in row] for row in self.raw]
        if trace_paths:
            doc["trace"] = [
                {"token_index": p.token_index, "steps": [vars(s) for s in p.trace]}
                for p in self.paths
            ]
        return doc


def _pad_paths(paths: Sequence[InterpolationPath]) -> np.ndarray:
    length = max(len(p) for p in paths)
    out = []
    for p in paths:
        pts = p.points
        if len(pts) < length:
            tail = np.repeat(pts[-1:], length - len(pts), axis=0)
            pts = np.vstack([pts, tail])
        out.append(pts)
    # (L, m, D): step-major so row k is the joint sequence at step k
    return np.stack(out, axis=1)


def accumulate(
    model: DifferentiableModel,
    selector: TargetSelector,
    paths: Sequence[InterpolationPath],
    baseline_sequence: np.ndarray,
    input_sequence: np.ndarray,
) -> np.ndarray:
    """Left-endpoint Riemann sum of the gradient along the joint path of all tokens."""
    baseline_sequence = np.asarray(baseline_sequence, dtype=np.float64)
    input_sequence = np.asarray(input_sequence, dtype=np.float64)
    if baseline_sequence.shape != input_sequence.shape or len(paths) != len(input_sequence):
        raise ContractError("need one path per token and matching baseline/input shapes")
    joint = _pad_paths(paths)
    if joint.shape[0] < 2 or joint.shape[2] != input_sequence.shape[1]:
        raise ContractError(f"paths must have length >= 2 and dimension {input_sequence.shape[1]}")
    if not (np.array_equal(joint[0], baseline_sequence) and np.array_equal(joint[-1], input_sequence)):
        raise ContractError("path endpoints do not match the baseline and input sequences")
    raw = np.zeros_like(input_sequence)
    for k in range(joint.shape[0] - 1):
        raw += model.grad(joint[k], selector) * (joint[k + 1] - joint[k])
    return raw


def word_scores(raw: np.ndarray) -> np.ndarray:
    s = np.asarray(raw, dtype=np.float64).sum(axis=1)
    norm = np.linalg.norm(s)
    return s / norm if norm > 0 else np.zeros_like(s)


def delta_percent(raw: np.ndarray, f_input: float, f_baseline: float) -> tuple[float | None, float]:
    """Return ``(percent or None, absolute error)``; percent is None when |F(x) - F(x')| < 1e-6."""
    diff = f_input - f_baseline
    err = abs(float(np.sum(raw)) - diff)
    if abs(diff) >= DELTA_EPS:
        return 100.0 * err / abs(diff), err
    return None, err


def baseline_vector(store: EmbeddingStore, kind: str) -> np.ndarray:
    if kind == "mask":
        return store.vector(store.mask_id).copy()
    if kind == "pad":
        return store.vector(store.pad_id).copy()
    if kind == "zero":
        return np.zeros(store.dim)
    raise ContractError(f"unknown baseline kind {kind!r}")


def baseline_sequence(store: EmbeddingStore, sequence: TokenSequence, kind: str) -> np.ndarray:
    """Content positions become the baseline embedding; CLS and SEP keep their own."""
    x = store.embed(sequence.ids)
    structural = {store.cls_id, store.sep_id}
    base = baseline_vector(store, kind)
    for i, tok in enumerate(sequence.ids):
        if tok not in structural:
            x[i] = base
    return x


def build_paths(store: EmbeddingStore, sequence: TokenSequence, spec: PathSpec,
                baseline: np.ndarray) -> list[InterpolationPath]:
    specials = store.special_ids
    builders = {"udig": build_udig_path, "dig": build_dig_path}
    paths = []
    for i, tok in enumerate(sequence.ids):
        w0 = baseline[i]
        w = store.vector(tok)
        if spec.method == "ig" or tok in specials:
            path = upsample(build_ig_path(w0, w, spec.steps, token_index=i), spec.upsample_factor)
        else:
            path = builders[spec.method](store, tok, w0, spec, specials, token_index=i)
        paths.append(path)
    return paths


def default_selector(model: DifferentiableModel, x: np.ndarray) -> TargetSelector:
    return TargetSelector(CLASS_PROBABILITY, model.predict(x))


def attribute(
    model: DifferentiableModel,
    store: EmbeddingStore,
    sequence: TokenSequence,
    spec: PathSpec = PathSpec(),
    selector: TargetSelector | None = None,
) -> AttributionResult:
    x = store.embed(sequence.ids)
    if selector is None:
        selector = default_selector(model, x)
    x0 = baseline_sequence(store, sequence, spec.baseline_kind)

    t0 = time.perf_counter()
    paths = build_paths(store, sequence, spec, x0)
    t1 = time.perf_counter()
    raw = accumulate(model, selector, paths, x0, x)
    t2 = time.perf_counter()

    f_in = model.forward(x, selector)
    f_base = model.forward(x0, selector)
    pct, err = delta_percent(raw, f_in, f_base)
    return AttributionResult(
        raw=raw,
        word_scores=word_scores(raw),
        f_input=f_in,
        f_baseline=f_base,
        delta_percent=pct,
        delta_abs=err,
        spec=spec,
        selector=selector,
        paths=paths,
        timings={"paths": t1 - t0, "gradients": t2 - t1},
    )

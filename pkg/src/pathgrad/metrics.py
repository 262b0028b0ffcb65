"""Faithfulness metrics (log-odds, comprehensiveness, sufficiency) and corpus evaluation."""

from __future__ import annotations

import math
import statistics
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .attribution import AttributionResult, attribute
from .embeddings import EmbeddingStore
from .errors import ContractError
from .model import POSITION_LOGIT, DifferentiableModel, TargetSelector, TokenSequence
from .paths import PathSpec

MASK_TOP, KEEP_TOP = "mask_top", "keep_top"
CSV_HEADER = ("method", "strategy", "K", "k", "f", "baseline", "LO", "Comp", "Suff",
              "median_delta", "undefined_deltas", "n", "seconds")


@dataclass(frozen=True)
class MaskingProtocol:
    top_fraction: float = 0.2
    mode: str = MASK_TOP
    protected_ids: frozenset[int] = frozenset()
    replacement: str = "mask"

    def __post_init__(self):
        if not 0.0 < self.top_fraction <= 1.0:
            raise ContractError(f"top_fraction must lie in (0, 1], got {self.top_fraction}")
        if self.mode not in (MASK_TOP, KEEP_TOP):
            raise ContractError(f"mode must be {MASK_TOP!r} or {KEEP_TOP!r}")
        if self.replacement not in ("mask", "pad"):
            raise ContractError("ablation replacement must be 'mask' or 'pad'")
        object.__setattr__(self, "protected_ids", frozenset(self.protected_ids))

    @classmethod
    def classification(cls, **kw) -> "MaskingProtocol":
        return cls(top_fraction=0.2, **kw)

    @classmethod
    def qa(cls, store: EmbeddingStore, **kw) -> "MaskingProtocol":
        return cls(top_fraction=0.5, protected_ids=frozenset({store.sep_id}), **kw)

    def replacement_id(self, store: EmbeddingStore) -> int:
        return store.mask_id if self.replacement == "mask" else store.pad_id


def eligible_positions(sequence: TokenSequence, protocol: MaskingProtocol, store: EmbeddingStore) -> list[int]:
    blocked = {store.cls_id, store.sep_id} | protocol.protected_ids
    return [i for i, tok in enumerate(sequence.ids) if tok not in blocked]


def top_count(fraction: float, n_eligible: int) -> int:
    # round first so that e.g. 0.2 * 15 = 3.0000000000000004 does not ceil to 4
    return min(n_eligible, math.ceil(round(fraction * n_eligible, 9)))


def select_top(scores: np.ndarray, protocol: MaskingProtocol, sequence: TokenSequence,
               store: EmbeddingStore) -> list[int]:
    """Highest-scoring eligible positions, ties broken by lower position."""
    scores = np.asarray(scores, dtype=np.float64)
    if scores.shape != (len(sequence),):
        raise ContractError("one score per token position is required")
    eligible = eligible_positions(sequence, protocol, store)
    ranked = sorted(eligible, key=lambda i: (-scores[i], i))
    return sorted(ranked[:top_count(protocol.top_fraction, len(eligible))])


def ablate(sequence: TokenSequence, positions, replacement_id: int, store: EmbeddingStore,
           protected_ids=frozenset()) -> TokenSequence:
    blocked = {store.cls_id, store.sep_id} | set(protected_ids)
    for p in positions:
        if not 0 <= p < len(sequence):
            raise ContractError(f"position {p} out of range")
        if sequence.ids[p] in blocked:
            raise ContractError(f"position {p} holds a protected token")
    return sequence.replace(positions, replacement_id)


def perturb(sequence: TokenSequence, scores: np.ndarray, protocol: MaskingProtocol,
            store: EmbeddingStore) -> TokenSequence:
    top = select_top(scores, protocol, sequence, store)
    if protocol.mode == MASK_TOP:
        positions = top
    else:
        keep = set(top)
        positions = [i for i in eligible_positions(sequence, protocol, store) if i not in keep]
    return ablate(sequence, positions, protocol.replacement_id(store), store, protocol.protected_ids)


def _fixed_target(model, store, sequence, selector) -> TargetSelector:
    if selector is not None and selector.kind == POSITION_LOGIT:
        return selector
    # the originally predicted class is held fixed across ablations
    return TargetSelector("class_probability", model.predict(store.embed(sequence.ids)))


def _prob_pairs(model, store, scored, protocol, selector) -> list[tuple[float, float]]:
    pairs = []
    for sequence, scores in scored:
        target = _fixed_target(model, store, sequence, selector)
        p_orig = model.target_probability(store.embed(sequence.ids), target)
        changed = perturb(sequence, scores, protocol, store)
        p_new = model.target_probability(store.embed(changed.ids), target)
        pairs.append((p_orig, p_new))
    return pairs


def _with_mode(protocol: MaskingProtocol, mode: str) -> MaskingProtocol:
    return MaskingProtocol(protocol.top_fraction, mode, protocol.protected_ids, protocol.replacement)


def log_odds(model: DifferentiableModel, store: EmbeddingStore,
             scored: Sequence[tuple[TokenSequence, np.ndarray]],
             protocol: MaskingProtocol = MaskingProtocol(),
             selector: TargetSelector | None = None) -> float:
    """Mean of ln(p_masked / p_orig) for the predicted target after masking the top tokens."""
    pairs = _prob_pairs(model, store, scored, _with_mode(protocol, MASK_TOP), selector)
    return float(np.mean([math.log(new / orig) for orig, new in pairs]))


def comprehensiveness(model, store, scored, protocol=MaskingProtocol(), selector=None) -> float:
    pairs = _prob_pairs(model, store, scored, _with_mode(protocol, MASK_TOP), selector)
    return float(np.mean([orig - new for orig, new in pairs]))


def sufficiency(model, store, scored, protocol=MaskingProtocol(), selector=None) -> float:
    """Mean drop in target probability when only the top tokens are kept."""
    pairs = _prob_pairs(model, store, scored, _with_mode(protocol, KEEP_TOP), selector)
    return float(np.mean([orig - new for orig, new in pairs]))


@dataclass
class MetricReport:
    spec: PathSpec
    log_odds: float
    comprehensiveness: float
    sufficiency: float
    median_delta_percent: float | None
    undefined_delta_count: int
    n_examples: int
    timings: dict[str, float] = field(default_factory=dict)

    @property
    def seconds(self) -> float:
        return sum(self.timings.values())

    def csv_row(self, deterministic: bool = False) -> list[str]:
        s = self.spec
        median = "" if self.median_delta_percent is None else repr(self.median_delta_percent)
        seconds = 0.0 if deterministic else round(self.seconds, 6)
        return [s.method, s.strategy, str(s.steps), str(s.knn_k), str(s.upsample_factor), s.baseline_kind,
                repr(self.log_odds), repr(self.comprehensiveness), repr(self.sufficiency),
                median, str(self.undefined_delta_count), str(self.n_examples), repr(seconds)]

    def to_dict(self, deterministic: bool = False) -> dict:
        timings = {k: 0.0 for k in self.timings} if deterministic else dict(self.timings)
        return {
            "spec": self.spec.to_dict(),
            "log_odds": self.log_odds,
            "comprehensiveness": self.comprehensiveness,
            "sufficiency": self.sufficiency,
            "median_delta_percent": self.median_delta_percent,
            "undefined_delta_count": self.undefined_delta_count,
            "n_examples": self.n_examples,
            "timings": timings,
        }


def attribute_corpus(model, store, sequences: Sequence[TokenSequence], spec: PathSpec,
                     selector: TargetSelector | None = None, workers: int = 1) -> list[AttributionResult]:
    def run(seq):
        return attribute(model, store, seq, spec, selector)

    if workers <= 1:
        return [run(s) for s in sequences]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run, sequences))


def median_delta(results: Sequence[AttributionResult]) -> tuple[float | None, int]:
    defined = [r.delta_percent for r in results if r.delta_defined]
    undefined = len(results) - len(defined)
    return (statistics.median(defined) if defined else None), undefined


def evaluate_scored(model, store, sequences, scores, protocol, selector=None) -> tuple[float, float, float]:
    scored = list(zip(sequences, scores))
    return (log_odds(model, store, scored, protocol, selector),
            comprehensiveness(model, store, scored, protocol, selector),
            sufficiency(model, store, scored, protocol, selector))


def evaluate_method(
    model: DifferentiableModel,
    store: EmbeddingStore,
    corpus: Sequence[TokenSequence],
    spec: PathSpec,
    protocol: MaskingProtocol = MaskingProtocol(),
    selector: TargetSelector | None = None,
    workers: int = 1,
) -> tuple[MetricReport, list[AttributionResult]]:
    if not corpus:
        raise ContractError("corpus is empty")
    results = attribute_corpus(model, store, corpus, spec, selector, workers)
    t0 = time.perf_counter()
    lo, comp, suff = evaluate_scored(model, store, corpus, [r.word_scores for r in results],
                                     protocol, selector)
    t_metrics = time.perf_counter() - t0
    median, undefined = median_delta(results)
    timings = {
        "paths": sum(r.timings["paths"] for r in results),
        "gradients": sum(r.timings["gradients"] for r in results),
        "metrics": t_metrics,
    }
    report = MetricReport(spec, lo, comp, suff, median, undefined, len(corpus), timings)
    return report, results


def permuted_scores(scores: Sequence[np.ndarray], seed: int) -> list[np.ndarray]:
    """Random-ranking control: each example's scores shuffled with a seeded generator."""
    rng = np.random.default_rng(seed)
    return [rng.permutation(np.asarray(s)) for s in scores]

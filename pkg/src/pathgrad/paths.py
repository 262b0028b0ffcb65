"""Interpolation paths from a baseline embedding to an input embedding.

Three constructions share one contract (:class:`InterpolationPath`):

* ``ig``   -- equidistant points on the straight segment.
* ``udig`` -- equidistant segment points, each snapped to a nearby vocabulary
  word and clamped into a box.  Points are fixed from the input side toward
  the baseline and each box lies inside ``[baseline, previous point]``, so
  every dimension stays monotone.  With ``window="line"`` (default) the box
  is further narrowed to the neighbouring segment points ``k-1`` and ``k+1``,
  which keeps anchored points near the line; ``window="full"`` uses the
  whole ``[baseline, previous point]`` box.
* ``dig``  -- an anchored walk: starting at the input, repeatedly hop to a
  neighbouring word of the current point, clamped the same way.  The hops are
  not tied to the segment, so spacing is uneven.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .embeddings import EmbeddingStore, Neighbor, knn
from .errors import ContractError, SelectionError

METHODS = ("ig", "dig", "udig")
STRATEGIES = ("greedy", "maxcount")
BASELINES = ("mask", "pad", "zero")
WINDOWS = ("line", "full")


@dataclass(frozen=True)
class PathSpec:
    method: str = "udig"
    strategy: str = "greedy"
    steps: int = 30
    knn_k: int = 10
    upsample_factor: int = 1
    baseline_kind: str = "mask"
    window: str = "line"

    def __post_init__(self):
        if self.method not in METHODS:
            raise ContractError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.strategy not in STRATEGIES:
            raise ContractError(f"strategy must be one of {STRATEGIES}, got {self.strategy!r}")
        if self.baseline_kind not in BASELINES:
            raise ContractError(f"baseline must be one of {BASELINES}, got {self.baseline_kind!r}")
        if self.window not in WINDOWS:
            raise ContractError(f"window must be one of {WINDOWS}, got {self.window!r}")
        if self.steps < 1 or self.knn_k < 1 or self.upsample_factor < 0:
            raise ContractError("steps >= 1, knn_k >= 1 and upsample_factor >= 0 are required")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class StepTrace:
    step: int
    line_point: list[float]
    anchor_token: int | None
    projection_displacement: float
    line_deviation: float
    fallback: bool = False


@dataclass
class InterpolationPath:
    """Ordered points ``[baseline, p1, ..., pK, input]`` for one token position."""

    points: np.ndarray
    token_index: int = 0
    trace: list[StepTrace] = field(default_factory=list)

    @property
    def start(self) -> np.ndarray:
        return self.points[0]

    @property
    def end(self) -> np.ndarray:
        return self.points[-1]

    def __len__(self) -> int:
        return len(self.points)


def linear_points(w0: np.ndarray, w: np.ndarray, steps: int) -> np.ndarray:
    w0 = np.asarray(w0, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    if w0.shape != w.shape:
        raise ContractError("segment endpoints must have the same dimension")
    if steps < 1:
        raise ContractError("steps must be >= 1")
    alphas = np.arange(1, steps + 1, dtype=np.float64) / (steps + 1)
    return w0 + alphas[:, None] * (w - w0)


def monotonic_projection(a: np.ndarray, lo_ref: np.ndarray, hi_ref: np.ndarray) -> np.ndarray:
    """Clamp each coordinate of `a` into the closed interval spanned by the two references."""
    lo_ref = np.asarray(lo_ref, dtype=np.float64)
    hi_ref = np.asarray(hi_ref, dtype=np.float64)
    return np.clip(np.asarray(a, dtype=np.float64),
                   np.minimum(lo_ref, hi_ref), np.maximum(lo_ref, hi_ref))


def monotone_dims(a: np.ndarray, w0: np.ndarray, w: np.ndarray) -> set[int]:
    a, w0, w = (np.asarray(v, dtype=np.float64) for v in (a, w0, w))
    inside = ((w0 <= a) & (a <= w)) | ((w0 >= a) & (a >= w))
    return {int(j) for j in np.flatnonzero(inside)}


def select_anchor(
    candidates: Sequence[Neighbor],
    store: EmbeddingStore,
    line_point: np.ndarray,
    lo_ref: np.ndarray,
    hi_ref: np.ndarray,
    strategy: str = "greedy",
) -> tuple[int, np.ndarray]:
    """Pick an anchor among `candidates` and return it with its clamped (monotone) form.

    ``greedy`` takes the candidate closest to its own projection (first in
    candidate order on ties); ``maxcount`` takes the most monotone dimensions,
    then the smallest distance to `line_point`, then the smallest token id.
    """
    if not candidates:
        raise SelectionError("no anchor candidates")
    if strategy not in STRATEGIES:
        raise ContractError(f"strategy must be one of {STRATEGIES}, got {strategy!r}")
    ids = np.array([c.token_id for c in candidates])
    vecs = store.vectors[ids]
    lo = np.minimum(lo_ref, hi_ref)
    hi = np.maximum(lo_ref, hi_ref)
    if strategy == "greedy":
        gaps = np.sqrt(np.sum((vecs - np.clip(vecs, lo, hi)) ** 2, axis=1))
        best = int(np.argmin(gaps))
    else:
        counts = np.sum((lo <= vecs) & (vecs <= hi), axis=1)
        dist = np.sqrt(np.sum((vecs - np.asarray(line_point, dtype=np.float64)) ** 2, axis=1))
        best = int(np.lexsort((ids, dist, -counts))[0])
    return int(ids[best]), np.clip(vecs[best], lo, hi)


def upsample(path: InterpolationPath, factor: int) -> InterpolationPath:
    if factor < 0:
        raise ContractError("upsample factor must be >= 0")
    pts = path.points
    for _ in range(factor):
        dense = np.empty((2 * len(pts) - 1, pts.shape[1]))
        dense[0::2] = pts
        dense[1::2] = 0.5 * (pts[:-1] + pts[1:])
        pts = dense
    return InterpolationPath(pts, path.token_index, list(path.trace))


def _assemble(w0, interior, w) -> np.ndarray:
    return np.vstack([np.asarray(w0, dtype=np.float64)[None, :],
                      np.asarray(interior, dtype=np.float64).reshape(-1, len(w0)),
                      np.asarray(w, dtype=np.float64)[None, :]])


def build_ig_path(w0: np.ndarray, w: np.ndarray, steps: int, token_index: int = 0) -> InterpolationPath:
    return InterpolationPath(_assemble(w0, linear_points(w0, w, steps), w), token_index)


def _anchor_step(store, query, exclude, spec, lo_ref, hi_ref, step, line_point):
    cands = knn(store, query, spec.knn_k, exclude)
    if not cands:
        point = monotonic_projection(line_point, lo_ref, hi_ref)
        return point, StepTrace(step, line_point.tolist(), None, 0.0,
                                float(np.linalg.norm(point - line_point)), fallback=True)
    token, point = select_anchor(cands, store, line_point, lo_ref, hi_ref, spec.strategy)
    return point, StepTrace(
        step, line_point.tolist(), token,
        float(np.linalg.norm(store.vector(token) - point)),
        float(np.linalg.norm(point - line_point)),
    )


def build_udig_path(
    store: EmbeddingStore,
    token_id: int,
    baseline: np.ndarray,
    spec: PathSpec,
    exclusions: Iterable[int] = (),
    token_index: int = 0,
    target: np.ndarray | None = None,
) -> InterpolationPath:
    """`target` overrides the input endpoint; by default it is the token's own embedding."""
    w0 = np.asarray(baseline, dtype=np.float64)
    w = store.vector(token_id) if target is None else np.asarray(target, dtype=np.float64)
    exclude = set(exclusions) | {token_id}
    line = linear_points(w0, w, spec.steps)
    # knots[k] is the k-th segment point, knots[0] = w0 and knots[K + 1] = w
    knots = np.vstack([w0[None, :], line, w[None, :]])
    interior = np.empty_like(line)
    trace = []
    prev = w
    for k in range(spec.steps, 0, -1):
        lp = line[k - 1]
        if spec.window == "line":
            lo_ref = knots[k - 1]
            hi_ref = monotonic_projection(knots[k + 1], w0, prev)
        else:
            lo_ref, hi_ref = w0, prev
        point, step = _anchor_step(store, lp, exclude, spec, lo_ref, hi_ref, k, lp)
        interior[k - 1] = point
        trace.append(step)
        prev = point
    path = InterpolationPath(_assemble(w0, interior, w), token_index, trace)
    return upsample(path, spec.upsample_factor)


def build_dig_path(
    store: EmbeddingStore,
    token_id: int,
    baseline: np.ndarray,
    spec: PathSpec,
    exclusions: Iterable[int] = (),
    token_index: int = 0,
    target: np.ndarray | None = None,
) -> InterpolationPath:
    w0 = np.asarray(baseline, dtype=np.float64)
    w = store.vector(token_id) if target is None else np.asarray(target, dtype=np.float64)
    exclude = set(exclusions) | {token_id}
    interior = np.empty((spec.steps, len(w0)))
    trace = []
    current = w
    for k in range(spec.steps, 0, -1):
        point, step = _anchor_step(store, current, exclude, spec, w0, current, k, current)
        if step.anchor_token is not None:
            exclude.add(step.anchor_token)
        interior[k - 1] = point
        trace.append(step)
        current = point
    path = InterpolationPath(_assemble(w0, interior, w), token_index, trace)
    return upsample(path, spec.upsample_factor)


def check_path(path: InterpolationPath, w0: np.ndarray, w: np.ndarray, atol: float = 0.0) -> list[str]:
    """Return a list of violated invariants (empty when the path is valid)."""
    problems = []
    pts = path.points
    if not (np.array_equal(pts[0], w0) and np.array_equal(pts[-1], w)):
        problems.append("endpoints")
    lo, hi = np.minimum(w0, w), np.maximum(w0, w)
    if np.any(pts < lo - atol) or np.any(pts > hi + atol):
        problems.append("boundedness")
    steps = np.diff(pts, axis=0)
    up = np.asarray(w) >= np.asarray(w0)
    if np.any(steps[:, up] < -atol) or np.any(steps[:, ~up] > atol):
        problems.append("monotonicity")
    return problems

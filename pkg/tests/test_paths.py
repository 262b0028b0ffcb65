import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from pathgrad.attribution import baseline_vector
from pathgrad.embeddings import SPECIAL_TOKENS, EmbeddingStore, Neighbor, knn
from pathgrad.errors import ContractError, SelectionError
from pathgrad.paths import (
    InterpolationPath,
    PathSpec,
    build_dig_path,
    build_ig_path,
    build_udig_path,
    check_path,
    linear_points,
    monotone_dims,
    monotonic_projection,
    select_anchor,
    upsample,
)

from conftest import random_store


# -- scalar oracles -------------------------------------------------------------

def clamp_oracle(a, r1, r2):
    out = []
    for x, p, q in zip(a, r1, r2):
        lo, hi = (p, q) if p <= q else (q, p)
        out.append(lo if x < lo else hi if x > hi else x)
    return np.array(out)


def monotone_oracle(a, w0, w):
    return {j for j in range(len(a)) if (w0[j] <= a[j] <= w[j]) or (w0[j] >= a[j] >= w[j])}


def select_oracle(cands, store, line_point, lo, hi, strategy):
    best = None
    for n, c in enumerate(cands):
        v = store.vectors[c.token_id]
        proj = clamp_oracle(v, lo, hi)
        if strategy == "greedy":
            key = (sum((v - proj) ** 2) ** 0.5, n)
        else:
            key = (-len(monotone_oracle(v, lo, hi)), sum((v - line_point) ** 2) ** 0.5, c.token_id)
        if best is None or key < best[0]:
            best = (key, c.token_id, proj)
    return best[1], best[2]


def udig_oracle(store, token_id, w0, spec, exclusions):
    """Step-by-step composition of the separately tested sub-operations."""
    w = store.vectors[token_id]
    line = linear_points(w0, w, spec.steps)
    knots = [w0, *line, w]
    points = [None] * (spec.steps + 2)
    points[0], points[-1] = w0, w
    prev = w
    for k in range(spec.steps, 0, -1):
        if spec.window == "line":
            lo, hi = knots[k - 1], monotonic_projection(knots[k + 1], w0, prev)
        else:
            lo, hi = w0, prev
        cands = knn(store, line[k - 1], spec.knn_k, set(exclusions) | {token_id})
        _, points[k] = select_anchor(cands, store, line[k - 1], lo, hi, spec.strategy)
        prev = points[k]
    return upsample(InterpolationPath(np.array(points)), spec.upsample_factor).points


def dig_oracle(store, token_id, w0, spec, exclusions):
    w = store.vectors[token_id]
    used = set(exclusions) | {token_id}
    walk = [w]
    for _ in range(spec.steps):
        cur = walk[-1]
        cands = knn(store, cur, spec.knn_k, used)
        tok, nxt = select_anchor(cands, store, cur, w0, cur, spec.strategy)
        used.add(tok)
        walk.append(nxt)
    points = np.array([w0, *walk[::-1]])
    return upsample(InterpolationPath(points), spec.upsample_factor).points


# -- linear points / projection / monotone dims ------------------------------------

def test_linear_points_examples():
    np.testing.assert_array_equal(linear_points([0, 0], [1, 1], 1), [[0.5, 0.5]])
    np.testing.assert_array_equal(linear_points([0.0], [3.0], 2), [[1.0], [2.0]])
    w = np.array([0.3, -2.0])
    np.testing.assert_array_equal(linear_points(w, w, 4), np.tile(w, (4, 1)))


def test_projection_examples():
    np.testing.assert_array_equal(monotonic_projection([2, -1], [0, 0], [1, 1]), [1, 0])
    a = np.array([0.25, 0.75])
    np.testing.assert_array_equal(monotonic_projection(a, [0, 0], [1, 1]), a)


def test_projection_matches_scalar_oracle(rng):
    for _ in range(300):
        a, r1, r2 = rng.normal(size=(3, 16))
        np.testing.assert_array_equal(monotonic_projection(a, r1, r2), clamp_oracle(a, r1, r2))


def test_monotone_dims_examples():
    assert monotone_dims([0.5, 2], [0, 0], [1, 1]) == {0}
    w0 = np.array([0.1, -3.0, 2.0])
    assert monotone_dims(w0, w0, np.array([1.0, 1.0, 1.0])) == {0, 1, 2}


def test_monotone_dims_matches_oracle(rng):
    for _ in range(300):
        a, w0, w = rng.normal(size=(3, 16))
        assert monotone_dims(a, w0, w) == monotone_oracle(a, w0, w)


# -- anchor selection ---------------------------------------------------------------

def _one_hot_store(vectors):
    vectors = np.asarray(vectors, dtype=float)
    specials = np.full((5, vectors.shape[1]), 99.0) + np.arange(5)[:, None]
    tokens = SPECIAL_TOKENS + tuple(f"c{i}" for i in range(len(vectors)))
    return EmbeddingStore(tokens, np.vstack([specials, vectors]))


def test_single_monotone_candidate():
    store = _one_hot_store([[0.4, 0.6]])
    for strategy in ("greedy", "maxcount"):
        tok, proj = select_anchor([Neighbor(5, 0.1)], store, [0.5, 0.5], [0, 0], [1, 1], strategy)
        assert tok == 5
        np.testing.assert_array_equal(proj, [0.4, 0.6])


def test_maxcount_prefers_fully_monotone():
    store = _one_hot_store([[0.5, 0.5, 0.5], [-1.0, 2.0, -3.0]])
    cands = [Neighbor(6, 0.0), Neighbor(5, 1.0)]
    tok, _ = select_anchor(cands, store, [-1.0, 2.0, -3.0], np.zeros(3), np.ones(3), "maxcount")
    assert tok == 5


def test_empty_candidates_raise():
    store = _one_hot_store([[0.0]])
    with pytest.raises(SelectionError):
        select_anchor([], store, [0.0], [0.0], [1.0], "greedy")
    with pytest.raises(ContractError):
        select_anchor([Neighbor(5, 0.0)], store, [0.0], [0.0], [1.0], "closest")


@pytest.mark.parametrize("strategy", ["greedy", "maxcount"])
def test_selection_matches_enumeration_oracle(rng, strategy):
    store = random_store(rng, n_content=30)
    for _ in range(200):
        ids = rng.choice(np.arange(5, store.size), size=5, replace=False)
        cands = [Neighbor(int(i), float(n)) for n, i in enumerate(ids)]
        lp, lo, hi = rng.normal(size=(3, 16))
        got_tok, got_proj = select_anchor(cands, store, lp, lo, hi, strategy)
        want_tok, want_proj = select_oracle(cands, store, lp, lo, hi, strategy)
        assert got_tok == want_tok
        np.testing.assert_array_equal(got_proj, want_proj)


# -- IG paths -------------------------------------------------------------------------

def test_ig_path_examples():
    path = build_ig_path(np.zeros(2), np.ones(2), 1)
    np.testing.assert_array_equal(path.points, [[0, 0], [0.5, 0.5], [1, 1]])


def test_ig_equidistant_and_collinear(bundle):
    store = bundle.store
    w0 = baseline_vector(store, "mask")
    w = store.vector(store.index["great"])
    path = build_ig_path(w0, w, 30)
    steps = np.diff(path.points, axis=0)
    np.testing.assert_allclose(steps, np.tile(steps[0], (len(steps), 1)), atol=1e-12)
    direction = (w - w0) / np.dot(w - w0, w - w0)
    t = (path.points - w0) @ direction
    residual = path.points - (w0 + t[:, None] * (w - w0))
    assert np.max(np.linalg.norm(residual, axis=1)) < 1e-10


# -- UDIG / DIG paths -------------------------------------------------------------------

def test_udig_exact_midpoint_hit():
    w0, w = np.zeros(2), np.array([2.0, 4.0])
    vectors = np.vstack([np.full((5, 2), 50.0) + np.arange(5)[:, None], [w, [1.0, 2.0], [1.5, -7.0]]])
    store = EmbeddingStore(SPECIAL_TOKENS + ("input", "mid", "far"), vectors)
    for window in ("line", "full"):
        spec = PathSpec("udig", steps=1, knn_k=1, upsample_factor=0, window=window)
        path = build_udig_path(store, 5, w0, spec, store.special_ids)
        np.testing.assert_array_equal(path.points, [w0, [1.0, 2.0], w])
        assert path.trace[0].anchor_token == store.index["mid"]


@pytest.mark.parametrize("builder", [build_udig_path, build_dig_path])
def test_degenerate_input_equals_baseline(bundle, builder):
    store = bundle.store
    tok = store.index["great"]
    path = builder(store, tok, store.vector(tok), PathSpec(steps=8, knn_k=5), store.special_ids)
    np.testing.assert_array_equal(path.points, np.tile(store.vector(tok), (len(path), 1)))


def test_dig_single_step_is_projected_anchor():
    w0, w = np.zeros(2), np.array([2.0, 2.0])
    vectors = np.vstack([np.full((5, 2), 50.0) + np.arange(5)[:, None], [w, [1.0, 3.0]]])
    store = EmbeddingStore(SPECIAL_TOKENS + ("input", "nb"), vectors)
    path = build_dig_path(store, 5, w0, PathSpec("dig", steps=1, knn_k=1, upsample_factor=0),
                          store.special_ids)
    np.testing.assert_array_equal(path.points, [w0, [1.0, 2.0], w])


@pytest.mark.parametrize("strategy", ["greedy", "maxcount"])
@pytest.mark.parametrize("window", ["line", "full"])
def test_udig_matches_compositional_oracle(bundle, strategy, window):
    store = bundle.store
    w0 = baseline_vector(store, "mask")
    spec = PathSpec("udig", strategy, steps=8, knn_k=5, upsample_factor=1, window=window)
    for word in ("great", "horrible", "show", "the", "!"):
        tok = store.index[word]
        got = build_udig_path(store, tok, w0, spec, store.special_ids).points
        np.testing.assert_array_equal(got, udig_oracle(store, tok, w0, spec, store.special_ids))


@pytest.mark.parametrize("strategy", ["greedy", "maxcount"])
def test_dig_matches_compositional_oracle(bundle, strategy):
    store = bundle.store
    w0 = baseline_vector(store, "pad")
    spec = PathSpec("dig", strategy, steps=8, knn_k=5, upsample_factor=0)
    for word in ("great", "awful", "movie"):
        tok = store.index[word]
        got = build_dig_path(store, tok, w0, spec, store.special_ids).points
        np.testing.assert_array_equal(got, dig_oracle(store, tok, w0, spec, store.special_ids))


def test_fallback_when_every_candidate_is_excluded():
    rng = np.random.default_rng(3)
    store = EmbeddingStore(SPECIAL_TOKENS + ("only",), rng.normal(size=(6, 4)))
    w0 = np.zeros(4)
    path = build_udig_path(store, 5, w0, PathSpec(steps=3, upsample_factor=0), store.special_ids)
    assert all(s.fallback and s.anchor_token is None for s in path.trace)
    assert check_path(path, w0, store.vector(5)) == []


def test_trace_records_each_step(bundle):
    store = bundle.store
    w0 = baseline_vector(store, "mask")
    path = build_udig_path(store, store.index["great"], w0, PathSpec(steps=6), store.special_ids)
    assert [s.step for s in path.trace] == [6, 5, 4, 3, 2, 1]
    for s in path.trace:
        anchor = store.vector(s.anchor_token)
        # triangle inequality ties the two recorded displacements to the anchor's distance from the line
        assert s.line_deviation <= np.linalg.norm(anchor - np.array(s.line_point)) + s.projection_displacement + 1e-12


def test_paths_deterministic(bundle):
    store = bundle.store
    w0 = baseline_vector(store, "mask")
    spec = PathSpec(steps=12)
    a = build_udig_path(store, store.index["fun"], w0, spec, store.special_ids)
    b = build_udig_path(store, store.index["fun"], w0, spec, store.special_ids)
    np.testing.assert_array_equal(a.points, b.points)


def test_udig_line_window_stays_near_segment(bundle):
    # every anchored point lies within one segment step of its own segment point, per dimension
    store = bundle.store
    w0 = baseline_vector(store, "mask")
    spec = PathSpec(steps=30, upsample_factor=0)
    for word in ("great", "dull", "plot"):
        w = store.vector(store.index[word])
        path = build_udig_path(store, store.index[word], w0, spec, store.special_ids)
        line = np.vstack([w0, linear_points(w0, w, 30), w])
        step = np.abs(w - w0) / 31
        assert np.all(np.abs(path.points - line) <= step + 1e-12)


# -- upsampling ----------------------------------------------------------------------

def test_upsample_examples():
    p = InterpolationPath(np.array([[0.0], [1.0]]))
    assert upsample(p, 0).points.tolist() == [[0.0], [1.0]]
    assert upsample(p, 1).points.tolist() == [[0.0], [0.5], [1.0]]
    assert len(upsample(InterpolationPath(np.zeros((5, 2))), 2)) == 17


def random_monotone_path(rng, dim=6, length=7):
    w0, w = rng.normal(size=(2, dim))
    t = np.sort(rng.uniform(size=(length - 2, dim)), axis=0)
    inner = w0 + t * (w - w0)
    return InterpolationPath(np.vstack([w0, inner, w])), w0, w


def test_upsample_preserves_invariants_1000_paths(rng):
    for _ in range(1000):
        path, w0, w = random_monotone_path(rng)
        dense = upsample(path, 2)
        assert len(dense) == 4 * (len(path) - 1) + 1
        assert check_path(dense, w0, w) == []


# -- properties over random stores ------------------------------------------------------

@settings(max_examples=60, deadline=None)
@given(
    seed=st.integers(0, 2**32 - 1),
    method=st.sampled_from(["udig", "dig"]),
    strategy=st.sampled_from(["greedy", "maxcount"]),
    window=st.sampled_from(["line", "full"]),
    steps=st.integers(1, 12),
    knn_k=st.integers(1, 8),
    factor=st.integers(0, 2),
)
def test_anchored_paths_satisfy_invariants(seed, method, strategy, window, steps, knn_k, factor):
    r = np.random.default_rng(seed)
    store = random_store(r, n_content=12, dim=5)
    spec = PathSpec(method, strategy, steps, knn_k, factor, window=window)
    builder = build_udig_path if method == "udig" else build_dig_path
    w0 = r.normal(size=5)
    tok = int(r.integers(5, store.size))
    path = builder(store, tok, w0, spec, store.special_ids)
    assert len(path) == (steps + 1) * 2**factor + 1
    assert check_path(path, w0, store.vector(tok)) == []


@settings(max_examples=100, deadline=None)
@given(
    a=arrays(np.float64, 8, elements=st.floats(-1e3, 1e3)),
    r1=arrays(np.float64, 8, elements=st.floats(-1e3, 1e3)),
    r2=arrays(np.float64, 8, elements=st.floats(-1e3, 1e3)),
)
def test_projection_is_monotone_and_idempotent(a, r1, r2):
    p = monotonic_projection(a, r1, r2)
    assert monotone_dims(p, r1, r2) == set(range(8))
    np.testing.assert_array_equal(monotonic_projection(p, r1, r2), p)
    inside = monotone_dims(a, r1, r2)
    assert all(p[j] == a[j] for j in inside)


def test_spec_validation():
    with pytest.raises(ContractError):
        PathSpec(method="lig")
    with pytest.raises(ContractError):
        PathSpec(steps=0)
    with pytest.raises(ContractError):
        PathSpec(upsample_factor=-1)

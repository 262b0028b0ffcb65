"""Token vocabulary, embedding matrix and exact nearest-neighbour search."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .errors import ConfigurationError, ContractError, DuplicateTokenError, EmbeddingParseError

CLS, SEP, MASK, PAD, UNK = "[CLS]", "[SEP]", "[MASK]", "[PAD]", "[UNK]"
SPECIAL_TOKENS = (CLS, SEP, MASK, PAD, UNK)


class Neighbor(NamedTuple):
    token_id: int
    distance: float


@dataclass(frozen=True)
class EmbeddingStore:
    tokens: tuple[str, ...]
    vectors: np.ndarray
    index: dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        tokens = tuple(self.tokens)
        vectors = np.array(self.vectors, dtype=np.float64)
        if vectors.ndim != 2 or vectors.shape[0] != len(tokens) or vectors.shape[1] < 1:
            raise ContractError(
                f"vectors must be a V x D matrix with V={len(tokens)}, got shape {vectors.shape}"
            )
        if not np.all(np.isfinite(vectors)):
            raise ContractError("embedding entries must be finite")
        index: dict[str, int] = {}
        for i, tok in enumerate(tokens):
            if tok in index:
                raise DuplicateTokenError(f"duplicate token {tok!r}")
            index[tok] = i
        missing = [t for t in SPECIAL_TOKENS if t not in index]
        if missing:
            raise ConfigurationError(f"missing special tokens: {', '.join(missing)}")
        vectors.setflags(write=False)
        object.__setattr__(self, "tokens", tokens)
        object.__setattr__(self, "vectors", vectors)
        object.__setattr__(self, "index", index)

    @property
    def size(self) -> int:
        return len(self.tokens)

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    @property
    def cls_id(self) -> int:
        return self.index[CLS]

    @property
    def sep_id(self) -> int:
        return self.index[SEP]

    @property
    def mask_id(self) -> int:
        return self.index[MASK]

    @property
    def pad_id(self) -> int:
        return self.index[PAD]

    @property
    def unk_id(self) -> int:
        return self.index[UNK]

    @property
    def special_ids(self) -> frozenset[int]:
        return frozenset(self.index[t] for t in SPECIAL_TOKENS)

    def id_of(self, token: str) -> int:
        return self.index.get(token, self.unk_id)

    def vector(self, token_id: int) -> np.ndarray:
        return self.vectors[token_id]

    def embed(self, ids: Sequence[int]) -> np.ndarray:
        return self.vectors[np.asarray(ids, dtype=np.int64)].copy()

    def with_vectors(self, vectors: np.ndarray) -> "EmbeddingStore":
        return EmbeddingStore(self.tokens, vectors)


def load_embeddings(path: str | Path) -> EmbeddingStore:
    """Read the ``<V> <D>`` header format followed by one ``<token> <v1> ... <vD>`` row per line."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines:
        raise EmbeddingParseError(1, "empty file, expected '<V> <D>' header")
    header = lines[0].split(" ")
    try:
        n_rows, dim = int(header[0]), int(header[1])
        if len(header) != 2:
            raise ValueError
    except (ValueError, IndexError):
        raise EmbeddingParseError(1, f"bad header {lines[0]!r}") from None

    tokens: list[str] = []
    rows: list[list[float]] = []
    seen: set[str] = set()
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(" ")
        if len(parts) != dim + 1:
            raise EmbeddingParseError(lineno, f"expected {dim + 1} fields, got {len(parts)}")
        tok = parts[0]
        if tok in seen:
            raise DuplicateTokenError(f"line {lineno}: duplicate token {tok!r}")
        seen.add(tok)
        try:
            rows.append([float(v) for v in parts[1:]])
        except ValueError as exc:
            raise EmbeddingParseError(lineno, str(exc)) from None
        tokens.append(tok)
    if len(tokens) != n_rows:
        raise EmbeddingParseError(1, f"header declares {n_rows} rows, file has {len(tokens)}")
    return EmbeddingStore(tuple(tokens), np.array(rows, dtype=np.float64).reshape(n_rows, dim))


def save_embeddings(store: EmbeddingStore, path: str | Path) -> None:
    # repr() gives the shortest string that round-trips a float64 exactly
    out = [f"{store.size} {store.dim}"]
    for tok, row in zip(store.tokens, store.vectors):
        out.append(" ".join([tok, *(repr(float(v)) for v in row)]))
    Path(path).write_text("\n".join(out) + "\n", encoding="utf-8")


def _distances(vectors: np.ndarray, query: np.ndarray, metric: str) -> np.ndarray:
    if metric == "euclidean":
        return np.sqrt(np.sum((vectors - query) ** 2, axis=1))
    if metric == "cosine":
        norms = np.linalg.norm(vectors, axis=1) * np.linalg.norm(query)
        with np.errstate(invalid="ignore", divide="ignore"):
            sim = np.where(norms > 0, vectors @ query / norms, 0.0)
        return 1.0 - sim
    raise ContractError(f"unknown metric {metric!r}; expected 'euclidean' or 'cosine'")


def knn(
    store: EmbeddingStore,
    query: np.ndarray,
    k: int,
    exclude: Iterable[int] = (),
    metric: str = "euclidean",
) -> list[Neighbor]:
    """Exact k nearest rows to `query`, ascending by distance, ties by token id."""
    query = np.asarray(query, dtype=np.float64)
    if query.shape != (store.dim,):
        raise ContractError(f"query has shape {query.shape}, store dimension is {store.dim}")
    if k < 1:
        raise ContractError(f"k must be >= 1, got {k}")
    dist = _distances(store.vectors, query, metric)
    ids = np.arange(store.size)
    excluded = np.zeros(store.size, dtype=bool)
    excluded[[i for i in exclude if 0 <= i < store.size]] = True
    order = np.lexsort((ids, dist))
    order = order[~excluded[order]][:k]
    return [Neighbor(int(i), float(dist[i])) for i in order]

"""The pinned reference setup: seed-7 synthetic corpus, 64-token vocabulary, trained classifier."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

from .corpus import CorpusExample, generate_corpus, labeled_sequences, read_corpus, tokenize, write_corpus
from .embeddings import EmbeddingStore, load_embeddings, save_embeddings
from .model import ReferenceModelParams, TokenSequence, TrainConfig, load_params, save_params, train_reference

DATA_DIR = Path(__file__).parent / "data"
CORPUS_FILE = "corpus.jsonl"
INIT_EMBEDDINGS_FILE = "embeddings_init.txt"
EMBEDDINGS_FILE = "embeddings.txt"
MODEL_FILE = "model.json"

SEED = 7
N_EXAMPLES = 200


@dataclass(frozen=True)
class Bundle:
    store: EmbeddingStore
    params: ReferenceModelParams
    examples: tuple[CorpusExample, ...]

    @property
    def sequences(self) -> list[TokenSequence]:
        return [tokenize(ex.text, self.store) for ex in self.examples]


def build_bundle(out_dir: str | Path, seed: int = SEED, n_examples: int = N_EXAMPLES,
                 config: TrainConfig = TrainConfig()) -> Bundle:
    """Generate the corpus and initial embeddings, train, and write all four files to `out_dir`."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    examples, init_store = generate_corpus(seed, n_examples, dim=config.dim)
    write_corpus(examples, out / CORPUS_FILE)
    save_embeddings(init_store, out / INIT_EMBEDDINGS_FILE)
    params = train_reference(labeled_sequences(examples, init_store), init_store, config)
    store = init_store.with_vectors(params.embedding)
    save_embeddings(store, out / EMBEDDINGS_FILE)
    save_params(params, out / MODEL_FILE)
    return Bundle(store, params, tuple(examples))


def load_bundle(data_dir: str | Path = DATA_DIR) -> Bundle:
    data_dir = Path(data_dir)
    return Bundle(
        load_embeddings(data_dir / EMBEDDINGS_FILE),
        load_params(data_dir / MODEL_FILE),
        tuple(read_corpus(data_dir / CORPUS_FILE)),
    )


@lru_cache(maxsize=1)
def reference() -> Bundle:
    return load_bundle(DATA_DIR)

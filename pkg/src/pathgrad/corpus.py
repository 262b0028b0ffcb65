"""Synthetic sentiment corpus, its 64-token vocabulary, and the tokenizer."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from .embeddings import SPECIAL_TOKENS, EmbeddingStore
from .errors import ContractError
from .model import TokenSequence

POSITIVE = (
    "great", "good", "excellent", "wonderful", "amazing", "brilliant", "superb",
    "delightful", "fantastic", "charming", "enjoyable", "beautiful", "moving", "fun",
)
NEGATIVE = (
    "horrible", "bad", "terrible", "awful", "boring", "dull", "poor",
    "dreadful", "weak", "painful", "tedious", "messy", "bland", "ugly",
)
NOUNS = ("show", "movie", "film", "story", "plot", "cast", "script", "ending", "performance", "soundtrack")
INTENSIFIERS = ("such", "very", "really", "truly", "so", "quite")
FUNCTION_WORDS = ("this", "that", "what", "and", "an", "overall")
PUNCTUATION = ("!", ".", ",", "?")
FILLERS = ("a", "the", "it", "was", "is")

VOCABULARY = SPECIAL_TOKENS + FILLERS + POSITIVE + NEGATIVE + NOUNS + INTENSIFIERS + FUNCTION_WORDS + PUNCTUATION

NEGATIVE_LABEL, POSITIVE_LABEL = 0, 1

# {adj} slots take the example's sentiment; every other slot is neutral
TEMPLATES = (
    "{int} a {adj} {noun} !",
    "it was a {adj} {noun}",
    "the {noun} is {int} {adj} .",
    "what a {adj} {noun} !",
    "this {noun} was {adj} , and the {noun2} is {adj2} .",
    "{adj} {noun} .",
    "overall , the {noun} was {int} {adj}",
    "an {int} {adj} {noun} ?",
    "that {noun} is {adj}",
    "the {noun} was {adj} and {adj2} .",
)

_SPECIAL_RE = "|".join(re.escape(t) for t in SPECIAL_TOKENS)
_TOKEN_RE = re.compile(rf"{_SPECIAL_RE}|\w+|[^\w\s]")


@dataclass(frozen=True)
class CorpusExample:
    text: str
    label: int
    start: int | None = None
    end: int | None = None

    def to_dict(self) -> dict:
        doc = {"text": self.text, "label": self.label}
        if self.start is not None:
            doc["start"] = self.start
            doc["end"] = self.end
        return doc


def split_words(text: str) -> list[str]:
    words = []
    for piece in _TOKEN_RE.findall(text):
        words.append(piece if piece in SPECIAL_TOKENS else piece.lower())
    return words


def tokenize(text: str, store: EmbeddingStore) -> TokenSequence:
    """Lowercase, split on whitespace and punctuation, map unknowns to UNK, frame with CLS/SEP."""
    ids = [store.cls_id, *(store.id_of(w) for w in split_words(text)), store.sep_id]
    return TokenSequence(tuple(ids), text)


def detokenize(sequence: TokenSequence, store: EmbeddingStore) -> str:
    ids = list(sequence.ids)
    if ids and ids[0] == store.cls_id:
        ids = ids[1:]
    if ids and ids[-1] == store.sep_id:
        ids = ids[:-1]
    return " ".join(store.tokens[i] for i in ids)


def generate_corpus(seed: int = 7, n_examples: int = 200, dim: int = 16,
                    init_scale: float = 0.5) -> tuple[list[CorpusExample], EmbeddingStore]:
    """Balanced templated corpus plus a seeded initial embedding store over :data:`VOCABULARY`."""
    if n_examples < 2:
        raise ContractError("n_examples must be >= 2")
    rng = np.random.default_rng(seed)
    vectors = rng.normal(0.0, init_scale, (len(VOCABULARY), dim))
    store = EmbeddingStore(VOCABULARY, vectors)

    labels = [POSITIVE_LABEL] * (n_examples // 2) + [NEGATIVE_LABEL] * (n_examples - n_examples // 2)
    labels = [labels[i] for i in rng.permutation(n_examples)]

    def pick(options):
        return options[int(rng.integers(len(options)))]

    examples = []
    for label in labels:
        adjectives = POSITIVE if label == POSITIVE_LABEL else NEGATIVE
        template = pick(TEMPLATES)
        text = template.format(
            adj=pick(adjectives), adj2=pick(adjectives),
            noun=pick(NOUNS), noun2=pick(NOUNS), int=pick(INTENSIFIERS),
        )
        examples.append(CorpusExample(text, label))
    return examples, store


def write_corpus(examples: Iterable[CorpusExample], path: str | Path) -> None:
    lines = [json.dumps(ex.to_dict()) for ex in examples]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_corpus(path: str | Path) -> list[CorpusExample]:
    examples = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            doc = json.loads(line)
            examples.append(CorpusExample(doc["text"], int(doc["label"]), doc.get("start"), doc.get("end")))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise ContractError(f"{path}:{lineno}: bad corpus line ({exc})") from None
    return examples


def labeled_sequences(examples: Iterable[CorpusExample], store: EmbeddingStore) -> list[tuple[TokenSequence, int]]:
    return [(tokenize(ex.text, store), ex.label) for ex in examples]


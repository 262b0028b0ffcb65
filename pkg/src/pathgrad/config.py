"""Run configuration: JSON document merged with command-line overrides."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from . import bundled
from .errors import ConfigurationError
from .metrics import MaskingProtocol
from .model import SELECTOR_KINDS, TargetSelector
from .paths import BASELINES, METHODS, STRATEGIES, WINDOWS, PathSpec

CHOICES = {
    "method": METHODS,
    "strategy": STRATEGIES,
    "baseline": BASELINES,
    "window": WINDOWS,
    "selector": SELECTOR_KINDS,
}


class UsageError(ConfigurationError):
    pass


@dataclass
class RunConfig:
    embeddings: str = str(bundled.DATA_DIR / bundled.EMBEDDINGS_FILE)
    model: str = str(bundled.DATA_DIR / bundled.MODEL_FILE)
    corpus: str = str(bundled.DATA_DIR / bundled.CORPUS_FILE)
    method: str = "udig"
    strategy: str = "greedy"
    steps: int = 30
    knn: int = 10
    factor: int = 1
    baseline: str = "mask"
    window: str = "line"
    top_fraction: float = 0.2
    protect_sep: bool = False
    selector: str | None = None
    target_index: int | None = None
    head: int = 0
    seed: int = bundled.SEED
    out: str = "out"
    emit_raw: bool = False
    trace_paths: bool = False
    deterministic: bool = False
    workers: int = 1
    text: str | None = None
    example: list[int] = field(default_factory=lambda: [0])
    steps_list: list[int] = field(default_factory=lambda: [10, 30, 60])
    lengths: list[int] = field(default_factory=lambda: [1, 10, 25, 50])
    n_examples: int = bundled.N_EXAMPLES
    epochs: int = 50
    learning_rate: float = 0.1
    hidden: int = 32
    dim: int = 16

    def validate(self) -> "RunConfig":
        for name, allowed in CHOICES.items():
            value = getattr(self, name)
            if value is not None and value not in allowed:
                raise UsageError(f"invalid {name} {value!r}; valid choices: {', '.join(allowed)}")
        if not 0.0 < self.top_fraction <= 1.0:
            raise UsageError("top_fraction must lie in (0, 1]")
        if not 0 <= self.seed < 2**64:
            raise UsageError("seed must be a 64-bit unsigned value")
        if self.steps < 1 or self.knn < 1 or self.factor < 0:
            raise UsageError("steps >= 1, knn >= 1 and factor >= 0 are required")
        return self

    def path_spec(self, **override) -> PathSpec:
        kw = dict(method=self.method, strategy=self.strategy, steps=self.steps, knn_k=self.knn,
                  upsample_factor=self.factor, baseline_kind=self.baseline, window=self.window)
        kw.update(override)
        return PathSpec(**kw)

    def protocol(self, store) -> MaskingProtocol:
        protected = frozenset({store.sep_id}) if self.protect_sep else frozenset()
        replacement = "pad" if self.baseline == "pad" else "mask"
        return MaskingProtocol(self.top_fraction, protected_ids=protected, replacement=replacement)

    def target(self) -> TargetSelector | None:
        if self.selector is None:
            return None
        if self.target_index is None:
            raise UsageError("--target-index is required when --selector is given")
        return TargetSelector(self.selector, self.target_index, self.head)

    def to_dict(self) -> dict:
        return asdict(self)


def load_config(path: str | Path | None, overrides: dict) -> RunConfig:
    """Defaults < JSON config file < explicit overrides (None values are ignored)."""
    doc: dict = {}
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise FileNotFoundError(f"config file not found: {p}")
        try:
            doc = json.loads(p.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise UsageError(f"{p}: invalid JSON ({exc})") from None
        if not isinstance(doc, dict):
            raise UsageError(f"{p}: config must be a JSON object")
    known = {f.name for f in fields(RunConfig)}
    unknown = sorted(set(doc) - known)
    if unknown:
        raise UsageError(f"unknown config field(s): {', '.join(unknown)}")
    doc.update({k: v for k, v in overrides.items() if v is not None and k in known})
    return RunConfig(**doc).validate()

"""Rebuild the bundled data files and the frozen golden values used by the test suite.

Run only when the reference setup is changed on purpose:

    python scripts/regenerate_reference.py
"""

import json
from pathlib import Path

from pathgrad.attribution import attribute
from pathgrad.bundled import DATA_DIR, build_bundle
from pathgrad.corpus import tokenize
from pathgrad.metrics import MaskingProtocol, perturb
from pathgrad.model import TargetSelector
from pathgrad.paths import PathSpec

GOLDEN = Path(__file__).resolve().parents[1] / "tests" / "golden"
PINNED_TEXT = "such a great show !"


def main():
    bundle = build_bundle(DATA_DIR)
    store, params = bundle.store, bundle.params
    seq = tokenize(PINNED_TEXT, store)
    x = store.embed(seq.ids)
    result = attribute(params, store, seq, PathSpec("udig", "greedy", 30, 10, 1, "mask"))
    ablated = perturb(seq, result.word_scores, MaskingProtocol(0.2), store)
    GOLDEN.mkdir(parents=True, exist_ok=True)
    doc = {
        "text": PINNED_TEXT,
        "ids": list(seq.ids),
        "p_positive": params.forward(x, TargetSelector("class_probability", 1)),
        "spec": result.spec.to_dict(),
        "selector": result.selector.to_dict(),
        "raw": result.raw.tolist(),
        "word_scores": result.word_scores.tolist(),
        "f_input": result.f_input,
        "f_baseline": result.f_baseline,
        "delta_percent": result.delta_percent,
        "ablated_top20_ids": list(ablated.ids),
    }
    (GOLDEN / "pinned_udig.json").write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    print(f"wrote {DATA_DIR} and {GOLDEN / 'pinned_udig.json'}")


if __name__ == "__main__":
    main()

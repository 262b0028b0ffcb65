"""``pathgrad`` command-line interface.

Exit codes: 0 success, 1 usage error, 2 runtime error (including missing input files).
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

from . import bundled
from .attribution import attribute
from .config import CHOICES, RunConfig, UsageError, load_config
from .corpus import CorpusExample, generate_corpus, labeled_sequences, read_corpus, tokenize, write_corpus
from .embeddings import EmbeddingStore, load_embeddings, save_embeddings
from .errors import PathgradError
from .metrics import CSV_HEADER, evaluate_method
from .model import TrainConfig, load_params, measure_baseline_output, save_params, train_reference, training_accuracy
from .report import csv_table, heatmap_html, reports_csv

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2
LABEL_NAMES = {0: "Negative", 1: "Positive"}

COMPARE_SPECS = (("ig", "greedy"), ("dig", "greedy"), ("dig", "maxcount"),
                 ("udig", "greedy"), ("udig", "maxcount"))


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run-config document; flags override its fields")
    common.add_argument("--embeddings")
    common.add_argument("--model")
    common.add_argument("--corpus")
    common.add_argument("--method", choices=CHOICES["method"])
    common.add_argument("--strategy", choices=CHOICES["strategy"])
    common.add_argument("--window", choices=CHOICES["window"],
                        help="udig projection box: 'line' (neighbouring segment points) or 'full'")
    common.add_argument("--steps", type=int)
    common.add_argument("--knn", type=int)
    common.add_argument("--factor", type=int)
    common.add_argument("--baseline", choices=CHOICES["baseline"])
    common.add_argument("--top-fraction", dest="top_fraction", type=float)
    common.add_argument("--protect-sep", dest="protect_sep", action="store_true", default=None)
    common.add_argument("--selector", choices=CHOICES["selector"])
    common.add_argument("--target-index", dest="target_index", type=int)
    common.add_argument("--head", type=int, choices=(0, 1))
    common.add_argument("--seed", type=int)
    common.add_argument("--out")
    common.add_argument("--emit-raw", dest="emit_raw", action="store_true", default=None)
    common.add_argument("--trace-paths", dest="trace_paths", action="store_true", default=None)
    common.add_argument("--deterministic", action="store_true", default=None)
    common.add_argument("--workers", type=int)
    common.add_argument("--text")
    common.add_argument("--example", type=_int_list, help="comma-separated corpus indices")
    common.add_argument("--steps-list", dest="steps_list", type=_int_list)
    common.add_argument("--lengths", type=_int_list)
    common.add_argument("--n-examples", dest="n_examples", type=int)
    common.add_argument("--epochs", type=int)
    common.add_argument("--learning-rate", dest="learning_rate", type=float)
    common.add_argument("--hidden", type=int)
    common.add_argument("--dim", type=int)

    parser = _Parser(prog="pathgrad", description="Path-integral token attributions (IG, DIG-style, UDIG).")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, help_text in [
        ("generate", "write the synthetic corpus and initial embeddings"),
        ("train", "fit the reference classifier"),
        ("attribute", "attribute one example"),
        ("evaluate", "faithfulness metrics for one method over the corpus"),
        ("compare", "all methods and strategies over the corpus"),
        ("sweep", "metrics and timings over a list of step counts"),
        ("visualize", "HTML heatmaps for selected examples"),
        ("baseline", "model output at all-baseline inputs for MASK and PAD"),
    ]:
        sub.add_parser(name, parents=[common], help=help_text)
    return parser


def _require(path: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(f"required file not found: {p}")
    return p


def _load(cfg: RunConfig):
    store = load_embeddings(_require(cfg.embeddings))
    params = load_params(_require(cfg.model))
    return store, params


def _examples(cfg: RunConfig) -> list[CorpusExample]:
    return read_corpus(_require(cfg.corpus))


def _out(cfg: RunConfig) -> Path:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(path: Path, doc) -> None:
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _report(msg: str) -> None:
    print(msg, file=sys.stderr)


def cmd_generate(cfg: RunConfig) -> None:
    out = _out(cfg)
    examples, store = generate_corpus(cfg.seed, cfg.n_examples, dim=cfg.dim)
    write_corpus(examples, out / bundled.CORPUS_FILE)
    save_embeddings(store, out / bundled.INIT_EMBEDDINGS_FILE)
    _report(f"wrote {len(examples)} examples and a {store.size}x{store.dim} vocabulary to {out}")


def cmd_train(cfg: RunConfig) -> None:
    out = _out(cfg)
    init = load_embeddings(_require(cfg.embeddings))
    data = labeled_sequences(_examples(cfg), init)
    tc = TrainConfig(epochs=cfg.epochs, learning_rate=cfg.learning_rate, seed=cfg.seed,
                     hidden=cfg.hidden, dim=cfg.dim)
    params = train_reference(data, init, tc)
    save_params(params, out / bundled.MODEL_FILE)
    save_embeddings(init.with_vectors(params.embedding), out / bundled.EMBEDDINGS_FILE)
    acc = training_accuracy(params, data)
    _write_json(out / "train.json", {"training_accuracy": acc, "n_examples": len(data),
                                     "hyperparams": vars(tc)})
    _report(f"training accuracy {acc:.4f}; wrote {out / bundled.MODEL_FILE}")


def _sequence(cfg: RunConfig, store: EmbeddingStore, index: int | None = None):
    if cfg.text is not None and index is None:
        return tokenize(cfg.text, store)
    examples = _examples(cfg)
    i = cfg.example[0] if index is None else index
    if not 0 <= i < len(examples):
        raise UsageError(f"example index {i} out of range (corpus has {len(examples)})")
    return tokenize(examples[i].text, store)


def cmd_attribute(cfg: RunConfig) -> None:
    store, params = _load(cfg)
    seq = _sequence(cfg, store)
    result = attribute(params, store, seq, cfg.path_spec(), cfg.target())
    tokens = [store.tokens[i] for i in seq.ids]
    doc = result.to_dict(tokens, emit_raw=cfg.emit_raw, trace_paths=cfg.trace_paths)
    doc["text"] = seq.text
    _write_json(_out(cfg) / "attribution.json", doc)


def _evaluate(cfg, store, params, seqs, spec):
    report, _ = evaluate_method(params, store, seqs, spec, cfg.protocol(store), cfg.target(), cfg.workers)
    return report


def cmd_evaluate(cfg: RunConfig) -> None:
    store, params = _load(cfg)
    seqs = [tokenize(ex.text, store) for ex in _examples(cfg)]
    report = _evaluate(cfg, store, params, seqs, cfg.path_spec())
    out = _out(cfg)
    _write_json(out / "report.json", report.to_dict(cfg.deterministic))
    (out / "report.csv").write_text(reports_csv([report], cfg.deterministic), encoding="utf-8")


def cmd_compare(cfg: RunConfig) -> None:
    store, params = _load(cfg)
    seqs = [tokenize(ex.text, store) for ex in _examples(cfg)]
    reports = [_evaluate(cfg, store, params, seqs, cfg.path_spec(method=m, strategy=s))
               for m, s in COMPARE_SPECS]
    out = _out(cfg)
    (out / "compare.csv").write_text(reports_csv(reports, cfg.deterministic), encoding="utf-8")
    _write_json(out / "compare.json", {
        "reports": [r.to_dict(cfg.deterministic) for r in reports],
        "median_delta_percent": {f"{r.spec.method}/{r.spec.strategy}": r.median_delta_percent
                                 for r in reports},
    })


def cmd_sweep(cfg: RunConfig) -> None:
    store, params = _load(cfg)
    seqs = [tokenize(ex.text, store) for ex in _examples(cfg)]
    reports = [_evaluate(cfg, store, params, seqs, cfg.path_spec(method=m, steps=k))
               for m in ("ig", "dig", "udig") for k in cfg.steps_list]
    # time unit T: IG at the reference step count (30 when swept, else the first IG run)
    ig = [r for r in reports if r.spec.method == "ig"]
    unit = next((r for r in ig if r.spec.steps == 30), ig[0]).seconds
    rows = []
    for r in reports:
        row = r.csv_row(cfg.deterministic)
        if r.spec.method == "ig":
            row[1] = "-"
        ratio = 0.0 if cfg.deterministic or unit <= 0 else round(r.seconds / unit, 3)
        t = {} if cfg.deterministic else r.timings
        rows.append(row + [repr(round(t.get("paths", 0.0), 6)), repr(round(t.get("gradients", 0.0), 6)),
                           repr(round(t.get("metrics", 0.0), 6)), repr(ratio)])
    header = (*CSV_HEADER, "seconds_paths", "seconds_gradients", "seconds_metrics", "time_ratio")
    (_out(cfg) / "sweep.csv").write_text(csv_table(header, rows), encoding="utf-8")


def cmd_visualize(cfg: RunConfig) -> None:
    store, params = _load(cfg)
    out = _out(cfg)
    indices = [None] if cfg.text is not None else cfg.example
    for n, index in enumerate(indices):
        seq = _sequence(cfg, store, index)
        tokens = [store.tokens[i] for i in seq.ids]
        rows = [(m, attribute(params, store, seq, cfg.path_spec(method=m), cfg.target()).word_scores)
                for m in ("udig", "dig", "ig")]
        label = params.predict(store.embed(seq.ids))
        html = heatmap_html(tokens, rows, LABEL_NAMES.get(label, str(label)),
                            title=seq.text, deterministic=cfg.deterministic)
        name = f"example_{index:04d}.html" if index is not None else f"text_{n}.html"
        (out / name).write_text(html, encoding="utf-8")


def cmd_baseline(cfg: RunConfig) -> None:
    store, params = _load(cfg)
    mask = measure_baseline_output(params, store, store.mask_id, cfg.lengths)
    pad = measure_baseline_output(params, store, store.pad_id, cfg.lengths)
    rows = [[n, repr(dm), repr(dp)] for (n, dm), (_, dp) in zip(mask, pad)]
    (_out(cfg) / "baseline_output.csv").write_text(
        csv_table(("length", "mask_deviation", "pad_deviation"), rows), encoding="utf-8")


COMMANDS = {
    "generate": cmd_generate,
    "train": cmd_train,
    "attribute": cmd_attribute,
    "evaluate": cmd_evaluate,
    "compare": cmd_compare,
    "sweep": cmd_sweep,
    "visualize": cmd_visualize,
    "baseline": cmd_baseline,
}


def main(argv: list[str] | None = None) -> int:
    try:
        args = vars(build_parser().parse_args(argv))
    except SystemExit as exc:
        # argparse has already printed usage; keep the code as a return value for callers of main()
        return int(exc.code or 0)
    command = args.pop("command")
    config_path = args.pop("config")
    try:
        cfg = load_config(config_path, args)
        started = time.perf_counter()
        COMMANDS[command](cfg)
    except UsageError as exc:
        print(f"pathgrad: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as exc:
        print(f"pathgrad: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (PathgradError, OSError, ValueError) as exc:
        print(f"pathgrad: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    _report(f"{command} finished in {time.perf_counter() - started:.2f}s")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

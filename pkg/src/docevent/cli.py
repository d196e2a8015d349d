"""Command-line entry point.

Commands:
  generate  write a synthetic JSONL corpus for a schema
  train     train a model, writing a checkpoint and an epoch log
  eval      score a checkpoint (or a predictions file) against gold records
  predict   write predicted records as JSONL
  analyze   intra/inter-class cosine report plus an embedding TSV

Exit codes: 0 success, 1 validation failure (bad paths/flags/config),
2 runtime error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from .analysis import similarity_analysis, write_embedding_tsv
from .corpus import CorpusError, EventRecord, SchemaError, load_corpus, load_schema, save_corpus
from .generate import GenConfig, GenConfigError, generate_synthetic
from .metrics import evaluate_predictions
from .model import ABLATIONS, ModelConfig
from .trainer import TrainConfig, evaluate, load_model, paper_mode, save_model, train


class CliError(Exception):
    """Validation failure; maps to exit code 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(f"{self.prog}: {message}\n{self.format_usage()}")


def _build_parser() -> _Parser:
    p = _Parser(prog="docevent", description=__doc__,
                formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--schema", required=True, help="schema JSON path")
        sp.add_argument("--config", help="JSON config file (flags take precedence)")
        sp.add_argument("--seed", type=int, default=0)

    g = sub.add_parser("generate", help="write a synthetic corpus")
    common(g)
    g.add_argument("--out", required=True, help="output corpus JSONL path")

    t = sub.add_parser("train", help="train a model")
    common(t)
    t.add_argument("--corpus", required=True, help="training corpus JSONL")
    t.add_argument("--dev", help="dev corpus JSONL for model selection")
    t.add_argument("--checkpoint", required=True, help="output checkpoint path")
    t.add_argument("--out", help="epoch log path (default: <checkpoint>.epochs.jsonl)")
    t.add_argument("--ablation", choices=ABLATIONS, default="none")
    t.add_argument("--paper-mode", action="store_true",
                   help="batch 64, lr 5e-5 preset")

    e = sub.add_parser("eval", help="score predictions against gold records")
    common(e)
    e.add_argument("--corpus", required=True, help="gold corpus JSONL")
    e.add_argument("--checkpoint", help="model checkpoint to run")
    e.add_argument("--predictions", help="pre-computed predictions JSONL (instead of a checkpoint)")
    e.add_argument("--out", required=True, help="metrics report JSON path")

    pr = sub.add_parser("predict", help="write predicted records")
    common(pr)
    pr.add_argument("--corpus", required=True)
    pr.add_argument("--checkpoint", required=True)
    pr.add_argument("--out", required=True, help="predictions JSONL path")

    a = sub.add_parser("analyze", help="similarity analysis of detection features")
    common(a)
    a.add_argument("--corpus", required=True)
    a.add_argument("--checkpoint", required=True)
    a.add_argument("--out", required=True,
                   help="report JSON path; embeddings TSV written alongside as <out>.tsv")
    return p


def _require_file(path: str, what: str, command: str) -> str:
    if not os.path.isfile(path):
        raise CliError(f"{command}: {what} file not found: {path}")
    return path


def _load_config(path: str | None, command: str) -> dict:
    if not path:
        return {}
    _require_file(path, "config", command)
    with open(path) as f:
        try:
            return json.load(f)
        except json.JSONDecodeError as e:
            raise CliError(f"{command}: invalid config JSON ({e.msg}, line {e.lineno})")


def _load_gold(path: str, schema, command: str):
    _require_file(path, "corpus", command)
    docs, errors = load_corpus(path, schema)
    for err in errors:
        logging.warning("%s: skipped %s", path, err)
    if not docs:
        raise CliError(f"{command}: no valid documents in {path}")
    return docs


def _cmd_generate(args) -> int:
    schema = load_schema(_require_file(args.schema, "schema", "generate"))
    cfg_raw = _load_config(args.config, "generate").get("generator", {})
    try:
        gen_cfg = GenConfig.from_dict(cfg_raw)
        docs = generate_synthetic(schema, gen_cfg, args.seed)
    except GenConfigError as e:
        raise CliError(f"generate: {e}")
    save_corpus(args.out, docs)
    print(f"wrote {len(docs)} documents to {args.out}")
    return 0


def _cmd_train(args) -> int:
    schema = load_schema(_require_file(args.schema, "schema", "train"))
    raw = _load_config(args.config, "train")
    model_cfg = ModelConfig.from_dict({**raw.get("model", {}), "ablation": args.ablation})
    train_cfg = TrainConfig.from_dict(raw.get("train", {}))
    train_cfg.seed = args.seed
    if args.paper_mode:
        paper_mode(train_cfg)
    corpus = _load_gold(args.corpus, schema, "train")
    dev = _load_gold(args.dev, schema, "train") if args.dev else None
    log_path = args.out or args.checkpoint + ".epochs.jsonl"
    model, _history = train(schema, corpus, model_cfg, train_cfg, dev=dev, log_path=log_path)
    save_model(args.checkpoint, model, train_cfg)
    print(f"wrote checkpoint to {args.checkpoint}, epoch log to {log_path}")
    return 0


def _load_predictions(path: str, command: str) -> dict[str, list[EventRecord]]:
    _require_file(path, "predictions", command)
    preds: dict[str, list[EventRecord]] = {}
    with open(path) as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            raw = json.loads(line)
            preds[raw["doc_id"]] = [
                EventRecord(event_type=r["event_type"], args=dict(r["args"]))
                for r in raw.get("records", [])]
    return preds


def _cmd_eval(args) -> int:
    schema = load_schema(_require_file(args.schema, "schema", "eval"))
    corpus = _load_gold(args.corpus, schema, "eval")
    if bool(args.checkpoint) == bool(args.predictions):
        raise CliError("eval: give exactly one of --checkpoint or --predictions")
    if args.checkpoint:
        model = load_model(_require_file(args.checkpoint, "checkpoint", "eval"))
        report = evaluate(model, corpus)
    else:
        preds = _load_predictions(args.predictions, "eval")
        report = evaluate_predictions(preds, corpus)
    with open(args.out, "w") as f:
        json.dump(report.to_dict(), f, indent=2)
    print(f"micro F1 = {report.overall.f1:.4f}; report written to {args.out}")
    return 0


def _cmd_predict(args) -> int:
    schema = load_schema(_require_file(args.schema, "schema", "predict"))
    corpus = _load_gold(args.corpus, schema, "predict")
    model = load_model(_require_file(args.checkpoint, "checkpoint", "predict"))
    with open(args.out, "w") as f:
        for doc in corpus:
            records = [{"event_type": rec.event_type, "args": rec.args, "score": score}
                       for rec, score in model.predict(doc)]
            f.write(json.dumps({"doc_id": doc.doc_id, "records": records}) + "\n")
    print(f"wrote predictions to {args.out}")
    return 0


def _cmd_analyze(args) -> int:
    schema = load_schema(_require_file(args.schema, "schema", "analyze"))
    corpus = _load_gold(args.corpus, schema, "analyze")
    model = load_model(_require_file(args.checkpoint, "checkpoint", "analyze"))
    report, dump = similarity_analysis(model, corpus, seed=args.seed)
    with open(args.out, "w") as f:
        json.dump(report, f, indent=2)
    tsv_path = args.out + ".tsv"
    write_embedding_tsv(tsv_path, dump)
    print(f"wrote similarity report to {args.out}, embeddings to {tsv_path}")
    return 0


_COMMANDS = {
    "generate": _cmd_generate,
    "train": _cmd_train,
    "eval": _cmd_eval,
    "predict": _cmd_predict,
    "analyze": _cmd_analyze,
}


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except (CliError, SchemaError, CorpusError, GenConfigError) as e:
        print(str(e), file=sys.stderr)
        return 1
    except (OSError, ValueError, KeyError, FloatingPointError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

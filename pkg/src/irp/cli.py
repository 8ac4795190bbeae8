"""Command-line entry point: ``irp <command> ...``."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import yaml

from .ablation import SUITES, format_jsonl, format_table, run_ablation
from .checkpoint import load_checkpoint, save_checkpoint
from .domain import ValidationError, read_corpus, split_corpus, write_corpus
from .service import PredictionService, RequestError, make_server
from .synthetic import GeneratorConfig, generate
from .text import Vocabulary, build_vocab
from .training import TrainConfig, calibrate_threshold, evaluate, train, with_threshold

log = logging.getLogger("irp")

DEFAULT_FRACTIONS = (0.8, 0.1, 0.1)


class CLIError(Exception):
    pass


def _load_config(path) -> dict:
    if path is None:
        return {}
    with open(path, encoding="utf-8") as fh:
        data = yaml.safe_load(fh) or {}
    if not isinstance(data, dict):
        raise CLIError(f"{path}: config must be a mapping")
    return data


def _split_settings(cfg: dict, train_seed: int) -> dict:
    split = dict(cfg.pop("split", {}) or {})
    return {"fractions": list(split.get("fractions", DEFAULT_FRACTIONS)), "seed": int(split.get("seed", train_seed))}


def _splits(corpus, split: dict):
    return split_corpus(corpus, tuple(split["fractions"]), split["seed"])


def cmd_gen_data(args) -> int:
    cfg = _load_config(args.config)
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.n is not None:
        cfg["n"] = args.n
    corpus = generate(GeneratorConfig.from_dict(cfg))
    write_corpus(corpus, args.out)
    print(f"wrote {len(corpus)} interactions to {args.out} (positive rate {corpus.labels.mean():.4f})")
    return 0


def cmd_build_vocab(args) -> int:
    corpus = read_corpus(args.corpus)
    vocab = build_vocab(corpus, args.min_freq, args.max_size)
    vocab.save(args.out)
    print(f"wrote vocabulary of {len(vocab)} tokens to {args.out}")
    return 0


def _train_config(path) -> tuple[TrainConfig, dict]:
    cfg = _load_config(path)
    seed = int(cfg.get("seed", 0))
    split = _split_settings(cfg, seed)
    return TrainConfig.from_dict(cfg), split


def cmd_train(args) -> int:
    config, split = _train_config(args.config)
    vocab = Vocabulary.load(args.vocab)
    train_split, val_split, _ = _splits(read_corpus(args.corpus), split)
    result = train(config, train_split, val_split, vocab)
    for rec in result.history:
        v = rec.validation
        val = f" val@0.5 P={v.precision:.4f} R={v.recall:.4f} F0.5={v.f_beta:.4f}" if v else ""
        print(f"epoch {rec.epoch}: loss={rec.train_loss:.6f} bce={rec.train_bce:.6f}{val}")
    threshold = calibrate_threshold(result.predictor, val_split) if len(val_split) else 0.5
    print(f"calibrated threshold (validation, F0.5): {threshold:.6f}")
    history = [
        {"epoch": r.epoch, "train_loss": r.train_loss, "train_bce": r.train_bce,
         "validation": r.validation.to_dict() if r.validation else None}
        for r in result.history
    ]
    save_checkpoint(
        args.out,
        with_threshold(result.predictor, threshold),
        vocab_path=os.path.abspath(args.vocab),
        extra={"split": split, "train": config.to_dict(), "history": history},
    )
    print(f"saved checkpoint to {args.out}")
    return 0


def _open_checkpoint(args):
    ckpt = load_checkpoint(args.ckpt)
    vocab_path = args.vocab or ckpt.vocab_path
    if not vocab_path:
        raise CLIError("checkpoint does not record a vocabulary path; pass --vocab")
    vocab = Vocabulary.load(vocab_path)
    return ckpt, ckpt.predictor(vocab)


def cmd_eval(args) -> int:
    ckpt, predictor = _open_checkpoint(args)
    corpus = read_corpus(args.corpus)
    if args.split == "all":
        split = corpus
    else:
        split_cfg = ckpt.extra.get("split") or {"fractions": list(DEFAULT_FRACTIONS), "seed": 0}
        parts = dict(zip(("train", "validation", "test"), _splits(corpus, split_cfg)))
        split = parts[args.split]
    report = evaluate(predictor, split)
    c = report.counts
    text = (
        f"split: {args.split} (n={c.total})\n"
        f"threshold: {report.threshold:.6f} (calibrated on validation)\n"
        f"precision: {report.precision:.6f}\n"
        f"recall: {report.recall:.6f}\n"
        f"f0.5: {report.f_beta:.6f}\n"
        f"tp={c.tp} fp={c.fp} fn={c.fn} tn={c.tn}\n"
    )
    sys.stdout.write(text)
    if args.out:
        Path(args.out).write_text(json.dumps(report.to_dict(), sort_keys=True) + "\n", encoding="utf-8")
    return 0


def cmd_ablate(args) -> int:
    cfg = _load_config(args.config)
    seed = int(cfg.get("seed", 0))
    split = _split_settings(cfg, seed)
    base = TrainConfig.from_dict(cfg)
    vocab = Vocabulary.load(args.vocab)
    rows = run_ablation(args.suite, base, _splits(read_corpus(args.corpus), split), vocab)
    table = format_table(rows)
    Path(args.out).write_text(table, encoding="utf-8")
    Path(str(args.out) + ".jsonl").write_text(format_jsonl(rows), encoding="utf-8")
    sys.stdout.write(table)
    return 0


def _records(source: str):
    text = source.strip()
    if text.startswith("{"):
        yield json.loads(text)
        return
    with open(source, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if line.strip():
                try:
                    yield json.loads(line)
                except json.JSONDecodeError as exc:
                    raise CLIError(f"{source}: line {lineno}: invalid JSON ({exc.msg})") from None


def cmd_predict(args) -> int:
    ckpt, predictor = _open_checkpoint(args)
    service = PredictionService(predictor, ckpt.model_version)
    for record in _records(args.input):
        try:
            print(json.dumps(service.predict(record)))
        except RequestError as exc:
            raise CLIError(f"invalid input: {exc}") from None
    return 0


def cmd_serve(args) -> int:
    ckpt, predictor = _open_checkpoint(args)
    server = make_server(predictor, ckpt.model_version, args.host, args.port)
    host, port = server.server_address[:2]
    print(f"serving {ckpt.model_version} on http://{host}:{port}", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="irp", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true", help="log training progress")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate a synthetic proxy-labelled corpus")
    p.add_argument("--config", help="generator config (YAML/JSON)")
    p.add_argument("--seed", type=int)
    p.add_argument("--n", type=int, help="override corpus size")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("build-vocab", help="build a word-level vocabulary")
    p.add_argument("--corpus", required=True)
    p.add_argument("--min-freq", type=int, default=2)
    p.add_argument("--max-size", type=int, default=20_000)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_build_vocab)

    p = sub.add_parser("train", help="train a model and save a checkpoint")
    p.add_argument("--corpus", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--config", help="training config (YAML/JSON)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a corpus split")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--split", choices=("train", "validation", "test", "all"), default="test")
    p.add_argument("--vocab")
    p.add_argument("--out", help="also write the report as JSON")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", help="run an ablation suite")
    p.add_argument("--suite", choices=SUITES, required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--config", help="base training config (YAML/JSON)")
    p.add_argument("--out", required=True, help="text table; a .jsonl twin is written alongside")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("predict", help="score interactions with a checkpoint")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--input", required=True, help="inline JSON record or a line-delimited file")
    p.add_argument("--vocab")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("serve", help="run the HTTP prediction service")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--port", type=int, default=8080)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--vocab")
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        return args.func(args)
    except (CLIError, ValidationError, ValueError, OSError, KeyError, TypeError) as exc:
        msg = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
        print(f"irp {args.command}: error: {msg}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

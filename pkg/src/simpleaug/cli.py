"""Command-line entry point: ``simpleaug run|propagate|paraphrase|filter|stats``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional

from .ingestion import InputError, load_embeddings, load_vqa
from .paraphrase import DEFAULT_RARE_MAX, DEFAULT_THRESHOLD, DEFAULT_TOPK, build_index, paraphrase_swap
from .pipeline import (
    STRATEGIES,
    ConfigError,
    RunConfig,
    assign_ids,
    compute_stats,
    dedup,
    filter_miss_answered,
    load_inputs,
    load_predictions,
    read_jsonl,
    run,
    write_jsonl,
)
from .propagate import propagate_all
from .rules import ALL_RULES, DEFAULT_COLORS, PropagationConfig

EXIT_OK, EXIT_INPUT, EXIT_CONFIG = 0, 1, 2

logger = logging.getLogger("simpleaug")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _rules(value: str):
    rules = frozenset(r.strip() for r in value.split(",") if r.strip())
    unknown = rules - set(ALL_RULES)
    if unknown or not rules:
        raise argparse.ArgumentTypeError(f"rules must be a comma list from {','.join(ALL_RULES)}")
    return rules


def _add_corpus(p):
    p.add_argument("--questions", type=Path, required=True, help="VQA questions JSON")
    p.add_argument("--annotations", type=Path, required=True, help="VQA annotations JSON")


def _add_propagation(p):
    p.add_argument("--coco", type=Path, nargs="+", required=True, help="COCO instances JSON (one or more)")
    p.add_argument("--detections", type=Path, required=True, help="detections JSON")
    p.add_argument("--rules", type=_rules, default=frozenset(ALL_RULES), help="comma list of yesno,color,number,what")
    p.add_argument("--no-verify", action="store_true", help="disable self- and cross-verification")
    p.add_argument("--min-score", type=float, default=0.0, help="detector score floor for rule matching")
    p.add_argument("--max-count", type=int, default=None, help="drop number answers above this count")
    p.add_argument("--max-detections", type=int, default=36, help="objects kept per image")
    p.add_argument("--colors", default=None, help="comma list overriding the color vocabulary")
    p.add_argument("--extra-nouns", type=Path, default=None, help="extra noun wordlist, one per line")
    p.add_argument("--stoplist", type=Path, default=None, help="non-informative noun list replacing the default")


def _add_paraphrase(p):
    p.add_argument("--threshold", type=float, default=DEFAULT_THRESHOLD)
    p.add_argument("--topk", type=int, default=DEFAULT_TOPK)
    p.add_argument("--rare-max", type=int, default=DEFAULT_RARE_MAX)
    p.add_argument("--rare-gate", choices=("one", "both"), default="both")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="simpleaug", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("run", help="full pipeline")
    _add_corpus(p)
    _add_propagation(p)
    p.add_argument("--embeddings", type=Path, default=None, help="word vector text file; paraphrasing is skipped without it")
    _add_paraphrase(p)
    p.add_argument("--predictions", type=Path, default=None, help="model predictions for miss-answered filtering")
    p.add_argument("--curriculum", choices=STRATEGIES, default="O_then_A_then_O")
    p.add_argument("--out", type=Path, required=True, help="output directory")
    p.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("propagate", help="question propagation only, to JSON lines")
    _add_corpus(p)
    _add_propagation(p)
    p.add_argument("--out", type=Path, required=True, help="output .jsonl")
    p.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("paraphrase", help="paraphrase swapping only, to JSON lines")
    _add_corpus(p)
    p.add_argument("--embeddings", type=Path, required=True)
    _add_paraphrase(p)
    p.add_argument("--out", type=Path, required=True, help="output .jsonl")
    p.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("filter", help="drop augmented triplets a model already answers")
    p.add_argument("--augmented", type=Path, required=True)
    p.add_argument("--predictions", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("stats", help="per answer-type counts")
    _add_corpus(p)
    p.add_argument("--augmented", type=Path, default=None)
    p.add_argument("--filtered", type=Path, default=None)
    p.add_argument("--out", type=Path, default=None, help="write the table as JSON too")
    return parser


def _propagation_config(args) -> PropagationConfig:
    colors = DEFAULT_COLORS if args.colors is None else frozenset(c.strip() for c in args.colors.split(",") if c.strip())
    try:
        return PropagationConfig(args.rules, args.min_score, args.max_count, colors)
    except ValueError as e:
        raise ConfigError(str(e)) from e


def _run_config(args, **extra) -> RunConfig:
    return RunConfig(
        questions=args.questions,
        annotations=args.annotations,
        coco=args.coco,
        detections=args.detections,
        out=args.out,
        extra_nouns=args.extra_nouns,
        stoplist=args.stoplist,
        propagation=_propagation_config(args),
        verify=not args.no_verify,
        max_detections=args.max_detections,
        **extra,
    )


def _cmd_run(args) -> int:
    cfg = _run_config(
        args,
        embeddings=args.embeddings,
        predictions=args.predictions,
        threshold=args.threshold,
        topk=args.topk,
        rare_max=args.rare_max,
        rare_gate=args.rare_gate,
        curriculum=args.curriculum,
        jobs=args.jobs,
    )
    result = run(cfg)
    print(result.stats.render())
    return EXIT_OK


def _cmd_propagate(args) -> int:
    cfg = _run_config(args, jobs=args.jobs)
    cfg.validate()
    loaded = load_inputs(cfg, need_embeddings=False)
    aug, report, counts = propagate_all(loaded.context, jobs=cfg.jobs)
    aug = assign_ids(dedup(aug, loaded.corpus), loaded.corpus)
    write_jsonl(aug, args.out)
    print(json.dumps({"written": len(aug), "candidates": counts.as_dict(), "verification": report.as_dict()}, indent=1))
    return EXIT_OK


def _cmd_paraphrase(args) -> int:
    for p in (args.questions, args.annotations, args.embeddings):
        if not p.is_file():
            raise ConfigError(f"missing input file {p}")
    corpus = load_vqa(args.questions, args.annotations)
    emb, _ = load_embeddings(args.embeddings)
    try:
        index = build_index(corpus, emb, args.threshold, args.topk, args.rare_max)
    except ValueError as e:
        raise ConfigError(str(e)) from e
    aug = assign_ids(paraphrase_swap(corpus, index, gate=args.rare_gate, jobs=args.jobs), corpus)
    write_jsonl(aug, args.out)
    print(json.dumps({"written": len(aug), "index": index.report.as_dict()}, indent=1))
    return EXIT_OK


def _cmd_filter(args) -> int:
    aug = read_jsonl(args.augmented)
    kept, report = filter_miss_answered(aug, load_predictions(args.predictions))
    write_jsonl(kept, args.out)
    print(json.dumps(report.as_dict(), indent=1))
    return EXIT_OK


def _cmd_stats(args) -> int:
    corpus = load_vqa(args.questions, args.annotations)
    aug = read_jsonl(args.augmented) if args.augmented else []
    filtered = read_jsonl(args.filtered) if args.filtered else None
    stats = compute_stats(corpus, aug, filtered)
    print(stats.render())
    if args.out:
        args.out.parent.mkdir(parents=True, exist_ok=True)
        args.out.write_text(json.dumps(stats.as_dict()) + "\n", encoding="utf-8")
    return EXIT_OK


COMMANDS = {"run": _cmd_run, "propagate": _cmd_propagate, "paraphrase": _cmd_paraphrase, "filter": _cmd_filter, "stats": _cmd_stats}


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as e:
        print(f"simpleaug: config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except InputError as e:
        print(f"simpleaug: input error: {e}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())

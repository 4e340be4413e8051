"""End-to-end augmentation run and its output files."""

from __future__ import annotations

import hashlib
import json
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

from . import __version__
from .core import AugmentedTriplet, Counters, IqaTriplet, first_augmented_id, normalize_answer, normalize_question
from .ingestion import (
    DEFAULT_MAX_DETECTIONS,
    InputError,
    TripletCorpus,
    build_evidence,
    load_coco_instances,
    load_detections,
    load_embeddings,
    load_vqa,
    merge_instances,
    read_json,
)
from .paraphrase import DEFAULT_RARE_MAX, DEFAULT_THRESHOLD, DEFAULT_TOPK, all_similar, build_index, paraphrase_swap
from .propagate import PropagationContext, propagate_all
from .questions import DEFAULT_STOPLIST, NounLexicon, analyze_corpus, read_wordlist
from .rules import PropagationConfig

logger = logging.getLogger(__name__)

STRATEGIES = ("A_plus_O", "O_then_AO", "O_then_A_then_O")


class ConfigError(Exception):
    """Invalid run configuration (bad option values, missing input files)."""


# ------------------------------------------------------------------ stage helpers


def dedup(candidates: Iterable[AugmentedTriplet], corpus: TripletCorpus) -> List[AugmentedTriplet]:
    """Drop candidates whose (image, question) is already annotated or emitted earlier."""
    seen = corpus.keys()
    out = []
    for c in candidates:
        key = (c.image_id, normalize_question(c.question))
        if key in seen:
            continue
        seen.add(key)
        out.append(c)
    return out


def assign_ids(aug: Sequence[AugmentedTriplet], corpus: TripletCorpus, start: Optional[int] = None) -> List[AugmentedTriplet]:
    if start is None:
        start = first_augmented_id(corpus.max_question_id)
    return [t.with_question_id(start + i) for i, t in enumerate(aug)]


def load_predictions(path) -> Dict[int, str]:
    """Model predictions as ``{question_id: answer}``; accepts a dict or a VQA results list."""
    data = read_json(path)
    if isinstance(data, dict):
        items = data.items()
    elif isinstance(data, list):
        try:
            items = [(r["question_id"], r["answer"]) for r in data]
        except (KeyError, TypeError) as e:
            raise InputError(f"{path}: expected records with question_id and answer") from e
    else:
        raise InputError(f"{path}: unsupported predictions layout")
    return {int(k): str(v) for k, v in items}


def filter_miss_answered(aug: Sequence[AugmentedTriplet], predictions: Mapping[int, str]) -> Tuple[List[AugmentedTriplet], Counters]:
    """Keep the triplets the model gets wrong, or has no prediction for."""
    report = Counters()
    known = {t.base.question_id for t in aug}
    unknown = [qid for qid in predictions if qid not in known]
    if unknown:
        logger.warning("%d predictions refer to unknown question ids; ignored", len(unknown))
        report.add("unknown_predictions", len(unknown))
    kept = []
    for t in aug:
        pred = predictions.get(t.base.question_id)
        if pred is not None:
            try:
                pred = normalize_answer(pred)
            except ValueError:
                pred = ""
        if pred is not None and pred == t.answer:
            report.add("removed")
            continue
        if pred is None:
            report.add("kept_without_prediction")
        kept.append(t)
    report.add("retained", len(kept))
    return kept, report


# ---------------------------------------------------------------------- file I/O


def _dump(obj, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(obj, f, ensure_ascii=False)
        f.write("\n")


def write_jsonl(aug: Iterable[AugmentedTriplet], path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        for t in aug:
            f.write(json.dumps(t.to_record(), ensure_ascii=False))
            f.write("\n")


def read_jsonl(path) -> List[AugmentedTriplet]:
    out = []
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            if not line.strip():
                continue
            try:
                out.append(AugmentedTriplet.from_record(json.loads(line)))
            except (json.JSONDecodeError, KeyError, ValueError) as e:
                raise InputError(f"{path}:{lineno}: bad augmented record ({e})") from e
    return out


def write_vqa(triplets: Sequence[IqaTriplet], questions_path, annotations_path) -> None:
    """Write triplets as a VQA v2 questions/annotations file pair."""
    ids = [t.question_id for t in triplets]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate question ids in stage output")
    questions = [{"image_id": t.image_id, "question": t.question, "question_id": t.question_id} for t in triplets]
    annotations = [
        {
            "question_id": t.question_id,
            "image_id": t.image_id,
            "multiple_choice_answer": t.answer,
            "answer_type": t.answer_type.value,
            "answers": [{"answer": t.answer, "answer_confidence": "yes", "answer_id": 1}],
        }
        for t in triplets
    ]
    _dump({"questions": questions}, Path(questions_path))
    _dump({"annotations": annotations}, Path(annotations_path))


def emit_curriculum(corpus: TripletCorpus, aug: Sequence[AugmentedTriplet], strategy: str, out_dir) -> List[Tuple[Path, Path]]:
    """Write one VQA file pair per training stage; returns the (questions, annotations) paths."""
    if strategy not in STRATEGIES:
        raise ConfigError(f"unknown curriculum strategy {strategy!r}")
    original = list(corpus.triplets)
    augmented = [t.base for t in aug]
    union = sorted(original + augmented, key=lambda t: t.question_id)
    stages = {
        "A_plus_O": [("OA", union)],
        "O_then_AO": [("O", original), ("OA", union)],
        "O_then_A_then_O": [("O", original), ("A", augmented), ("O", original)],
    }[strategy]
    out_dir = Path(out_dir)
    paths = []
    for n, (label, triplets) in enumerate(stages, 1):
        qp = out_dir / f"stage{n}_{label}_questions.json"
        ap = out_dir / f"stage{n}_{label}_annotations.json"
        write_vqa(triplets, qp, ap)
        paths.append((qp, ap))
    return paths


# ------------------------------------------------------------------------- stats

STAT_COLUMNS = ("All", "Y/N", "Num", "Other")


def stats_answer_type(answer: str) -> str:
    if answer in ("yes", "no"):
        return "Y/N"
    if answer.isdigit():
        return "Num"
    return "Other"


def _tally(triplets: Iterable) -> Dict[str, int]:
    row = {c: 0 for c in STAT_COLUMNS}
    for t in triplets:
        row[stats_answer_type(t.answer)] += 1
        row["All"] += 1
    return row


@dataclass
class AugStats:
    rows: Dict[str, Dict[str, int]] = field(default_factory=dict)

    def as_dict(self) -> Dict[str, Dict[str, int]]:
        return self.rows

    def render(self) -> str:
        width = max([len(r) for r in self.rows] + [len("# of samples")])
        lines = ["# of samples".rjust(width) + "".join(c.rjust(12) for c in STAT_COLUMNS)]
        for name, row in self.rows.items():
            lines.append(name.rjust(width) + "".join(f"{row[c]:,}".rjust(12) for c in STAT_COLUMNS))
        return "\n".join(lines)


def compute_stats(corpus, aug, filtered=None) -> AugStats:
    rows = {"Original": _tally(corpus.triplets if isinstance(corpus, TripletCorpus) else corpus), "SimpleAug": _tally(aug)}
    if filtered is not None:
        rows["Miss-answered"] = _tally(filtered)
    return AugStats(rows)


# ---------------------------------------------------------------------- the run


@dataclass
class RunConfig:
    questions: Path
    annotations: Path
    coco: Sequence[Path]
    detections: Path
    out: Path
    embeddings: Optional[Path] = None
    predictions: Optional[Path] = None
    extra_nouns: Optional[Path] = None
    stoplist: Optional[Path] = None
    propagation: PropagationConfig = field(default_factory=PropagationConfig)
    verify: bool = True
    threshold: float = DEFAULT_THRESHOLD
    topk: int = DEFAULT_TOPK
    rare_max: int = DEFAULT_RARE_MAX
    rare_gate: str = "both"
    max_detections: int = DEFAULT_MAX_DETECTIONS
    curriculum: str = "O_then_A_then_O"
    jobs: int = 1

    def input_paths(self) -> Dict[str, Path]:
        paths = {"questions": self.questions, "annotations": self.annotations, "detections": self.detections}
        for i, c in enumerate(self.coco):
            paths[f"coco[{i}]"] = c
        for name in ("embeddings", "predictions", "extra_nouns", "stoplist"):
            if getattr(self, name) is not None:
                paths[name] = getattr(self, name)
        return paths

    def validate(self) -> None:
        missing = [f"{k}={p}" for k, p in self.input_paths().items() if not Path(p).is_file()]
        if missing:
            raise ConfigError("missing input files: " + ", ".join(missing))
        if not self.coco:
            raise ConfigError("at least one COCO instances file is required")
        if not 0.0 < self.threshold <= 1.0:
            raise ConfigError("--threshold must be in (0, 1]")
        if self.topk < 1 or self.rare_max < 1 or self.max_detections < 1 or self.jobs < 1:
            raise ConfigError("--topk, --rare-max, --max-detections and --jobs must be >= 1")
        if self.rare_gate not in ("one", "both"):
            raise ConfigError("--rare-gate must be 'one' or 'both'")
        if self.curriculum not in STRATEGIES:
            raise ConfigError(f"--curriculum must be one of {', '.join(STRATEGIES)}")

    def describe(self) -> dict:
        """Settings that influence output; the worker count is deliberately left out."""
        p = self.propagation
        return {
            "inputs": {k: str(v) for k, v in self.input_paths().items()},
            "rules": sorted(p.rules_enabled),
            "min_score": p.min_score,
            "max_count": p.max_count,
            "color_vocabulary": sorted(p.color_vocabulary),
            "verify": self.verify,
            "threshold": self.threshold,
            "topk": self.topk,
            "rare_max": self.rare_max,
            "rare_gate": self.rare_gate,
            "max_detections": self.max_detections,
            "curriculum": self.curriculum,
        }


def _listing(out: Path) -> Dict[str, str]:
    files = sorted(p for p in out.rglob("*") if p.is_file() and p.name != "manifest.json")
    return {p.relative_to(out).as_posix(): sha256_file(p) for p in files}


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class Loaded:
    corpus: TripletCorpus
    lexicon: NounLexicon
    context: PropagationContext
    reports: Dict[str, dict]
    embeddings: object = None


def load_inputs(cfg: RunConfig, need_embeddings: bool = True) -> Loaded:
    """Read every input and build the shared read-only indexes."""
    reports: Dict[str, dict] = {}
    corpus = load_vqa(cfg.questions, cfg.annotations)
    reports["vqa"] = corpus.report.as_dict()

    instance_maps, hierarchy = [], None
    for i, path in enumerate(cfg.coco):
        inst, h, rep = load_coco_instances(path)
        if hierarchy is not None and h != hierarchy:
            raise InputError(f"{path}: category list differs from {cfg.coco[0]}")
        hierarchy = h
        instance_maps.append(inst)
        reports[f"coco[{i}]"] = rep.as_dict()
    instances = merge_instances(instance_maps)

    detections, rep = load_detections(cfg.detections, cfg.max_detections)
    reports["detections"] = rep.as_dict()

    emb = None
    if need_embeddings and cfg.embeddings is not None:
        emb, rep = load_embeddings(cfg.embeddings)
        reports["embeddings"] = rep.as_dict()

    extra = read_wordlist(cfg.extra_nouns) if cfg.extra_nouns else ()
    stoplist = read_wordlist(cfg.stoplist) if cfg.stoplist else DEFAULT_STOPLIST
    detector_names = sorted({o.name for objs in detections.values() for o in objs})
    lex = NounLexicon.build(hierarchy, detector_names, extra, stoplist)
    canon = lex.canonical_phrase

    ev_report = Counters()
    evidence = build_evidence(corpus.image_ids, instances, detections, ev_report, canon)
    reports["evidence"] = ev_report.as_dict()
    analyses = analyze_corpus(corpus.triplets, lex)
    ctx = PropagationContext(corpus, analyses, evidence, hierarchy.renamed(canon), cfg.propagation, cfg.verify, canon)
    return Loaded(corpus, lex, ctx, reports, emb)


@dataclass
class RunResult:
    augmented: List[AugmentedTriplet]
    filtered: Optional[List[AugmentedTriplet]]
    stats: AugStats
    manifest: dict


def run(cfg: RunConfig) -> RunResult:
    """Load, propagate, paraphrase, dedup, filter and write every output file.

    Raises ``ConfigError`` or ``InputError`` before anything is written.
    """
    cfg.validate()
    loaded = load_inputs(cfg)
    corpus = loaded.corpus
    stage: Dict[str, object] = {"original": len(corpus), "unique_questions": len(loaded.context.analyses)}

    propagated, vreport, pcounts = propagate_all(loaded.context, jobs=cfg.jobs)
    stage["propagated_candidates"] = pcounts.as_dict()
    stage["propagated"] = len(propagated)
    stage["verification"] = vreport.as_dict()

    paraphrased: List[AugmentedTriplet] = []
    if loaded.embeddings is not None:
        index = build_index(corpus, loaded.embeddings, cfg.threshold, cfg.topk, cfg.rare_max)
        similar = all_similar(index, jobs=cfg.jobs)
        paraphrased = paraphrase_swap(corpus, index, similar, gate=cfg.rare_gate)
        stage["paraphrase_index"] = index.report.as_dict()
        stage["paraphrased"] = len(paraphrased)

    augmented = assign_ids(dedup(propagated + paraphrased, corpus), corpus)
    stage["augmented"] = len(augmented)

    filtered = None
    if cfg.predictions is not None:
        filtered, freport = filter_miss_answered(augmented, load_predictions(cfg.predictions))
        stage["miss_answered_filter"] = freport.as_dict()

    final = filtered if filtered is not None else augmented
    stats = compute_stats(corpus, augmented, filtered)

    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    write_jsonl(augmented, out / "augmented.jsonl")
    if filtered is not None:
        write_jsonl(filtered, out / "filtered.jsonl")
    write_vqa([t.base for t in final], out / "augmented_questions.json", out / "augmented_annotations.json")
    emit_curriculum(corpus, final, cfg.curriculum, out / "curriculum")
    _dump(stats.as_dict(), out / "stats.json")

    manifest = {
        "tool": "simpleaug",
        "version": __version__,
        "config": cfg.describe(),
        "input_sha256": {k: sha256_file(p) for k, p in cfg.input_paths().items()},
        "load_reports": loaded.reports,
        "stages": stage,
        "outputs": _listing(out),
    }
    _dump(manifest, out / "manifest.json")
    return RunResult(augmented, filtered, stats, manifest)

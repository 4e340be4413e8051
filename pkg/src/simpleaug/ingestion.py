"""Loaders for the VQA triplets, COCO instances, detections and word vectors.

All loaders return immutable-by-convention indexes sorted by id, so the
same files always produce the same structures regardless of record order.
"""

from __future__ import annotations

import json
import logging
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, FrozenSet, Iterable, List, Mapping, Optional, Set, Tuple

import numpy as np

from .core import AnswerType, Counters, EmptyTextError, IqaTriplet, Source, normalize_answer, normalize_question

logger = logging.getLogger(__name__)

DEFAULT_MAX_DETECTIONS = 36


class InputError(Exception):
    """Fatal problem with an input file (missing, malformed, corrupt)."""


def read_json(path) -> object:
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)
    except FileNotFoundError as e:
        raise InputError(f"{path}: file not found") from e
    except json.JSONDecodeError as e:
        raise InputError(f"{path}: malformed JSON at line {e.lineno} column {e.colno} (offset {e.pos}): {e.msg}") from e


def _records(obj, key: str, path) -> list:
    """Accept both the official dict-wrapped layout and a bare list."""
    if isinstance(obj, dict):
        if key not in obj:
            raise InputError(f"{path}: expected a '{key}' array")
        obj = obj[key]
    if not isinstance(obj, list):
        raise InputError(f"{path}: expected a list of {key}")
    return obj


# --------------------------------------------------------------------------- VQA


@dataclass
class TripletCorpus:
    triplets: List[IqaTriplet]
    by_image: Dict[int, List[IqaTriplet]]
    by_question: Dict[str, Set[Tuple[int, str]]]
    pair_counts: Counter
    report: Counters = field(default_factory=Counters)

    @classmethod
    def from_triplets(cls, triplets: Iterable[IqaTriplet], report: Optional[Counters] = None) -> "TripletCorpus":
        ordered = sorted(triplets, key=lambda t: t.question_id)
        by_image: Dict[int, List[IqaTriplet]] = defaultdict(list)
        by_question: Dict[str, Set[Tuple[int, str]]] = defaultdict(set)
        pair_counts: Counter = Counter()
        for t in ordered:
            nq = normalize_question(t.question)
            by_image[t.image_id].append(t)
            by_question[nq].add((t.image_id, t.answer))
            pair_counts[(nq, t.answer)] += 1
        return cls(
            triplets=ordered,
            by_image=dict(sorted(by_image.items())),
            by_question=dict(sorted(by_question.items())),
            pair_counts=pair_counts,
            report=report or Counters(),
        )

    def __len__(self) -> int:
        return len(self.triplets)

    @property
    def image_ids(self) -> List[int]:
        return list(self.by_image)

    @property
    def max_question_id(self) -> int:
        return self.triplets[-1].question_id if self.triplets else 0

    def has_question(self, image_id: int, normalized_question: str) -> bool:
        return any(normalize_question(t.question) == normalized_question for t in self.by_image.get(image_id, ()))

    def keys(self) -> Set[Tuple[int, str]]:
        return {(t.image_id, normalize_question(t.question)) for t in self.triplets}


def load_vqa(questions_path, annotations_path) -> TripletCorpus:
    """Join a VQA questions file with its annotations file, one triplet per id."""
    qs = _records(read_json(questions_path), "questions", questions_path)
    anns = _records(read_json(annotations_path), "annotations", annotations_path)
    report = Counters()

    questions: Dict[int, dict] = {}
    for rec in qs:
        try:
            qid = int(rec["question_id"])
            questions[qid] = rec
        except (KeyError, TypeError, ValueError) as e:
            raise InputError(f"{questions_path}: bad question record {rec!r}") from e
    answers: Dict[int, dict] = {}
    for rec in anns:
        try:
            answers[int(rec["question_id"])] = rec
        except (KeyError, TypeError, ValueError) as e:
            raise InputError(f"{annotations_path}: bad annotation record {rec!r}") from e

    report.add("skipped_missing_annotation", len(questions.keys() - answers.keys()))
    report.add("skipped_missing_question", len(answers.keys() - questions.keys()))

    triplets = []
    for qid in sorted(questions.keys() & answers.keys()):
        q, a = questions[qid], answers[qid]
        try:
            answer = normalize_answer(str(a["multiple_choice_answer"]))
            normalize_question(q["question"])
        except EmptyTextError:
            report.add("skipped_empty_text")
            continue
        except KeyError as e:
            raise InputError(f"record {qid} lacks field {e}") from e
        triplets.append(
            IqaTriplet(
                question_id=qid,
                image_id=int(q["image_id"]),
                question=q["question"],
                answer=answer,
                answer_type=AnswerType.parse(a.get("answer_type")),
                source=Source.ORIGINAL,
            )
        )
    report.add("loaded", len(triplets))
    return TripletCorpus.from_triplets(triplets, report)


# --------------------------------------------------------------------------- COCO


@dataclass(frozen=True)
class CategoryHierarchy:
    supercategory_of: Mapping[str, str]
    members: Mapping[str, FrozenSet[str]]

    @classmethod
    def from_pairs(cls, pairs: Iterable[Tuple[str, str]]) -> "CategoryHierarchy":
        sup: Dict[str, str] = {}
        mem: Dict[str, Set[str]] = defaultdict(set)
        for name, supercategory in pairs:
            name, supercategory = name.strip().lower(), supercategory.strip().lower()
            if name in sup and sup[name] != supercategory:
                raise InputError(f"category {name!r} has two supercategories")
            sup[name] = supercategory
            mem[supercategory].add(name)
        return cls(dict(sorted(sup.items())), {k: frozenset(v) for k, v in sorted(mem.items())})

    @property
    def categories(self) -> List[str]:
        return list(self.supercategory_of)

    @property
    def supercategories(self) -> List[str]:
        return list(self.members)

    def renamed(self, fn) -> "CategoryHierarchy":
        """Same hierarchy with every name passed through ``fn``."""
        return CategoryHierarchy.from_pairs((fn(c), fn(s)) for c, s in self.supercategory_of.items())

    def expand(self, noun: str) -> FrozenSet[str]:
        """Member categories of a supercategory, or the noun itself."""
        return self.members.get(noun, frozenset({noun}))


def load_coco_instances(path) -> Tuple[Dict[int, Counter], CategoryHierarchy, Counters]:
    """Per-image instance counts and the category hierarchy of a COCO instances file."""
    data = read_json(path)
    if not isinstance(data, dict) or "categories" not in data:
        raise InputError(f"{path}: not a COCO instances file (no 'categories')")
    names: Dict[int, str] = {}
    pairs = []
    for cat in data["categories"]:
        try:
            names[int(cat["id"])] = cat["name"].strip().lower()
            pairs.append((cat["name"], cat.get("supercategory") or cat["name"]))
        except (KeyError, TypeError, ValueError) as e:
            raise InputError(f"{path}: bad category record {cat!r}") from e
    hierarchy = CategoryHierarchy.from_pairs(pairs)

    report = Counters()
    per_image: Dict[int, Counter] = defaultdict(Counter)
    for img in data.get("images", ()):
        per_image[int(img["id"])]
    for ann in data.get("annotations", ()):
        try:
            cid = int(ann["category_id"])
            image_id = int(ann["image_id"])
        except (KeyError, TypeError, ValueError) as e:
            raise InputError(f"{path}: bad annotation record {ann!r}") from e
        if cid not in names:
            raise InputError(f"{path}: annotation {ann.get('id')} references unknown category_id {cid}")
        per_image[image_id][names[cid]] += 1
        report.add("instances")
    report.add("images", len(per_image))
    return dict(sorted(per_image.items())), hierarchy, report


def merge_instances(sources: Iterable[Dict[int, Counter]]) -> Dict[int, Counter]:
    """Combine several instance files (e.g. train2014 + val2014)."""
    merged: Dict[int, Counter] = defaultdict(Counter)
    for src in sources:
        for image_id, counts in src.items():
            merged[image_id].update(counts)
    return dict(sorted(merged.items()))


# --------------------------------------------------------------------- detections


@dataclass(frozen=True)
class DetectedObject:
    name: str
    attributes: FrozenSet[str]
    score: float


def load_detections(path, max_per_image: int = DEFAULT_MAX_DETECTIONS) -> Tuple[Dict[int, List[DetectedObject]], Counters]:
    """Read the detection JSON and keep the top ``max_per_image`` objects per image.

    Ties on score keep the object listed first.
    """
    data = read_json(path)
    if not isinstance(data, list):
        raise InputError(f"{path}: expected a JSON array of per-image detections")
    report = Counters()
    raw: Dict[int, List[DetectedObject]] = defaultdict(list)
    for entry in data:
        try:
            image_id = int(entry["image_id"])
            objects = entry.get("objects", [])
        except (KeyError, TypeError, ValueError) as e:
            raise InputError(f"{path}: bad detection entry {entry!r}") from e
        for obj in objects:
            name = obj.get("name") if isinstance(obj, dict) else None
            score = obj.get("score", 1.0) if isinstance(obj, dict) else None
            if not isinstance(name, str) or not name.strip():
                report.add("skipped_missing_name")
                continue
            try:
                score = float(score)
            except (TypeError, ValueError):
                report.add("skipped_bad_score")
                continue
            if not 0.0 <= score <= 1.0:
                report.add("skipped_bad_score")
                continue
            attrs = frozenset(a.strip().lower() for a in obj.get("attributes") or () if isinstance(a, str) and a.strip())
            raw[image_id].append(DetectedObject(" ".join(name.lower().split()), attrs, score))

    out: Dict[int, List[DetectedObject]] = {}
    for image_id in sorted(raw):
        objs = raw[image_id]
        # sorted() is stable, so equal scores keep file order
        kept = sorted(objs, key=lambda o: -o.score)[:max_per_image]
        report.add("dropped_over_cap", len(objs) - len(kept))
        out[image_id] = kept
    report.add("images", len(out))
    return out, report


# --------------------------------------------------------------------- embeddings


@dataclass(frozen=True)
class EmbeddingTable:
    tokens: Tuple[str, ...]
    vectors: np.ndarray
    index: Mapping[str, int]

    @property
    def dim(self) -> int:
        return int(self.vectors.shape[1])

    def __contains__(self, token: str) -> bool:
        return token in self.index

    def __len__(self) -> int:
        return len(self.tokens)

    def get(self, token: str) -> Optional[np.ndarray]:
        row = self.index.get(token)
        return None if row is None else self.vectors[row]


def load_embeddings(path) -> Tuple[EmbeddingTable, Counters]:
    report = Counters()
    rows: Dict[str, List[float]] = {}
    dim = None
    try:
        f = open(path, "r", encoding="utf-8")
    except FileNotFoundError as e:
        raise InputError(f"{path}: file not found") from e
    with f:
        for lineno, line in enumerate(f, 1):
            parts = line.rstrip("\n").split(" ")
            parts = [p for p in parts if p]
            if not parts:
                continue
            token, values = parts[0], parts[1:]
            try:
                vec = [float(v) for v in values]
            except ValueError as e:
                raise InputError(f"{path}:{lineno}: non-numeric vector component") from e
            if not vec:
                raise InputError(f"{path}:{lineno}: token {token!r} has no vector")
            if dim is None:
                dim = len(vec)
            elif len(vec) != dim:
                raise InputError(f"{path}:{lineno}: dimension {len(vec)} != {dim}")
            if token in rows:
                report.add("duplicates")
                del rows[token]
            rows[token] = vec
    if not rows:
        raise InputError(f"{path}: no embeddings")
    tokens = tuple(rows)
    table = EmbeddingTable(tokens, np.asarray([rows[t] for t in tokens], dtype=np.float64), {t: i for i, t in enumerate(tokens)})
    report.add("tokens", len(tokens))
    return table, report


# ----------------------------------------------------------------------- evidence


@dataclass(frozen=True)
class ImageEvidence:
    image_id: int
    annotated_instances: Mapping[str, int]
    detected_objects: Tuple[DetectedObject, ...]

    def count(self, categories: Iterable[str]) -> int:
        return sum(self.annotated_instances.get(c, 0) for c in categories)


def build_evidence(
    image_ids: Iterable[int],
    instances: Mapping[int, Counter],
    detections: Mapping[int, List[DetectedObject]],
    report: Optional[Counters] = None,
    canon: Optional[Callable[[str], str]] = None,
) -> Dict[int, ImageEvidence]:
    """Evidence records for the given images.

    ``canon`` maps annotation and detector names onto the lexicon's
    canonical forms. Images with no evidence at all are counted.
    """
    canon = canon or (lambda s: s)
    out = {}
    for image_id in sorted(set(image_ids)):
        inst = instances.get(image_id)
        dets = detections.get(image_id)
        if report is not None and inst is None and dets is None:
            report.add("images_without_evidence")
        counts: Counter = Counter()
        for name, n in (inst or {}).items():
            counts[canon(name)] += n
        objs = tuple(DetectedObject(canon(o.name), o.attributes, o.score) for o in dets or ())
        out[image_id] = ImageEvidence(image_id, dict(sorted(counts.items())), objs)
    return out

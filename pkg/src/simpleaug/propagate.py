"""Propagate every unique question to the other training images.

Work is split over unique questions; with ``jobs > 1`` chunks run in
forked worker processes that share the read-only indexes. The merged
result is sorted, so output never depends on the worker count.
"""

from __future__ import annotations

import logging
import multiprocessing as mp
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Set, Tuple

from .core import RULE_ANSWER_TYPE, AugmentedTriplet, Counters, IqaTriplet, QuestionCategory, Rule, Source, normalize_question
from .ingestion import CategoryHierarchy, ImageEvidence, TripletCorpus
from .questions import AnalyzedQuestion
from .rules import PropagationConfig, propagate_color, propagate_number, propagate_what, propagate_yesno
from .verification import AnalysisKey, VerificationReport, image_answer_keys, self_verify

logger = logging.getLogger(__name__)

SortKey = Tuple[int, int, int, str]

_CATEGORY_RULE = {
    QuestionCategory.YESNO: "yesno",
    QuestionCategory.COLOR: "color",
    QuestionCategory.NUMBER: "number",
    QuestionCategory.WHAT: "what",
}


@dataclass
class PropagationContext:
    corpus: TripletCorpus
    analyses: Mapping[str, AnalyzedQuestion]
    evidence: Mapping[int, ImageEvidence]
    hierarchy: CategoryHierarchy
    cfg: PropagationConfig
    verify: bool = True
    canon: Optional[Callable[[str], str]] = None

    def __post_init__(self):
        self.sources: Dict[str, List[IqaTriplet]] = {}
        for t in self.corpus.triplets:
            self.sources.setdefault(_nq(t), []).append(t)
        self.answer_keys = image_answer_keys(self.corpus.by_image, self.analyses)
        self.detected: Dict[str, Set[int]] = {}
        self.annotated: Dict[str, Set[int]] = {}
        for image_id, ev in self.evidence.items():
            for o in ev.detected_objects:
                if o.score >= self.cfg.min_score:
                    self.detected.setdefault(o.name, set()).add(image_id)
            for name, n in ev.annotated_instances.items():
                if n > 0:
                    self.annotated.setdefault(name, set()).add(image_id)

    def images_annotated(self, names) -> Set[int]:
        out: Set[int] = set()
        for n in names:
            out |= self.annotated.get(n, set())
        return out

    def images_detected(self, names) -> Set[int]:
        out: Set[int] = set()
        for n in names:
            out |= self.detected.get(n, set())
        return out

    def cross_ok(self, image_id: int, key: AnalysisKey, answer: str) -> bool:
        answers = self.answer_keys.get(image_id, {}).get(key)
        return answers is None or answers == {answer}


def _nq(t: IqaTriplet) -> str:
    return normalize_question(t.question)


def _candidate(image_id: int, question: str, answer: str, rule: Rule, src: IqaTriplet, verify: bool) -> AugmentedTriplet:
    base = IqaTriplet(0, image_id, question, answer, RULE_ANSWER_TYPE[rule], Source.PROPAGATED)
    return AugmentedTriplet(base, rule, src.question_id, src.image_id, self_verified=verify, cross_verified=True if verify else None)


def propagate_question(aq: AnalyzedQuestion, ctx: PropagationContext) -> Tuple[List[Tuple[SortKey, AugmentedTriplet]], VerificationReport, Counters]:
    """All surviving candidates of one unique question."""
    report = VerificationReport()
    counts = Counters()
    rule_name = _CATEGORY_RULE.get(aq.category)
    if rule_name is None or rule_name not in ctx.cfg.rules_enabled or not aq.propagatable:
        return [], report, counts

    sources = ctx.sources.get(aq.text, [])
    if ctx.verify:
        passing = [s for s in sources if self_verify(aq, s, ctx.evidence[s.image_id], ctx.hierarchy, ctx.cfg, ctx.canon)]
        if not passing:
            report.questions_dropped_by_self_verify = 1
            report.dropped_questions.append(aq.text)
            report.self_dropped_by_category[aq.category.value] = 1
            return [], report, counts
    else:
        passing = list(sources)
    if not passing:
        return [], report, counts
    rep = passing[0]
    own_images = {s.image_id for s in sources}

    out: List[Tuple[SortKey, AugmentedTriplet]] = []

    def emit(image_id: int, question: str, answer: str, rule: Rule, key: AnalysisKey, src: IqaTriplet = rep):
        counts.add(f"candidates_{rule.value}")
        if ctx.verify and not ctx.cross_ok(image_id, key, answer):
            report.candidates_dropped_by_cross_verify += 1
            report.cross_dropped_by_rule[rule.value] = report.cross_dropped_by_rule.get(rule.value, 0) + 1
            return
        out.append(((aq.min_source_id, image_id, rule.order, question), _candidate(image_id, question, answer, rule, src, ctx.verify)))

    if aq.category is QuestionCategory.YESNO:
        for image_id in sorted(ctx.images_detected(aq.nouns) - own_images):
            ans = propagate_yesno(aq, ctx.evidence[image_id], ctx.cfg)
            if ans is not None:
                emit(image_id, aq.text, ans, Rule.YESNO_YES if ans == "yes" else Rule.YESNO_NO, aq.key)

    elif aq.category is QuestionCategory.COLOR:
        for image_id in sorted(ctx.images_detected([aq.noun]) - own_images):
            for c in propagate_color(aq, ctx.evidence[image_id], ctx.cfg):
                emit(image_id, c.question, c.answer, c.rule, (QuestionCategory.COLOR, frozenset({c.noun})))

    elif aq.category is QuestionCategory.NUMBER:
        for image_id in sorted(ctx.images_annotated(ctx.hierarchy.expand(aq.noun)) - own_images):
            ans = propagate_number(aq, ctx.evidence[image_id], ctx.hierarchy, ctx.cfg)
            if ans is not None:
                emit(image_id, aq.text, ans, Rule.NUMBER, aq.key)

    elif aq.category is QuestionCategory.WHAT:
        by_answer: Dict[str, IqaTriplet] = {}
        for s in passing:
            by_answer.setdefault(s.answer, s)
        canon = ctx.canon or (lambda x: x)
        pool = ctx.images_annotated(ctx.hierarchy.expand(aq.noun)) & ctx.images_annotated(canon(a) for a in by_answer)
        for image_id in sorted(pool - own_images):
            ev = ctx.evidence[image_id]
            hits = [a for a, s in sorted(by_answer.items()) if propagate_what(s, aq, ev, ctx.hierarchy, ctx.canon) is not None]
            if len(hits) == 1:
                emit(image_id, aq.text, hits[0], Rule.WHAT, aq.key, by_answer[hits[0]])
            elif hits:
                counts.add("what_ambiguous")
    return out, report, counts


_WORKER_CTX: Optional[PropagationContext] = None


def _run_chunk(chunk: Sequence[AnalyzedQuestion], ctx: PropagationContext):
    out: List[Tuple[SortKey, AugmentedTriplet]] = []
    report = VerificationReport()
    counts = Counters()
    for aq in chunk:
        o, r, c = propagate_question(aq, ctx)
        out.extend(o)
        report.merge(r)
        for k, v in c.counts.items():
            counts.add(k, v)
    return out, report, counts


def _worker(chunk: Sequence[AnalyzedQuestion]):
    assert _WORKER_CTX is not None
    return _run_chunk(chunk, _WORKER_CTX)


def _chunks(items: Sequence, n: int) -> List[Sequence]:
    size = max(1, -(-len(items) // n))
    return [items[i : i + size] for i in range(0, len(items), size)]


def propagate_all(ctx: PropagationContext, jobs: int = 1) -> Tuple[List[AugmentedTriplet], VerificationReport, Counters]:
    """Verified (unless disabled) candidates for every unique question, sorted by
    (first source question id, target image, rule, question)."""
    global _WORKER_CTX
    questions = list(ctx.analyses.values())
    results = []
    if jobs <= 1 or len(questions) < 2:
        results.append(_run_chunk(questions, ctx))
    else:
        _WORKER_CTX = ctx
        try:
            with ProcessPoolExecutor(max_workers=jobs, mp_context=mp.get_context("fork")) as pool:
                results.extend(pool.map(_worker, _chunks(questions, jobs * 4)))
        finally:
            _WORKER_CTX = None

    merged: List[Tuple[SortKey, AugmentedTriplet]] = []
    report = VerificationReport()
    counts = Counters()
    for out, r, c in results:
        merged.extend(out)
        report.merge(r)
        for k, v in c.counts.items():
            counts.add(k, v)
    merged.sort(key=lambda kv: kv[0])
    logger.info("propagation: %d candidates kept from %d unique questions", len(merged), len(questions))
    return [t for _, t in merged], report, counts

"""Self- and cross-verification of propagated answers."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, List, Mapping, Optional, Tuple

from .core import AugmentedTriplet, IqaTriplet, QuestionCategory, normalize_answer, normalize_question
from .ingestion import CategoryHierarchy, ImageEvidence
from .questions import AnalyzedQuestion
from .rules import PropagationConfig, propagate_number, propagate_what, propagate_yesno, unique_color


@dataclass
class VerificationReport:
    questions_dropped_by_self_verify: int = 0
    candidates_dropped_by_cross_verify: int = 0
    dropped_questions: List[str] = field(default_factory=list)
    self_dropped_by_category: Dict[str, int] = field(default_factory=dict)
    cross_dropped_by_rule: Dict[str, int] = field(default_factory=dict)

    def merge(self, other: "VerificationReport") -> None:
        self.questions_dropped_by_self_verify += other.questions_dropped_by_self_verify
        self.candidates_dropped_by_cross_verify += other.candidates_dropped_by_cross_verify
        self.dropped_questions.extend(other.dropped_questions)
        for k, v in other.self_dropped_by_category.items():
            self.self_dropped_by_category[k] = self.self_dropped_by_category.get(k, 0) + v
        for k, v in other.cross_dropped_by_rule.items():
            self.cross_dropped_by_rule[k] = self.cross_dropped_by_rule.get(k, 0) + v

    def as_dict(self) -> dict:
        return {
            "questions_dropped_by_self_verify": self.questions_dropped_by_self_verify,
            "candidates_dropped_by_cross_verify": self.candidates_dropped_by_cross_verify,
            "self_dropped_by_category": dict(sorted(self.self_dropped_by_category.items())),
            "cross_dropped_by_rule": dict(sorted(self.cross_dropped_by_rule.items())),
            "dropped_questions": sorted(self.dropped_questions),
        }


def self_derived_answer(
    aq: AnalyzedQuestion,
    source: IqaTriplet,
    ev: ImageEvidence,
    hierarchy: CategoryHierarchy,
    cfg: PropagationConfig,
    canon: Optional[Callable[[str], str]] = None,
) -> Optional[str]:
    """Answer the question's own rule derives on ``ev``, or None if it does not apply."""
    if aq.category is QuestionCategory.YESNO:
        return propagate_yesno(aq, ev, cfg)
    if aq.category is QuestionCategory.COLOR:
        names = {o.name for o in ev.detected_objects if o.score >= cfg.min_score}
        return unique_color(ev, aq.noun, cfg) if aq.noun in names else None
    if aq.category is QuestionCategory.NUMBER:
        return propagate_number(aq, ev, hierarchy, cfg)
    if aq.category is QuestionCategory.WHAT:
        return propagate_what(source, aq, ev, hierarchy, canon)
    return None


def self_verify(
    aq: AnalyzedQuestion,
    source: IqaTriplet,
    source_ev: ImageEvidence,
    hierarchy: CategoryHierarchy,
    cfg: PropagationConfig = PropagationConfig(),
    canon: Optional[Callable[[str], str]] = None,
) -> bool:
    """True iff replaying the rule on the source image reproduces the annotated answer."""
    derived = self_derived_answer(aq, source, source_ev, hierarchy, cfg, canon)
    if derived is None:
        return False
    return normalize_answer(derived) == normalize_answer(source.answer)


AnalysisKey = Tuple[QuestionCategory, frozenset]


def cross_verify(
    candidate: AugmentedTriplet,
    aq: AnalyzedQuestion,
    target_triplets: Iterable[IqaTriplet],
    analyses: Mapping[str, AnalyzedQuestion],
) -> bool:
    """False if any same-category, same-nouns question on the target image disagrees.

    ``aq`` must describe the candidate's own question (for replaced-noun
    color questions, the question after replacement).
    """
    want = normalize_answer(candidate.answer)
    for t in target_triplets:
        other = analyses.get(normalize_question(t.question))
        if other is None or other.key != aq.key:
            continue
        if normalize_answer(t.answer) != want:
            return False
    return True


def image_answer_keys(
    by_image: Mapping[int, List[IqaTriplet]], analyses: Mapping[str, AnalyzedQuestion]
) -> Dict[int, Dict[AnalysisKey, frozenset]]:
    """Per image: analysis key -> set of annotated answers. Speeds up cross-verification."""
    out: Dict[int, Dict[AnalysisKey, set]] = {}
    for image_id, triplets in by_image.items():
        keyed: Dict[AnalysisKey, set] = {}
        for t in triplets:
            a = analyses.get(normalize_question(t.question))
            if a is None or not a.nouns:
                continue
            keyed.setdefault(a.key, set()).add(t.answer)
        out[image_id] = {k: frozenset(v) for k, v in keyed.items()}
    return out

"""Per-(question, image) propagation rules.

Yes/no and color read detector output; number and what read ground-truth
instance counts. All names in the evidence are expected to be in the
lexicon's canonical form already (see ``ingestion.build_evidence``).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, FrozenSet, List, NamedTuple, Optional, Set

from .core import IqaTriplet, Rule
from .ingestion import CategoryHierarchy, ImageEvidence
from .questions import AnalyzedQuestion, _clean_token

ALL_RULES = ("yesno", "color", "number", "what")

DEFAULT_COLORS = frozenset(
    {"black", "white", "red", "green", "blue", "yellow", "brown", "orange", "gray", "pink", "purple", "tan", "gold", "silver"}
)


@dataclass(frozen=True)
class PropagationConfig:
    rules_enabled: FrozenSet[str] = frozenset(ALL_RULES)
    min_score: float = 0.0
    max_count: Optional[int] = None
    color_vocabulary: FrozenSet[str] = DEFAULT_COLORS

    def __post_init__(self):
        unknown = set(self.rules_enabled) - set(ALL_RULES)
        if unknown:
            raise ValueError(f"unknown rules: {sorted(unknown)}")
        if "color" in self.rules_enabled and not self.color_vocabulary:
            raise ValueError("color rule enabled with an empty color vocabulary")
        if self.max_count is not None and self.max_count < 1:
            raise ValueError("max_count must be positive")


class ColorTriplet(NamedTuple):
    question: str
    answer: str
    rule: Rule
    noun: str


def detected_names(ev: ImageEvidence, cfg: PropagationConfig) -> Set[str]:
    return {o.name for o in ev.detected_objects if o.score >= cfg.min_score}


def unique_color(ev: ImageEvidence, name: str, cfg: PropagationConfig) -> Optional[str]:
    """The single color shared by all detections of ``name``; None if absent or conflicting."""
    colors = set()
    for o in ev.detected_objects:
        if o.name == name and o.score >= cfg.min_score:
            colors |= o.attributes & cfg.color_vocabulary
    if len(colors) == 1:
        return next(iter(colors))
    return None


def propagate_yesno(aq: AnalyzedQuestion, ev: ImageEvidence, cfg: PropagationConfig = PropagationConfig()) -> Optional[str]:
    covered = aq.nouns & detected_names(ev, cfg)
    if not covered:
        return None
    return "yes" if covered == aq.nouns else "no"


def replace_noun(aq: AnalyzedQuestion, name: str) -> str:
    """Question text with every surface occurrence of the noun swapped for ``name``."""
    forms = aq.surface_forms.get(aq.noun, frozenset({aq.noun}))
    spans = sorted({tuple(f.split()) for f in forms}, key=len, reverse=True)
    tokens = aq.text.split()
    cleaned = [_clean_token(t) for t in tokens]
    out: List[str] = []
    i = 0
    while i < len(tokens):
        for span in spans:
            if tuple(cleaned[i : i + len(span)]) == span:
                out.append(name)
                i += len(span)
                break
        else:
            out.append(tokens[i])
            i += 1
    return " ".join(out)


def propagate_color(aq: AnalyzedQuestion, ev: ImageEvidence, cfg: PropagationConfig = PropagationConfig()) -> List[ColorTriplet]:
    noun = aq.noun
    names = detected_names(ev, cfg)
    if noun not in names:
        return []
    out = []
    direct = unique_color(ev, noun, cfg)
    if direct is not None:
        out.append(ColorTriplet(aq.text, direct, Rule.COLOR, noun))
    for name in sorted(names - {noun}):
        color = unique_color(ev, name, cfg)
        if color is not None:
            out.append(ColorTriplet(replace_noun(aq, name), color, Rule.COLOR_REPLACED, name))
    return out


def propagate_number(
    aq: AnalyzedQuestion, ev: ImageEvidence, hierarchy: CategoryHierarchy, cfg: PropagationConfig = PropagationConfig()
) -> Optional[str]:
    count = ev.count(hierarchy.expand(aq.noun))
    if count < 1:
        return None
    if cfg.max_count is not None and count > cfg.max_count:
        return None
    return str(count)


def propagate_what(
    source: IqaTriplet,
    aq: AnalyzedQuestion,
    ev: ImageEvidence,
    hierarchy: CategoryHierarchy,
    canon: Optional[Callable[[str], str]] = None,
) -> Optional[str]:
    """Source answer, if the image has the noun and an instance named like the answer."""
    if ev.count(hierarchy.expand(aq.noun)) < 1:
        return None
    key = canon(source.answer) if canon else source.answer
    if ev.annotated_instances.get(key, 0) > 0:
        return source.answer
    return None

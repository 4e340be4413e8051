"""Shared record types and text normalization."""

from __future__ import annotations

import enum
import re
import string
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, Optional


class EmptyTextError(ValueError):
    """Raised when a string normalizes to nothing."""


class AnswerType(str, enum.Enum):
    YESNO = "yes/no"
    NUMBER = "number"
    OTHER = "other"

    @classmethod
    def parse(cls, raw: Optional[str]) -> "AnswerType":
        if raw is None:
            return cls.OTHER
        key = raw.strip().lower().replace(" ", "")
        if key in ("yes/no", "yesno", "y/n"):
            return cls.YESNO
        if key in ("number", "num"):
            return cls.NUMBER
        return cls.OTHER


class Source(str, enum.Enum):
    ORIGINAL = "original"
    PROPAGATED = "propagated"
    PARAPHRASED = "paraphrased"


class QuestionCategory(str, enum.Enum):
    YESNO = "yesno"
    COLOR = "color"
    NUMBER = "number"
    WHAT = "what"
    UNSUPPORTED = "unsupported"


class Rule(str, enum.Enum):
    # declaration order is the tie-break order for output sorting
    YESNO_YES = "yesno_yes"
    YESNO_NO = "yesno_no"
    COLOR = "color"
    COLOR_REPLACED = "color_replaced"
    NUMBER = "number"
    WHAT = "what"
    PARAPHRASE = "paraphrase"

    @property
    def order(self) -> int:
        return _RULE_ORDER[self]


_RULE_ORDER = {r: i for i, r in enumerate(Rule)}

RULE_ANSWER_TYPE = {
    Rule.YESNO_YES: AnswerType.YESNO,
    Rule.YESNO_NO: AnswerType.YESNO,
    Rule.COLOR: AnswerType.OTHER,
    Rule.COLOR_REPLACED: AnswerType.OTHER,
    Rule.NUMBER: AnswerType.NUMBER,
    Rule.WHAT: AnswerType.OTHER,
}


@dataclass(frozen=True)
class IqaTriplet:
    question_id: int
    image_id: int
    question: str
    answer: str
    answer_type: AnswerType = AnswerType.OTHER
    source: Source = Source.ORIGINAL


@dataclass(frozen=True)
class AugmentedTriplet:
    """A generated triplet plus the provenance needed to audit it.

    ``cross_verified`` is ``None`` when cross-verification was not run
    (paraphrases, or verification disabled).
    """

    base: IqaTriplet
    rule: Rule
    source_question_id: int
    source_image_id: int
    self_verified: bool = False
    cross_verified: Optional[bool] = None

    @property
    def image_id(self) -> int:
        return self.base.image_id

    @property
    def question(self) -> str:
        return self.base.question

    @property
    def answer(self) -> str:
        return self.base.answer

    def with_question_id(self, question_id: int) -> "AugmentedTriplet":
        base = IqaTriplet(
            question_id=question_id,
            image_id=self.base.image_id,
            question=self.base.question,
            answer=self.base.answer,
            answer_type=self.base.answer_type,
            source=self.base.source,
        )
        return AugmentedTriplet(
            base=base,
            rule=self.rule,
            source_question_id=self.source_question_id,
            source_image_id=self.source_image_id,
            self_verified=self.self_verified,
            cross_verified=self.cross_verified,
        )

    def to_record(self) -> Dict[str, Any]:
        rec = asdict(self.base)
        rec["answer_type"] = self.base.answer_type.value
        rec["source"] = self.base.source.value
        rec["rule"] = self.rule.value
        rec["source_question_id"] = self.source_question_id
        rec["source_image_id"] = self.source_image_id
        rec["self_verified"] = self.self_verified
        rec["cross_verified"] = self.cross_verified
        return rec

    @classmethod
    def from_record(cls, rec: Dict[str, Any]) -> "AugmentedTriplet":
        base = IqaTriplet(
            question_id=int(rec["question_id"]),
            image_id=int(rec["image_id"]),
            question=rec["question"],
            answer=rec["answer"],
            answer_type=AnswerType(rec["answer_type"]),
            source=Source(rec["source"]),
        )
        return cls(
            base=base,
            rule=Rule(rec["rule"]),
            source_question_id=int(rec["source_question_id"]),
            source_image_id=int(rec["source_image_id"]),
            self_verified=bool(rec.get("self_verified", False)),
            cross_verified=rec.get("cross_verified"),
        )


ARTICLES = frozenset({"a", "an", "the"})

NUMBER_WORDS = {
    "zero": "0",
    "one": "1",
    "two": "2",
    "three": "3",
    "four": "4",
    "five": "5",
    "six": "6",
    "seven": "7",
    "eight": "8",
    "nine": "9",
    "ten": "10",
}

_TERMINAL_PUNCT = string.punctuation
_WS = re.compile(r"\s+")


def _answer_pass(text: str) -> str:
    text = _WS.sub(" ", text.lower()).strip()
    text = text.rstrip(_TERMINAL_PUNCT).strip()
    tokens = [NUMBER_WORDS.get(t, t) for t in text.split(" ") if t and t not in ARTICLES]
    return " ".join(tokens)


def normalize_answer(raw: str) -> str:
    """Canonical answer string used for every answer comparison.

    Lowercases, trims, drops terminal punctuation and standalone articles,
    maps "zero".."ten" to digits. Raises ``EmptyTextError`` if nothing is left.
    """
    text = raw
    # passes can expose new removable material ("the." -> "the" -> "")
    while True:
        nxt = _answer_pass(text)
        if nxt == text:
            break
        text = nxt
    if not text:
        raise EmptyTextError(f"answer {raw!r} is empty after normalization")
    return text


def _question_token(tok: str) -> str:
    return tok.strip("'")


def normalize_question(raw: str) -> str:
    """Dedup key form of a question: lowercase, no punctuation but in-word apostrophes."""
    chars = [c if (c.isalnum() or c.isspace() or c == "'") else " " for c in raw.lower()]
    tokens = [_question_token(t) for t in "".join(chars).split()]
    text = " ".join(t for t in tokens if t)
    if not text:
        raise EmptyTextError(f"question {raw!r} is empty after normalization")
    return text


def first_augmented_id(max_original_id: int) -> int:
    """Smallest power of ten strictly above every original question id."""
    start = 1
    while start <= max_original_id:
        start *= 10
    return start


@dataclass
class Counters:
    """Named integer counters for load and stage reports."""

    counts: Dict[str, int] = field(default_factory=dict)

    def add(self, key: str, n: int = 1) -> None:
        self.counts[key] = self.counts.get(key, 0) + n

    def __getitem__(self, key: str) -> int:
        return self.counts.get(key, 0)

    def as_dict(self) -> Dict[str, int]:
        return dict(sorted(self.counts.items()))

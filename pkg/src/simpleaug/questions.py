"""Question categorization and lexicon-based noun extraction."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Tuple

from .core import IqaTriplet, QuestionCategory, normalize_question
from .ingestion import CategoryHierarchy

DEFAULT_STOPLIST = frozenset({"picture", "photo", "image", "photograph"})
CATEGORY_KEYWORDS = frozenset({"color", "colour", "number"})

YESNO_STARTERS = frozenset(
    {"is", "are", "was", "were", "do", "does", "did", "can", "could", "has", "have", "had", "will", "would", "should"}
)

# question-type prefixes removed before noun matching; longest match wins
TYPE_PREFIXES: Tuple[Tuple[str, ...], ...] = tuple(
    sorted(
        (
            tuple(p.split())
            for p in (
                "how many",
                "what is the number of",
                "what number of",
                "what color is",
                "what color are",
                "what color is the",
                "what color are the",
                "what colour is",
                "what colour are",
                "what is the color of",
                "what is the color of the",
                "what is the colour of",
                "what color",
                "what colour",
                "what is",
                "what are",
                "what",
                "is there",
                "are there",
                "is this",
                "is the",
                "are the",
                "are these",
                "is that",
            )
        ),
        key=lambda p: (-len(p), p),
    )
)

IRREGULAR_PLURALS: Dict[str, str] = {
    "people": "person",
    "persons": "person",
    "men": "man",
    "women": "woman",
    "children": "child",
    "kids": "kid",
    "teeth": "tooth",
    "feet": "foot",
    "geese": "goose",
    "mice": "mouse",
    "oxen": "ox",
    "knives": "knife",
    "leaves": "leaf",
    "shelves": "shelf",
    "wolves": "wolf",
    "loaves": "loaf",
    "halves": "half",
    "scarves": "scarf",
    "calves": "calf",
    "lives": "life",
    "wives": "wife",
    "ties": "tie",
    "pies": "pie",
    "cookies": "cookie",
    "movies": "movie",
    "hoodies": "hoodie",
    "tomatoes": "tomato",
    "potatoes": "potato",
    "sheep": "sheep",
    "fish": "fish",
    "deer": "deer",
    "skis": "ski",
}


def pluralize(stem: str) -> str:
    if stem.endswith(("s", "x", "z", "ch", "sh", "o")):
        return stem + "es"
    return stem + "s"


@dataclass(frozen=True)
class NounLexicon:
    words: FrozenSet[str]
    irregular: Mapping[str, str] = field(default_factory=lambda: dict(IRREGULAR_PLURALS))
    stoplist: FrozenSet[str] = DEFAULT_STOPLIST
    max_words: int = 1

    @classmethod
    def build(
        cls,
        hierarchy: Optional[CategoryHierarchy] = None,
        detector_names: Iterable[str] = (),
        extra: Iterable[str] = (),
        stoplist: Iterable[str] = DEFAULT_STOPLIST,
        irregular: Optional[Mapping[str, str]] = None,
    ) -> "NounLexicon":
        words = set()
        if hierarchy is not None:
            words.update(hierarchy.categories)
            words.update(hierarchy.supercategories)
        words.update(detector_names)
        words.update(extra)
        raw = {" ".join(w.lower().split()) for w in words}
        raw.discard("")
        irregular = dict(IRREGULAR_PLURALS if irregular is None else irregular)
        stoplist = frozenset(stoplist)
        # entries are stored in canonical (singular) form; iterate because the
        # singularizer prefers candidates that are themselves entries
        canon = frozenset(raw)
        for _ in range(8):
            lex = cls(canon, irregular, stoplist)
            nxt = frozenset(lex.canonical_phrase(w) for w in raw)
            if nxt == canon:
                break
            canon = nxt
        max_words = max((len(w.split()) for w in canon), default=1)
        stoplist = stoplist | {lex.canonical_phrase(w) for w in stoplist}
        return cls(canon, irregular, stoplist, max_words)

    @cached_property
    def fixed_forms(self) -> FrozenSet[str]:
        return frozenset(self.irregular.values())

    @cached_property
    def _memo(self) -> Dict[str, str]:
        return {}

    def __contains__(self, word: str) -> bool:
        return word in self.words

    def canonical_phrase(self, phrase: str) -> str:
        """Singularize the head (last) word of a possibly multi-word name."""
        toks = phrase.split()
        if not toks:
            return phrase
        memo = self._memo
        head = toks[-1]
        if head not in memo:
            memo[head] = singularize(head, self)
        toks[-1] = memo[head]
        return " ".join(toks)


def _suffix_candidates(token: str) -> List[str]:
    out = []
    if token.endswith("ies") and len(token) > 4:
        out.append(token[:-3] + "y")
    if token.endswith("es") and len(token) > 3 and pluralize(token[:-2]) == token:
        out.append(token[:-2])
    if token.endswith("s") and not token.endswith("ss") and len(token) > 2:
        out.append(token[:-1])
    return out


def _strip_step(token: str, lex: NounLexicon) -> str:
    if token in lex.irregular:
        return lex.irregular[token]
    cands = _suffix_candidates(token)
    for c in cands:
        if c in lex.words:
            return c
    for c in cands:
        # "us"/"is" endings (bus, tennis) are usually not plurals
        if c == token[:-1] and token.endswith(("us", "is")):
            continue
        return c
    return token


def singularize(token: str, lex: NounLexicon) -> str:
    """Singular form of a lowercase token, iterated to a fixed point."""
    fixed = lex.fixed_forms
    t = token
    while t not in fixed:
        n = _strip_step(t, lex)
        if n == t:
            break
        t = n
    return t


def classify_question(q: str) -> QuestionCategory:
    tokens = q.split()
    if not tokens:
        return QuestionCategory.UNSUPPORTED
    if tokens[:2] == ["how", "many"] or any(tokens[i : i + 2] == ["number", "of"] for i in range(len(tokens) - 1)):
        return QuestionCategory.NUMBER
    if "color" in tokens or "colour" in tokens:
        return QuestionCategory.COLOR
    if tokens[0] == "what":
        return QuestionCategory.WHAT
    if tokens[0] in YESNO_STARTERS:
        return QuestionCategory.YESNO
    return QuestionCategory.UNSUPPORTED


def strip_type_prefix(tokens: Sequence[str]) -> List[str]:
    for prefix in TYPE_PREFIXES:
        if tuple(tokens[: len(prefix)]) == prefix:
            return list(tokens[len(prefix) :])
    return list(tokens)


def _clean_token(tok: str) -> str:
    if tok.endswith("'s"):
        tok = tok[:-2]
    return tok.strip("'")


def extract_nouns(q: str, lex: NounLexicon) -> Tuple[FrozenSet[str], Dict[str, FrozenSet[str]]]:
    """Canonical nouns of a normalized question and the surface tokens that produced them.

    Greedy longest match against the lexicon, so "traffic lights" is one
    noun rather than two. Stoplisted and category keywords never match.
    """
    tokens = [t for t in (_clean_token(t) for t in strip_type_prefix(q.split())) if t]
    nouns = set()
    surface: Dict[str, set] = {}
    i = 0
    while i < len(tokens):
        matched = False
        for width in range(min(lex.max_words, len(tokens) - i), 0, -1):
            span = tokens[i : i + width]
            raw = " ".join(span)
            canon = lex.canonical_phrase(raw)
            if canon not in lex.words:
                continue
            matched = True
            if canon not in lex.stoplist and canon not in CATEGORY_KEYWORDS and raw not in CATEGORY_KEYWORDS:
                nouns.add(canon)
                surface.setdefault(canon, {canon}).add(raw)
            i += width
            break
        if not matched:
            i += 1
    return frozenset(nouns), {k: frozenset(v) for k, v in sorted(surface.items())}


def expand_supercategory(noun: str, hierarchy: CategoryHierarchy) -> FrozenSet[str]:
    return hierarchy.expand(noun)


@dataclass(frozen=True)
class AnalyzedQuestion:
    text: str
    category: QuestionCategory
    nouns: FrozenSet[str]
    surface_forms: Mapping[str, FrozenSet[str]]
    source_question_ids: Tuple[int, ...] = ()

    @property
    def propagatable(self) -> bool:
        if self.category is QuestionCategory.UNSUPPORTED or not self.nouns:
            return False
        if self.category is QuestionCategory.YESNO:
            return True
        return len(self.nouns) == 1

    @property
    def noun(self) -> str:
        """The single noun of a color/number/what question."""
        (n,) = self.nouns
        return n

    @property
    def key(self) -> Tuple[QuestionCategory, FrozenSet[str]]:
        return (self.category, self.nouns)

    @property
    def min_source_id(self) -> int:
        return self.source_question_ids[0] if self.source_question_ids else -1


def analyze_question(q: str, lex: NounLexicon, source_question_ids: Iterable[int] = ()) -> AnalyzedQuestion:
    nq = normalize_question(q)
    nouns, surface = extract_nouns(nq, lex)
    return AnalyzedQuestion(nq, classify_question(nq), nouns, surface, tuple(sorted(source_question_ids)))


def group_unique_questions(triplets: Iterable[IqaTriplet]) -> Dict[str, List[IqaTriplet]]:
    groups: Dict[str, List[IqaTriplet]] = {}
    for t in sorted(triplets, key=lambda t: t.question_id):
        groups.setdefault(normalize_question(t.question), []).append(t)
    return groups


def analyze_corpus(triplets: Iterable[IqaTriplet], lex: NounLexicon) -> Dict[str, AnalyzedQuestion]:
    """One analysis per unique normalized question, ordered by smallest source id."""
    groups = group_unique_questions(triplets)
    out = {nq: analyze_question(nq, lex, (t.question_id for t in ts)) for nq, ts in groups.items()}
    return dict(sorted(out.items(), key=lambda kv: kv[1].min_source_id))


def read_wordlist(path) -> List[str]:
    with open(Path(path), "r", encoding="utf-8") as f:
        return [w for w in (" ".join(line.lower().split()) for line in f) if w and not w.startswith("#")]

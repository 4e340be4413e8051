from collections import Counter

from hypothesis import given, strategies as st

from simpleaug.core import IqaTriplet, Rule
from simpleaug.questions import analyze_question
from simpleaug.rules import (
    DEFAULT_COLORS,
    PropagationConfig,
    propagate_color,
    propagate_number,
    propagate_what,
    propagate_yesno,
)

from conftest import det, evidence

CAT_PILLOW = "is there a cat on the pillow"


def test_yesno_partial_coverage_is_no(lexicon):
    aq = analyze_question(CAT_PILLOW, lexicon)
    assert propagate_yesno(aq, evidence(objects=[det("pillow")])) == "no"


def test_yesno_full_coverage_is_yes(lexicon):
    aq = analyze_question(CAT_PILLOW, lexicon)
    assert propagate_yesno(aq, evidence(objects=[det("cat"), det("pillow")])) == "yes"


def test_yesno_zero_overlap_ignored(lexicon):
    aq = analyze_question(CAT_PILLOW, lexicon)
    assert propagate_yesno(aq, evidence(objects=[det("dog")])) is None


def test_yesno_min_score(lexicon):
    aq = analyze_question(CAT_PILLOW, lexicon)
    ev = evidence(objects=[det("cat", score=0.2), det("pillow")])
    assert propagate_yesno(aq, ev, PropagationConfig(min_score=0.5)) == "no"


NAMES = ["cat", "pillow", "dog", "bus"]


@given(st.sets(st.sampled_from(NAMES)))
def test_yesno_trichotomy(lexicon, present):
    aq = analyze_question(CAT_PILLOW, lexicon)
    got = propagate_yesno(aq, evidence(objects=[det(n) for n in sorted(present)]))
    covered = {"cat", "pillow"} & present
    expected = None if not covered else ("yes" if covered == {"cat", "pillow"} else "no")
    assert got == expected


def test_color_direct(lexicon):
    aq = analyze_question("what color is the cat", lexicon)
    out = propagate_color(aq, evidence(objects=[det("cat", "black")]))
    assert [(t.question, t.answer) for t in out] == [("what color is the cat", "black")]


def test_color_replacement(lexicon):
    aq = analyze_question("what color is the cat", lexicon)
    out = propagate_color(aq, evidence(objects=[det("cat", "black"), det("bus", "yellow")]))
    assert [(t.question, t.answer, t.rule) for t in out] == [
        ("what color is the cat", "black", Rule.COLOR),
        ("what color is the bus", "yellow", Rule.COLOR_REPLACED),
    ]


def test_color_replacement_swaps_plural_surface(lexicon):
    aq = analyze_question("what color are the buses", lexicon)
    out = propagate_color(aq, evidence(objects=[det("bus", "red"), det("cat", "white")]))
    assert ("what color are the cat", "white") in [(t.question, t.answer) for t in out]


def test_color_ambiguous_skipped(lexicon):
    aq = analyze_question("what color is the cat", lexicon)
    assert propagate_color(aq, evidence(objects=[det("cat", "black"), det("cat", "white")])) == []


def test_color_non_color_attributes_ignored(lexicon):
    aq = analyze_question("what color is the cat", lexicon)
    out = propagate_color(aq, evidence(objects=[det("cat", "black", "fluffy")]))
    assert [t.answer for t in out] == ["black"]


def test_color_requires_noun(lexicon):
    aq = analyze_question("what color is the cat", lexicon)
    assert propagate_color(aq, evidence(objects=[det("bus", "yellow")])) == []


@given(st.lists(st.tuples(st.sampled_from(NAMES), st.sets(st.sampled_from(sorted(DEFAULT_COLORS) + ["fluffy", "wet"]), max_size=3)), max_size=6))
def test_color_answers_in_vocabulary(lexicon, objs):
    aq = analyze_question("what color is the cat", lexicon)
    for t in propagate_color(aq, evidence(objects=[det(n, *attrs) for n, attrs in objs])):
        assert t.answer in DEFAULT_COLORS


def test_number_direct(lexicon, hierarchy):
    aq = analyze_question("how many dogs", lexicon)
    assert propagate_number(aq, evidence(instances={"dog": 3}), hierarchy) == "3"


def test_number_supercategory(lexicon, hierarchy):
    aq = analyze_question("how many animals are there", lexicon)
    assert propagate_number(aq, evidence(instances={"dog": 2, "cat": 1, "car": 4}), hierarchy) == "3"


def test_number_absent(lexicon, hierarchy):
    aq = analyze_question("how many dogs", lexicon)
    assert propagate_number(aq, evidence(instances={"cat": 2}), hierarchy) is None


def test_number_max_count(lexicon, hierarchy):
    aq = analyze_question("how many dogs", lexicon)
    assert propagate_number(aq, evidence(instances={"dog": 12}), hierarchy, PropagationConfig(max_count=10)) is None


ANIMALS = ["dog", "cat", "sheep", "horse", "car", "person"]


@given(st.lists(st.sampled_from(ANIMALS), max_size=15))
def test_number_equals_recount(lexicon, hierarchy, instances):
    aq = analyze_question("how many animals are there", lexicon)
    counts = Counter(instances)
    got = propagate_number(aq, evidence(instances=counts), hierarchy)
    n = sum(1 for x in instances if x in {"dog", "cat", "sheep", "horse"})
    assert got == (str(n) if n else None)


SHEEP = IqaTriplet(1, 9, "What animal is this?", "sheep")


def test_what_sheep(lexicon, hierarchy):
    aq = analyze_question(SHEEP.question, lexicon)
    assert propagate_what(SHEEP, aq, evidence(instances={"sheep": 1}), hierarchy) == "sheep"


def test_what_answer_absent(lexicon, hierarchy):
    aq = analyze_question(SHEEP.question, lexicon)
    assert propagate_what(SHEEP, aq, evidence(instances={"dog": 1}), hierarchy) is None


def test_what_multi_animal(lexicon, hierarchy):
    aq = analyze_question(SHEEP.question, lexicon)
    assert propagate_what(SHEEP, aq, evidence(instances={"sheep": 2, "dog": 1}), hierarchy) == "sheep"


@given(st.sampled_from(["sheep", "dogs", "a cat", "horse"]), st.lists(st.sampled_from(ANIMALS), max_size=6))
def test_what_answer_verbatim(lexicon, hierarchy, answer, instances):
    src = IqaTriplet(1, 9, "what animal is this", answer)
    aq = analyze_question(src.question, lexicon)
    got = propagate_what(src, aq, evidence(instances=Counter(instances)), hierarchy, lexicon.canonical_phrase)
    assert got is None or got == answer

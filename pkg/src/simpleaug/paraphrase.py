"""Paraphrase mining over unique questions and question swapping.

Questions are embedded as the mean of their in-vocabulary word vectors.
Search is exact: a float32 matrix product screens candidates with a safety
margin, then survivors are re-scored in float64 with a BLAS-free kernel so
the ranking never depends on threading or block size.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .core import AugmentedTriplet, Counters, IqaTriplet, Rule, Source, normalize_question
from .ingestion import EmbeddingTable, TripletCorpus

logger = logging.getLogger(__name__)

DEFAULT_THRESHOLD = 0.98
DEFAULT_TOPK = 3
DEFAULT_RARE_MAX = 5

# absorbs float64 rounding in the exact re-score (an exact 0.98 may come out as 0.97999...)
COS_EPS = 1e-12
# float32 screening error is far below this for unit vectors
SCREEN_MARGIN = 1e-4


@dataclass(frozen=True)
class QuestionVector:
    question: str
    vector: np.ndarray
    token_coverage: float


def encode_question(q: str, emb: EmbeddingTable) -> Optional[QuestionVector]:
    """Mean word vector of ``q``; None when no token is in the table."""
    tokens = q.split()
    rows = [emb.index[t] for t in tokens if t in emb.index]
    if not rows:
        return None
    vec = emb.vectors[rows].mean(axis=0)
    return QuestionVector(q, vec, len(rows) / len(tokens))


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    nu, nv = float(np.sqrt(np.einsum("i,i->", u, u))), float(np.sqrt(np.einsum("i,i->", v, v)))
    if nu == 0.0 or nv == 0.0:
        return 0.0
    return float(np.einsum("i,i->", u, v)) / (nu * nv)


@dataclass
class ParaphraseIndex:
    questions: List[str]
    unit: np.ndarray
    members: Mapping[str, Tuple[Tuple[int, str, int], ...]]
    threshold: float = DEFAULT_THRESHOLD
    topk: int = DEFAULT_TOPK
    rare_max: int = DEFAULT_RARE_MAX
    report: Counters = field(default_factory=Counters)

    def __post_init__(self):
        if not 0.0 < self.threshold <= 1.0:
            raise ValueError("threshold must be in (0, 1]")
        if self.topk < 1 or self.rare_max < 1:
            raise ValueError("topk and rare_max must be >= 1")
        self.position = {q: i for i, q in enumerate(self.questions)}
        self._screen = self.unit.astype(np.float32)

    def __len__(self) -> int:
        return len(self.questions)


def build_index(
    corpus: TripletCorpus,
    emb: EmbeddingTable,
    threshold: float = DEFAULT_THRESHOLD,
    topk: int = DEFAULT_TOPK,
    rare_max: int = DEFAULT_RARE_MAX,
) -> ParaphraseIndex:
    report = Counters()
    members: Dict[str, List[Tuple[int, str, int]]] = {}
    for t in corpus.triplets:
        members.setdefault(normalize_question(t.question), []).append((t.image_id, t.answer, t.question_id))
    questions, vecs = [], []
    for q in sorted(members):
        qv = encode_question(q, emb)
        if qv is None:
            report.add("excluded_no_vocabulary")
            continue
        norm = np.sqrt(np.einsum("i,i->", qv.vector, qv.vector))
        if norm == 0.0:
            report.add("excluded_zero_vector")
            continue
        questions.append(q)
        vecs.append(qv.vector / norm)
    unit = np.asarray(vecs, dtype=np.float64).reshape(len(vecs), emb.dim)
    report.add("indexed", len(questions))
    return ParaphraseIndex(
        questions,
        unit,
        {q: tuple(members[q]) for q in questions},
        threshold=threshold,
        topk=topk,
        rare_max=rare_max,
        report=report,
    )


def _rank(index: ParaphraseIndex, query_text: str, query_unit: np.ndarray, cand: np.ndarray) -> List[Tuple[str, float]]:
    if cand.size == 0:
        return []
    exact = np.einsum("ij,j->i", index.unit[cand], query_unit)
    hits = [
        (index.questions[j], float(c))
        for j, c in zip(cand.tolist(), exact.tolist())
        if c >= index.threshold - COS_EPS and index.questions[j] != query_text
    ]
    hits.sort(key=lambda h: (-h[1], h[0]))
    return hits[: index.topk]


def find_similar(qv: QuestionVector, index: ParaphraseIndex) -> List[Tuple[str, float]]:
    """Up to top-k other questions with cosine >= threshold, best first, ties by text."""
    if len(index) == 0:
        return []
    n = np.sqrt(np.einsum("i,i->", qv.vector, qv.vector))
    if n == 0.0:
        return []
    u = qv.vector / n
    screen = index._screen @ u.astype(np.float32)
    cand = np.flatnonzero(screen >= index.threshold - SCREEN_MARGIN)
    return _rank(index, qv.question, u, cand)


def _similar_block(index: ParaphraseIndex, start: int, stop: int) -> List[List[Tuple[str, float]]]:
    screen = index._screen[start:stop] @ index._screen.T
    out = []
    for r in range(stop - start):
        row = start + r
        cand = np.flatnonzero(screen[r] >= index.threshold - SCREEN_MARGIN)
        out.append(_rank(index, index.questions[row], index.unit[row], cand))
    return out


def all_similar(index: ParaphraseIndex, jobs: int = 1, block: int = 256) -> Dict[str, List[Tuple[str, float]]]:
    """find_similar for every indexed question, computed in row blocks."""
    starts = list(range(0, len(index), block))
    spans = [(s, min(s + block, len(index))) for s in starts]
    if jobs > 1 and len(spans) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            blocks = list(pool.map(lambda sp: _similar_block(index, *sp), spans))
    else:
        blocks = [_similar_block(index, *sp) for sp in spans]
    out: Dict[str, List[Tuple[str, float]]] = {}
    for (s, _), rows in zip(spans, blocks):
        for r, hits in enumerate(rows):
            out[index.questions[s + r]] = hits
    found = sum(1 for h in out.values() if h)
    index.report.add("questions_with_paraphrase", found)
    return out


def _swap(image_id: int, question: str, answer: str, answer_type, src_qid: int) -> AugmentedTriplet:
    base = IqaTriplet(0, image_id, question, answer, answer_type, Source.PARAPHRASED)
    return AugmentedTriplet(base, Rule.PARAPHRASE, src_qid, image_id, self_verified=False, cross_verified=None)


def paraphrase_swap(
    corpus: TripletCorpus,
    index: ParaphraseIndex,
    similar: Optional[Mapping[str, Sequence[Tuple[str, float]]]] = None,
    gate: str = "both",
    jobs: int = 1,
) -> List[AugmentedTriplet]:
    """Swap questions between triplets of similar question pairs.

    For a pair (q, q') every triplet (i', q', a') yields (i', q, a') when the
    pairing (q, a') occurs fewer than ``rare_max`` times in the corpus; the
    mirror direction (i, q', a) is gated the same way when ``gate == "both"``
    and always emitted when ``gate == "one"``. Results drop (image, question)
    pairs already annotated and are sorted by (source question id, image, question).
    """
    if gate not in ("one", "both"):
        raise ValueError("gate must be 'one' or 'both'")
    if similar is None:
        similar = all_similar(index, jobs=jobs)
    by_qid: Dict[int, IqaTriplet] = {t.question_id: t for t in corpus.triplets}
    existing = corpus.keys()
    counts = corpus.pair_counts
    seen = set()
    out: List[Tuple[Tuple[int, int, str], AugmentedTriplet]] = []

    def push(image_id: int, question: str, answer: str, src_qid: int):
        key = (image_id, question)
        if key in existing or key in seen:
            return
        seen.add(key)
        out.append(((src_qid, image_id, question), _swap(image_id, question, answer, by_qid[src_qid].answer_type, src_qid)))

    emitted = []
    for q in index.questions:
        for q2, _ in similar.get(q, ()):
            for image_id, answer, qid in index.members[q2]:
                if counts.get((q, answer), 0) < index.rare_max:
                    emitted.append((image_id, q, answer, qid))
            for image_id, answer, qid in index.members[q]:
                if gate == "one" or counts.get((q2, answer), 0) < index.rare_max:
                    emitted.append((image_id, q2, answer, qid))
    # dedup must keep the first by final order, not by discovery order
    emitted.sort(key=lambda e: (e[3], e[0], e[1]))
    for image_id, question, answer, qid in emitted:
        push(image_id, question, answer, qid)
    out.sort(key=lambda kv: kv[0])
    return [t for _, t in out]

"""Frame coherence filtering and exact constrained BIO decoding.

Given per-token label posteriors, the frame is chosen as the most
probable trigger label among the lexical unit's candidates; frame
elements outside the chosen frame's inventory are then masked and the
best valid BIO sequence is found exactly.  The search is a Viterbi
pass over the BIO transition mask, which is an exact optimizer for
these first-order constraints (equivalence with brute-force
enumeration is enforced by tests).

A null-label offset delta in (-1, 1) is added to P(O) at every
position before scoring: raising delta prunes weak argument
hypotheses (precision), lowering it recovers more of them (recall).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import FrameLexicon, Span, TargetInstance
from .tagger import LabelInventory, ParserModel, featurize, forward

SCORE_FLOOR = 1e-12


class UnknownLexicalUnitError(LookupError):
    """Lexical unit absent from the lexicon; the instance is skipped."""


class DecodeError(RuntimeError):
    pass


@dataclass(frozen=True)
class TagSequence:
    labels: tuple[str, ...]
    score: float | None = None  # sum of log-scores of the decoded labels


@dataclass(frozen=True)
class FrameHypothesis:
    trigger_index: int
    frame: str
    elements: tuple[Span, ...]
    score: float


@dataclass(frozen=True)
class DecodeConfig:
    delta: float = 0.0
    max_nodes: int = 10_000_000  # guard on T * L^2 trellis size

    def __post_init__(self):
        if not (-1.0 < self.delta < 1.0):
            raise ValueError(f"delta must lie in (-1, 1), got {self.delta}")


def select_frame(
    trigger_index: int,
    label_posteriors: np.ndarray,
    lu: str,
    lexicon: FrameLexicon,
    labels: LabelInventory,
) -> str:
    """Most probable candidate frame at the trigger position.

    Non-candidate frames are masked out; ties break to the earliest
    declared candidate.
    """
    candidates = lexicon.candidates(lu)
    if not candidates:
        raise UnknownLexicalUnitError(f"no candidate frames for lu {lu!r}")
    row = label_posteriors[trigger_index - 1]
    best, best_p = candidates[0], -1.0
    for frame in candidates:
        p = float(row[labels.id(f"T-{frame}")])
        if p > best_p:
            best, best_p = frame, p
    return best


def transition_mask(labels: LabelInventory) -> np.ndarray:
    """(L, L) boolean matrix: ok[prev, next] under the BIO rule that
    I-X may only follow B-X or I-X."""
    L = len(labels)
    ok = np.ones((L, L), dtype=bool)
    for j, lab in enumerate(labels.labels):
        if lab.startswith("I-"):
            fe = lab[2:]
            for i, prev in enumerate(labels.labels):
                if prev not in (f"B-{fe}", f"I-{fe}"):
                    ok[i, j] = False
    return ok


def constrained_decode(
    label_posteriors: np.ndarray,
    frame: str,
    lexicon: FrameLexicon,
    delta: float,
    labels: LabelInventory,
    trigger_index: int,
    max_nodes: int = DecodeConfig.max_nodes,
) -> TagSequence:
    """Exact best valid sequence under the frame mask and BIO rule.

    Scores are log(P + delta) for O and log(P) otherwise; the trigger
    position is forced to T-<frame> and all other trigger labels are
    masked everywhere.  The O probability is floored at 1e-12 when the
    offset makes it non-positive, except where O is the only available
    label, which is reported as a DecodeError.
    """
    if not (-1.0 < delta < 1.0):
        raise ValueError(f"delta must lie in (-1, 1), got {delta}")
    T, L = label_posteriors.shape
    if L != len(labels):
        raise ValueError(f"posteriors have {L} columns for {len(labels)} labels")
    if T * L * L > max_nodes:
        raise DecodeError(f"trellis of {T * L * L} nodes exceeds budget {max_nodes}")
    inventory = set(lexicon.fe_labels(frame))
    allowed = np.zeros(L, dtype=bool)
    allowed[0] = True
    for j, lab in enumerate(labels.labels):
        if lab[:2] in ("B-", "I-") and lab[2:] in inventory:
            allowed[j] = True
    trigger_label = labels.id(f"T-{frame}")

    scores = np.full((T, L), -np.inf)
    for t in range(T):
        if t == trigger_index - 1:
            scores[t, trigger_label] = np.log(max(label_posteriors[t, trigger_label], SCORE_FLOOR))
            continue
        o_score = label_posteriors[t, 0] + delta
        if o_score <= 0.0:
            if not allowed[1:].any():
                raise DecodeError(
                    f"null score {o_score} non-positive at position {t + 1} "
                    "with every other label masked"
                )
            o_score = SCORE_FLOOR
        scores[t, 0] = np.log(o_score)
        cols = allowed.copy()
        cols[0] = False
        scores[t, cols] = np.log(np.maximum(label_posteriors[t, cols], SCORE_FLOOR))

    ok = transition_mask(labels)
    neg = np.where(ok, 0.0, -np.inf)
    trellis = np.full((T, L), -np.inf)
    back = np.zeros((T, L), dtype=np.int64)
    start = scores[0].copy()
    for j, lab in enumerate(labels.labels):
        if lab.startswith("I-"):
            start[j] = -np.inf
    trellis[0] = start
    for t in range(1, T):
        cand = trellis[t - 1][:, None] + neg
        back[t] = cand.argmax(axis=0)
        trellis[t] = scores[t] + cand[back[t], np.arange(L)]
    path = [int(trellis[-1].argmax())]
    for t in range(T - 1, 0, -1):
        path.append(int(back[t, path[-1]]))
    path.reverse()
    best_score = float(trellis[-1].max())
    if not np.isfinite(best_score):
        raise DecodeError("no valid sequence under the constraints")
    return TagSequence(tuple(labels.labels[j] for j in path), best_score)


def to_hypothesis(
    tag_sequence: TagSequence, trigger_index: int, frame: str
) -> FrameHypothesis:
    """Convert maximal B-I runs into (start, end, label) spans."""
    spans: list[Span] = []
    start = None
    label = None
    for pos, tag in enumerate(tag_sequence.labels, start=1):
        if tag.startswith("B-"):
            if start is not None:
                spans.append((start, pos - 1, label))
            start, label = pos, tag[2:]
        elif tag.startswith("I-"):
            pass  # validity guaranteed upstream: continues the open span
        else:
            if start is not None:
                spans.append((start, pos - 1, label))
                start = None
    if start is not None:
        spans.append((start, len(tag_sequence.labels), label))
    score = tag_sequence.score if tag_sequence.score is not None else 0.0
    return FrameHypothesis(trigger_index, frame, tuple(spans), score)


def parse_instance(
    model: ParserModel,
    instance: TargetInstance,
    lexicon: FrameLexicon,
    delta: float = 0.0,
) -> FrameHypothesis:
    """featurize -> forward -> select_frame -> decode -> spans."""
    fwd = forward(model, featurize(instance, model.vocabs))
    return parse_from_posteriors(
        fwd.posteriors, instance.trigger_index, instance.lu, lexicon, model.labels, delta
    )


def parse_from_posteriors(
    posteriors: np.ndarray,
    trigger_index: int,
    lu: str,
    lexicon: FrameLexicon,
    labels: LabelInventory,
    delta: float,
) -> FrameHypothesis:
    frame = select_frame(trigger_index, posteriors, lu, lexicon, labels)
    tags = constrained_decode(posteriors, frame, lexicon, delta, labels, trigger_index)
    return to_hypothesis(tags, trigger_index, frame)

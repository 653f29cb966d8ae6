"""Cumulative three-level evaluation and error-analysis breakdowns.

Scoring is cumulative across the target, frame and argument levels: a
frame counts only when its target is correct, and an argument span
counts only when its frame is correct and the span matches a gold span
exactly (hard-span matching on start, end and label).  Evaluation runs
per gold trigger, so the target level measures whether a hypothesis
was produced for the trigger at all.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .clustering import ClusterModel, WordEmbeddings, assign, sentence_embedding
from .corpus import FrameLexicon, TargetInstance
from .decoder import (
    FrameHypothesis,
    UnknownLexicalUnitError,
    parse_from_posteriors,
)
from .tagger import ParserModel, featurize, forward

LEVELS = ("target", "frame", "argument")

VERB_POS_PREFIXES = ("VERB", "V")
NOUN_POS_PREFIXES = ("NOUN", "N", "PROPN")


@dataclass
class EvalCounts:
    tp: dict[str, int] = field(default_factory=lambda: dict.fromkeys(LEVELS, 0))
    fp: dict[str, int] = field(default_factory=lambda: dict.fromkeys(LEVELS, 0))
    fn: dict[str, int] = field(default_factory=lambda: dict.fromkeys(LEVELS, 0))

    def add(self, other: "EvalCounts") -> None:
        for level in LEVELS:
            self.tp[level] += other.tp[level]
            self.fp[level] += other.fp[level]
            self.fn[level] += other.fn[level]

    def prf(self, level: str) -> tuple[float, float, float]:
        return _prf(self.tp[level], self.fp[level], self.fn[level])


def _prf(tp: int, fp: int, fn: int) -> tuple[float, float, float]:
    p = tp / (tp + fp) if tp + fp else 0.0
    r = tp / (tp + fn) if tp + fn else 0.0
    f = 2 * p * r / (p + r) if p + r else 0.0
    return p, r, f


def score_instance(
    gold: TargetInstance, hyp: FrameHypothesis | None
) -> EvalCounts:
    """Count one gold/hypothesis pair at every level.

    A missing hypothesis is a miss at all levels; a wrong frame makes
    every hypothesized span a false positive and every gold span a
    false negative.
    """
    counts = EvalCounts()
    gold_spans = set(gold.annotation.elements)
    if hyp is None:
        counts.fn["target"] += 1
        counts.fn["frame"] += 1
        counts.fn["argument"] += len(gold_spans)
        return counts
    if hyp.trigger_index != gold.trigger_index:
        raise ValueError(
            f"hypothesis trigger {hyp.trigger_index} does not match gold "
            f"trigger {gold.trigger_index}"
        )
    counts.tp["target"] += 1
    frame_ok = hyp.frame == gold.frame
    if frame_ok:
        counts.tp["frame"] += 1
    else:
        counts.fp["frame"] += 1
        counts.fn["frame"] += 1
    hyp_spans = set(hyp.elements)
    if frame_ok:
        matched = hyp_spans & gold_spans
        counts.tp["argument"] += len(matched)
        counts.fp["argument"] += len(hyp_spans - matched)
        counts.fn["argument"] += len(gold_spans - matched)
    else:
        counts.fp["argument"] += len(hyp_spans)
        counts.fn["argument"] += len(gold_spans)
    return counts


@dataclass
class EvalReport:
    counts: EvalCounts
    delta: float
    skipped_unknown_lu: int = 0

    def prf(self, level: str) -> tuple[float, float, float]:
        return self.counts.prf(level)

    def f1(self, level: str) -> float:
        return self.prf(level)[2]


def _posterior_cache(
    model: ParserModel,
    instances: Sequence[TargetInstance],
    threads: int = 1,
) -> list[np.ndarray]:
    def run(inst):
        return forward(model, featurize(inst, model.vocabs)).posteriors

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(run, instances))
    return [run(inst) for inst in instances]


def _score_at_delta(
    posteriors: list[np.ndarray],
    instances: Sequence[TargetInstance],
    lexicon: FrameLexicon,
    labels,
    delta: float,
) -> EvalReport:
    counts = EvalCounts()
    skipped = 0
    for post, inst in zip(posteriors, instances):
        try:
            hyp = parse_from_posteriors(
                post, inst.trigger_index, inst.lu, lexicon, labels, delta
            )
        except UnknownLexicalUnitError:
            hyp = None
            skipped += 1
        counts.add(score_instance(inst, hyp))
    return EvalReport(counts, delta, skipped)


def evaluate(
    model: ParserModel,
    instances: Sequence[TargetInstance],
    lexicon: FrameLexicon,
    delta: float = 0.0,
    threads: int = 1,
) -> EvalReport:
    """Aggregate counts and P/R/F per level over all instances."""
    posts = _posterior_cache(model, instances, threads)
    return _score_at_delta(posts, instances, lexicon, model.labels, delta)


@dataclass
class SweepResult:
    """P/R curves over a delta grid plus the F-maximizing point per level."""

    points: dict[str, list[tuple[float, float, float, float]]]
    fmax: dict[str, tuple[float, float]]  # level -> (delta*, Fmax)
    reports: list[EvalReport]


def sweep(
    model: ParserModel,
    instances: Sequence[TargetInstance],
    lexicon: FrameLexicon,
    delta_grid: Sequence[float],
    threads: int = 1,
) -> SweepResult:
    """Evaluate along an ascending delta grid; forward runs once per
    instance and only decoding repeats."""
    grid = list(delta_grid)
    if not grid:
        raise ValueError("empty delta grid")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("delta grid must be strictly ascending")
    posts = _posterior_cache(model, instances, threads)
    reports = [
        _score_at_delta(posts, instances, lexicon, model.labels, d) for d in grid
    ]
    points: dict[str, list[tuple[float, float, float, float]]] = {l: [] for l in LEVELS}
    fmax: dict[str, tuple[float, float]] = {}
    for level in LEVELS:
        for rep in reports:
            p, r, f = rep.prf(level)
            points[level].append((rep.delta, p, r, f))
        best = max(range(len(grid)), key=lambda i: (points[level][i][3], -grid[i]))
        fmax[level] = (grid[best], points[level][best][3])
    return SweepResult(points, fmax, reports)


# ---------------------------------------------------------------------------
# complexity-factor breakdown


@dataclass
class FactorRow:
    name: str
    tp: int
    fp: int
    fn: int
    empty: bool = False

    def prf(self) -> tuple[float, float, float]:
        return _prf(self.tp, self.fp, self.fn)


def _span_counts(gold: TargetInstance, hyp: FrameHypothesis | None):
    """Argument-level (tp, fp, fn) span lists under the cumulative rule."""
    gold_spans = set(gold.annotation.elements)
    if hyp is None:
        return set(), set(), gold_spans
    hyp_spans = set(hyp.elements)
    if hyp.frame == gold.frame:
        matched = hyp_spans & gold_spans
        return matched, hyp_spans - matched, gold_spans - matched
    return set(), hyp_spans, gold_spans


def breakdown(
    pairs: Sequence[tuple[TargetInstance, FrameHypothesis | None]],
    lexicon: FrameLexicon,
    verb_prefixes: Sequence[str] = VERB_POS_PREFIXES,
    noun_prefixes: Sequence[str] = NOUN_POS_PREFIXES,
) -> list[FactorRow]:
    """Argument-level scores restricted to complexity-factor classes.

    Frame-element coreness comes from the lexicon (false positives are
    judged in the hypothesized frame); the trigger factors come from
    the trigger token's POS tag and head.
    """
    rows = {
        name: FactorRow(name, 0, 0, 0)
        for name in (
            "overall", "core-fe", "non-core-fe", "verbal-trigger",
            "nominal-trigger", "other-trigger", "root-trigger", "non-root-trigger",
        )
    }

    def bump(name: str, tp: int, fp: int, fn: int) -> None:
        rows[name].tp += tp
        rows[name].fp += fp
        rows[name].fn += fn

    for gold, hyp in pairs:
        tp_spans, fp_spans, fn_spans = _span_counts(gold, hyp)
        bump("overall", len(tp_spans), len(fp_spans), len(fn_spans))
        for _, _, label in tp_spans:
            name = "core-fe" if lexicon.is_core(gold.frame, label) else "non-core-fe"
            bump(name, 1, 0, 0)
        for _, _, label in fn_spans:
            name = "core-fe" if lexicon.is_core(gold.frame, label) else "non-core-fe"
            bump(name, 0, 0, 1)
        fp_frame = hyp.frame if hyp is not None else gold.frame
        for _, _, label in fp_spans:
            name = "core-fe" if lexicon.is_core(fp_frame, label) else "non-core-fe"
            bump(name, 0, 1, 0)
        trig_tok = gold.sentence.tokens[gold.trigger_index - 1]
        if any(trig_tok.pos.startswith(p) for p in verb_prefixes):
            pos_row = "verbal-trigger"
        elif any(trig_tok.pos.startswith(p) for p in noun_prefixes):
            pos_row = "nominal-trigger"
        else:
            pos_row = "other-trigger"
        bump(pos_row, len(tp_spans), len(fp_spans), len(fn_spans))
        root_row = "root-trigger" if trig_tok.head == 0 else "non-root-trigger"
        bump(root_row, len(tp_spans), len(fp_spans), len(fn_spans))

    out = []
    for row in rows.values():
        row.empty = (row.tp + row.fp + row.fn) == 0
        out.append(row)
    return out


# ---------------------------------------------------------------------------
# per-LU cluster-distribution divergence


def lu_cluster_divergence(
    lu: str,
    instances_a: Sequence[TargetInstance],
    instances_b: Sequence[TargetInstance],
    cluster_model: ClusterModel,
    embeddings: WordEmbeddings,
) -> float:
    """Total-variation distance between the cluster histograms of the
    sentences containing a lexical unit in two instance sets."""

    def histogram(instances) -> np.ndarray:
        seen: dict[int, int] = {}
        for inst in instances:
            if inst.lu == lu:
                key = id(inst.sentence)
                if key not in seen:
                    seen[key] = assign(
                        cluster_model, sentence_embedding(inst.sentence, embeddings)
                    )
        if not seen:
            raise ValueError(f"lu {lu!r} absent from instance set")
        hist = np.zeros(cluster_model.k)
        for c in seen.values():
            hist[c] += 1.0
        return hist / hist.sum()

    ha, hb = histogram(instances_a), histogram(instances_b)
    return float(0.5 * np.abs(ha - hb).sum())

"""biGRU semantic frame tagger.

Per-token categorical features are embedded, concatenated and fed to a
stack of bidirectional GRU layers (default 4) whose concatenated
forward/backward outputs are blended between consecutive layers by
highway gates.  A linear projection plus softmax yields per-token
posteriors over the BIO label inventory; the final layer's states are
also exposed for the adversarial domain head.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import numerics
from .corpus import Corpus, FrameLexicon, Sentence, TargetInstance
from .numerics import ParamSet, ShapeError

UNK = "<unk>"

# model-init / shuffle / head-init draw from distinct seed streams so
# that enabling one component never perturbs another's randomness
MODEL_STREAM = 11
HEAD_STREAM = 13
SHUFFLE_STREAM = 17
PROBE_STREAM = 19
SPLIT_STREAM = 23

N_FLAG = 2
N_DIST = 13  # signed linear distance, clipped to [-6, 6]
N_CAPS = 5
N_TREE = 6  # dependency-tree distance, capped at 5

FEATURE_FAMILIES = (
    "word", "pos", "deprel", "flag", "dist", "caps",
    "suf2", "suf3", "trig_deprel", "treedist",
)


@dataclass(frozen=True)
class Vocab:
    tokens: tuple[str, ...]  # index 0 is the reserved UNK entry
    index: dict[str, int] = field(compare=False, default_factory=dict)

    def __post_init__(self):
        if not self.tokens or self.tokens[0] != UNK:
            raise ValueError("vocabulary must reserve index 0 for UNK")
        object.__setattr__(
            self, "index", {tok: i for i, tok in enumerate(self.tokens)}
        )

    @classmethod
    def from_items(cls, items) -> "Vocab":
        seen: dict[str, None] = {}
        for it in items:
            seen.setdefault(it, None)
        return cls((UNK, *seen))

    def __len__(self) -> int:
        return len(self.tokens)

    def id(self, token: str) -> int:
        return self.index.get(token, 0)


@dataclass(frozen=True)
class Vocabularies:
    word: Vocab
    pos: Vocab
    deprel: Vocab
    suf2: Vocab
    suf3: Vocab

    @classmethod
    def build(cls, corpus: Corpus) -> "Vocabularies":
        words, pos, deprel, suf2, suf3 = [], [], [], [], []
        for sent in corpus:
            for tok in sent.tokens:
                form = tok.form.lower()
                words.append(form)
                pos.append(tok.pos)
                deprel.append(tok.deprel)
                suf2.append(form[-2:])
                suf3.append(form[-3:])
        return cls(
            Vocab.from_items(words), Vocab.from_items(pos), Vocab.from_items(deprel),
            Vocab.from_items(suf2), Vocab.from_items(suf3),
        )

    def to_dict(self) -> dict:
        return {
            "word": list(self.word.tokens), "pos": list(self.pos.tokens),
            "deprel": list(self.deprel.tokens), "suf2": list(self.suf2.tokens),
            "suf3": list(self.suf3.tokens),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Vocabularies":
        return cls(*(Vocab(tuple(d[k])) for k in ("word", "pos", "deprel", "suf2", "suf3")))


class LabelInventory:
    """Ordered BIO label space: O first, per-frame trigger labels, then
    B-/I- pairs for every frame element."""

    def __init__(self, labels: Sequence[str]):
        labels = tuple(labels)
        if not labels or labels[0] != "O":
            raise ValueError("label inventory must start with O")
        bs = {l[2:] for l in labels if l.startswith("B-")}
        for l in labels:
            if l.startswith("I-") and l[2:] not in bs:
                raise ValueError(f"label {l} lacks a matching B- label")
        self.labels = labels
        self.index = {l: i for i, l in enumerate(labels)}

    @classmethod
    def from_lexicon(cls, lexicon: FrameLexicon) -> "LabelInventory":
        labels = ["O"]
        labels.extend(f"T-{f}" for f in lexicon.frames)
        for fe in lexicon.unique_fe_labels():
            labels.append(f"B-{fe}")
            labels.append(f"I-{fe}")
        return cls(labels)

    def __len__(self) -> int:
        return len(self.labels)

    def id(self, label: str) -> int:
        return self.index[label]

    def __eq__(self, other) -> bool:
        return isinstance(other, LabelInventory) and self.labels == other.labels


@dataclass(frozen=True)
class FeatureView:
    """Integer feature ids per token, one array per feature family."""

    word: np.ndarray
    pos: np.ndarray
    deprel: np.ndarray
    flag: np.ndarray
    dist: np.ndarray
    caps: np.ndarray
    suf2: np.ndarray
    suf3: np.ndarray
    trig_deprel: np.ndarray
    treedist: np.ndarray

    def __len__(self) -> int:
        return len(self.word)

    def ids(self, family: str) -> np.ndarray:
        return getattr(self, family)

    def reversed(self) -> "FeatureView":
        return FeatureView(*(self.ids(f)[::-1].copy() for f in FEATURE_FAMILIES))


def caps_class(form: str) -> int:
    """0 lower, 1 initial capital, 2 all caps, 3 mixed, 4 no letters."""
    if not any(c.isalpha() for c in form):
        return 4
    if form.islower():
        return 0
    if form.isupper() and len(form) > 1:
        return 2
    if form[0].isupper() and (len(form) == 1 or form[1:].islower()):
        return 1
    return 3


def tree_distances(sentence: Sentence, trigger_index: int, cap: int = 5) -> np.ndarray:
    """Undirected dependency-tree distance of every token to the
    trigger, capped (unreachable tokens get the cap)."""
    n = len(sentence)
    adj: list[list[int]] = [[] for _ in range(n + 1)]
    for tok in sentence.tokens:
        if tok.head > 0:
            adj[tok.index].append(tok.head)
            adj[tok.head].append(tok.index)
    dist = np.full(n + 1, cap, dtype=np.int64)
    dist[trigger_index] = 0
    frontier = [trigger_index]
    d = 0
    while frontier and d < cap:
        d += 1
        nxt = []
        for i in frontier:
            for j in adj[i]:
                if dist[j] == cap and j != trigger_index:
                    dist[j] = d
                    nxt.append(j)
        frontier = nxt
    return dist[1:]


def featurize(instance: TargetInstance, vocabs: Vocabularies) -> FeatureView:
    """Deterministic id sequences for one (sentence, trigger) pair.

    Unknown words, tags and suffixes map to the reserved UNK id; the
    signed linear distance to the trigger is bucketed per offset with
    two open tails beyond +/-5.
    """
    sent = instance.sentence
    trig = instance.trigger_index
    T = len(sent)
    word = np.empty(T, dtype=np.int64)
    pos = np.empty(T, dtype=np.int64)
    deprel = np.empty(T, dtype=np.int64)
    caps = np.empty(T, dtype=np.int64)
    suf2 = np.empty(T, dtype=np.int64)
    suf3 = np.empty(T, dtype=np.int64)
    for i, tok in enumerate(sent.tokens):
        form = tok.form.lower()
        word[i] = vocabs.word.id(form)
        pos[i] = vocabs.pos.id(tok.pos)
        deprel[i] = vocabs.deprel.id(tok.deprel)
        caps[i] = caps_class(tok.form)
        suf2[i] = vocabs.suf2.id(form[-2:])
        suf3[i] = vocabs.suf3.id(form[-3:])
    positions = np.arange(1, T + 1)
    flag = (positions == trig).astype(np.int64)
    dist = np.clip(positions - trig, -6, 6) + 6
    trig_deprel = np.full(T, vocabs.deprel.id(sent.tokens[trig - 1].deprel), dtype=np.int64)
    treedist = tree_distances(sent, trig)
    return FeatureView(word, pos, deprel, flag, dist, caps, suf2, suf3, trig_deprel, treedist)


@dataclass(frozen=True)
class ModelConfig:
    word_dim: int = 32
    feat_dim: int = 8
    hidden: int = 32
    layers: int = 4

    @property
    def input_dim(self) -> int:
        return self.word_dim + (len(FEATURE_FAMILIES) - 1) * self.feat_dim


@dataclass
class ParserModel:
    config: ModelConfig
    vocabs: Vocabularies
    labels: LabelInventory
    params: ParamSet

    @classmethod
    def build(
        cls,
        vocabs: Vocabularies,
        labels: LabelInventory,
        config: ModelConfig = ModelConfig(),
        seed: int = 0,
    ) -> "ParserModel":
        rng = np.random.default_rng([int(seed), MODEL_STREAM])
        ps = ParamSet()
        sizes = {
            "word": len(vocabs.word), "pos": len(vocabs.pos),
            "deprel": len(vocabs.deprel), "flag": N_FLAG, "dist": N_DIST,
            "caps": N_CAPS, "suf2": len(vocabs.suf2), "suf3": len(vocabs.suf3),
            "trig_deprel": len(vocabs.deprel), "treedist": N_TREE,
        }
        for family in FEATURE_FAMILIES:
            dim = config.word_dim if family == "word" else config.feat_dim
            ps.add(f"emb.{family}", numerics.glorot_uniform(rng, (sizes[family], dim)))
        dim_in = config.input_dim
        for layer in range(config.layers):
            numerics.gru_init(rng, ps, f"gru{layer}.f", dim_in, config.hidden)
            numerics.gru_init(rng, ps, f"gru{layer}.b", dim_in, config.hidden)
            if layer > 0:
                numerics.highway_init(rng, ps, f"hw{layer}", 2 * config.hidden)
            dim_in = 2 * config.hidden
        numerics.linear_init(rng, ps, "out", 2 * config.hidden, len(labels))
        return cls(config, vocabs, labels, ps)

    def word_embeddings(self):
        from .clustering import WordEmbeddings

        return WordEmbeddings(self.vocabs.word.index, self.params.params["emb.word"])


@dataclass
class TaggerForward:
    """Forward-pass outputs plus the caches backward needs."""

    fv: FeatureView
    posteriors: np.ndarray  # (T, L) rows sum to 1
    top_hidden: np.ndarray  # (T, 2h) final-layer states
    logits: np.ndarray
    _layer_inputs: list = field(repr=False, default_factory=list)
    _gru_caches: list = field(repr=False, default_factory=list)
    _gru_outs: list = field(repr=False, default_factory=list)
    _hw_caches: list = field(repr=False, default_factory=list)


def _embed(model: ParserModel, fv: FeatureView) -> np.ndarray:
    cols = []
    for family in FEATURE_FAMILIES:
        table = model.params.params[f"emb.{family}"]
        ids = fv.ids(family)
        if ids.min() < 0 or ids.max() >= table.shape[0]:
            raise ShapeError(f"feature id out of range for {family}")
        cols.append(table[ids])
    return np.concatenate(cols, axis=1)


def forward(model: ParserModel, fv: FeatureView) -> TaggerForward:
    """Posteriors over labels and the top hidden states for a sequence."""
    if len(fv) < 1:
        raise ShapeError("cannot run the tagger on an empty sequence")
    x = _embed(model, fv)
    layer_inputs, gru_caches, gru_outs, hw_caches = [], [], [], []
    for layer in range(model.config.layers):
        layer_inputs.append(x)
        hf, cf = numerics.gru_sequence(x, model.params, f"gru{layer}.f")
        hb, cb = numerics.gru_sequence(x, model.params, f"gru{layer}.b", reverse=True)
        h = np.concatenate([hf, hb], axis=1)
        gru_caches.append((cf, cb))
        gru_outs.append(h)
        if layer > 0:
            h, hw_cache = numerics.highway_combine(x, h, model.params, f"hw{layer}")
            hw_caches.append(hw_cache)
        else:
            hw_caches.append(None)
        x = h
    logits = numerics.linear(x, model.params, "out")
    posteriors = numerics.softmax(logits)
    return TaggerForward(fv, posteriors, x, logits, layer_inputs, gru_caches, gru_outs, hw_caches)


def backward(
    model: ParserModel,
    fwd: TaggerForward,
    dlogits: np.ndarray | None = None,
    dtop: np.ndarray | None = None,
) -> None:
    """Accumulate gradients from d(logits) and/or d(top_hidden)."""
    h = model.config.hidden
    if dlogits is not None:
        grad = numerics.linear_backward(dlogits, fwd.top_hidden, model.params, "out")
        if dtop is not None:
            grad = grad + dtop
    elif dtop is not None:
        grad = dtop
    else:
        raise ValueError("nothing to backpropagate")
    for layer in range(model.config.layers - 1, -1, -1):
        if layer > 0:
            dcarry, grad = numerics.highway_backward(
                grad, fwd._hw_caches[layer], model.params, f"hw{layer}"
            )
        else:
            dcarry = 0.0
        cf, cb = fwd._gru_caches[layer]
        df = numerics.gru_sequence_backward(grad[:, :h], cf, model.params, f"gru{layer}.f")
        db = numerics.gru_sequence_backward(grad[:, h:], cb, model.params, f"gru{layer}.b")
        grad = df + db + dcarry
    for family in FEATURE_FAMILIES:
        dim = model.config.word_dim if family == "word" else model.config.feat_dim
        dslice = grad[:, :dim]
        grad = grad[:, dim:]
        np.add.at(model.params.grads[f"emb.{family}"], fwd.fv.ids(family), dslice)


def gold_label_ids(model: ParserModel, instance: TargetInstance) -> np.ndarray:
    return np.array([model.labels.id(t) for t in instance.gold_tags], dtype=np.int64)


def frame_loss_from(
    model: ParserModel, fwd: TaggerForward, gold_ids: np.ndarray
) -> tuple[float, np.ndarray]:
    """Token-mean cross entropy and d(logits); no backward here."""
    T, L = fwd.logits.shape
    if gold_ids.shape != (T,):
        raise ShapeError(f"expected {T} gold labels, got {gold_ids.shape}")
    dlogits = fwd.posteriors.copy()
    dlogits[np.arange(T), gold_ids] -= 1.0
    dlogits /= T
    m = fwd.logits.max(axis=1)
    logz = np.log(np.exp(fwd.logits - m[:, None]).sum(axis=1)) + m
    loss = float((logz - fwd.logits[np.arange(T), gold_ids]).mean())
    return loss, dlogits


def loss_frame(model: ParserModel, instance: TargetInstance) -> tuple[float, dict]:
    """Mean per-token cross entropy against gold tags.

    Zeroes the model's gradient buffers, runs a full backward pass and
    returns (loss, gradients).
    """
    model.params.zero_grads()
    fv = featurize(instance, model.vocabs)
    fwd = forward(model, fv)
    loss, dlogits = frame_loss_from(model, fwd, gold_label_ids(model, instance))
    backward(model, fwd, dlogits=dlogits)
    return loss, model.params.grads

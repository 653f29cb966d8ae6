"""Domain-adversarial training for the frame tagger.

A CNN domain classifier (the adversary head) is stacked on the
tagger's top hidden states through a gradient reversal layer: the head
itself descends its own classification loss, while the shared trunk
receives that gradient scaled by -lambda, so one SGD step realizes

    theta <- theta - mu * (grad L_frame - lambda * grad L_adv)

for the shared parameters and a plain descent step for the head.  The
reversal strength follows the warm-up schedule
lambda(p) = 2 / (1 + exp(-10 p)) - 1 with progress p recomputed once
per epoch, so early epochs train the tagger nearly undisturbed and the
domain pressure grows toward the end.  Training seeks the saddle point
where tagging is accurate but domain identity is no longer decodable
from the shared representation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import metrics, numerics, tagger
from .corpus import Corpus, FrameLexicon, TargetInstance
from .numerics import ParamSet
from .tagger import (
    HEAD_STREAM,
    PROBE_STREAM,
    SHUFFLE_STREAM,
    LabelInventory,
    ModelConfig,
    ParserModel,
    Vocabularies,
    featurize,
    forward,
    frame_loss_from,
    gold_label_ids,
)


class ConfigurationError(ValueError):
    pass


class TrainingError(RuntimeError):
    pass


def lambda_schedule(p: float) -> float:
    """Reversal strength for training progress p in [0, 1]."""
    if not (0.0 <= p <= 1.0):
        raise ValueError(f"progress must lie in [0, 1], got {p}")
    return 2.0 / (1.0 + math.exp(-10.0 * p)) - 1.0


def grl_backward(upstream_grad: np.ndarray, lam: float) -> np.ndarray:
    """Backward pass of the gradient reversal layer: -lambda * grad.

    The forward pass of the layer is the identity.
    """
    if lam < 0.0:
        raise ValueError(f"lambda must be non-negative, got {lam}")
    return (-lam) * np.asarray(upstream_grad)


@dataclass
class AdversaryHead:
    """Convolution filter bank over the top hidden states, max-pooled
    over time, projected to domain-class logits."""

    k: int
    widths: tuple[int, ...]
    filters: int
    params: ParamSet

    @classmethod
    def build(
        cls,
        input_dim: int,
        k: int,
        seed: int = 0,
        widths: tuple[int, ...] = (2, 3),
        filters: int = 16,
    ) -> "AdversaryHead":
        rng = np.random.default_rng([int(seed), HEAD_STREAM])
        ps = ParamSet()
        numerics.conv_maxpool_init(rng, ps, "conv", input_dim, widths, filters)
        numerics.linear_init(rng, ps, "proj", filters * len(widths), k)
        return cls(k, tuple(widths), filters, ps)


def head_forward(head: AdversaryHead, top_hidden: np.ndarray):
    vec, cache = numerics.conv_maxpool(top_hidden, head.params, "conv", head.widths)
    logits = numerics.linear(vec, head.params, "proj")
    return logits, (vec, cache)


def _adv_accumulate(
    head: AdversaryHead, top_hidden: np.ndarray, domain_label: int, lam: float
) -> tuple[float, np.ndarray]:
    """Head loss + head gradients; returns the reversed trunk gradient."""
    logits, (vec, cache) = head_forward(head, top_hidden)
    loss, dlogits = numerics.softmax_xent(logits, domain_label)
    dvec = numerics.linear_backward(dlogits, vec, head.params, "proj")
    dtop = numerics.conv_maxpool_backward(dvec, cache, head.params, "conv", head.widths)
    return loss, grl_backward(dtop, lam)


def loss_adv(
    model: ParserModel,
    head: AdversaryHead,
    instance: TargetInstance,
    domain_label: int | None,
    lam: float,
) -> tuple[float, dict]:
    """Domain cross entropy on one instance.

    Gradients flow into the head directly and into the shared tagger
    parameters through the gradient reversal (scaled by -lambda).  Both
    gradient buffers are zeroed first.
    """
    if domain_label is None:
        raise ConfigurationError("instance lacks a domain label")
    if not (0 <= domain_label < head.k):
        raise ConfigurationError(f"domain label {domain_label} outside [0, {head.k})")
    model.params.zero_grads()
    head.params.zero_grads()
    fwd = forward(model, featurize(instance, model.vocabs))
    loss, dtop = _adv_accumulate(head, fwd.top_hidden, domain_label, lam)
    tagger.backward(model, fwd, dtop=dtop)
    return loss, {"shared": model.params.grads, "head": head.params.grads}


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 30
    learning_rate: float = 0.05
    batch_size: int = 16
    seed: int = 0
    adversarial_enabled: bool = True
    k: int = 5
    clip_norm: float = 5.0
    fixed_lambda: float | None = None  # diagnostic override of the schedule

    def __post_init__(self):
        if self.learning_rate <= 0.0:
            raise ConfigurationError("learning rate must be positive")
        if self.epochs < 1:
            raise ConfigurationError("need at least one epoch")
        if self.batch_size < 1:
            raise ConfigurationError("batch size must be positive")


def train_step(
    model: ParserModel,
    head: AdversaryHead | None,
    batch: Sequence[TargetInstance],
    mu: float,
    lam: float,
    clip_norm: float = 5.0,
) -> tuple[float, float]:
    """One SGD step on a batch; returns mean (frame, adversary) losses.

    Shared and head gradients are batch means, clipped to the global
    norm separately so the adversary never changes the frame-loss
    update when lambda is zero or the head is absent.
    """
    if not batch:
        raise ValueError("empty batch")
    model.params.zero_grads()
    if head is not None:
        head.params.zero_grads()
    f_total = 0.0
    a_total = 0.0
    for inst in batch:
        fwd = forward(model, featurize(inst, model.vocabs))
        loss, dlogits = frame_loss_from(model, fwd, gold_label_ids(model, inst))
        f_total += loss
        dtop = None
        if head is not None:
            if inst.domain_label is None:
                raise ConfigurationError("adversarial training needs domain labels")
            a_loss, dtop = _adv_accumulate(head, fwd.top_hidden, inst.domain_label, lam)
            a_total += a_loss
        tagger.backward(model, fwd, dlogits=dlogits, dtop=dtop)
    scale = 1.0 / len(batch)
    model.params.scale_grads(scale)
    model.params.clip_grads(clip_norm)
    if not model.params.all_finite():
        raise TrainingError("non-finite shared gradient after clipping")
    model.params.sgd_step(mu)
    if head is not None:
        head.params.scale_grads(scale)
        head.params.clip_grads(clip_norm)
        if not head.params.all_finite():
            raise TrainingError("non-finite adversary gradient after clipping")
        head.params.sgd_step(mu)
    return f_total * scale, a_total * scale


@dataclass
class EpochLog:
    epoch: int
    lam: float
    loss_frame: float
    loss_adv: float | None
    train_f1: float


@dataclass
class TrainResult:
    model: ParserModel
    head: AdversaryHead | None
    log: list[EpochLog]


def log_to_csv(log: Sequence[EpochLog]) -> str:
    lines = ["epoch,lambda,loss_frame,loss_adv,train_f1"]
    for e in log:
        adv = f"{e.loss_adv:.6f}" if e.loss_adv is not None else ""
        lines.append(
            f"{e.epoch},{e.lam:.6f},{e.loss_frame:.6f},{adv},{e.train_f1:.6f}"
        )
    return "\n".join(lines) + "\n"


def _progress(epoch: int, epochs: int) -> float:
    return epoch / (epochs - 1) if epochs > 1 else 0.0


def train(
    corpus_instances: Sequence[TargetInstance],
    lexicon: FrameLexicon,
    config: TrainConfig,
    model_config: ModelConfig = ModelConfig(),
    model: ParserModel | None = None,
    head: AdversaryHead | None = None,
    head_widths: tuple[int, ...] = (2, 3),
    head_filters: int = 16,
) -> TrainResult:
    """Epochs of shuffled mini-batches; lambda recomputed per epoch.

    Deterministic for a fixed seed: model init, head init and batch
    shuffling draw from separate seed streams, so a run with the
    adversary disabled is bit-identical to one with lambda pinned at
    zero.
    """
    instances = list(corpus_instances)
    if not instances:
        raise ConfigurationError("no training instances")
    if model is None:
        sentences: dict[int, object] = {}
        for inst in instances:
            sentences.setdefault(id(inst.sentence), inst.sentence)
        vocabs = Vocabularies.build(Corpus(tuple(sentences.values())))
        labels = LabelInventory.from_lexicon(lexicon)
        model = ParserModel.build(vocabs, labels, model_config, config.seed)
    if config.adversarial_enabled:
        for inst in instances:
            if inst.domain_label is None:
                raise ConfigurationError(
                    "adversarial training requires a domain label on every instance"
                )
            if not (0 <= inst.domain_label < config.k):
                raise ConfigurationError(
                    f"domain label {inst.domain_label} outside [0, {config.k})"
                )
        min_len = min(len(inst.sentence) for inst in instances)
        if min_len < max(head_widths):
            raise ConfigurationError(
                f"sentence of {min_len} tokens is shorter than the widest "
                f"adversary filter ({max(head_widths)})"
            )
        if head is None:
            head = AdversaryHead.build(
                2 * model.config.hidden, config.k, config.seed, head_widths, head_filters
            )
    else:
        head = None

    shuffle_rng = np.random.default_rng([int(config.seed), SHUFFLE_STREAM])
    log: list[EpochLog] = []
    n = len(instances)
    for epoch in range(config.epochs):
        if head is None:
            lam = 0.0
        elif config.fixed_lambda is not None:
            lam = config.fixed_lambda
        else:
            lam = lambda_schedule(_progress(epoch, config.epochs))
        order = shuffle_rng.permutation(n)
        f_losses, a_losses = [], []
        for start in range(0, n, config.batch_size):
            batch = [instances[i] for i in order[start : start + config.batch_size]]
            f_loss, a_loss = train_step(
                model, head, batch, config.learning_rate, lam, config.clip_norm
            )
            f_losses.append(f_loss)
            a_losses.append(a_loss)
        train_f1 = metrics.evaluate(model, instances, lexicon, 0.0).f1("argument")
        log.append(
            EpochLog(
                epoch=epoch,
                lam=lam,
                loss_frame=float(np.mean(f_losses)),
                loss_adv=float(np.mean(a_losses)) if head is not None else None,
                train_f1=train_f1,
            )
        )
    return TrainResult(model, head, log)


# ---------------------------------------------------------------------------
# representation probe


def domain_probe_accuracy(
    model: ParserModel,
    instances: Sequence[TargetInstance],
    k: int,
    seed: int = 0,
    train_frac: float = 0.7,
    iterations: int = 800,
    learning_rate: float = 1.0,
    l2: float = 1e-4,
) -> float:
    """Held-out accuracy of a linear probe retrained on the frozen top
    hidden states to predict the domain label.

    The probe is multinomial logistic regression over the mean- and
    max-pooled top hidden states (standardized), trained to convergence
    by full-batch gradient descent from a zero start, so the
    measurement is deterministic.  Lower accuracy means the shared
    representation exposes less domain information.
    """
    feats = []
    labels = []
    for inst in instances:
        if inst.domain_label is None:
            raise ConfigurationError("probe needs domain labels")
        fwd = forward(model, featurize(inst, model.vocabs))
        feats.append(
            np.concatenate([fwd.top_hidden.mean(axis=0), fwd.top_hidden.max(axis=0)])
        )
        labels.append(inst.domain_label)
    X = np.vstack(feats)
    X = (X - X.mean(axis=0)) / (X.std(axis=0) + 1e-8)
    y = np.array(labels)
    rng = np.random.default_rng([int(seed), PROBE_STREAM])
    perm = rng.permutation(len(y))
    n_train = max(1, int(round(train_frac * len(y))))
    tr, te = perm[:n_train], perm[n_train:]
    if len(te) == 0:
        tr, te = perm, perm
    W = np.zeros((k, X.shape[1]))
    b = np.zeros(k)
    onehot = np.zeros((len(tr), k))
    onehot[np.arange(len(tr)), y[tr]] = 1.0
    Xtr = X[tr]
    for _ in range(iterations):
        probs = numerics.softmax(Xtr @ W.T + b)
        diff = (probs - onehot) / len(tr)
        W -= learning_rate * (diff.T @ Xtr + l2 * W)
        b -= learning_rate * diff.sum(axis=0)
    pred = (X[te] @ W.T + b).argmax(axis=1)
    return float((pred == y[te]).mean())

"""Seeded synthetic multi-domain corpus generator.

Produces a corpus of short, template-built sentences plus a matching
frame lexicon.  Domains share the frame inventory, the lexical-unit
lemmas and all function words, but draw their content nouns from
disjoint, domain-specific vocabularies with Zipf-skewed usage and carry
one high-frequency domain style adverbial, so averaged word embeddings
separate the domains cleanly while the tagging task itself stays
solvable from domain-independent evidence (part of speech, markers,
distances, noun-class suffixes).

Several knobs keep the task non-trivial under domain shift:

* a configurable fraction of lexical units is polysemous; the realized
  frame is decided by a shared cue particle directly after the trigger;
* filler chunks reuse the marker/determiner shape of real argument
  chunks, may sit on either side of the object, and are separable only
  by noun class; class suffixes are unreliable at a configurable rate,
  so word identity carries real in-domain information;
* dependency labels on nouns degrade to a generic relation at a
  configurable rate, as automatic parses do;
* a pool of mixed-role nouns is shared across domains with the
  argument-vs-filler role flipped between the training domains, and
  the last of three or more domains reuses the training style words
  with the style/role correlation broken.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import Corpus, FrameLexicon, Sentence, Span, TargetAnnotation, Token


class ConfigError(ValueError):
    """Invalid generator configuration."""


CORE_SECOND = ("Theme", "Goal")  # even / odd frames
NON_CORE = ("Place", "Time", "Manner")
NC_MARKERS = {"Place": "dans", "Time": "pendant", "Manner": "avec"}
DETS = ("le", "la")
CUE = "prt"
OF = "de"
MATRIX = "dit"
COMP = "que"
CONJ = "et"

# noun-class suffixes, identical across domains
SUF_AGENT = "eur"
SUF_THEME = "ume"
SUF_GOAL = "oir"
SUF_NC = {"Place": "ais", "Time": "ans", "Manner": "ment"}
SUF_FILLER = "ixe"


@dataclass(frozen=True)
class GeneratorConfig:
    domains: int
    sentences_per_domain: int
    frames: int = 6
    lexical_units: int = 12
    polysemous_fraction: float = 0.34
    nominal_fraction: float = 0.25
    role_nouns: int = 8        # per slot class, per domain
    filler_nouns: int = 8      # per domain
    filler_rate: float = 0.75  # chance of a filler chunk per slot
    noncore_rate: float = 0.6
    second_target_rate: float = 0.15
    matrix_rate: float = 0.3   # fraction of non-root triggers
    sense_skew: float = 0.5    # secondary-sense rate in training domains
    style_words: int = 1       # domain style-adverbial pool size
    style_rate: float = 0.95   # chance of a style adverbial per slot (two slots)
    zipf: float = 1.2          # usage skew inside each noun pool
    suffix_noise: float = 0.2  # chance a noun surfaces with a neutral suffix
    postverb_filler_rate: float = 0.3  # filler chunk between trigger and object
    # shared nouns whose argument-vs-filler role flips across training
    # domains; the last domain (when there are at least three) mixes the
    # training styles and breaks the correlation
    mixed_nouns: int = 6
    mixed_rate: float = 0.6    # chance of a mixed-noun chunk in a verbal clause
    mixed_cue_noise: float = 0.03  # determiner-cue error rate on mixed chunks
    deprel_noise: float = 0.2  # chance a noun's dependency label degrades to `dep`

    def validate(self) -> None:
        if self.domains < 1:
            raise ConfigError("need at least one domain")
        if self.sentences_per_domain < 1:
            raise ConfigError("need at least one sentence per domain")
        if self.frames < 1:
            raise ConfigError("need at least one frame")
        if self.lexical_units < 1:
            raise ConfigError("need at least one lexical unit")
        if not (0.0 <= self.polysemous_fraction <= 1.0):
            raise ConfigError("polysemous_fraction outside [0,1]")


@dataclass(frozen=True)
class _Lu:
    lemma: str
    form: str
    pos: str  # VERB or NOUN
    frames: tuple[str, ...]  # candidates, primary first


def _frame_fes(i: int) -> tuple[tuple[str, bool], ...]:
    second = CORE_SECOND[i % 2]
    nc = NON_CORE[i % 3]
    return (("Agent", True), (second, True), (nc, False))


def _build_lexicon(cfg: GeneratorConfig) -> tuple[FrameLexicon, list[_Lu]]:
    lex = FrameLexicon()
    frame_names = [f"Frame{i}" for i in range(cfg.frames)]
    for i, name in enumerate(frame_names):
        lex.add_frame(name)
        for label, core in _frame_fes(i):
            lex.add_fe(name, label, core)
    n = cfg.lexical_units
    n_nominal = int(round(n * cfg.nominal_fraction))
    n_verbal = n - n_nominal
    n_poly = int(round(n_verbal * cfg.polysemous_fraction))
    lus: list[_Lu] = []
    for i in range(n_verbal):
        primary = frame_names[i % cfg.frames]
        frames = (primary,)
        if i < n_poly and cfg.frames > 1:
            secondary = frame_names[(i + 1) % cfg.frames]
            frames = (primary, secondary)
        lus.append(_Lu(f"v{i}", f"v{i}er", "VERB", frames))
    for i in range(n_nominal):
        primary = frame_names[(n_verbal + i) % cfg.frames]
        lus.append(_Lu(f"n{i}", f"n{i}te", "NOUN", (primary,)))
    for lu in lus:
        for frame in lu.frames:
            lex.add_lu(lu.lemma, frame)
    return lex, lus


class _DomainVocab:
    def __init__(self, dom: int, cfg: GeneratorConfig):
        r = range(cfg.role_nouns)
        self.agent = [f"d{dom}a{j}{SUF_AGENT}" for j in r]
        self.theme = [f"d{dom}t{j}{SUF_THEME}" for j in r]
        self.goal = [f"d{dom}g{j}{SUF_GOAL}" for j in r]
        self.nc = {
            label: [f"d{dom}{label[0].lower()}{j}{suffix}" for j in r]
            for label, suffix in SUF_NC.items()
        }
        fillers = [f"d{dom}f{j}{SUF_FILLER}" for j in range(cfg.filler_nouns)]
        # odd fillers capitalized: proper-noun-like surface variation
        self.filler = [f.capitalize() if j % 2 else f for j, f in enumerate(fillers)]
        # high-frequency domain style adverbials (stylistic variation);
        # the last of three or more domains reuses the training styles
        self.dom = dom
        if cfg.domains >= 3 and dom == cfg.domains - 1:
            self.style = [
                f"d{d}s{j}ado"
                for d in range(cfg.domains - 1)
                for j in range(cfg.style_words)
            ]
        else:
            self.style = [f"d{dom}s{j}ado" for j in range(cfg.style_words)]
        self.mixed = [f"mx{j}el" for j in range(cfg.mixed_nouns)]

    def core_pool(self, label: str) -> list[str]:
        if label == "Agent":
            return self.agent
        if label == "Theme":
            return self.theme
        if label == "Goal":
            return self.goal
        raise KeyError(label)


class _SentenceDraft:
    def __init__(self):
        self.tokens: list[Token] = []
        self.annotations: list[TargetAnnotation] = []

    def add(self, form, lemma, pos, morph, head, deprel) -> int:
        """Append a token; head < 0 is a placeholder patched later."""
        self.tokens.append(
            Token(len(self.tokens) + 1, form, lemma, pos, morph, head, deprel)
        )
        return len(self.tokens)

    def patch_heads(self, placeholder: int, head: int) -> None:
        self.tokens = [
            Token(t.index, t.form, t.lemma, t.pos, t.morph, head, t.deprel)
            if t.head == placeholder
            else t
            for t in self.tokens
        ]


def _noun_morph(rng) -> tuple[str, ...]:
    return ("Number=Plur",) if rng.random() < 0.3 else ("Number=Sing",)


_ZIPF_CACHE: dict[tuple[int, float], np.ndarray] = {}

_CLASS_SUFFIXES = sorted(
    {SUF_AGENT, SUF_THEME, SUF_GOAL, SUF_FILLER, *SUF_NC.values()},
    key=len,
    reverse=True,
)


def _pick(rng, pool: list[str], zipf: float, suffix_noise: float = 0.0) -> str:
    """Draw from a pool with Zipf-skewed usage (rank order = list order).

    With probability ``suffix_noise`` the drawn noun surfaces with a
    neutral suffix instead of its class suffix, so noun-class suffixes
    are informative but not fully reliable.
    """
    key = (len(pool), zipf)
    probs = _ZIPF_CACHE.get(key)
    if probs is None:
        probs = (np.arange(len(pool)) + 1.0) ** -zipf
        probs /= probs.sum()
        _ZIPF_CACHE[key] = probs
    word = pool[int(rng.choice(len(pool), p=probs))]
    if suffix_noise and rng.random() < suffix_noise:
        for suffix in _CLASS_SUFFIXES:
            if word.lower().endswith(suffix):
                word = word[: -len(suffix)] + "el"
                break
    return word


def _np(draft, rng, pool, deprel, head_ph, zipf, with_det=True, suffix_noise=0.0) -> tuple[int, int]:
    """Emit a (det?) noun chunk headed at placeholder; returns span bounds."""
    start = len(draft.tokens) + 1
    if with_det:
        det = DETS[rng.integers(len(DETS))]
        draft.add(det, det, "DET", ("Definite=Def",), -1, "det")
    noun = _pick(rng, pool, zipf, suffix_noise)
    end = draft.add(noun, noun.lower(), "NOUN", _noun_morph(rng), head_ph, deprel)
    if with_det:
        draft.tokens[start - 1] = Token(
            start, draft.tokens[start - 1].form, draft.tokens[start - 1].lemma,
            "DET", draft.tokens[start - 1].morph, end, "det",
        )
    return start, end


def _pp(draft, rng, marker, pool, deprel, head_ph, zipf, suffix_noise=0.0) -> tuple[int, int]:
    """Emit marker + det + noun; returns span bounds including the marker."""
    start = draft.add(marker, marker, "ADP", (), -2, "case")
    _np(draft, rng, pool, deprel, head_ph, zipf, suffix_noise=suffix_noise)
    end = len(draft.tokens)
    draft.tokens[start - 1] = Token(
        start, marker, marker, "ADP", (), end, "case"
    )
    return start, end


def _filler_chunk(draft, rng, vocab, head_ph, cfg: GeneratorConfig) -> None:
    """Unannotated chunk shaped like a real argument chunk."""
    if rng.random() < 0.5:
        marker = NC_MARKERS[NON_CORE[int(rng.integers(3))]]
        _pp(draft, rng, marker, vocab.filler, "obl", head_ph, cfg.zipf, cfg.suffix_noise)
    else:
        _np(draft, rng, vocab.filler, "obl", head_ph, cfg.zipf, suffix_noise=cfg.suffix_noise)


def _style_adverbial(draft, rng, vocab, head_ph) -> None:
    word = vocab.style[int(rng.integers(len(vocab.style)))]
    draft.add(word, word, "ADV", (), head_ph, "advmod")


def _mixed_is_argument(j: int, dom: int, n_domains: int, rng) -> bool:
    """Role of mixed noun j in a domain.

    Training domains alternate deterministically (perfect style-role
    correlation); in the last of three or more domains the role is a
    coin flip, so the correlation does not transfer.
    """
    if n_domains >= 3 and dom == n_domains - 1:
        return bool(rng.random() < 0.5)
    return (j + dom) % 2 == 0


def _mixed_chunk(draft, rng, word, is_argument, cue_noise, head_ph) -> tuple[int, int]:
    """Emit a mixed-noun chunk; real arguments carry a determiner and
    fillers surface bare, up to cue noise.  Returns span bounds."""
    with_det = is_argument ^ (rng.random() < cue_noise)
    start = len(draft.tokens) + 1
    if with_det:
        det = DETS[rng.integers(len(DETS))]
        det_pos = draft.add(det, det, "DET", ("Definite=Def",), -1, "det")
    end = draft.add(word, word, "NOUN", _noun_morph(rng), head_ph, "obj" if is_argument else "obl")
    if with_det:
        draft.tokens[det_pos - 1] = Token(
            det_pos, det, det, "DET", draft.tokens[det_pos - 1].morph, end, "det"
        )
    return start, end


def _verbal_clause(
    draft: _SentenceDraft,
    rng,
    lu: _Lu,
    frame_idx: int,
    frame: str,
    use_cue: bool,
    vocab: _DomainVocab,
    cfg: GeneratorConfig,
    head: int,
    deprel: str,
) -> TargetAnnotation:
    """Emit agent NP + trigger (+cue) + core NP (+ non-core PP); annotate."""
    ph = -9  # placeholder head, patched to the trigger position
    spans: list[Span] = []
    a_start, a_end = _np(
        draft, rng, vocab.agent, "nsubj", ph, cfg.zipf,
        with_det=rng.random() < 0.7, suffix_noise=cfg.suffix_noise,
    )
    spans.append((a_start, a_end, "Agent"))
    if rng.random() < cfg.postverb_filler_rate:
        # unannotated chunk between subject and verb
        _np(draft, rng, vocab.filler, "obl", ph, cfg.zipf,
            with_det=rng.random() < 0.7, suffix_noise=cfg.suffix_noise)
    tense = ("Tense=Pres",) if rng.random() < 0.5 else ("Tense=Past",)
    trigger = draft.add(lu.form, lu.lemma, "VERB", tense, head, deprel)
    if use_cue:
        draft.add(CUE, CUE, "PART", (), trigger, "prt")
    # object region.  A mixed noun may serve as the core argument
    # itself or sit next to the object as a filler; an ordinary filler
    # chunk may precede or follow, so linear position alone cannot
    # identify the argument.
    second = CORE_SECOND[frame_idx % 2]
    mixed_word = None
    mixed_arg = False
    if vocab.mixed and rng.random() < cfg.mixed_rate:
        j = int(rng.integers(len(vocab.mixed)))
        mixed_word = vocab.mixed[j]
        mixed_arg = _mixed_is_argument(j, vocab.dom, cfg.domains, rng)
    obj_filler = rng.random() < cfg.postverb_filler_rate
    filler_first = obj_filler and rng.random() < 0.5
    if filler_first:
        _np(draft, rng, vocab.filler, "obl", ph, cfg.zipf,
            with_det=rng.random() < 0.7, suffix_noise=cfg.suffix_noise)
    if mixed_word is not None and not mixed_arg and rng.random() < 0.5:
        _mixed_chunk(draft, rng, mixed_word, False, cfg.mixed_cue_noise, ph)
        mixed_word = None  # already emitted as a pre-object filler
    if mixed_word is not None and mixed_arg:
        s_start, s_end = _mixed_chunk(
            draft, rng, mixed_word, True, cfg.mixed_cue_noise, ph
        )
        mixed_word = None
    else:
        s_start, s_end = _np(
            draft, rng, vocab.core_pool(second), "obj", ph, cfg.zipf,
            suffix_noise=cfg.suffix_noise,
        )
    spans.append((s_start, s_end, second))
    if mixed_word is not None:
        _mixed_chunk(draft, rng, mixed_word, False, cfg.mixed_cue_noise, ph)
    if obj_filler and not filler_first:
        _np(draft, rng, vocab.filler, "obl", ph, cfg.zipf,
            with_det=rng.random() < 0.7, suffix_noise=cfg.suffix_noise)
    nc_label = NON_CORE[frame_idx % 3]
    if rng.random() < cfg.noncore_rate:
        n_start, n_end = _pp(
            draft, rng, NC_MARKERS[nc_label], vocab.nc[nc_label], "obl", ph,
            cfg.zipf, cfg.suffix_noise,
        )
        spans.append((n_start, n_end, nc_label))
    draft.patch_heads(ph, trigger)
    return TargetAnnotation(trigger, lu.lemma, frame, tuple(sorted(spans)))


def _nominal_clause(
    draft: _SentenceDraft,
    rng,
    lu: _Lu,
    frame_idx: int,
    frame: str,
    vocab: _DomainVocab,
    cfg: GeneratorConfig,
    head: int,
    deprel: str,
) -> TargetAnnotation:
    ph = -9
    spans: list[Span] = []
    det = DETS[rng.integers(len(DETS))]
    det_pos = draft.add(det, det, "DET", ("Definite=Def",), -1, "det")
    trigger = draft.add(lu.form, lu.lemma, "NOUN", _noun_morph(rng), head, deprel)
    draft.tokens[det_pos - 1] = Token(
        det_pos, det, det, "DET", draft.tokens[det_pos - 1].morph, trigger, "det"
    )
    second = CORE_SECOND[frame_idx % 2]
    s_start, s_end = _pp(
        draft, rng, OF, vocab.core_pool(second), "nmod", ph, cfg.zipf, cfg.suffix_noise
    )
    spans.append((s_start, s_end, second))
    nc_label = NON_CORE[frame_idx % 3]
    if rng.random() < cfg.noncore_rate:
        n_start, n_end = _pp(
            draft, rng, NC_MARKERS[nc_label], vocab.nc[nc_label], "nmod", ph,
            cfg.zipf, cfg.suffix_noise,
        )
        spans.append((n_start, n_end, nc_label))
    draft.patch_heads(ph, trigger)
    return TargetAnnotation(trigger, lu.lemma, frame, tuple(sorted(spans)))


def _domain_sense_rate(dom: int, n_domains: int, skew: float) -> float:
    """Probability of the secondary sense of a polysemous LU in a domain.

    Training-style domains alternate between skew and 1-skew; the last
    domain is balanced, so its sense mix matches neither.
    """
    if n_domains == 1:
        return 0.5
    if dom == n_domains - 1:
        return 0.5
    return skew if dom % 2 == 0 else 1.0 - skew


def generate_synthetic(
    config: GeneratorConfig, seed: int
) -> tuple[Corpus, FrameLexicon]:
    """Deterministic (config, seed) -> (corpus, lexicon)."""
    config.validate()
    lexicon, lus = _build_lexicon(config)
    frame_pos = {name: i for i, name in enumerate(lexicon.frames)}
    vocabs = [_DomainVocab(d, config) for d in range(config.domains)]
    rng = np.random.default_rng([7, seed])

    # domain-specific LU prior: a rotated, gently skewed weighting
    base = (np.arange(len(lus)) + 1.0) ** -0.4
    sentences: list[Sentence] = []
    for dom in range(config.domains):
        weights = np.roll(base, dom * max(1, len(lus) // max(1, config.domains)))
        weights = weights / weights.sum()
        rate_b = _domain_sense_rate(dom, config.domains, config.sense_skew)
        vocab = vocabs[dom]
        for _ in range(config.sentences_per_domain):
            draft = _SentenceDraft()
            if vocab.style and rng.random() < config.style_rate:
                _style_adverbial(draft, rng, vocab, -3)
            if rng.random() < config.filler_rate:
                _filler_chunk(draft, rng, vocab, -3, config)
            matrix_pos = 0
            if rng.random() < config.matrix_rate:
                matrix_pos = draft.add(MATRIX, "dire", "VERB", ("Tense=Pres",), 0, "root")
                draft.add(COMP, COMP, "SCONJ", (), -4, "mark")
            lu = lus[int(rng.choice(len(lus), p=weights))]
            if len(lu.frames) > 1 and rng.random() < rate_b:
                frame = lu.frames[1]
                use_cue = True
            else:
                frame = lu.frames[0]
                use_cue = False
            head = matrix_pos if matrix_pos else 0
            deprel = "ccomp" if matrix_pos else "root"
            if lu.pos == "VERB":
                ann = _verbal_clause(
                    draft, rng, lu, frame_pos[frame], frame, use_cue,
                    vocab, config, head, deprel,
                )
            else:
                ann = _nominal_clause(
                    draft, rng, lu, frame_pos[frame], frame,
                    vocab, config, head, deprel,
                )
            annotations = [ann]
            if matrix_pos:
                draft.patch_heads(-4, ann.trigger_index)
            if rng.random() < config.second_target_rate:
                draft.add(CONJ, CONJ, "CCONJ", (), -5, "cc")
                lu2 = lus[int(rng.choice(len(lus), p=weights))]
                if lu2.pos == "NOUN":
                    ann2 = _nominal_clause(
                        draft, rng, lu2, frame_pos[lu2.frames[0]], lu2.frames[0],
                        vocab, config, ann.trigger_index, "conj",
                    )
                else:
                    if len(lu2.frames) > 1 and rng.random() < rate_b:
                        frame2, cue2 = lu2.frames[1], True
                    else:
                        frame2, cue2 = lu2.frames[0], False
                    ann2 = _verbal_clause(
                        draft, rng, lu2, frame_pos[frame2], frame2, cue2,
                        vocab, config, ann.trigger_index, "conj",
                    )
                draft.patch_heads(-5, ann2.trigger_index)
                annotations.append(ann2)
            if rng.random() < config.filler_rate * 0.5:
                _filler_chunk(draft, rng, vocab, ann.trigger_index, config)
            if vocab.style and rng.random() < config.style_rate:
                _style_adverbial(draft, rng, vocab, ann.trigger_index)
            draft.patch_heads(-3, ann.trigger_index)
            if config.deprel_noise:
                # imperfect automatic parses: noun relations degrade
                draft.tokens = [
                    Token(t.index, t.form, t.lemma, t.pos, t.morph, t.head, "dep")
                    if t.pos == "NOUN" and rng.random() < config.deprel_noise
                    else t
                    for t in draft.tokens
                ]
            sentences.append(
                Sentence(tuple(draft.tokens), tuple(annotations), f"d{dom}")
            )
    return Corpus(tuple(sentences)), lexicon

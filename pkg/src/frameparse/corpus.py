"""Frame-annotated corpora and frame lexicons.

Text formats
------------

Corpus files are UTF-8 with LF line endings.  A sentence is a block of
token lines followed by annotation lines and is terminated by a blank
line::

    #domain ww1
    1	Le	le	DET	Definite=Def	2	det
    2	soldat	soldat	NOUN	Number=Sing	3	nsubj
    3	attaque	attaquer	VERB	Tense=Pres	0	root
    #target 3 attaquer Attack
    #fe 1 1 2 Assailant

Token lines carry seven TAB-separated columns: ``INDEX FORM LEMMA POS
MORPH HEAD DEPREL``.  ``INDEX`` counts from 1 and must be consecutive.
``MORPH`` is ``_`` or ``key=value`` pairs joined by ``|``.  ``HEAD`` is
the index of the governing token, 0 for the root.  ``#domain <name>``
lines may appear before the first token and record gold domain
metadata.  ``#target <trigger> <lu> <frame>`` declares an annotation;
``#fe <target_ordinal> <start> <end> <label>`` attaches a frame-element
span (end inclusive, positions 1-based) to the target_ordinal-th
``#target`` of the sentence.  Within one annotation, element spans must
not overlap each other or cover the trigger position (the trigger
carries its own tag in the BIO encoding).

Lexicon files are line oriented: ``frame <NAME>`` opens a frame,
``fe <LABEL> <core|non-core>`` adds a frame element to the most
recently opened frame, and ``lu <LEMMA> <FRAME>`` maps a lexical unit
to a candidate frame that must already be declared.  ``#`` starts a
comment line.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator


class CorpusError(Exception):
    """Base class for corpus and lexicon failures."""


class ParseError(CorpusError):
    """Malformed input line; carries the 1-based line number."""

    def __init__(self, message: str, line_no: int | None = None):
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)
        self.line_no = line_no


class ValidationError(CorpusError):
    """Structurally well-formed input violating a consistency rule."""


class LexiconError(CorpusError):
    """Inconsistent frame lexicon."""


Span = tuple[int, int, str]  # (start, end, fe_label), positions 1-based, end inclusive


@dataclass(frozen=True)
class Token:
    index: int
    form: str
    lemma: str
    pos: str
    morph: tuple[str, ...]  # "key=value" entries, file order preserved
    head: int  # index of the head token, 0 = root
    deprel: str


@dataclass(frozen=True)
class TargetAnnotation:
    trigger_index: int
    lu: str
    frame: str
    elements: tuple[Span, ...] = ()


@dataclass(frozen=True)
class Sentence:
    tokens: tuple[Token, ...]
    annotations: tuple[TargetAnnotation, ...] = ()
    domain: str | None = None

    def __len__(self) -> int:
        return len(self.tokens)

    @property
    def forms(self) -> tuple[str, ...]:
        return tuple(t.form for t in self.tokens)


@dataclass(frozen=True)
class Corpus:
    sentences: tuple[Sentence, ...] = ()

    def __len__(self) -> int:
        return len(self.sentences)

    def __iter__(self) -> Iterator[Sentence]:
        return iter(self.sentences)


class FrameLexicon:
    """Lexical units, their candidate frames, and frame-element inventories.

    Declaration order is preserved: it defines the tie-break order for
    frame selection and the label-inventory order.
    """

    def __init__(self):
        self.frames: list[str] = []
        self.frame_to_fes: dict[str, list[tuple[str, bool]]] = {}  # (label, is_core)
        self.lu_to_frames: dict[str, list[str]] = {}

    def add_frame(self, name: str) -> None:
        if name in self.frame_to_fes:
            raise LexiconError(f"frame {name!r} declared twice")
        self.frames.append(name)
        self.frame_to_fes[name] = []

    def add_fe(self, frame: str, label: str, core: bool) -> None:
        fes = self.frame_to_fes.get(frame)
        if fes is None:
            raise LexiconError(f"fe {label!r} declared before any frame")
        if any(lbl == label for lbl, _ in fes):
            raise LexiconError(f"duplicate fe {label!r} in frame {frame!r}")
        fes.append((label, core))

    def add_lu(self, lemma: str, frame: str) -> None:
        if frame not in self.frame_to_fes:
            raise ValidationError(f"lu {lemma!r} references undeclared frame {frame!r}")
        frames = self.lu_to_frames.setdefault(lemma, [])
        if frame in frames:
            raise LexiconError(f"duplicate lu mapping {lemma!r} -> {frame!r}")
        frames.append(frame)

    def candidates(self, lu: str) -> tuple[str, ...]:
        """Candidate frames of a lexical unit, in declaration order."""
        return tuple(self.lu_to_frames.get(lu, ()))

    def has_lu(self, lu: str) -> bool:
        return lu in self.lu_to_frames

    def fe_labels(self, frame: str) -> tuple[str, ...]:
        return tuple(lbl for lbl, _ in self.frame_to_fes[frame])

    def is_core(self, frame: str, label: str) -> bool:
        for lbl, core in self.frame_to_fes[frame]:
            if lbl == label:
                return core
        raise LexiconError(f"fe {label!r} not in frame {frame!r}")

    def unique_fe_labels(self) -> tuple[str, ...]:
        """All frame-element labels in first-declaration order, deduplicated."""
        seen: dict[str, None] = {}
        for frame in self.frames:
            for lbl, _ in self.frame_to_fes[frame]:
                seen.setdefault(lbl, None)
        return tuple(seen)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, FrameLexicon)
            and self.frames == other.frames
            and self.frame_to_fes == other.frame_to_fes
            and self.lu_to_frames == other.lu_to_frames
        )


@dataclass(eq=True)
class TargetInstance:
    """One training/evaluation sample: a sentence viewed from one trigger."""

    sentence: Sentence
    annotation: TargetAnnotation
    gold_tags: tuple[str, ...]
    domain_label: int | None = None

    @property
    def trigger_index(self) -> int:
        return self.annotation.trigger_index

    @property
    def lu(self) -> str:
        return self.annotation.lu

    @property
    def frame(self) -> str:
        return self.annotation.frame


# ---------------------------------------------------------------------------
# corpus parsing / serialization


def _parse_token_line(line: str, line_no: int) -> Token:
    parts = line.split("\t")
    if len(parts) != 7:
        raise ParseError(
            f"expected 7 tab-separated token fields, got {len(parts)}", line_no
        )
    idx_s, form, lemma, pos, morph_s, head_s, deprel = parts
    try:
        index = int(idx_s)
    except ValueError:
        raise ParseError(f"bad token index {idx_s!r}", line_no) from None
    try:
        head = int(head_s)
    except ValueError:
        raise ParseError(f"bad head index {head_s!r}", line_no) from None
    if not form or not lemma or not pos or not deprel:
        raise ParseError("empty token field", line_no)
    if morph_s == "_":
        morph: tuple[str, ...] = ()
    else:
        morph = tuple(morph_s.split("|"))
        for item in morph:
            if "=" not in item:
                raise ParseError(f"bad morph attribute {item!r}", line_no)
    return Token(index, form, lemma, pos, morph, head, deprel)


class _SentenceBuilder:
    def __init__(self):
        self.domain: str | None = None
        self.tokens: list[Token] = []
        self.targets: list[tuple[int, str, str]] = []
        self.fes: list[list[Span]] = []

    def finish(self) -> Sentence:
        n = len(self.tokens)
        for i, tok in enumerate(self.tokens):
            if tok.index != i + 1:
                raise ValidationError(
                    f"token indices must be consecutive from 1, got {tok.index} "
                    f"at position {i + 1}"
                )
            if not (0 <= tok.head <= n):
                raise ValidationError(
                    f"head {tok.head} of token {tok.index} outside sentence of {n} tokens"
                )
        annotations = []
        for (trigger, lu, frame), spans in zip(self.targets, self.fes):
            if not (1 <= trigger <= n):
                raise ValidationError(f"trigger index {trigger} outside sentence")
            ordered = sorted(spans)
            prev_end = 0
            for start, end, label in ordered:
                if not (1 <= start <= end <= n):
                    raise ValidationError(
                        f"span ({start},{end},{label}) outside sentence of {n} tokens"
                    )
                if start <= prev_end:
                    raise ValidationError(
                        f"overlapping element spans in annotation of {lu!r}"
                    )
                if start <= trigger <= end:
                    raise ValidationError(
                        f"span ({start},{end},{label}) covers trigger position {trigger}"
                    )
                prev_end = end
            annotations.append(TargetAnnotation(trigger, lu, frame, tuple(ordered)))
        return Sentence(tuple(self.tokens), tuple(annotations), self.domain)


def parse_corpus(stream: Iterable[str] | str) -> Corpus:
    """Parse a corpus file into a :class:`Corpus`.

    ``stream`` may be an open text file, any iterable of lines, or a
    complete document as a single string.
    """
    if isinstance(stream, str):
        stream = stream.splitlines()
    sentences: list[Sentence] = []
    builder: _SentenceBuilder | None = None
    for line_no, raw in enumerate(stream, start=1):
        line = raw.rstrip("\n").rstrip("\r")
        if not line.strip():
            if builder is not None:
                sentences.append(builder.finish())
                builder = None
            continue
        if builder is None:
            builder = _SentenceBuilder()
        if line.startswith("#domain"):
            parts = line.split()
            if len(parts) != 2:
                raise ParseError("expected `#domain <name>`", line_no)
            if builder.tokens:
                raise ParseError("#domain must precede the token block", line_no)
            if builder.domain is not None:
                raise ParseError("duplicate #domain line", line_no)
            builder.domain = parts[1]
        elif line.startswith("#target"):
            parts = line.split()
            if len(parts) != 4:
                raise ParseError("expected `#target <trigger> <lu> <frame>`", line_no)
            if not builder.tokens:
                raise ParseError("#target before any token line", line_no)
            try:
                trigger = int(parts[1])
            except ValueError:
                raise ParseError(f"bad trigger index {parts[1]!r}", line_no) from None
            builder.targets.append((trigger, parts[2], parts[3]))
            builder.fes.append([])
        elif line.startswith("#fe"):
            parts = line.split()
            if len(parts) != 5:
                raise ParseError(
                    "expected `#fe <target_ordinal> <start> <end> <label>`", line_no
                )
            try:
                ordinal, start, end = int(parts[1]), int(parts[2]), int(parts[3])
            except ValueError:
                raise ParseError("bad integer field in #fe line", line_no) from None
            if not (1 <= ordinal <= len(builder.targets)):
                raise ParseError(
                    f"#fe references target {ordinal} but only "
                    f"{len(builder.targets)} declared so far",
                    line_no,
                )
            builder.fes[ordinal - 1].append((start, end, parts[4]))
        elif line.startswith("#"):
            raise ParseError(f"unknown annotation line {line.split()[0]!r}", line_no)
        else:
            builder.tokens.append(_parse_token_line(line, line_no))
    if builder is not None:
        sentences.append(builder.finish())
    return Corpus(tuple(sentences))


def serialize_corpus(corpus: Corpus) -> str:
    """Render a corpus in the canonical file format (inverse of parse)."""
    out: list[str] = []
    for sent in corpus:
        if sent.domain is not None:
            out.append(f"#domain {sent.domain}")
        for tok in sent.tokens:
            morph = "|".join(tok.morph) if tok.morph else "_"
            out.append(
                f"{tok.index}\t{tok.form}\t{tok.lemma}\t{tok.pos}\t{morph}"
                f"\t{tok.head}\t{tok.deprel}"
            )
        for ann in sent.annotations:
            out.append(f"#target {ann.trigger_index} {ann.lu} {ann.frame}")
        for ordinal, ann in enumerate(sent.annotations, start=1):
            for start, end, label in ann.elements:
                out.append(f"#fe {ordinal} {start} {end} {label}")
        out.append("")
    return "\n".join(out) + ("\n" if out else "")


# ---------------------------------------------------------------------------
# lexicon parsing / serialization


def load_lexicon(stream: Iterable[str] | str) -> FrameLexicon:
    """Parse a lexicon file into a :class:`FrameLexicon`."""
    if isinstance(stream, str):
        stream = stream.splitlines()
    lexicon = FrameLexicon()
    current_frame: str | None = None
    for line_no, raw in enumerate(stream, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        kind = parts[0]
        if kind == "frame":
            if len(parts) != 2:
                raise ParseError("expected `frame <NAME>`", line_no)
            lexicon.add_frame(parts[1])
            current_frame = parts[1]
        elif kind == "fe":
            if len(parts) != 3 or parts[2] not in ("core", "non-core"):
                raise ParseError("expected `fe <LABEL> <core|non-core>`", line_no)
            if current_frame is None:
                raise LexiconError(f"line {line_no}: fe before any frame")
            lexicon.add_fe(current_frame, parts[1], parts[2] == "core")
        elif kind == "lu":
            if len(parts) != 3:
                raise ParseError("expected `lu <LEMMA> <FRAME>`", line_no)
            lexicon.add_lu(parts[1], parts[2])
        else:
            raise ParseError(f"unknown record type {kind!r}", line_no)
    return lexicon


def serialize_lexicon(lexicon: FrameLexicon) -> str:
    out: list[str] = []
    for frame in lexicon.frames:
        out.append(f"frame {frame}")
        for label, core in lexicon.frame_to_fes[frame]:
            out.append(f"fe {label} {'core' if core else 'non-core'}")
    for lemma, frames in lexicon.lu_to_frames.items():
        for frame in frames:
            out.append(f"lu {lemma} {frame}")
    return "\n".join(out) + ("\n" if out else "")


# ---------------------------------------------------------------------------
# instances


def encode_bio(
    n_tokens: int, trigger_index: int, frame: str, elements: Iterable[Span]
) -> tuple[str, ...]:
    """Per-token tags: ``T-<frame>`` at the trigger, ``B-/I-<fe>`` over
    element spans, ``O`` elsewhere."""
    tags = ["O"] * n_tokens
    tags[trigger_index - 1] = f"T-{frame}"
    for start, end, label in elements:
        tags[start - 1] = f"B-{label}"
        for pos in range(start + 1, end + 1):
            tags[pos - 1] = f"I-{label}"
    return tuple(tags)


def validate_against(corpus: Corpus, lexicon: FrameLexicon) -> None:
    """Check every annotation against the lexicon.

    Raises :class:`ValidationError` when a frame is not a candidate of
    its lexical unit or an element label is outside the frame's
    inventory.
    """
    for s_no, sent in enumerate(corpus, start=1):
        for ann in sent.annotations:
            cands = lexicon.candidates(ann.lu)
            if ann.frame not in cands:
                raise ValidationError(
                    f"sentence {s_no}: frame {ann.frame!r} is not a candidate "
                    f"of lu {ann.lu!r} (candidates: {list(cands)})"
                )
            inventory = set(lexicon.fe_labels(ann.frame))
            for _, _, label in ann.elements:
                if label not in inventory:
                    raise ValidationError(
                        f"sentence {s_no}: fe {label!r} not in frame "
                        f"{ann.frame!r} inventory"
                    )


def extract_instances(corpus: Corpus, lexicon: FrameLexicon) -> list[TargetInstance]:
    """One :class:`TargetInstance` per (sentence, trigger) pair.

    The corpus is validated against the lexicon first; gold tags are
    the BIO encoding of each annotation.
    """
    validate_against(corpus, lexicon)
    instances = []
    for sent in corpus:
        for ann in sent.annotations:
            tags = encode_bio(len(sent), ann.trigger_index, ann.frame, ann.elements)
            instances.append(TargetInstance(sent, ann, tags))
    return instances


def assign_gold_domains(instances: list[TargetInstance]) -> dict[str, int]:
    """Fill ``domain_label`` from ``#domain`` metadata.

    Domain indices follow first appearance order.  Raises
    :class:`ValidationError` when any sentence lacks the metadata.
    """
    index: dict[str, int] = {}
    for inst in instances:
        name = inst.sentence.domain
        if name is None:
            raise ValidationError("sentence without #domain metadata in gold mode")
        if name not in index:
            index[name] = len(index)
        inst.domain_label = index[name]
    return index

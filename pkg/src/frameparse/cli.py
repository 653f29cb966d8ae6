"""Command-line pipeline: gen, cluster, train, eval, sweep, breakdown, decode.

Every option can come from a plain-text ``key=value`` config file
(``--config``), with command-line flags taking precedence; the values
actually used are written back to ``resolved_<command>.cfg`` in the
output directory, so any run is reproducible from that file plus the
corpus files.  All outputs carry fixed file names under ``--out``.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import adversary, clustering, corpus as corpus_mod, decoder, generate, metrics
from .adversary import AdversaryHead, TrainConfig
from .clustering import WordEmbeddings
from .numerics import ParamSet, load_tensors, save_tensors
from .tagger import (
    MODEL_STREAM,
    SPLIT_STREAM,
    LabelInventory,
    ModelConfig,
    ParserModel,
    Vocabularies,
)


class CliConfigError(ValueError):
    pass


class VersionError(RuntimeError):
    """Checkpoint and corpus/lexicon disagree on the label inventory."""


DEFAULTS: dict[str, object] = {
    "seed": 0,
    "epochs": 30,
    "lr": 0.05,
    "batch": 16,
    "domains": "inferred",
    "k": 5,
    "restarts": 10,
    "clip": 5.0,
    "delta": 0.0,
    "grid": "-0.4:0.8:0.1",
    "hidden": 32,
    "word_dim": 32,
    "feat_dim": 8,
    "layers": 4,
    "threads": 1,
    "conv_filters": 16,
    "gen_domains": 2,
    "sentences": 100,
    "frames": 6,
    "lus": 12,
    "polysemous_frac": 0.34,
    "holdout_frac": 0.2,
    "ood_domains": 0,
}


def read_config_file(path) -> dict[str, str]:
    values: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise CliConfigError(f"{path}:{line_no}: expected key=value")
            key, value = line.split("=", 1)
            values[key.strip()] = value.strip()
    return values


class Settings:
    """Layered option lookup: flag > config file > default."""

    def __init__(self, args: argparse.Namespace):
        self.flags = vars(args)
        self.filevals = (
            read_config_file(self.flags["config"]) if self.flags.get("config") else {}
        )
        self.resolved: dict[str, object] = {}

    def get(self, key: str, cast=str, default=None):
        value = self.flags.get(key)
        if value is None and key in self.filevals:
            value = self.filevals[key]
        if value is None:
            value = DEFAULTS.get(key, default)
        if value is None:
            self.resolved[key] = ""
            return None
        if cast is bool and isinstance(value, str):
            value = value.lower() in ("1", "true", "yes")
        else:
            value = cast(value)
        self.resolved[key] = value
        return value

    def require(self, key: str, cast=str):
        value = self.get(key, cast)
        if value is None:
            raise CliConfigError(f"missing required option {key!r}")
        return value

    def write_resolved(self, out_dir: Path, command: str) -> None:
        lines = [f"{k}={self.resolved[k]}" for k in sorted(self.resolved)]
        (out_dir / f"resolved_{command}.cfg").write_text(
            "\n".join(lines) + "\n", encoding="utf-8"
        )


def parse_grid(spec: str) -> list[float]:
    parts = spec.split(":")
    if len(parts) != 3:
        raise CliConfigError(f"grid must be start:stop:step, got {spec!r}")
    start, stop, step = (float(p) for p in parts)
    if step <= 0:
        raise CliConfigError("grid step must be positive")
    n = int(round((stop - start) / step)) + 1
    return [round(start + i * step, 10) for i in range(n)]


# ---------------------------------------------------------------------------
# checkpoint files


def save_checkpoint(
    out_dir: Path, model: ParserModel, head: AdversaryHead | None
) -> None:
    tensors = dict(model.params.params)
    if head is not None:
        for name, arr in head.params.params.items():
            tensors[f"head.{name}"] = arr
    save_tensors(out_dir / "checkpoint.bin", tensors)
    meta = {
        "vocabs": model.vocabs.to_dict(),
        "labels": list(model.labels.labels),
        "model_config": {
            "word_dim": model.config.word_dim,
            "feat_dim": model.config.feat_dim,
            "hidden": model.config.hidden,
            "layers": model.config.layers,
        },
        "head": None
        if head is None
        else {"k": head.k, "widths": list(head.widths), "filters": head.filters},
    }
    (out_dir / "checkpoint.meta.json").write_text(
        json.dumps(meta, indent=1, sort_keys=True), encoding="utf-8"
    )


def load_checkpoint(path) -> tuple[ParserModel, AdversaryHead | None]:
    path = Path(path)
    if path.is_dir():
        bin_path, meta_path = path / "checkpoint.bin", path / "checkpoint.meta.json"
    else:
        bin_path = path
        meta_path = path.with_suffix(".meta.json")
    meta = json.loads(meta_path.read_text(encoding="utf-8"))
    tensors = load_tensors(bin_path)
    vocabs = Vocabularies.from_dict(meta["vocabs"])
    labels = LabelInventory(meta["labels"])
    config = ModelConfig(**meta["model_config"])
    model_ps = ParamSet()
    head_ps = ParamSet()
    for name, arr in tensors.items():
        if name.startswith("head."):
            head_ps.add(name[len("head.") :], arr)
        else:
            model_ps.add(name, arr)
    model = ParserModel(config, vocabs, labels, model_ps)
    head = None
    if meta["head"] is not None:
        head = AdversaryHead(
            meta["head"]["k"],
            tuple(meta["head"]["widths"]),
            meta["head"]["filters"],
            head_ps,
        )
    return model, head


# ---------------------------------------------------------------------------
# shared loading helpers


def _load_corpus_and_lexicon(corpus_path, lexicon_path):
    with open(corpus_path, "r", encoding="utf-8") as fh:
        corp = corpus_mod.parse_corpus(fh)
    with open(lexicon_path, "r", encoding="utf-8") as fh:
        lexicon = corpus_mod.load_lexicon(fh)
    return corp, lexicon


def _check_inventory(model: ParserModel, lexicon) -> None:
    expected = LabelInventory.from_lexicon(lexicon)
    if expected != model.labels:
        raise VersionError(
            "checkpoint label inventory does not match the lexicon; "
            "re-train or use the original lexicon file"
        )


def _word_table_for_clustering(settings: Settings, vocabs: Vocabularies) -> WordEmbeddings:
    emb_path = settings.get("embeddings")
    if emb_path:
        return clustering.load_word_embeddings(emb_path)
    # same stream and draw order as ParserModel.build, so the table
    # equals the tagger's initial word embeddings for this seed
    rng = np.random.default_rng([settings.resolved["seed"], MODEL_STREAM])
    from .numerics import glorot_uniform

    table = glorot_uniform(
        rng, (len(vocabs.word), settings.resolved.get("word_dim", DEFAULTS["word_dim"]))
    )
    return WordEmbeddings(vocabs.word.index, table)


def _unique_sentences(instances):
    seen: dict[int, object] = {}
    for inst in instances:
        seen.setdefault(id(inst.sentence), inst.sentence)
    return list(seen.values())


# ---------------------------------------------------------------------------
# commands


def cmd_gen(settings: Settings, out_dir: Path) -> int:
    cfg = generate.GeneratorConfig(
        domains=settings.require("gen_domains", int),
        sentences_per_domain=settings.require("sentences", int),
        frames=settings.get("frames", int),
        lexical_units=settings.get("lus", int),
        polysemous_fraction=settings.get("polysemous_frac", float),
    )
    seed = settings.get("seed", int)
    holdout = settings.get("holdout_frac", float)
    ood = settings.get("ood_domains", int)
    corp, lexicon = generate.generate_synthetic(cfg, seed)
    (out_dir / "corpus.txt").write_text(
        corpus_mod.serialize_corpus(corp), encoding="utf-8"
    )
    (out_dir / "lexicon.txt").write_text(
        corpus_mod.serialize_lexicon(lexicon), encoding="utf-8"
    )
    ood_names = {f"d{d}" for d in range(cfg.domains - ood, cfg.domains)}
    rng = np.random.default_rng([seed, SPLIT_STREAM])
    train_sents, test_in, test_ood = [], [], []
    by_domain: dict[str, list] = {}
    for sent in corp:
        by_domain.setdefault(sent.domain, []).append(sent)
    for name in sorted(by_domain):
        sents = by_domain[name]
        if name in ood_names:
            test_ood.extend(sents)
            continue
        order = rng.permutation(len(sents))
        n_hold = int(round(holdout * len(sents)))
        held = set(order[:n_hold].tolist())
        for i, sent in enumerate(sents):
            (test_in if i in held else train_sents).append(sent)
    (out_dir / "train.txt").write_text(
        corpus_mod.serialize_corpus(corpus_mod.Corpus(tuple(train_sents))),
        encoding="utf-8",
    )
    (out_dir / "test_in.txt").write_text(
        corpus_mod.serialize_corpus(corpus_mod.Corpus(tuple(test_in))),
        encoding="utf-8",
    )
    if ood:
        (out_dir / "test_ood.txt").write_text(
            corpus_mod.serialize_corpus(corpus_mod.Corpus(tuple(test_ood))),
            encoding="utf-8",
        )
    print(
        f"generated {len(corp)} sentences over {cfg.domains} domains "
        f"({sum(len(s.annotations) for s in corp)} targets)"
    )
    return 0


def cmd_cluster(settings: Settings, out_dir: Path) -> int:
    corpus_path = settings.require("corpus")
    with open(corpus_path, "r", encoding="utf-8") as fh:
        corp = corpus_mod.parse_corpus(fh)
    seed = settings.get("seed", int)
    k = settings.get("k", int)
    restarts = settings.get("restarts", int)
    threads = settings.get("threads", int)
    settings.get("word_dim", int)
    vocabs = Vocabularies.build(corp)
    embeddings = _word_table_for_clustering(settings, vocabs)
    vectors = np.array(
        [clustering.sentence_embedding(s, embeddings) for s in corp]
    )
    cm = clustering.kmeans_fit(vectors, k, restarts=restarts, seed=seed, threads=threads)
    clustering.save_cluster_model(out_dir / "cluster_model.txt", cm)
    with open(out_dir / "cluster_assignments.tsv", "w", encoding="utf-8") as fh:
        for i, vec in enumerate(vectors, start=1):
            fh.write(f"{i}\t{clustering.assign(cm, vec)}\n")
    print(f"k={k} inertia={cm.inertia:.6f}")
    return 0


def cmd_train(settings: Settings, out_dir: Path) -> int:
    corp, lexicon = _load_corpus_and_lexicon(
        settings.require("corpus"), settings.require("lexicon")
    )
    instances = corpus_mod.extract_instances(corp, lexicon)
    seed = settings.get("seed", int)
    domains = settings.get("domains")
    if domains not in ("none", "inferred", "gold"):
        raise CliConfigError(f"domains must be none|inferred|gold, got {domains!r}")
    mc = ModelConfig(
        word_dim=settings.get("word_dim", int),
        feat_dim=settings.get("feat_dim", int),
        hidden=settings.get("hidden", int),
        layers=settings.get("layers", int),
    )
    vocabs = Vocabularies.build(corp)
    labels = LabelInventory.from_lexicon(lexicon)
    model = ParserModel.build(vocabs, labels, mc, seed)
    k = settings.get("k", int)
    if domains == "gold":
        mapping = corpus_mod.assign_gold_domains(instances)
        k = len(mapping)
    elif domains == "inferred":
        embeddings = model.word_embeddings()
        emb_path = settings.get("embeddings")
        if emb_path:
            embeddings = clustering.load_word_embeddings(emb_path)
        sentences = _unique_sentences(instances)
        vectors = np.array(
            [clustering.sentence_embedding(s, embeddings) for s in sentences]
        )
        cm = clustering.kmeans_fit(
            vectors,
            k,
            restarts=settings.get("restarts", int),
            seed=seed,
            threads=settings.get("threads", int),
        )
        clustering.save_cluster_model(out_dir / "cluster_model.txt", cm)
        clustering.label_corpus(instances, cm, embeddings)
        with open(out_dir / "cluster_assignments.tsv", "w", encoding="utf-8") as fh:
            for i, sent in enumerate(sentences, start=1):
                fh.write(
                    f"{i}\t{clustering.assign(cm, clustering.sentence_embedding(sent, embeddings))}\n"
                )
    config = TrainConfig(
        epochs=settings.get("epochs", int),
        learning_rate=settings.get("lr", float),
        batch_size=settings.get("batch", int),
        seed=seed,
        adversarial_enabled=domains != "none",
        k=k,
        clip_norm=settings.get("clip", float),
    )
    result = adversary.train(
        instances,
        lexicon,
        config,
        mc,
        model=model,
        head_filters=settings.get("conv_filters", int),
    )
    save_checkpoint(out_dir, result.model, result.head)
    (out_dir / "train_log.csv").write_text(
        adversary.log_to_csv(result.log), encoding="utf-8"
    )
    final = result.log[-1]
    print(
        f"trained {config.epochs} epochs; final loss_frame={final.loss_frame:.4f} "
        f"train_f1={final.train_f1:.4f}"
    )
    return 0


def _eval_frame(settings: Settings):
    model, head = load_checkpoint(settings.require("checkpoint"))
    corp, lexicon = _load_corpus_and_lexicon(
        settings.require("corpus"), settings.require("lexicon")
    )
    _check_inventory(model, lexicon)
    instances = corpus_mod.extract_instances(corp, lexicon)
    return model, head, lexicon, instances


def cmd_eval(settings: Settings, out_dir: Path) -> int:
    model, _, lexicon, instances = _eval_frame(settings)
    delta = decoder.DecodeConfig(delta=settings.get("delta", float)).delta
    threads = settings.get("threads", int)
    report = metrics.evaluate(model, instances, lexicon, delta, threads=threads)
    lines = ["level,delta,precision,recall,f1"]
    for level in metrics.LEVELS:
        p, r, f = report.prf(level)
        lines.append(f"{level},{delta:.6f},{p:.6f},{r:.6f},{f:.6f}")
    (out_dir / "eval.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    print("\n".join(lines))
    return 0


def cmd_sweep(settings: Settings, out_dir: Path) -> int:
    model, _, lexicon, instances = _eval_frame(settings)
    grid = parse_grid(settings.get("grid"))
    threads = settings.get("threads", int)
    result = metrics.sweep(model, instances, lexicon, grid, threads=threads)
    lines = ["level,delta,precision,recall,f1"]
    for level in metrics.LEVELS:
        for delta, p, r, f in result.points[level]:
            lines.append(f"{level},{delta:.6f},{p:.6f},{r:.6f},{f:.6f}")
    (out_dir / "sweep.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    summary = " ".join(
        f"{level}:delta={result.fmax[level][0]:.6f},f1={result.fmax[level][1]:.6f}"
        for level in metrics.LEVELS
    )
    (out_dir / "fmax.txt").write_text(summary + "\n", encoding="utf-8")
    print(summary)
    return 0


def cmd_breakdown(settings: Settings, out_dir: Path) -> int:
    model, _, lexicon, instances = _eval_frame(settings)
    delta = decoder.DecodeConfig(delta=settings.get("delta", float)).delta
    pairs = []
    for inst in instances:
        try:
            hyp = decoder.parse_instance(model, inst, lexicon, delta)
        except decoder.UnknownLexicalUnitError:
            hyp = None
        pairs.append((inst, hyp))
    rows = metrics.breakdown(pairs, lexicon)
    lines = ["factor,tp,fp,fn,precision,recall,f1,empty"]
    for row in rows:
        p, r, f = row.prf()
        lines.append(
            f"{row.name},{row.tp},{row.fp},{row.fn},{p:.6f},{r:.6f},{f:.6f},"
            f"{'yes' if row.empty else 'no'}"
        )
    (out_dir / "breakdown.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    print("\n".join(lines))
    return 0


def cmd_decode(settings: Settings, out_dir: Path) -> int:
    model, _, lexicon, instances = _eval_frame(settings)
    delta = decoder.DecodeConfig(delta=settings.get("delta", float)).delta
    hyps_by_sentence: dict[int, list] = {}
    for inst in instances:
        try:
            hyp = decoder.parse_instance(model, inst, lexicon, delta)
        except decoder.UnknownLexicalUnitError:
            continue
        hyps_by_sentence.setdefault(id(inst.sentence), []).append(
            corpus_mod.TargetAnnotation(
                hyp.trigger_index, inst.lu, hyp.frame, hyp.elements
            )
        )
    sentences = []
    seen: dict[int, None] = {}
    for inst in instances:
        key = id(inst.sentence)
        if key in seen:
            continue
        seen[key] = None
        sent = inst.sentence
        sentences.append(
            corpus_mod.Sentence(
                sent.tokens, tuple(hyps_by_sentence.get(key, ())), sent.domain
            )
        )
    (out_dir / "decoded.txt").write_text(
        corpus_mod.serialize_corpus(corpus_mod.Corpus(tuple(sentences))),
        encoding="utf-8",
    )
    print(f"decoded {len(instances)} targets over {len(sentences)} sentences")
    return 0


# ---------------------------------------------------------------------------
# argument parsing


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", help="key=value config file")
    sub.add_argument("--out", required=True, help="output directory")
    sub.add_argument("--seed", type=int)
    sub.add_argument("--threads", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="frameparse",
        description="Domain-adversarial semantic frame tagging pipeline",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("gen", help="generate a synthetic multi-domain corpus")
    _add_common(p)
    p.add_argument("--domains", dest="gen_domains", type=int)
    p.add_argument("--sentences", type=int, help="sentences per domain")
    p.add_argument("--frames", type=int)
    p.add_argument("--lus", type=int)
    p.add_argument("--polysemous-frac", dest="polysemous_frac", type=float)
    p.add_argument("--holdout-frac", dest="holdout_frac", type=float)
    p.add_argument("--ood-domains", dest="ood_domains", type=int)

    p = subs.add_parser("cluster", help="fit the domain-inference cluster model")
    _add_common(p)
    p.add_argument("--corpus", required=True)
    p.add_argument("--k", type=int)
    p.add_argument("--restarts", type=int)
    p.add_argument("--embeddings")
    p.add_argument("--word-dim", dest="word_dim", type=int)

    p = subs.add_parser("train", help="train the tagger (baseline or adversarial)")
    _add_common(p)
    p.add_argument("--corpus", required=True)
    p.add_argument("--lexicon", required=True)
    p.add_argument("--domains", choices=("none", "inferred", "gold"))
    p.add_argument("--epochs", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--batch", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--restarts", type=int)
    p.add_argument("--clip", type=float)
    p.add_argument("--hidden", type=int)
    p.add_argument("--word-dim", dest="word_dim", type=int)
    p.add_argument("--feat-dim", dest="feat_dim", type=int)
    p.add_argument("--layers", type=int)
    p.add_argument("--conv-filters", dest="conv_filters", type=int)
    p.add_argument("--embeddings")

    for name, helptext in (
        ("eval", "score a checkpoint at one delta"),
        ("sweep", "P/R curve and Fmax over a delta grid"),
        ("breakdown", "complexity-factor argument scores"),
        ("decode", "write predicted annotations in corpus format"),
    ):
        p = subs.add_parser(name, help=helptext)
        _add_common(p)
        p.add_argument("--checkpoint", required=True)
        p.add_argument("--corpus", required=True)
        p.add_argument("--lexicon", required=True)
        if name == "sweep":
            p.add_argument("--grid")
        else:
            p.add_argument("--delta", type=float)
    return parser


COMMANDS = {
    "gen": cmd_gen,
    "cluster": cmd_cluster,
    "train": cmd_train,
    "eval": cmd_eval,
    "sweep": cmd_sweep,
    "breakdown": cmd_breakdown,
    "decode": cmd_decode,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    settings = Settings(args)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    settings.get("seed", int)
    try:
        status = COMMANDS[args.command](settings, out_dir)
    except (
        CliConfigError,
        VersionError,
        ValueError,
        corpus_mod.CorpusError,
        generate.ConfigError,
        adversary.ConfigurationError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    settings.write_resolved(out_dir, args.command)
    return status


if __name__ == "__main__":
    sys.exit(main())

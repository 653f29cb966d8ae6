import io

import pytest

from frameparse import corpus as C
from frameparse.generate import GeneratorConfig, generate_synthetic

MINI = """#domain ww1
1\tLe\tle\tDET\tDefinite=Def\t2\tdet
2\tsoldat\tsoldat\tNOUN\tNumber=Sing\t3\tnsubj
3\tattaque\tattaquer\tVERB\tTense=Pres\t0\troot
#target 3 attaquer Attack
#fe 1 1 2 Assailant
"""

MINI_LEXICON = """# frames
frame Attack
fe Assailant core
fe Victim core
fe Weapon non-core
lu attaquer Attack
"""


def test_parse_minimal_sentence():
    corp = C.parse_corpus(MINI)
    assert len(corp) == 1
    sent = corp.sentences[0]
    assert sent.domain == "ww1"
    assert len(sent) == 3
    assert sent.tokens[1].form == "soldat"
    assert sent.tokens[2].head == 0
    assert sent.annotations == (
        C.TargetAnnotation(3, "attaquer", "Attack", ((1, 2, "Assailant"),)),
    )


def test_parse_empty_stream():
    assert C.parse_corpus("") == C.Corpus(())
    assert C.parse_corpus(io.StringIO("\n\n")) == C.Corpus(())


def test_parse_reports_line_numbers():
    bad = "1\tok\tok\tX\t_\t0\troot\nnot a token line\n"
    with pytest.raises(C.ParseError, match="line 2"):
        C.parse_corpus(bad)


def test_parse_rejects_bad_morph():
    bad = "1\ta\ta\tX\tSingular\t0\troot\n"
    with pytest.raises(C.ParseError, match="morph"):
        C.parse_corpus(bad)


def test_parse_rejects_nonconsecutive_indices():
    bad = "1\ta\ta\tX\t_\t0\troot\n3\tb\tb\tX\t_\t1\tdep\n"
    with pytest.raises(C.ValidationError, match="consecutive"):
        C.parse_corpus(bad)


def test_parse_rejects_span_outside_sentence():
    bad = MINI.replace("#fe 1 1 2 Assailant", "#fe 1 1 9 Assailant")
    with pytest.raises(C.ValidationError, match="outside sentence"):
        C.parse_corpus(bad)


def test_parse_rejects_overlapping_spans():
    bad = MINI + "#fe 1 2 2 Victim\n"
    with pytest.raises(C.ValidationError, match="overlap"):
        C.parse_corpus(bad)


def test_parse_rejects_span_covering_trigger():
    bad = MINI.replace("#fe 1 1 2 Assailant", "#fe 1 2 3 Assailant")
    with pytest.raises(C.ValidationError, match="trigger"):
        C.parse_corpus(bad)


def test_parse_rejects_fe_before_target():
    bad = "1\ta\ta\tX\t_\t0\troot\n#fe 1 1 1 Foo\n"
    with pytest.raises(C.ParseError, match="target"):
        C.parse_corpus(bad)


def test_parse_rejects_unknown_hash_line():
    bad = "1\ta\ta\tX\t_\t0\troot\n#banana 1\n"
    with pytest.raises(C.ParseError, match="banana"):
        C.parse_corpus(bad)


def test_roundtrip_generated_corpus():
    corp, _ = generate_synthetic(GeneratorConfig(domains=2, sentences_per_domain=25), seed=11)
    assert len(corp) == 50
    text = C.serialize_corpus(corp)
    assert C.parse_corpus(text) == corp
    # file-level identity on canonical output
    assert C.serialize_corpus(C.parse_corpus(text)) == text


def test_lexicon_minimal():
    lex = C.load_lexicon("frame Attack\nfe Assailant core\nlu attaquer Attack\n")
    assert lex.frames == ["Attack"]
    assert lex.fe_labels("Attack") == ("Assailant",)
    assert lex.candidates("attaquer") == ("Attack",)
    assert lex.is_core("Attack", "Assailant")


def test_lexicon_duplicate_fe_rejected():
    bad = "frame A\nfe X core\nfe X non-core\n"
    with pytest.raises(C.LexiconError, match="duplicate fe"):
        C.load_lexicon(bad)


def test_lexicon_lu_with_two_frames():
    lex = C.load_lexicon(
        "frame A\nfe X core\nframe B\nfe Y core\nlu w A\nlu w B\n"
    )
    assert lex.candidates("w") == ("A", "B")
    assert set(lex.candidates("w")) == {"A", "B"}


def test_lexicon_lu_before_frame_rejected():
    with pytest.raises(C.ValidationError, match="undeclared"):
        C.load_lexicon("lu w A\nframe A\n")


def test_lexicon_roundtrip():
    _, lex = generate_synthetic(GeneratorConfig(domains=2, sentences_per_domain=5), seed=2)
    assert C.load_lexicon(C.serialize_lexicon(lex)) == lex


def test_encode_bio():
    tags = C.encode_bio(4, 1, "F", [(2, 3, "Victim")])
    assert tags == ("T-F", "B-Victim", "I-Victim", "O")


def test_extract_instances_counts_and_tags():
    corp = C.parse_corpus(MINI)
    lex = C.load_lexicon(MINI_LEXICON)
    instances = C.extract_instances(corp, lex)
    assert len(instances) == 1
    inst = instances[0]
    assert inst.trigger_index == 3
    assert inst.lu == "attaquer"
    assert inst.gold_tags == ("B-Assailant", "I-Assailant", "T-Attack")


def test_extract_instances_two_targets_share_sentence():
    text = (
        "1\ta\ta\tNOUN\t_\t2\tnsubj\n"
        "2\tva\taller\tVERB\t_\t0\troot\n"
        "3\tb\tb\tNOUN\t_\t4\tnsubj\n"
        "4\tvient\tvenir\tVERB\t_\t2\tconj\n"
        "#target 2 aller Move\n"
        "#target 4 venir Move\n"
        "#fe 1 1 1 Theme\n"
        "#fe 2 3 3 Theme\n"
    )
    lex = C.load_lexicon("frame Move\nfe Theme core\nlu aller Move\nlu venir Move\n")
    corp = C.parse_corpus(text)
    instances = C.extract_instances(corp, lex)
    assert len(instances) == 2
    assert instances[0].sentence is instances[1].sentence
    assert instances[0].gold_tags == ("B-Theme", "T-Move", "O", "O")
    assert instances[1].gold_tags == ("O", "O", "B-Theme", "T-Move")


def test_extract_instance_count_matches_annotations():
    corp, lex = generate_synthetic(GeneratorConfig(domains=2, sentences_per_domain=40), seed=3)
    instances = C.extract_instances(corp, lex)
    assert len(instances) == sum(len(s.annotations) for s in corp)


def test_validate_against_rejects_forbidden_frame():
    corp = C.parse_corpus(MINI.replace("Attack", "Retreat"))
    lex = C.load_lexicon(MINI_LEXICON)
    with pytest.raises(C.ValidationError, match="candidate"):
        C.validate_against(corp, lex)


def test_validate_against_rejects_foreign_fe():
    corp = C.parse_corpus(MINI.replace("Assailant", "Bystander"))
    lex = C.load_lexicon(MINI_LEXICON)
    with pytest.raises(C.ValidationError, match="Bystander"):
        C.validate_against(corp, lex)


def test_generator_determinism():
    cfg = GeneratorConfig(domains=2, sentences_per_domain=30)
    a = generate_synthetic(cfg, seed=9)
    b = generate_synthetic(cfg, seed=9)
    assert C.serialize_corpus(a[0]) == C.serialize_corpus(b[0])
    assert C.serialize_lexicon(a[1]) == C.serialize_lexicon(b[1])
    c = generate_synthetic(cfg, seed=10)
    assert C.serialize_corpus(c[0]) != C.serialize_corpus(a[0])


def test_generator_domain_metadata_and_counts():
    corp, _ = generate_synthetic(GeneratorConfig(domains=2, sentences_per_domain=100), seed=4)
    assert len(corp) == 200
    assert all(s.domain in ("d0", "d1") for s in corp)
    assert sum(1 for s in corp if s.domain == "d0") == 100


def test_generator_polysemous_lu_realizes_two_frames():
    corp, lex = generate_synthetic(GeneratorConfig(domains=2, sentences_per_domain=100), seed=4)
    poly = [lu for lu, fr in lex.lu_to_frames.items() if len(fr) > 1]
    assert poly, "config should yield polysemous lexical units"
    seen: dict[str, set] = {lu: set() for lu in poly}
    for sent in corp:
        for ann in sent.annotations:
            if ann.lu in seen:
                seen[ann.lu].add(ann.frame)
    assert any(len(frames) >= 2 for frames in seen.values())


def test_generator_rejects_zero_domains_or_frames():
    with pytest.raises(Exception, match="domain"):
        GeneratorConfig(domains=0, sentences_per_domain=5).validate()
    with pytest.raises(Exception, match="frame"):
        GeneratorConfig(domains=1, sentences_per_domain=5, frames=0).validate()


def test_gold_tags_decode_back_to_spans():
    from frameparse.decoder import TagSequence, to_hypothesis

    corp, lex = generate_synthetic(GeneratorConfig(domains=2, sentences_per_domain=50), seed=6)
    instances = C.extract_instances(corp, lex)
    assert len(instances) >= 100
    for inst in instances[:100]:
        hyp = to_hypothesis(
            TagSequence(inst.gold_tags, 0.0), inst.trigger_index, inst.frame
        )
        assert hyp.elements == inst.annotation.elements


def test_assign_gold_domains():
    corp, lex = generate_synthetic(GeneratorConfig(domains=3, sentences_per_domain=5), seed=0)
    instances = C.extract_instances(corp, lex)
    mapping = C.assign_gold_domains(instances)
    assert mapping == {"d0": 0, "d1": 1, "d2": 2}
    assert all(inst.domain_label == mapping[inst.sentence.domain] for inst in instances)


def test_assign_gold_domains_requires_metadata():
    corp = C.parse_corpus(MINI.replace("#domain ww1\n", ""))
    lex = C.load_lexicon(MINI_LEXICON)
    instances = C.extract_instances(corp, lex)
    with pytest.raises(C.ValidationError, match="domain"):
        C.assign_gold_domains(instances)

import numpy as np
import pytest

from frameparse import corpus as C, numerics as N, tagger as T
from frameparse.generate import GeneratorConfig, generate_synthetic

LEX = C.load_lexicon(
    """
frame Attack
fe Assailant core
fe Victim non-core
frame Motion
fe Theme core
lu frapper Attack
lu frapper Motion
"""
)

SENT = C.parse_corpus(
    "1\tRex\trex\tNOUN\tNumber=Sing\t2\tnsubj\n"
    "2\tfrappe\tfrapper\tVERB\tTense=Pres\t0\troot\n"
    "3\tfort\tfort\tADV\t_\t2\tadvmod\n"
    "4\tennemis\tennemi\tNOUN\tNumber=Plur\t2\tobj\n"
    "#target 2 frapper Attack\n"
    "#fe 1 4 4 Victim\n"
)


def small_model(layers=4, seed=1, hidden=8):
    corp = SENT
    vocabs = T.Vocabularies.build(corp)
    labels = T.LabelInventory.from_lexicon(LEX)
    mc = T.ModelConfig(word_dim=4, feat_dim=3, hidden=hidden, layers=layers)
    return T.ParserModel.build(vocabs, labels, mc, seed), vocabs, labels


def instance():
    return C.extract_instances(SENT, LEX)[0]


def test_label_inventory_order_and_invariants():
    labels = T.LabelInventory.from_lexicon(LEX)
    assert labels.labels[0] == "O"
    assert labels.labels[1:3] == ("T-Attack", "T-Motion")
    assert "B-Assailant" in labels.labels and "I-Assailant" in labels.labels
    with pytest.raises(ValueError, match="O"):
        T.LabelInventory(("T-X", "O"))
    with pytest.raises(ValueError, match="matching B"):
        T.LabelInventory(("O", "I-X"))


def test_featurize_predicate_flags_and_distances():
    sent = C.parse_corpus(
        "\n".join(
            f"{i}\tw{i}\tw{i}\tNOUN\t_\t{0 if i == 3 else 3}\t{'root' if i == 3 else 'dep'}"
            for i in range(1, 6)
        )
        + "\n#target 3 w3 Attack\n"
    )
    lex = C.load_lexicon("frame Attack\nfe Assailant core\nlu w3 Attack\n")
    inst = C.extract_instances(sent, lex)[0]
    vocabs = T.Vocabularies.build(sent)
    fv = T.featurize(inst, vocabs)
    np.testing.assert_array_equal(fv.flag, [0, 0, 1, 0, 0])
    np.testing.assert_array_equal(fv.dist, np.array([-2, -1, 0, 1, 2]) + 6)
    np.testing.assert_array_equal(fv.treedist, [1, 1, 0, 1, 1])


def test_featurize_distance_tails_clip():
    n = 16
    sent = C.parse_corpus(
        "\n".join(
            f"{i}\tw{i}\tw{i}\tNOUN\t_\t{0 if i == 8 else 8}\t{'root' if i == 8 else 'dep'}"
            for i in range(1, n + 1)
        )
        + "\n#target 8 w8 Attack\n"
    )
    lex = C.load_lexicon("frame Attack\nfe Assailant core\nlu w8 Attack\n")
    inst = C.extract_instances(sent, lex)[0]
    fv = T.featurize(inst, T.Vocabularies.build(sent))
    assert fv.dist[0] == 0  # <= -6 tail
    assert fv.dist[-1] == 12  # >= +6 tail


def test_featurize_unknown_word_maps_to_unk():
    vocabs = T.Vocabularies.build(SENT)
    inst = instance()
    other = C.parse_corpus(
        "1\tZorg\tzorg\tNOUN\t_\t2\tnsubj\n"
        "2\tfrappe\tfrapper\tVERB\t_\t0\troot\n"
        "3\tfort\tfort\tADV\t_\t2\tadvmod\n"
        "4\tennemis\tennemi\tNOUN\t_\t2\tobj\n"
        "#target 2 frapper Attack\n"
    )
    inst2 = C.extract_instances(other, LEX)[0]
    fv = T.featurize(inst2, vocabs)
    assert fv.word[0] == 0
    fv1 = T.featurize(inst, vocabs)
    assert fv1.word[0] != 0


def test_caps_classes():
    assert T.caps_class("mot") == 0
    assert T.caps_class("Mot") == 1
    assert T.caps_class("USA") == 2
    assert T.caps_class("McCoy") == 3
    assert T.caps_class("1914") == 4
    assert T.caps_class("A") == 1


def test_tree_distance_caps_and_unreachable():
    sent = C.parse_corpus(
        "1\ta\ta\tX\t_\t2\tdep\n"
        "2\tb\tb\tX\t_\t3\tdep\n"
        "3\tc\tc\tX\t_\t4\tdep\n"
        "4\td\td\tX\t_\t5\tdep\n"
        "5\te\te\tX\t_\t6\tdep\n"
        "6\tf\tf\tX\t_\t7\tdep\n"
        "7\tg\tg\tX\t_\t0\troot\n"
        "8\th\th\tX\t_\t0\troot\n"
    ).sentences[0]
    dist = T.tree_distances(sent, 1)
    assert list(dist[:7]) == [0, 1, 2, 3, 4, 5, 5]  # capped at 5
    assert dist[7] == 5  # unreachable island


def test_forward_shapes_and_posterior_rows():
    model, vocabs, labels = small_model()
    fv = T.featurize(instance(), vocabs)
    fwd = T.forward(model, fv)
    assert fwd.posteriors.shape == (4, len(labels))
    assert fwd.top_hidden.shape == (4, 2 * model.config.hidden)
    np.testing.assert_allclose(fwd.posteriors.sum(axis=1), 1.0, atol=1e-12)


def test_forward_single_token():
    sent = C.parse_corpus("1\tva\taller\tVERB\t_\t0\troot\n#target 1 aller Motion\n")
    lex = C.load_lexicon("frame Motion\nfe Theme core\nlu aller Motion\n")
    inst = C.extract_instances(sent, lex)[0]
    vocabs = T.Vocabularies.build(sent)
    labels = T.LabelInventory.from_lexicon(lex)
    model = T.ParserModel.build(vocabs, labels, T.ModelConfig(4, 3, 8, 4), 0)
    fwd = T.forward(model, T.featurize(inst, vocabs))
    assert fwd.posteriors.shape == (1, len(labels))
    assert fwd.top_hidden.shape == (1, 16)


def test_token_order_matters():
    model, vocabs, _ = small_model()
    fv = T.featurize(instance(), vocabs)
    out = T.forward(model, fv).posteriors
    shuffled = T.FeatureView(*(fv.ids(f)[[1, 0, 3, 2]].copy() for f in T.FEATURE_FAMILIES))
    out2 = T.forward(model, shuffled).posteriors
    assert not np.allclose(out[0], out2[0])


def test_palindrome_with_tied_directions_reverses_states():
    """One tied-parameter bidirectional layer on a palindromic input:
    forward states read backward equal backward states read forward."""
    model, vocabs, labels = small_model(layers=1)
    for name in list(model.params.params):
        if ".f." in name:
            twin = name.replace(".f.", ".b.")
            model.params.params[twin][...] = model.params.params[name]
    fv0 = T.featurize(instance(), vocabs)
    ids = {}
    for f in T.FEATURE_FAMILIES:
        arr = fv0.ids(f)[:3].copy()
        arr[2] = arr[0]  # positions 1 and 3 identical, trigger at centre
        ids[f] = arr
    ids["flag"][:] = [0, 1, 0]
    ids["dist"][:] = [6, 6, 6]  # symmetric bucket ids
    fv = T.FeatureView(*(ids[f] for f in T.FEATURE_FAMILIES))
    fwd = T.forward(model, fv)
    h = model.config.hidden
    np.testing.assert_allclose(
        fwd.top_hidden[:, :h], fwd.top_hidden[::-1, h:], atol=1e-12
    )


def test_loss_frame_uniform_and_saturated():
    model, vocabs, labels = small_model()
    inst = instance()
    for name, arr in model.params.params.items():
        arr.fill(0.0)
    loss, _ = T.loss_frame(model, inst)
    assert loss == pytest.approx(np.log(len(labels)), abs=1e-12)
    # hand-crafted saturated logits: the gold posterior is ~1 per token
    gold_ids = T.gold_label_ids(model, inst)
    logits = np.full((len(gold_ids), len(labels)), -30.0)
    logits[np.arange(len(gold_ids)), gold_ids] = 30.0
    fake = T.TaggerForward(None, N.softmax(logits), None, logits)
    loss, dlogits = T.frame_loss_from(model, fake, gold_ids)
    assert loss < 1e-12
    assert np.abs(dlogits).max() < 1e-12


def test_loss_frame_gradients():
    model, vocabs, _ = small_model(hidden=8)
    inst = instance()
    rng = np.random.default_rng(165)
    for name in model.params.params:
        model.params.params[name][...] = rng.uniform(
            -0.8, 0.8, model.params.params[name].shape
        )
    fv = T.featurize(inst, model.vocabs)
    gold = T.gold_label_ids(model, inst)

    def f(compute):
        fwd = T.forward(model, fv)
        loss, dlog = T.frame_loss_from(model, fwd, gold)
        if compute:
            T.backward(model, fwd, dlogits=dlog)
        return loss

    assert N.grad_check(f, model.params, epsilon=1e-4) < 1e-5


def test_overfit_single_instance_decreases_loss():
    model, vocabs, _ = small_model(seed=5)
    inst = instance()
    losses = []
    for _ in range(50):
        loss, grads = T.loss_frame(model, inst)
        losses.append(loss)
        model.params.sgd_step(0.1)
    assert all(a >= b - 1e-12 for a, b in zip(losses, losses[1:]))
    assert losses[-1] < losses[0] * 0.7


def test_vocabularies_json_roundtrip():
    corp, _ = generate_synthetic(GeneratorConfig(domains=2, sentences_per_domain=10), seed=1)
    vocabs = T.Vocabularies.build(corp)
    again = T.Vocabularies.from_dict(vocabs.to_dict())
    assert again == vocabs
    assert again.word.id("<unk>") == 0

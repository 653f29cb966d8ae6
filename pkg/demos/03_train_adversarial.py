"""Train the tagger with and without the adversarial domain classifier.

The domain labels come from unsupervised clustering of averaged word
embeddings; the reversal strength lambda follows the warm-up schedule.

Run:  python demos/03_train_adversarial.py   (about two minutes on a laptop)
"""

import numpy as np

from frameparse import clustering
from frameparse.adversary import TrainConfig, domain_probe_accuracy, train
from frameparse.corpus import Corpus, extract_instances
from frameparse.generate import GeneratorConfig, generate_synthetic
from frameparse.metrics import evaluate
from frameparse.tagger import LabelInventory, ModelConfig, ParserModel, Vocabularies

corpus, lexicon = generate_synthetic(
    GeneratorConfig(domains=2, sentences_per_domain=40, suffix_noise=0.1,
                    deprel_noise=0.0, postverb_filler_rate=0.2, mixed_rate=0.0),
    seed=7,
)
train_sents = Corpus(corpus.sentences[::2])
test_sents = Corpus(corpus.sentences[1::2])
train_instances = extract_instances(train_sents, lexicon)
test_instances = extract_instances(test_sents, lexicon)

vocabs = Vocabularies.build(train_sents)
labels = LabelInventory.from_lexicon(lexicon)
mc = ModelConfig(word_dim=16, feat_dim=4, hidden=16, layers=4)

for adversarial in (False, True):
    model = ParserModel.build(vocabs, labels, mc, seed=7)
    if adversarial:
        emb = model.word_embeddings()
        sents = list({id(i.sentence): i.sentence for i in train_instances}.values())
        vectors = np.array([clustering.sentence_embedding(s, emb) for s in sents])
        cm = clustering.kmeans_fit(vectors, k=2, restarts=10, seed=7)
        clustering.label_corpus(train_instances, cm, emb)
        print(f"\n== adversarial run (inferred domains, inertia {cm.inertia:.2f}) ==")
    else:
        print("== baseline run ==")
    config = TrainConfig(epochs=24, learning_rate=0.5, batch_size=8, seed=7,
                         adversarial_enabled=adversarial, k=2)
    result = train(train_instances, lexicon, config, mc, model=model, head_filters=4)
    for entry in result.log[::8] + [result.log[-1]]:
        adv = f" adv={entry.loss_adv:.3f}" if entry.loss_adv is not None else ""
        print(f"  epoch {entry.epoch:2d}: lambda={entry.lam:.3f} "
              f"frame={entry.loss_frame:.3f}{adv} train_f1={entry.train_f1:.3f}")
    report = evaluate(result.model, test_instances, lexicon, delta=0.0)
    for level in ("target", "frame", "argument"):
        p, r, f = report.prf(level)
        print(f"  held-out {level:9s} P={p:.3f} R={r:.3f} F={f:.3f}")
    if adversarial:
        probe = domain_probe_accuracy(result.model, train_instances, 2, seed=7)
        print(f"  frozen-trunk domain probe accuracy: {probe:.3f}")

"""Build a small tagger, inspect its posteriors, and verify a gradient.

Run:  python demos/02_tagger_and_gradients.py
"""

import numpy as np

from frameparse import numerics
from frameparse.corpus import extract_instances
from frameparse.generate import GeneratorConfig, generate_synthetic
from frameparse.tagger import (
    LabelInventory, ModelConfig, ParserModel, Vocabularies,
    backward, featurize, forward, frame_loss_from, gold_label_ids, loss_frame,
)

corpus, lexicon = generate_synthetic(GeneratorConfig(domains=1, sentences_per_domain=8), seed=3)
instances = extract_instances(corpus, lexicon)
vocabs = Vocabularies.build(corpus)
labels = LabelInventory.from_lexicon(lexicon)
print(f"label inventory ({len(labels)}):", " ".join(labels.labels))

model = ParserModel.build(vocabs, labels, ModelConfig(word_dim=8, feat_dim=4, hidden=8, layers=4), seed=0)
inst = instances[0]
fwd = forward(model, featurize(inst, vocabs))
print(f"\nsentence of {len(inst.sentence)} tokens -> posteriors {fwd.posteriors.shape},"
      f" top hidden {fwd.top_hidden.shape}")
print("posterior row sums:", np.round(fwd.posteriors.sum(axis=1), 12)[:4], "...")

loss, _ = loss_frame(model, inst)
print(f"\nuntrained frame loss {loss:.4f} (uniform would be ln {len(labels)} = "
      f"{np.log(len(labels)):.4f})")

# analytic gradients vs central finite differences on this instance
fv = featurize(inst, vocabs)
gold = gold_label_ids(model, inst)


def objective(compute):
    f = forward(model, fv)
    value, dlogits = frame_loss_from(model, f, gold)
    if compute:
        backward(model, f, dlogits=dlogits)
    return value


err = numerics.grad_check(objective, model.params, epsilon=1e-4,
                          names=["out.W", "gru3.f.Uh", "hw2.b"])
print(f"gradient check on three parameter tensors: max relative error {err:.2e}")

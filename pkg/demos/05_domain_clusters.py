"""Unsupervised domain inference on averaged word embeddings.

Run:  python demos/05_domain_clusters.py
"""

import itertools

import numpy as np

from frameparse import clustering
from frameparse.generate import GeneratorConfig, generate_synthetic
from frameparse.numerics import glorot_uniform
from frameparse.tagger import MODEL_STREAM, Vocabularies

corpus, lexicon = generate_synthetic(GeneratorConfig(domains=2, sentences_per_domain=60), seed=0)
vocabs = Vocabularies.build(corpus)
rng = np.random.default_rng([0, MODEL_STREAM])
embeddings = clustering.WordEmbeddings(
    vocabs.word.index, glorot_uniform(rng, (len(vocabs.word), 32))
)
vectors = np.array([clustering.sentence_embedding(s, embeddings) for s in corpus])

model = clustering.kmeans_fit(vectors, k=2, restarts=10, seed=0)
print(f"k-means over {len(vectors)} sentences: inertia {model.inertia:.3f}")
print("restart inertias:", " ".join(f"{v:.2f}" for v in model.restart_inertias))

gold = [int(s.domain[1:]) for s in corpus]
pred = [clustering.assign(model, v) for v in vectors]
agreement = max(
    sum(1 for g, p in zip(gold, pred) if perm[p] == g)
    for perm in itertools.permutations(range(2))
) / len(gold)
print(f"agreement with gold domains (best label permutation): {agreement:.1%}")

confusion = np.zeros((2, 2), dtype=int)
for g, p in zip(gold, pred):
    confusion[g, p] += 1
print("confusion (rows = gold domain, columns = cluster):")
print(confusion)

# which lexical units shift their cluster distribution the most between
# the two halves of the corpus (the paper-style divergence analysis)
from frameparse.corpus import extract_instances
from frameparse.metrics import lu_cluster_divergence

instances = extract_instances(corpus, lexicon)
half_a = [i for i in instances if i.sentence.domain == "d0"]
half_b = [i for i in instances if i.sentence.domain == "d1"]
print("\nper-LU cluster-distribution divergence (total variation, d0 vs d1):")
for lu in sorted(lexicon.lu_to_frames):
    try:
        tv = lu_cluster_divergence(lu, half_a, half_b, model, embeddings)
    except ValueError:
        continue  # lexical unit missing from one half
    print(f"  {lu:6s} {tv:.3f}")

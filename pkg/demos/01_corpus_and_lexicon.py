"""Generate a synthetic multi-domain corpus and walk through the file formats.

Run:  python demos/01_corpus_and_lexicon.py
"""

from frameparse.corpus import extract_instances, parse_corpus, serialize_corpus, serialize_lexicon
from frameparse.generate import GeneratorConfig, generate_synthetic

config = GeneratorConfig(domains=2, sentences_per_domain=6)
corpus, lexicon = generate_synthetic(config, seed=42)

print(f"generated {len(corpus)} sentences across {config.domains} domains\n")

print("=== lexicon file ===")
print(serialize_lexicon(lexicon))

text = serialize_corpus(corpus)
first_block = text.split("\n\n")[0]
print("=== first sentence block ===")
print(first_block)

# the serializer and parser are exact inverses on corpus values
assert parse_corpus(text) == corpus
print("\nround trip parse(serialize(corpus)) == corpus: ok")

instances = extract_instances(corpus, lexicon)
print(f"\n{len(instances)} training instances (one per sentence/trigger pair)")
inst = instances[0]
print(f"first instance: trigger={inst.trigger_index} lu={inst.lu} frame={inst.frame}")
print("gold BIO tags:", " ".join(inst.gold_tags))

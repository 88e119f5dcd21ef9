"""
Choosing hyperparameters
========================

The word prior eta is fixed before sampling with a heuristic based on the
words seen once.  The self-link weight and the decay scale are learned by
gradient ascent interleaved with the sweeps; here we start the decay scale
far too short and let it grow.
"""
from storyline import Hyperparams, SamplerConfig, ingest, run_offline
from storyline.corpus import Vocabulary, tokenize
from storyline.hyper import estimate_eta
from storyline.synth import planted_storylines

DAY = 86400.0

print("eta for 'a a b c':", round(estimate_eta(Vocabulary.from_tokens([tokenize("a a b c")])), 5))

corpus = planted_storylines(num_storylines=4, docs_per_storyline=25, spread=2 * DAY,
                            vocab_per_storyline=30, seed=2)
store, vocab = ingest(corpus.records)
eta = estimate_eta(vocab)
print(f"eta for the synthetic corpus ({vocab.singleton_count} singletons): {eta:.4f}")

###############################################################################
# Start with a one-hour decay scale.

start = Hyperparams(alpha=1.0, decay_scale=3600.0, eta=eta)
result = run_offline(store, start, vocab.size,
                     SamplerConfig(iterations=300, seed=0, hyper_update_every=10))
for row in result.trace[9::50]:
    print(f"sweep {row['iteration']:4d}  alpha = {row['alpha']:.3f}  "
          f"a = {row['a'] / 3600:7.2f} h  clusters = {row['num_clusters']}")
print("final:", result.hyper)

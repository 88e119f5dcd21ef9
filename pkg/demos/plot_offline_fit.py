"""
Offline clustering of planted storylines
========================================

Three storylines with their own vocabularies are planted ten decay scales
apart.  We fit the sampler offline, watch the joint log probability settle
and compare the recovered partition with the planted one.
"""
import numpy as np

from storyline import Hyperparams, SamplerConfig, adjusted_rand_index, ingest, run_offline
from storyline.synth import planted_storylines

DAY = 86400.0

corpus = planted_storylines(num_storylines=3, docs_per_storyline=30, seed=1)
store, vocab = ingest(corpus.records)
print(f"{len(store)} documents, {vocab.size} word types")

###############################################################################
# Fit with hyperparameter updates every ten sweeps.  The last fifth of the
# run is annealed at temperature 2.

config = SamplerConfig(iterations=200, seed=0, hyper_update_every=10)
result = run_offline(store, Hyperparams(alpha=1.0, decay_scale=DAY, eta=0.1), vocab.size, config)

for row in result.trace[::25]:
    print(f"sweep {row['iteration']:4d}  log p = {row['joint_log_prob']:10.2f}  "
          f"clusters = {row['num_clusters']}")

###############################################################################
# Compare with the planted labels.

truth = [corpus.truth[d] for d in result.ids]
print("ARI against the planted storylines:", round(adjusted_rand_index(result.labels, truth), 3))
print("fitted hyperparameters:", result.hyper)
sizes = np.bincount(result.labels)
print("cluster sizes:", sorted(sizes[sizes > 0].tolist(), reverse=True))

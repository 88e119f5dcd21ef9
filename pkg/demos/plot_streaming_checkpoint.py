"""
Streaming with a fixed lag and a checkpoint
===========================================

Documents arrive one at a time.  Links of documents older than the window
freeze, so each push costs about the same no matter how long the stream
gets.  Halfway through we save a checkpoint, reload it and carry on; the
result is the same as for an uninterrupted run.
"""
import os
import tempfile

import numpy as np

from storyline import Hyperparams, adjusted_rand_index, ingest
from storyline.streaming import (
    StreamConfig, StreamState, finalize, load_checkpoint, push_document, save_checkpoint,
)
from storyline.synth import planted_storylines

DAY = 86400.0

corpus = planted_storylines(num_storylines=8, docs_per_storyline=25, separation=2 * DAY,
                            spread=0.5 * DAY, shared_words=2, seed=3)
store, vocab = ingest(corpus.records)
docs = list(store)
hyper = Hyperparams(alpha=1.0, decay_scale=DAY, eta=0.1)
config = StreamConfig(window=2 * DAY, iterations=10, seed=5)

straight = StreamState(hyper, vocab.size, config)
for doc in docs:
    push_document(straight, doc)

###############################################################################
# Stop after half the stream, write the state to disk and resume from it.

half = StreamState(hyper, vocab.size, config)
for doc in docs[: len(docs) // 2]:
    push_document(half, doc)
print(f"after {half.n} pushes, {half.frozen} links are frozen")

with tempfile.TemporaryDirectory() as tmp:
    path = os.path.join(tmp, "stream.json")
    save_checkpoint(half, path)
    resumed = load_checkpoint(path)
for doc in docs[len(docs) // 2:]:
    push_document(resumed, doc)

print("resumed run equals uninterrupted run:", resumed.links == straight.links)

###############################################################################
# Quality and per-push cost.

result = finalize(resumed)
truth = [corpus.truth[d] for d in result.ids]
print("ARI:", round(adjusted_rand_index(result.labels, truth), 3))
secs = np.array(straight.push_seconds) * 1e3
quarters = [round(float(np.median(q)), 2) for q in np.array_split(secs, 4)]
print("median ms per push, by quarter of the stream:", quarters)

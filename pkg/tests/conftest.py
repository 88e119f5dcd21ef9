import itertools
import math

import numpy as np
import pytest

from storyline.corpus import Document, DocumentStore
from storyline.model import ClusterStats, Hyperparams


def make_store(*docs):
    """docs: (timestamp, {word: count}) pairs; ids d0, d1, ... in the given order."""
    return DocumentStore(Document(f"d{i}", t, dict(c)) for i, (t, c) in enumerate(docs))


def compositions(total, parts):
    """All count vectors of length ``parts`` summing to ``total``."""
    for cut in itertools.combinations(range(total + parts - 1), parts - 1):
        edges = (-1,) + cut + (total + parts - 1,)
        yield tuple(edges[k + 1] - edges[k] - 1 for k in range(parts))


def multinomial(counts):
    out = math.factorial(sum(counts))
    for c in counts:
        out //= math.factorial(c)
    return out


def naive_dcm(counts, eta, vocab_size):
    """Direct Gamma-ratio form over the full dense vocabulary."""
    dense = np.zeros(vocab_size)
    for w, c in counts.items():
        dense[w] += c
    return (math.lgamma(vocab_size * eta) - math.lgamma(vocab_size * eta + dense.sum())
            + sum(math.lgamma(eta + x) - math.lgamma(eta) for x in dense))


def random_stats(rng, vocab_size, max_words, max_count=5):
    k = int(rng.integers(0, max_words + 1))
    words = rng.choice(vocab_size, size=min(k, vocab_size), replace=False)
    return ClusterStats.from_counts([{int(w): int(rng.integers(1, max_count + 1)) for w in words}])


@pytest.fixture
def hyper():
    return Hyperparams(alpha=1.0, decay_scale=100.0, eta=0.5)

"""The distance-dependent CRP over documents: link prior, temporal decay,
collapsed Dirichlet-multinomial likelihood and follower-graph partitions."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

# below this many shared tokens, log-gamma differences are expanded with
# Gamma(x + 1) = x Gamma(x) instead of calling lgamma
_RECURRENCE_LIMIT = 4


@dataclass(frozen=True)
class Hyperparams:
    alpha: float = 1.0
    decay_scale: float = 86400.0
    eta: float = 0.1

    def __post_init__(self):
        for name in ("alpha", "decay_scale", "eta"):
            value = getattr(self, name)
            if not value > 0:
                raise ValueError(f"{name} must be strictly positive, got {value}")


@dataclass
class ClusterStats:
    """Word-count sufficient statistics of one cluster."""

    counts: dict[int, int] = field(default_factory=dict)
    total: int = 0
    size: int = 0

    @classmethod
    def from_counts(cls, docs: Iterable[Mapping[int, int]]) -> ClusterStats:
        stats = cls()
        for doc in docs:
            stats.add(doc)
        return stats

    def add(self, doc: Mapping[int, int], size: int = 1) -> None:
        counts = self.counts
        for w, c in doc.items():
            counts[w] = counts.get(w, 0) + c
            self.total += c
        self.size += size

    def remove(self, doc: Mapping[int, int], size: int = 1) -> None:
        counts = self.counts
        for w, c in doc.items():
            left = counts[w] - c
            if left:
                counts[w] = left
            else:
                del counts[w]
            self.total -= c
        self.size -= size

    def absorb(self, other: ClusterStats) -> None:
        self.add(other.counts, size=other.size)

    def copy(self) -> ClusterStats:
        return ClusterStats(dict(self.counts), self.total, self.size)


def _stats(obj) -> ClusterStats:
    if isinstance(obj, ClusterStats):
        return obj
    return ClusterStats.from_counts([obj])


@dataclass(frozen=True, eq=False)
class Partition:
    """Cluster label per document; a label is the smallest member index."""

    labels: np.ndarray

    @property
    def num_clusters(self) -> int:
        return int(np.unique(self.labels).size)

    def clusters(self) -> dict[int, list[int]]:
        out: dict[int, list[int]] = {}
        for i, k in enumerate(self.labels.tolist()):
            out.setdefault(k, []).append(i)
        return out

    def __len__(self) -> int:
        return self.labels.size


def distance_decay(t_i, t_j, decay_scale: float):
    """exp(-|t_i - t_j| / a); vectorizes over numpy inputs."""
    return np.exp(-np.abs(np.subtract(t_i, t_j)) / decay_scale)


def link_prior_weight(i: int, j: int, times: Sequence[float], hyper: Hyperparams) -> float:
    """Unnormalized prior weight of the link i -> j."""
    if i == j:
        return hyper.alpha
    return float(distance_decay(times[i], times[j], hyper.decay_scale))


def candidate_bounds(i: int, n: int, sequential: bool = False, start: int = 0) -> tuple[int, int]:
    """Half-open index range of link targets for document ``i`` (``i`` itself excluded
    by the caller). Offline every other document is a candidate; in sequential mode
    only earlier documents are; ``start`` cuts off frozen documents when streaming."""
    return start, (i if sequential else n)


def dcm_log_likelihood(stats, eta: float, vocab_size: int) -> float:
    """Log Dirichlet-multinomial probability of a cluster's token sequence."""
    stats = _stats(stats)
    if stats.total == 0:
        return 0.0
    v_eta = vocab_size * eta
    lg_eta = math.lgamma(eta)
    terms = [math.lgamma(v_eta), -math.lgamma(v_eta + stats.total)]
    terms.extend(math.lgamma(eta + n) - lg_eta for n in stats.counts.values())
    return math.fsum(terms)


def _shared_word_term(a: int, b: int, eta: float, lg_eta: float) -> float:
    lo, hi = (a, b) if a <= b else (b, a)
    if lo <= _RECURRENCE_LIMIT:
        # lgG(eta+hi+lo) - lgG(eta+hi) - (lgG(eta+lo) - lgG(eta))
        return math.fsum(math.log((eta + hi + m) / (eta + m)) for m in range(lo))
    return (math.lgamma(eta + hi + lo) + lg_eta) - (math.lgamma(eta + hi) + math.lgamma(eta + lo))


def _shared_sum(small: Mapping[int, int], large: Mapping[int, int], eta: float,
                lg_eta: float) -> float:
    shared = []
    for w, c in small.items():
        other = large.get(w)
        if other is not None:
            shared.append(_shared_word_term(c, other, eta, lg_eta))
    # fsum is exactly rounded, so the result ignores dict iteration order
    return math.fsum(shared) if shared else 0.0


def merge_log_ratio(a, b, eta: float, vocab_size: int) -> float:
    """log DCM(A u B) - log DCM(A) - log DCM(B), touching only shared words.

    Words present in one cluster only cancel between numerator and
    denominator, so the cost is the size of the smaller word set. The result
    is exactly symmetric in its arguments.
    """
    a, b = _stats(a), _stats(b)
    if a.total == 0 or b.total == 0:
        return 0.0
    v_eta = vocab_size * eta
    lo, hi = (a.total, b.total) if a.total <= b.total else (b.total, a.total)
    norm = ((math.lgamma(v_eta + lo) + math.lgamma(v_eta + hi))
            - (math.lgamma(v_eta) + math.lgamma(v_eta + lo + hi)))
    small, large = (a.counts, b.counts) if len(a.counts) <= len(b.counts) else (b.counts, a.counts)
    return norm + _shared_sum(small, large, eta, math.lgamma(eta))


def merge_log_ratios(a: ClusterStats, others: Sequence[ClusterStats], eta: float,
                     vocab_size: int) -> list[float]:
    """``merge_log_ratio(a, b)`` for every ``b`` in ``others``, bitwise equal to
    the one-at-a-time version but sharing the terms that depend on ``a`` only."""
    if a.total == 0:
        return [0.0] * len(others)
    v_eta = vocab_size * eta
    lg_v_eta = math.lgamma(v_eta)
    lg_eta = math.lgamma(eta)
    lg_a = math.lgamma(v_eta + a.total)
    na, a_counts, a_words = a.total, a.counts, len(a.counts)
    lgamma = math.lgamma
    out = []
    for b in others:
        nb = b.total
        if nb == 0:
            out.append(0.0)
            continue
        if na <= nb:
            norm = (lg_a + lgamma(v_eta + nb)) - (lg_v_eta + lgamma(v_eta + na + nb))
        else:
            norm = (lgamma(v_eta + nb) + lg_a) - (lg_v_eta + lgamma(v_eta + nb + na))
        if a_words <= len(b.counts):
            out.append(norm + _shared_sum(a_counts, b.counts, eta, lg_eta))
        else:
            out.append(norm + _shared_sum(b.counts, a_counts, eta, lg_eta))
    return out


def components(links: Sequence[int]) -> Partition:
    """Connected components of the undirected follower graph, labelled by
    their smallest member index."""
    links = np.asarray(links, dtype=np.int64)
    n = links.size
    if n == 0:
        return Partition(np.zeros(0, dtype=np.int64))
    if links.min() < 0 or links.max() >= n:
        raise ValueError("link target out of range")
    graph = coo_matrix((np.ones(n), (np.arange(n), links)), shape=(n, n))
    _, raw = connected_components(graph, directed=False)
    first = np.full(raw.max() + 1, n, dtype=np.int64)
    np.minimum.at(first, raw, np.arange(n))
    return Partition(first[raw])


def joint_log_prob(links: Sequence[int], docs: Sequence[Mapping[int, int]],
                   times: Sequence[float], hyper: Hyperparams, vocab_size: int,
                   sequential: bool = False) -> float:
    """log P(w, c): normalized link prior of every document plus the
    Dirichlet-multinomial likelihood of every cluster."""
    links = np.asarray(links, dtype=np.int64)
    times = np.asarray(times, dtype=np.float64)
    n = links.size
    logp = 0.0
    for i in range(n):
        lo, hi = candidate_bounds(i, n, sequential)
        f = distance_decay(times[lo:hi], times[i], hyper.decay_scale)
        if lo <= i < hi:
            f[i - lo] = 0.0
        z = hyper.alpha + f.sum()
        c = int(links[i])
        if c == i:
            w = hyper.alpha
        elif lo <= c < hi:
            w = f[c - lo]
        else:
            return -math.inf
        logp += math.log(w) - math.log(z) if w > 0 else -math.inf
    for members in components(links).clusters().values():
        stats = ClusterStats.from_counts(docs[i] for i in members)
        logp += dcm_log_likelihood(stats, hyper.eta, vocab_size)
    return logp


def cluster_topic_estimate(stats, eta: float, vocab_size: int) -> np.ndarray:
    """Posterior mean word distribution of a cluster."""
    stats = _stats(stats)
    theta = np.full(vocab_size, eta, dtype=np.float64)
    for w, c in stats.counts.items():
        theta[w] += c
    return theta / (stats.total + vocab_size * eta)

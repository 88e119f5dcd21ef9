"""Collapsed Gibbs sampling over follower links, plus a finite-mixture baseline.

The sampler keeps the follower graph, its connected components and the
per-cluster word counts in sync. Resampling a link enumerates outcomes per
cluster rather than per candidate document, because every target inside one
cluster yields the same likelihood.
"""

from __future__ import annotations

import csv
import json
import math
import time
from collections import deque
from dataclasses import asdict, dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .model import (
    ClusterStats,
    Hyperparams,
    candidate_bounds,
    components,
    joint_log_prob,
    merge_log_ratio,
    merge_log_ratios,
)


@dataclass(frozen=True)
class SamplerConfig:
    iterations: int = 500
    temperature: float = 2.0
    anneal_start_fraction: float = 0.8
    hyper_update_every: int | None = None
    seed: int = 0
    # record the joint log probability every this many sweeps; 0 disables
    trace_every: int = 1

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be positive")
        if self.temperature < 1:
            raise ValueError("temperature must be >= 1")
        if not 0 <= self.anneal_start_fraction <= 1:
            raise ValueError("anneal_start_fraction must lie in [0, 1]")
        if self.hyper_update_every is not None and self.hyper_update_every < 1:
            raise ValueError("hyper_update_every must be >= 1")

    def inverse_temperature(self, iteration: int) -> float:
        """1 before the annealing tail, 1/temperature within it."""
        if iteration < self.anneal_start_fraction * self.iterations:
            return 1.0
        return 1.0 / self.temperature


class SamplerState:
    """Mutable follower graph with incrementally maintained clusters.

    Clusters are held under internal integer keys; these are bookkeeping only
    and never influence sampling. Use :meth:`partition` for canonical labels.
    """

    def __init__(self, hyper: Hyperparams, vocab_size: int, seed: int = 0,
                 sequential: bool = False):
        self.hyper = hyper
        self.vocab_size = max(int(vocab_size), 1)
        self.seed = seed
        self.rng = np.random.default_rng(seed)
        self.sequential = sequential
        # documents before this index are neither resampled nor link targets
        self.window_start = 0
        self.iteration = 0
        self.resamples = 0

        self.ids: list[str] = []
        self.docs: list[Mapping[int, int]] = []
        self.link: list[int] = []
        self.followers: list[set[int]] = []
        self._times = np.empty(64, dtype=np.float64)
        self._label = np.empty(64, dtype=np.int64)
        self.members: dict[int, set[int]] = {}
        self.stats: dict[int, ClusterStats] = {}
        self._free_keys: list[int] = []
        self._next_key = 0

    @classmethod
    def from_store(cls, store, hyper: Hyperparams, vocab_size: int, seed: int = 0,
                   sequential: bool = False, links: Sequence[int] | None = None,
                   ) -> SamplerState:
        state = cls(hyper, vocab_size, seed=seed, sequential=sequential)
        for doc in store:
            state.append(doc.id, doc.timestamp, doc.counts)
        if links is not None:
            state.set_links(links)
        return state

    # -- structure ---------------------------------------------------------

    @property
    def n(self) -> int:
        return len(self.link)

    @property
    def times(self) -> np.ndarray:
        return self._times[: self.n]

    @property
    def labels(self) -> np.ndarray:
        """Internal cluster key per document."""
        return self._label[: self.n]

    def _new_key(self) -> int:
        if self._free_keys:
            return self._free_keys.pop()
        self._next_key += 1
        return self._next_key - 1

    def append(self, doc_id: str, timestamp: float, counts: Mapping[int, int]) -> int:
        """Add a self-linked document as its own cluster; returns its index."""
        i = self.n
        if i == self._times.size:
            self._times = np.concatenate([self._times, np.empty_like(self._times)])
            self._label = np.concatenate([self._label, np.empty_like(self._label)])
        self._times[i] = timestamp
        key = self._new_key()
        self._label[i] = key
        self.ids.append(doc_id)
        self.docs.append(counts)
        self.link.append(i)
        self.followers.append(set())
        self.members[key] = {i}
        self.stats[key] = ClusterStats.from_counts([counts])
        return i

    def set_links(self, links: Sequence[int]) -> None:
        """Replace the whole follower graph and rebuild clusters from scratch."""
        links = [int(c) for c in links]
        if len(links) != self.n:
            raise ValueError("one link per document required")
        self.link = links
        self.followers = [set() for _ in range(self.n)]
        for i, c in enumerate(links):
            if c != i:
                self.followers[c].add(i)
        self.members.clear()
        self.stats.clear()
        self._free_keys.clear()
        self._next_key = 0
        for members in components(links).clusters().values():
            key = self._new_key()
            self._label[members] = key
            self.members[key] = set(members)
            self.stats[key] = ClusterStats.from_counts(self.docs[m] for m in members)

    def partition(self) -> np.ndarray:
        """Cluster labels as smallest member index."""
        labels = np.empty(self.n, dtype=np.int64)
        for members in self.members.values():
            labels[list(members)] = min(members)
        return labels

    def cluster_of(self, i: int) -> int:
        return int(self._label[i])

    def _neighbors(self, u: int):
        c = self.link[u]
        if c != u:
            yield c
        yield from self.followers[u]

    def _detached_side(self, i: int, t: int) -> set[int] | None:
        """After the edge i-t was removed: None if i and t are still connected,
        otherwise the node set of whichever side was exhausted first."""
        seen = ({i}, {t})
        queues = (deque([i]), deque([t]))
        while queues[0] and queues[1]:
            for side in (0, 1):
                u = queues[side].popleft()
                mine, theirs = seen[side], seen[1 - side]
                for v in self._neighbors(u):
                    if v in theirs:
                        return None
                    if v not in mine:
                        mine.add(v)
                        queues[side].append(v)
                if not queues[side]:
                    return mine
        return seen[0] if not queues[0] else seen[1]

    def cut(self, i: int) -> None:
        """Remove the outgoing link of ``i`` (it becomes a self-link), splitting
        its cluster when the link was a bridge."""
        t = self.link[i]
        if t == i:
            return
        self.followers[t].discard(i)
        self.link[i] = i
        side = self._detached_side(i, t)
        if side is None:
            return
        old = int(self._label[i])
        key = self._new_key()
        moved = ClusterStats.from_counts(self.docs[m] for m in side)
        self.stats[old].remove(moved.counts, size=moved.size)
        self.stats[key] = moved
        self.members[old] -= side
        self.members[key] = side
        self._label[list(side)] = key

    def attach(self, i: int, j: int) -> None:
        """Set the (currently self-) link of ``i`` to ``j``, merging clusters."""
        if self.link[i] != i:
            raise ValueError(f"document {i} already has an outgoing link")
        self.link[i] = j
        if j == i:
            return
        self.followers[j].add(i)
        ka, kb = int(self._label[i]), int(self._label[j])
        if ka == kb:
            return
        if self.stats[ka].size < self.stats[kb].size:
            ka, kb = kb, ka
        self.stats[ka].absorb(self.stats.pop(kb))
        moved = self.members.pop(kb)
        self.members[ka] |= moved
        self._label[list(moved)] = ka
        self._free_keys.append(kb)

    def joint_log_prob(self) -> float:
        return joint_log_prob(self.link, self.docs, self.times, self.hyper,
                              self.vocab_size, sequential=self.sequential)

    def check_invariants(self) -> None:
        """Recompute partition and statistics from the links; raise on mismatch."""
        truth = components(self.link).labels
        if not np.array_equal(truth, self.partition()):
            raise AssertionError("partition differs from connected components")
        for key, members in self.members.items():
            fresh = ClusterStats.from_counts(self.docs[m] for m in members)
            if fresh != self.stats[key]:
                raise AssertionError(f"stale statistics for cluster {key}")
            if not all(self._label[m] == key for m in members):
                raise AssertionError(f"label mismatch in cluster {key}")


@dataclass
class _Outcomes:
    lo: int
    prior: np.ndarray      # prior weight of every candidate in [lo, hi)
    local: np.ndarray      # candidate -> outcome position (self-link is 0)
    keys: list[int]        # cluster key per outcome; index 0 is the self-link
    mass: np.ndarray       # total prior weight per outcome
    probs: np.ndarray


def _outcomes(state: SamplerState, i: int, inverse_temperature: float) -> _Outcomes:
    """Tempered conditional over outcomes for a document whose link is cut.

    Outcomes are the self-link followed by every cluster holding a candidate,
    ordered by its first candidate index so the order does not depend on
    internal keys.
    """
    hyper = state.hyper
    lo, hi = candidate_bounds(i, state.n, state.sequential, state.window_start)
    prior = np.exp(-np.abs(state._times[lo:hi] - state._times[i]) / hyper.decay_scale)
    if lo <= i < hi:
        prior[i - lo] = 0.0
    keys, first, inv = np.unique(state._label[lo:hi], return_index=True, return_inverse=True)
    rank = np.empty(keys.size, dtype=np.int64)
    rank[np.argsort(first, kind="stable")] = np.arange(1, keys.size + 1)
    local = rank[inv.ravel()]
    mass = np.bincount(local, weights=prior, minlength=keys.size + 1)
    mass[0] = hyper.alpha
    ordered = np.empty(keys.size + 1, dtype=np.int64)
    ordered[rank] = keys
    ordered[0] = -1

    own = int(state._label[i])
    live = [pos for pos in range(1, mass.size) if mass[pos] > 0.0]
    others = [pos for pos in live if ordered[pos] != own]
    ratios = merge_log_ratios(state.stats[own], [state.stats[int(ordered[pos])] for pos in others],
                              hyper.eta, state.vocab_size)
    logw = np.full(mass.size, -np.inf)
    logw[live] = np.log(mass[live])
    logw[others] += ratios
    logw[0] = math.log(hyper.alpha)
    logw *= inverse_temperature
    probs = np.exp(logw - logw.max())
    probs /= probs.sum()
    return _Outcomes(lo, prior, local, ordered.tolist(), mass, probs)


def _draw(rng: np.random.Generator, weights: np.ndarray) -> int:
    cdf = np.cumsum(weights)
    pos = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
    return min(pos, weights.size - 1)


def resample_link(state: SamplerState, i: int, inverse_temperature: float = 1.0) -> int:
    """Gibbs-resample the outgoing link of document ``i``; returns the new target."""
    state.cut(i)
    out = _outcomes(state, i, inverse_temperature)
    pos = _draw(state.rng, out.probs)
    if pos == 0:
        target = i
    else:
        within = np.where(out.local == pos, out.prior, 0.0)
        target = out.lo + _draw(state.rng, within)
    state.attach(i, target)
    state.resamples += 1
    return target


def link_distribution(state: SamplerState, i: int, inverse_temperature: float = 1.0,
                      ) -> np.ndarray:
    """Exact probability of each target for the link of ``i`` (length n).

    The state is left unchanged: the link is cut, the conditional evaluated
    and the previous target restored.
    """
    previous = state.link[i]
    state.cut(i)
    out = _outcomes(state, i, inverse_temperature)
    state.attach(i, previous)
    dist = np.zeros(state.n)
    dist[i] = out.probs[0]
    share = np.divide(out.probs[out.local], out.mass[out.local],
                      out=np.zeros(out.local.size), where=out.mass[out.local] > 0)
    dist[out.lo:out.lo + out.local.size] += share * out.prior
    return dist


def sweep(state: SamplerState, config: SamplerConfig) -> SamplerState:
    """Resample every link once, in document order."""
    beta = config.inverse_temperature(state.iteration)
    for i in range(state.window_start, state.n):
        resample_link(state, i, beta)
    state.iteration += 1
    return state


@dataclass
class ClusteringResult:
    ids: list[str]
    labels: np.ndarray
    links: list[int] | None = None
    hyper: Hyperparams | None = None
    seed: int | None = None
    trace: list[dict] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    @property
    def num_clusters(self) -> int:
        return int(np.unique(self.labels).size)

    def clusters(self) -> dict[int, list[str]]:
        out: dict[int, list[str]] = {}
        for doc_id, k in zip(self.ids, self.labels.tolist()):
            out.setdefault(k, []).append(doc_id)
        return out

    def assignments(self) -> Iterable[dict]:
        for pos, doc_id in enumerate(self.ids):
            link = None if self.links is None else self.ids[self.links[pos]]
            yield {"id": doc_id, "cluster": int(self.labels[pos]), "link": link}

    def write_assignments(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for row in self.assignments():
                fh.write(json.dumps(row) + "\n")

    def write_trace(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(TRACE_COLUMNS)
            for row in self.trace:
                writer.writerow([row[c] for c in TRACE_COLUMNS])

    def summary(self) -> dict:
        return {
            "documents": len(self.ids),
            "clusters": self.num_clusters,
            "hyper": None if self.hyper is None else asdict(self.hyper),
            "seed": self.seed,
            **self.metadata,
        }


TRACE_COLUMNS = ("iteration", "joint_log_prob", "alpha", "a", "eta", "num_clusters")


def _trace_row(state: SamplerState) -> dict:
    return {
        "iteration": state.iteration,
        "joint_log_prob": state.joint_log_prob(),
        "alpha": state.hyper.alpha,
        "a": state.hyper.decay_scale,
        "eta": state.hyper.eta,
        "num_clusters": len(state.members),
    }


def run_offline(store, hyper: Hyperparams, vocab_size: int,
                config: SamplerConfig = SamplerConfig(), hyper_config=None,
                sequential: bool = False) -> ClusteringResult:
    """Offline inference: all links start as self-links and every link is
    resampled once per iteration, with optional hyperparameter ascent."""
    from .hyper import HyperUpdateConfig, gradient_step

    if len(store) == 0:
        return ClusteringResult([], np.zeros(0, dtype=np.int64), [], hyper, config.seed)
    state = SamplerState.from_store(store, hyper, vocab_size, seed=config.seed,
                                    sequential=sequential)
    if config.hyper_update_every is not None and hyper_config is None:
        hyper_config = HyperUpdateConfig(period=config.hyper_update_every)
    trace = []
    start = time.perf_counter()
    for _ in range(config.iterations):
        sweep(state, config)
        if (config.hyper_update_every is not None
                and state.iteration % config.hyper_update_every == 0):
            state.hyper = gradient_step(state, hyper_config)
        if config.trace_every and (state.iteration % config.trace_every == 0
                                   or state.iteration == config.iterations):
            trace.append(_trace_row(state))
    elapsed = time.perf_counter() - start
    return ClusteringResult(
        list(state.ids), state.partition(), list(state.link), state.hyper, config.seed,
        trace, {"seconds": elapsed, "resamples": state.resamples,
                "joint_log_prob": state.joint_log_prob()},
    )


def run_baseline(store, vocab_size: int, num_clusters: int = 20,
                 dirichlet_param: float = 0.5, eta: float = 0.1,
                 config: SamplerConfig = SamplerConfig()) -> ClusteringResult:
    """Finite Dirichlet-multinomial mixture that ignores time.

    Mixture weights have a symmetric Dirichlet prior; assignments are
    resampled by collapsed Gibbs with the same annealing schedule as the
    dd-CRP sampler.
    """
    if num_clusters < 1:
        raise ValueError("num_clusters must be >= 1")
    n = len(store)
    if n == 0:
        return ClusteringResult([], np.zeros(0, dtype=np.int64), None, None, config.seed)
    rng = np.random.default_rng(config.seed)
    vocab_size = max(int(vocab_size), 1)
    docs = [doc.counts for doc in store]
    doc_stats = [ClusterStats.from_counts([d]) for d in docs]
    z = rng.integers(num_clusters, size=n)
    stats = [ClusterStats() for _ in range(num_clusters)]
    for i, k in enumerate(z):
        stats[k].add(docs[i])
    logw = np.empty(num_clusters)
    start = time.perf_counter()
    for it in range(config.iterations):
        beta = config.inverse_temperature(it)
        for i in range(n):
            stats[z[i]].remove(docs[i])
            for k in range(num_clusters):
                logw[k] = (math.log(stats[k].size + dirichlet_param)
                           + merge_log_ratio(doc_stats[i], stats[k], eta, vocab_size))
            scaled = beta * logw
            probs = np.exp(scaled - scaled.max())
            k = _draw(rng, probs)
            z[i] = k
            stats[k].add(docs[i])
    elapsed = time.perf_counter() - start
    # canonical labels: smallest member index
    first: dict[int, int] = {}
    labels = np.array([first.setdefault(int(k), i) for i, k in enumerate(z)], dtype=np.int64)
    return ClusteringResult(
        [doc.id for doc in store], labels, None, None, config.seed,
        metadata={"seconds": elapsed, "num_clusters": num_clusters,
                  "dirichlet_param": dirichlet_param, "eta": eta},
    )

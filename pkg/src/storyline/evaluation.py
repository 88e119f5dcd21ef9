"""Timeline scoring against gold clusters, and the adjusted Rand index."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np


@dataclass(frozen=True)
class GoldCluster:
    id: str
    weight: float
    members: frozenset[str]


class GoldClusters:
    def __init__(self, clusters: Iterable[GoldCluster]):
        self.clusters = list(clusters)
        self._of: dict[str, int] = {}
        for pos, cluster in enumerate(self.clusters):
            if not cluster.weight > 0:
                raise ValueError(f"gold cluster {cluster.id!r} has non-positive weight")
            for doc_id in cluster.members:
                if doc_id in self._of:
                    raise ValueError(f"document {doc_id!r} is in more than one gold cluster")
                self._of[doc_id] = pos

    def __len__(self) -> int:
        return len(self.clusters)

    def cluster_of(self, doc_id: str) -> int | None:
        return self._of.get(doc_id)

    @staticmethod
    def _cluster(obj) -> GoldCluster:
        return GoldCluster(str(obj["cluster"]), float(obj["weight"]), frozenset(map(str, obj["members"])))

    @classmethod
    def from_rows(cls, rows: Iterable[dict]) -> GoldClusters:
        """Build from dicts laid out like the lines of a gold file."""
        return cls(cls._cluster(obj) for obj in rows)

    @classmethod
    def read(cls, path) -> GoldClusters:
        """One JSON object per line: {"cluster": str, "weight": number, "members": [ids]}."""
        clusters = []
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    clusters.append(cls._cluster(json.loads(line)))
                except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                    raise ValueError(f"{path}:{lineno}: malformed gold cluster ({exc})") from None
        return cls(clusters)


class Timeline(tuple):
    """Returned document ids in order, duplicates removed (first kept)."""

    def __new__(cls, ids: Iterable[str] = ()):
        return super().__new__(cls, dict.fromkeys(ids))


@dataclass(frozen=True)
class Metrics:
    recall: float
    weighted_recall: float
    precision: float
    f1: float
    weighted_f1: float

    def as_dict(self) -> dict:
        return asdict(self)

    def table(self) -> str:
        head = f"{'Rec.':>8}{'Rec.w':>8}{'Prec.':>8}{'F1':>8}{'F1w':>8}"
        row = "".join(f"{v:8.4f}" for v in (self.recall, self.weighted_recall,
                                             self.precision, self.f1, self.weighted_f1))
        return f"{head}\n{row}"


def _harmonic(p: float, r: float) -> float:
    return 0.0 if p + r == 0 else 2 * p * r / (p + r)


def select_representatives(clustering, store) -> Timeline:
    """Earliest document, by (timestamp, id), of every predicted cluster, in
    time order. ``clustering`` needs ``ids`` and ``labels``; ``store`` maps
    ids to documents with timestamps."""
    best: dict[int, tuple[float, str]] = {}
    for doc_id, k in zip(clustering.ids, np.asarray(clustering.labels).tolist()):
        key = (store.by_id(doc_id).timestamp, doc_id)
        if k not in best or key < best[k]:
            best[k] = key
    return Timeline(doc_id for _, doc_id in sorted(best.values()))


def score(timeline: Iterable[str], gold: GoldClusters) -> Metrics:
    """Cluster-level recall/precision of a timeline.

    A gold cluster is covered when any member is returned. A returned
    document earns precision credit only as the first entry of its gold
    cluster; later members are redundant and non-members are not relevant.
    """
    if len(gold) == 0:
        raise ValueError("gold clusters are empty")
    timeline = Timeline(timeline)
    if not timeline:
        return Metrics(0.0, 0.0, 0.0, 0.0, 0.0)
    covered: set[int] = set()
    credited = 0
    for doc_id in timeline:
        k = gold.cluster_of(doc_id)
        if k is not None and k not in covered:
            covered.add(k)
            credited += 1
    weights = np.array([c.weight for c in gold.clusters])
    recall = len(covered) / len(gold)
    weighted_recall = float(weights[sorted(covered)].sum() / weights.sum())
    precision = credited / len(timeline)
    return Metrics(recall, weighted_recall, precision,
                   _harmonic(precision, recall), _harmonic(precision, weighted_recall))


def adjusted_rand_index(predicted: Sequence, truth: Sequence) -> float:
    """Chance-corrected pair-counting agreement of two labelings."""
    predicted = np.asarray(predicted)
    truth = np.asarray(truth)
    if predicted.shape != truth.shape:
        raise ValueError("labelings cover different documents")
    _, p = np.unique(predicted, return_inverse=True)
    _, t = np.unique(truth, return_inverse=True)
    table = np.zeros((p.max(initial=-1) + 1, t.max(initial=-1) + 1), dtype=np.int64)
    np.add.at(table, (p.ravel(), t.ravel()), 1)

    def pairs(x):
        x = x.astype(np.float64)
        return float((x * (x - 1) / 2).sum())

    index = pairs(table)
    rows, cols = pairs(table.sum(axis=1)), pairs(table.sum(axis=0))
    total = pairs(np.array([predicted.size]))
    expected = rows * cols / total if total else 0.0
    best = (rows + cols) / 2
    if best == expected:
        # both labelings trivial (all singletons or a single cluster)
        return 1.0
    return (index - expected) / (best - expected)


def labels_from_mapping(ids: Sequence[str], assignment: Mapping[str, object]) -> list:
    missing = [doc_id for doc_id in ids if doc_id not in assignment]
    if missing:
        raise ValueError(f"{len(missing)} document(s) missing from labeling, e.g. {missing[0]!r}")
    return [assignment[doc_id] for doc_id in ids]

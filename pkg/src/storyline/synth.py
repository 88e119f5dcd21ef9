"""Planted-storyline corpora for self-contained experiments."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class SyntheticCorpus:
    records: list[dict]
    truth: dict[str, int]  # document id -> planted storyline

    def gold(self) -> list[dict]:
        """Gold clusters in the evaluation file layout, weighted by size."""
        members: dict[int, list[str]] = {}
        for doc_id, k in self.truth.items():
            members.setdefault(k, []).append(doc_id)
        return [{"cluster": f"s{k}", "weight": float(len(ids)), "members": sorted(ids)}
                for k, ids in sorted(members.items())]

    def write(self, directory) -> None:
        os.makedirs(directory, exist_ok=True)
        with open(os.path.join(directory, "corpus.jsonl"), "w", encoding="utf-8") as fh:
            for rec in self.records:
                fh.write(json.dumps(rec) + "\n")
        with open(os.path.join(directory, "gold.jsonl"), "w", encoding="utf-8") as fh:
            for row in self.gold():
                fh.write(json.dumps(row) + "\n")
        with open(os.path.join(directory, "truth.jsonl"), "w", encoding="utf-8") as fh:
            for doc_id, k in self.truth.items():
                fh.write(json.dumps({"id": doc_id, "cluster": k}) + "\n")


def planted_storylines(num_storylines: int = 3, docs_per_storyline: int = 30,
                       vocab_per_storyline: int = 5, shared_words: int = 0,
                       separation: float = 10 * 86400.0, spread: float = 86400.0,
                       words_per_doc: int = 6, start: int = 1_400_000_000,
                       seed: int = 0) -> SyntheticCorpus:
    """Storylines with their own vocabularies, centred ``separation`` seconds
    apart; document times are normal around the centre with sd ``spread``.

    ``shared_words`` common words are drawn into every document with
    probability one half per token, to make the vocabularies overlap.
    Records come back in time order with ids that sort in the same order.
    """
    rng = np.random.default_rng(seed)
    common = [f"common{w}" for w in range(shared_words)]
    rows = []
    for k in range(num_storylines):
        own = [f"story{k}word{w}" for w in range(vocab_per_storyline)]
        centre = start + k * separation
        times = np.rint(rng.normal(centre, spread, size=docs_per_storyline)).astype(np.int64)
        for t in times:
            words = []
            for _ in range(words_per_doc):
                pool = common if common and rng.random() < 0.5 else own
                words.append(pool[rng.integers(len(pool))])
            rows.append((int(t), k, " ".join(words)))
    rows.sort(key=lambda r: r[0])
    width = len(str(len(rows)))
    records, truth = [], {}
    for pos, (t, k, text) in enumerate(rows):
        doc_id = f"d{pos:0{width}d}"
        records.append({"id": doc_id, "timestamp": t, "text": text})
        truth[doc_id] = k
    return SyntheticCorpus(records, truth)

"""Fixed-lag online inference.

Documents arrive in timestamp order. After each arrival only the links of
documents inside the trailing window [t - window, t] are resampled, and only
those documents are link targets; everything older is frozen for good.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import asdict, dataclass

import numpy as np

from .model import Hyperparams
from .sampler import ClusteringResult, SamplerState, resample_link

FIVE_DAYS = 5 * 24 * 3600
CHECKPOINT_FORMAT = "storyline-stream-checkpoint"
CHECKPOINT_VERSION = 1


class OutOfOrderError(ValueError):
    pass


@dataclass(frozen=True)
class StreamConfig:
    window: float = FIVE_DAYS
    iterations: int = 500
    temperature: float = 2.0
    anneal_start_fraction: float = 0.8
    seed: int = 0

    def __post_init__(self):
        if not self.window > 0:
            raise ValueError("window must be positive")
        if self.iterations < 0:
            raise ValueError("iterations must be >= 0")
        if self.temperature < 1:
            raise ValueError("temperature must be >= 1")

    def inverse_temperature(self, iteration: int) -> float:
        if iteration < self.anneal_start_fraction * self.iterations:
            return 1.0
        return 1.0 / self.temperature


class StreamState:
    """Sampler state plus the freeze boundary and per-push timings."""

    def __init__(self, hyper: Hyperparams, vocab_size: int, config: StreamConfig = StreamConfig()):
        self.config = config
        self.sampler = SamplerState(hyper, vocab_size, seed=config.seed)
        self.last_timestamp = -math.inf
        self.push_seconds: list[float] = []
        self._ids: set[str] = set()

    @property
    def frozen(self) -> int:
        """Number of leading documents whose links are frozen."""
        return self.sampler.window_start

    @property
    def n(self) -> int:
        return self.sampler.n

    @property
    def links(self) -> list[int]:
        return self.sampler.link


def push_document(state: StreamState, doc) -> StreamState:
    """Add one document and run the fixed-lag Gibbs pass it triggers."""
    cfg = state.config
    if doc.timestamp < state.last_timestamp:
        raise OutOfOrderError(
            f"document {doc.id!r} has timestamp {doc.timestamp} earlier than {state.last_timestamp}")
    if doc.id in state._ids:
        raise ValueError(f"duplicate document id {doc.id!r}")
    start = time.perf_counter()
    sampler = state.sampler
    i = sampler.append(doc.id, doc.timestamp, doc.counts)
    state._ids.add(doc.id)
    state.last_timestamp = doc.timestamp

    boundary = int(np.searchsorted(sampler.times, doc.timestamp - cfg.window, side="left"))
    sampler.window_start = max(sampler.window_start, boundary)

    resample_link(sampler, i, 1.0 / cfg.temperature)
    for it in range(cfg.iterations):
        beta = cfg.inverse_temperature(it)
        for j in range(sampler.window_start, sampler.n):
            resample_link(sampler, j, beta)
    sampler.iteration += cfg.iterations
    state.push_seconds.append(time.perf_counter() - start)
    return state


def finalize(state: StreamState) -> ClusteringResult:
    """Freeze every link and report the clustering."""
    sampler = state.sampler
    sampler.window_start = sampler.n
    secs = state.push_seconds
    return ClusteringResult(
        list(sampler.ids), sampler.partition(), list(sampler.link), sampler.hyper,
        sampler.seed,
        metadata={
            "pushes": len(secs),
            "seconds": float(sum(secs)),
            "mean_push_seconds": float(np.mean(secs)) if secs else 0.0,
            "resamples": sampler.resamples,
            "config": asdict(state.config),
        },
    )


def _encode_float(x: float):
    return x if math.isfinite(x) else repr(x)


def _decode_float(x) -> float:
    return float(x)


def checkpoint_dict(state: StreamState) -> dict:
    s = state.sampler
    cfg = asdict(state.config)
    cfg["window"] = _encode_float(cfg["window"])
    return {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "config": cfg,
        "hyper": asdict(s.hyper),
        "vocab_size": s.vocab_size,
        "seed": s.seed,
        "rng": s.rng.bit_generator.state,
        "window_start": s.window_start,
        "iteration": s.iteration,
        "resamples": s.resamples,
        "last_timestamp": _encode_float(state.last_timestamp),
        "push_seconds": state.push_seconds,
        "documents": [
            {"id": doc_id, "timestamp": float(t), "counts": sorted(counts.items()), "link": c}
            for doc_id, t, counts, c in zip(s.ids, s.times.tolist(), s.docs, s.link)
        ],
    }


def state_from_dict(data: dict) -> StreamState:
    if data.get("format") != CHECKPOINT_FORMAT:
        raise ValueError("not a stream checkpoint")
    if data.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {data.get('version')}")
    cfg = dict(data["config"])
    cfg["window"] = _decode_float(cfg["window"])
    state = StreamState(Hyperparams(**data["hyper"]), data["vocab_size"], StreamConfig(**cfg))
    s = state.sampler
    for row in data["documents"]:
        ts = row["timestamp"]
        s.append(row["id"], int(ts) if float(ts).is_integer() else ts,
                 {int(w): int(c) for w, c in row["counts"]})
        state._ids.add(row["id"])
    s.set_links([row["link"] for row in data["documents"]])
    s.rng.bit_generator.state = data["rng"]
    s.seed = data["seed"]
    s.window_start = data["window_start"]
    s.iteration = data["iteration"]
    s.resamples = data["resamples"]
    state.last_timestamp = _decode_float(data["last_timestamp"])
    state.push_seconds = list(data["push_seconds"])
    return state


def save_checkpoint(state: StreamState, path) -> None:
    """Write a JSON snapshot sufficient to resume the stream exactly."""
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(checkpoint_dict(state), fh)


def load_checkpoint(path) -> StreamState:
    with open(path, encoding="utf-8") as fh:
        return state_from_dict(json.load(fh))

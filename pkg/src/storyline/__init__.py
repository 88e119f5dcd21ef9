"""Streaming storyline clustering with the distance-dependent Chinese Restaurant Process."""

from .corpus import Document, DocumentStore, Vocabulary, ingest, load_corpus, tokenize
from .evaluation import GoldClusters, Metrics, adjusted_rand_index, score, select_representatives
from .hyper import HyperUpdateConfig, estimate_eta, gradient_step, log_prior_and_gradient
from .model import (
    ClusterStats,
    Hyperparams,
    Partition,
    cluster_topic_estimate,
    components,
    dcm_log_likelihood,
    distance_decay,
    joint_log_prob,
    link_prior_weight,
    merge_log_ratio,
)
from .sampler import (
    ClusteringResult,
    SamplerConfig,
    SamplerState,
    link_distribution,
    resample_link,
    run_baseline,
    run_offline,
    sweep,
)
from .streaming import StreamConfig, StreamState, finalize, push_document
from .synth import planted_storylines

__version__ = "0.1.0"

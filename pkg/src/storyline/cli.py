"""Command-line front end: fit, stream, baseline, eval, synth.

Exit codes: 0 success, 1 usage error, 2 data error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict

from .corpus import (
    Document,
    DuplicateIdError,
    RecordError,
    Vocabulary,
    iter_records,
    load_corpus,
    tokenize,
)
from .evaluation import (
    GoldClusters,
    Timeline,
    adjusted_rand_index,
    labels_from_mapping,
    score,
    select_representatives,
)
from .hyper import HyperUpdateConfig, estimate_eta
from .model import Hyperparams
from .sampler import ClusteringResult, SamplerConfig, run_baseline, run_offline
from .streaming import (
    OutOfOrderError,
    StreamConfig,
    StreamState,
    finalize,
    load_checkpoint,
    push_document,
    save_checkpoint,
)
from .synth import planted_storylines

logger = logging.getLogger("storyline")

EXIT_USAGE = 1
EXIT_DATA = 2


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _eta_arg(value: str):
    if value == "auto":
        return value
    eta = float(value)
    if eta <= 0:
        raise argparse.ArgumentTypeError("eta must be positive or 'auto'")
    return eta


def _add_model_args(p):
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--decay-scale", type=float, default=86400.0, help="seconds")
    p.add_argument("--eta", type=_eta_arg, default="auto", help="positive number or 'auto'")
    p.add_argument("--iterations", type=int, default=500)
    p.add_argument("--temperature", type=float, default=2.0)
    p.add_argument("--anneal-start", type=float, default=0.8,
                   help="fraction of iterations before annealing starts")
    p.add_argument("--seed", type=int, default=0)


def _add_io_args(p, output=True):
    p.add_argument("--input", required=True)
    p.add_argument("--format", choices=("jsonl", "tsv"), default="jsonl")
    if output:
        p.add_argument("--output", required=True, help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="storyline", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    fit = sub.add_parser("fit", help="offline Gibbs sampling")
    _add_io_args(fit)
    _add_model_args(fit)
    fit.add_argument("--hyper-every", type=int, default=10,
                     help="sweeps between alpha/a gradient steps")
    fit.add_argument("--no-hyper-updates", action="store_true")
    fit.add_argument("--trace-every", type=int, default=1)
    fit.add_argument("--chains", type=int, default=1,
                     help="independent chains run in parallel; the best joint log probability wins")

    stream = sub.add_parser("stream", help="fixed-lag online sampling")
    _add_io_args(stream)
    _add_model_args(stream)
    stream.add_argument("--window", type=float, default=432000.0, help="seconds")
    stream.add_argument("--checkpoint", help="write a checkpoint here")
    stream.add_argument("--checkpoint-every", type=int, default=0)
    stream.add_argument("--resume", help="resume from this checkpoint")
    stream.add_argument("--stop-after", type=int,
                        help="stop (and checkpoint) after this many documents in total")
    stream.add_argument("--timing-log", help="CSV of wall time per pushed document")

    base = sub.add_parser("baseline", help="finite Dirichlet-multinomial mixture")
    _add_io_args(base)
    _add_model_args(base)
    base.add_argument("--clusters", type=int, default=20)
    base.add_argument("--dirichlet", type=float, default=0.5)

    ev = sub.add_parser("eval", help="score a clustering against gold clusters")
    ev.add_argument("--gold", required=True)
    ev.add_argument("--assignments", help="assignments.jsonl from fit/stream/baseline")
    ev.add_argument("--input", help="corpus the assignments refer to")
    ev.add_argument("--format", choices=("jsonl", "tsv"), default="jsonl")
    ev.add_argument("--timeline", help="file of returned ids, one per line (instead of assignments)")
    ev.add_argument("--truth", help="full truth partition, JSON lines {id, cluster}, for ARI")
    ev.add_argument("--output", help="directory for metrics.json")

    syn = sub.add_parser("synth", help="generate a planted-storyline corpus")
    syn.add_argument("--output", required=True)
    syn.add_argument("--storylines", type=int, default=3)
    syn.add_argument("--docs-per-storyline", type=int, default=30)
    syn.add_argument("--vocab-per-storyline", type=int, default=5)
    syn.add_argument("--shared-words", type=int, default=0)
    syn.add_argument("--separation", type=float, default=10.0, help="in units of --decay-scale")
    syn.add_argument("--spread", type=float, default=1.0, help="in units of --decay-scale")
    syn.add_argument("--decay-scale", type=float, default=86400.0)
    syn.add_argument("--words-per-doc", type=int, default=6)
    syn.add_argument("--seed", type=int, default=0)
    return parser


def _load(args):
    errors: list[RecordError] = []
    try:
        store, vocab = load_corpus(args.input, args.format, errors)
    except FileNotFoundError:
        raise DataError(f"cannot read input file {args.input}") from None
    except (OSError, UnicodeDecodeError) as exc:
        raise DataError(f"cannot read input file {args.input}: {exc}") from None
    except DuplicateIdError as exc:
        raise DataError(f"{args.input}: {exc}") from None
    for err in errors:
        print(f"warning: {args.input}: {err}", file=sys.stderr)
    return store, vocab


def _hyper(args, vocab) -> Hyperparams:
    eta = estimate_eta(vocab) if args.eta == "auto" else args.eta
    try:
        return Hyperparams(args.alpha, args.decay_scale, eta)
    except ValueError as exc:
        raise DataError(str(exc)) from None


def _sampler_config(args, **extra) -> SamplerConfig:
    try:
        return SamplerConfig(iterations=args.iterations, temperature=args.temperature,
                             anneal_start_fraction=args.anneal_start, seed=args.seed, **extra)
    except ValueError as exc:
        raise _Usage(str(exc)) from None


class _Usage(Exception):
    pass


def _prepare_output(path) -> None:
    try:
        os.makedirs(path, exist_ok=True)
    except OSError as exc:
        raise DataError(f"cannot create output directory {path}: {exc}") from None


def _write_config(outdir, config: dict) -> None:
    text = json.dumps(config, indent=2, sort_keys=True)
    print(text, file=sys.stderr)
    with open(os.path.join(outdir, "config.json"), "w", encoding="utf-8") as fh:
        fh.write(text + "\n")


def _fit_chain(job):
    store, hyper, vocab_size, config = job
    return run_offline(store, hyper, vocab_size, config)


def cmd_fit(args) -> int:
    store, vocab = _load(args)
    hyper = _hyper(args, vocab)
    every = None if args.no_hyper_updates else args.hyper_every
    config = _sampler_config(args, hyper_update_every=every, trace_every=args.trace_every)
    if args.chains < 1:
        raise _Usage("--chains must be >= 1")
    _prepare_output(args.output)
    _write_config(args.output, {
        "command": "fit", "input": args.input, "format": args.format,
        "hyper": asdict(hyper), "sampler": asdict(config),
        "hyper_update": asdict(HyperUpdateConfig(period=every)) if every else None,
        "chains": args.chains, "vocab_size": len(vocab), "documents": len(store),
    })
    jobs = [(store, hyper, len(vocab),
             SamplerConfig(**{**asdict(config), "seed": config.seed + k}))
            for k in range(args.chains)]
    if args.chains == 1:
        results = [_fit_chain(jobs[0])]
    else:
        with ProcessPoolExecutor(max_workers=min(args.chains, os.cpu_count() or 1)) as pool:
            results = list(pool.map(_fit_chain, jobs))
    best = max(results, key=lambda r: r.metadata.get("joint_log_prob", float("-inf")))
    best.write_assignments(os.path.join(args.output, "assignments.jsonl"))
    best.write_trace(os.path.join(args.output, "trace.csv"))
    _write_summary(args.output, best, chains=[
        {"seed": r.seed, "joint_log_prob": r.metadata.get("joint_log_prob")} for r in results])
    return 0


def _write_summary(outdir, result: ClusteringResult, **extra) -> None:
    with open(os.path.join(outdir, "summary.json"), "w", encoding="utf-8") as fh:
        json.dump({**result.summary(), **extra}, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")


def cmd_baseline(args) -> int:
    store, vocab = _load(args)
    hyper = _hyper(args, vocab)
    config = _sampler_config(args)
    if args.clusters < 1:
        raise _Usage("--clusters must be >= 1")
    if args.dirichlet <= 0:
        raise _Usage("--dirichlet must be positive")
    _prepare_output(args.output)
    _write_config(args.output, {
        "command": "baseline", "input": args.input, "format": args.format,
        "clusters": args.clusters, "dirichlet": args.dirichlet, "eta": hyper.eta,
        "sampler": asdict(config), "vocab_size": len(vocab), "documents": len(store),
    })
    result = run_baseline(store, len(vocab), args.clusters, args.dirichlet, hyper.eta, config)
    result.write_assignments(os.path.join(args.output, "assignments.jsonl"))
    _write_summary(args.output, result)
    return 0


def cmd_stream(args) -> int:
    errors: list[RecordError] = []
    try:
        with open(args.input, encoding="utf-8") as fh:
            records = list(iter_records(fh, args.format, errors))
    except FileNotFoundError:
        raise DataError(f"cannot read input file {args.input}") from None
    except (OSError, UnicodeDecodeError) as exc:
        raise DataError(f"cannot read input file {args.input}: {exc}") from None
    for err in errors:
        print(f"warning: {args.input}: {err}", file=sys.stderr)
    if args.stop_after is not None and not args.checkpoint:
        raise _Usage("--stop-after requires --checkpoint")

    # vocabulary (and eta) need a pre-pass; the stream itself is pushed one record at a time
    tokens = [tokenize(rec.text) for rec in records]
    vocab = Vocabulary.from_tokens(tokens)
    if args.resume:
        try:
            state = load_checkpoint(args.resume)
        except (OSError, ValueError, KeyError, TypeError) as exc:
            raise DataError(f"cannot resume from {args.resume}: {exc}") from None
        done = state.n
        if [r.id for r in records[:done]] != state.sampler.ids:
            raise DataError(f"checkpoint {args.resume} does not match the first {done} input records")
    else:
        hyper = _hyper(args, vocab)
        try:
            config = StreamConfig(window=args.window, iterations=args.iterations,
                                  temperature=args.temperature,
                                  anneal_start_fraction=args.anneal_start, seed=args.seed)
        except ValueError as exc:
            raise _Usage(str(exc)) from None
        state = StreamState(hyper, len(vocab), config)
        done = 0

    _prepare_output(args.output)
    _write_config(args.output, {
        "command": "stream", "input": args.input, "format": args.format,
        "hyper": asdict(state.sampler.hyper), "stream": asdict(state.config),
        "vocab_size": state.sampler.vocab_size, "resumed_from": args.resume,
        "resumed_at": done,
    })
    stop = len(records) if args.stop_after is None else min(args.stop_after, len(records))
    for pos in range(done, stop):
        rec = records[pos]
        try:
            push_document(state, Document(rec.id, rec.timestamp, vocab.encode(tokens[pos])))
        except OutOfOrderError as exc:
            raise DataError(f"{args.input}: record {pos + 1} (id {rec.id!r}) is out of order: {exc}") from None
        except ValueError as exc:
            raise DataError(f"{args.input}: record {pos + 1} (id {rec.id!r}): {exc}") from None
        if args.checkpoint and args.checkpoint_every and (pos + 1) % args.checkpoint_every == 0:
            save_checkpoint(state, args.checkpoint)

    if args.timing_log:
        with open(args.timing_log, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["index", "id", "seconds"])
            for pos, (doc_id, secs) in enumerate(zip(state.sampler.ids, state.push_seconds)):
                writer.writerow([pos, doc_id, f"{secs:.6f}"])
    if args.checkpoint:
        save_checkpoint(state, args.checkpoint)
    if stop < len(records):
        print(f"stopped after {stop} documents; checkpoint in {args.checkpoint}", file=sys.stderr)
        return 0
    result = finalize(state)
    result.write_assignments(os.path.join(args.output, "assignments.jsonl"))
    _write_summary(args.output, result)
    return 0


def _read_jsonl(path, what):
    rows = []
    try:
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if line.strip():
                    try:
                        rows.append(json.loads(line))
                    except json.JSONDecodeError:
                        raise DataError(f"{path}:{lineno}: invalid JSON in {what}") from None
    except FileNotFoundError:
        raise DataError(f"cannot read {what} file {path}") from None
    return rows


def _mapping(rows, path, what):
    try:
        return {str(r["id"]): r["cluster"] for r in rows}
    except (KeyError, TypeError):
        raise DataError(f"{path}: {what} rows need 'id' and 'cluster'") from None


def cmd_eval(args) -> int:
    try:
        gold = GoldClusters.read(args.gold)
    except FileNotFoundError:
        raise DataError(f"cannot read gold file {args.gold}") from None
    except ValueError as exc:
        raise DataError(str(exc)) from None
    if len(gold) == 0:
        raise DataError(f"gold file {args.gold} contains no clusters")

    out: dict = {}
    if args.timeline:
        try:
            with open(args.timeline, encoding="utf-8") as fh:
                timeline = Timeline(line.strip() for line in fh if line.strip())
        except FileNotFoundError:
            raise DataError(f"cannot read timeline file {args.timeline}") from None
        predicted = None
    else:
        if not (args.assignments and args.input):
            raise _Usage("eval needs --timeline, or --assignments together with --input")
        store, _ = _load(args)
        assignment = _mapping(_read_jsonl(args.assignments, "assignments"), args.assignments,
                              "assignments")
        try:
            labels = labels_from_mapping(store.ids, assignment)
        except ValueError as exc:
            raise DataError(f"{args.assignments}: {exc}") from None
        predicted = ClusteringResult(store.ids, labels)
        timeline = select_representatives(predicted, store)
    metrics = score(timeline, gold)
    out.update(metrics.as_dict())
    out["timeline_size"] = len(timeline)

    if args.truth:
        if predicted is None:
            raise _Usage("--truth needs --assignments")
        truth = _mapping(_read_jsonl(args.truth, "truth"), args.truth, "truth")
        try:
            truth_labels = labels_from_mapping(predicted.ids, truth)
        except ValueError as exc:
            raise DataError(f"{args.truth}: {exc}") from None
        out["ari"] = adjusted_rand_index([str(x) for x in predicted.labels],
                                         [str(x) for x in truth_labels])
    print(json.dumps(out, sort_keys=True))
    print(metrics.table(), file=sys.stderr)
    if args.output:
        _prepare_output(args.output)
        with open(os.path.join(args.output, "metrics.json"), "w", encoding="utf-8") as fh:
            json.dump(out, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return 0


def cmd_synth(args) -> int:
    corpus = planted_storylines(
        num_storylines=args.storylines, docs_per_storyline=args.docs_per_storyline,
        vocab_per_storyline=args.vocab_per_storyline, shared_words=args.shared_words,
        separation=args.separation * args.decay_scale, spread=args.spread * args.decay_scale,
        words_per_doc=args.words_per_doc, seed=args.seed)
    try:
        corpus.write(args.output)
    except OSError as exc:
        raise DataError(f"cannot write to {args.output}: {exc}") from None
    print(json.dumps({"documents": len(corpus.records), "storylines": args.storylines,
                      "output": args.output}), file=sys.stderr)
    return 0


COMMANDS = {"fit": cmd_fit, "stream": cmd_stream, "baseline": cmd_baseline,
            "eval": cmd_eval, "synth": cmd_synth}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except _Usage as exc:
        print(f"storyline {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"storyline {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())

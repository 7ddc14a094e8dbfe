"""Operator command line: ingest, label, extract, train, evaluate, and serve.

Exit codes: 0 success (or a safe verdict), 2 phishing verdict, 1 error.
Errors print a single `error: <message>` line on stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import blacklist as bl
from . import corpus as cp
from .evaluation import EvaluationError, ablate, cross_validate
from .ml import (
    ModelError,
    load_model,
    permutation_importance,
    save_model,
    train_model,
)
from .pipeline import (
    DEMO_GROUP_DELAYS_S,
    PipelineError,
    extract_corpus,
    fixture_extractor,
    load_vectors,
    save_vectors,
    synthetic_vector_set,
)
from .timefmt import parse_duration, parse_timestamp
from .urlanalysis import TraceError, UrlParseError
from .whois import WhoisError

ALGORITHMS = {
    "nb": "naive_bayes",
    "dt": "decision_tree",
    "rf": "random_forest",
    "naive_bayes": "naive_bayes",
    "decision_tree": "decision_tree",
    "random_forest": "random_forest",
}

EXPECTED_ERRORS = (
    cp.CorpusError,
    bl.BlacklistError,
    UrlParseError,
    TraceError,
    WhoisError,
    ModelError,
    EvaluationError,
    PipelineError,
    OSError,
    ValueError,
)


def _algo(name: str) -> str:
    try:
        return ALGORITHMS[name.lower()]
    except KeyError:
        raise ValueError(f"unknown algorithm {name!r} (use nb, dt, or rf)") from None


def _emit(doc: dict, as_json: bool, lines) -> None:
    if as_json:
        print(json.dumps(doc, indent=1))
    else:
        for line in lines:
            print(line)


def cmd_ingest(args) -> int:
    result = cp.ingest_stream(args.input, dedupe_text=args.dedupe_text)
    cp.persist(result.corpus, args.output)
    doc = {
        "admitted": result.admitted,
        "skipped": {
            "no_url": result.skipped_no_url,
            "too_long": result.skipped_too_long,
            "invalid": result.skipped_invalid,
            "duplicate_id": result.skipped_duplicate_id,
        },
        "deduped_text": result.deduped_text,
        "output": str(args.output),
    }
    _emit(
        doc,
        args.json,
        [
            f"admitted {result.admitted} tweets to {args.output}",
            f"skipped {result.skipped} "
            f"(no_url={result.skipped_no_url} too_long={result.skipped_too_long} "
            f"invalid={result.skipped_invalid} duplicate_id={result.skipped_duplicate_id})"
            + (f", deduped {result.deduped_text} by text" if args.dedupe_text else ""),
        ],
    )
    return 0


def cmd_label(args) -> int:
    corpus = cp.load(args.corpus)
    stores = [bl.BlacklistStore.from_file(p) for p in args.blacklist]
    at = parse_timestamp(args.at)
    pairs = []
    for tweet in corpus.tweets():
        for url in tweet.urls:
            verdict = bl.lookup_all(stores, url, at)
            if verdict is not None:
                pairs.append((url, verdict))
    labeled = cp.apply_labels(corpus, pairs)
    flips = 0
    if args.recheck_after is not None:
        labeled, flips = bl.delayed_relabel(labeled, stores, parse_duration(args.recheck_after))
    out = args.output if args.output is not None else args.corpus
    cp.persist(labeled, out)
    n_phish = sum(
        1 for e in labeled.entries if e.label and e.label.value is cp.LabelValue.PHISHING
    )
    doc = {
        "labeled": len(labeled.entries),
        "phishing": n_phish,
        "safe": len(labeled.entries) - n_phish,
        "flips": flips,
        "output": str(out),
    }
    _emit(
        doc,
        args.json,
        [
            f"labeled {doc['labeled']} tweets: {n_phish} phishing, {doc['safe']} safe",
            f"recheck flips: {flips}",
        ],
    )
    return 0


def cmd_extract(args) -> int:
    corpus = cp.load(args.corpus)
    extractor = fixture_extractor(args.fixtures, trends_path=args.trends)
    vectors = extract_corpus(corpus, extractor)
    save_vectors(vectors, args.output)
    doc = {
        "entries": len(vectors.entries),
        "labeled": vectors.n_labeled,
        "availability": vectors.availability,
        "output": str(args.output),
    }
    availability = " ".join(f"{g}={v:.3f}" for g, v in vectors.availability.items())
    _emit(
        doc,
        args.json,
        [f"extracted {doc['entries']} vectors ({doc['labeled']} labeled) to {args.output}",
         f"group availability: {availability}"],
    )
    return 0


def cmd_train(args) -> int:
    vectors = load_vectors(args.vectors)
    X, y = vectors.labeled_matrix()
    model = train_model(
        _algo(args.algo),
        X,
        y,
        rng_seed=args.seed,
        feature_names=vectors.feature_names,
        registrar_freq_table=vectors.registrar_freq_table,
    )
    save_model(model, args.output)
    doc = {
        "algorithm": model.algorithm,
        "n_samples": len(y),
        "n_phishing": int(y.sum()),
        "seed": args.seed,
        "output": str(args.output),
    }
    _emit(
        doc,
        args.json,
        [f"trained {model.algorithm} on {len(y)} vectors "
         f"({int(y.sum())} phishing), saved to {args.output}"],
    )
    return 0


def _metrics_cells(metrics) -> tuple[str, str, str]:
    fmt = lambda v: "n/a" if v is None else f"{v:.4f}"
    return fmt(metrics.precision), fmt(metrics.recall), f"{metrics.accuracy:.4f}"


def cmd_evaluate(args) -> int:
    vectors = load_vectors(args.vectors)
    X, y = vectors.labeled_matrix()
    report = cross_validate(
        _algo(args.algo), X, y, n_folds=args.folds, rng_seed=args.seed,
        feature_names=vectors.feature_names,
    )
    if args.json:
        print(json.dumps(report.to_json(), indent=1))
        return 0
    print(f"{report.algorithm}: {report.n_folds}-fold cross-validation (seed {report.rng_seed})")
    print("fold  precision  recall  accuracy")
    for fold in report.folds:
        p, r, a = _metrics_cells(fold.metrics)
        print(f"{fold.fold:>4}  {p:>9}  {r:>6}  {a:>8}")
    p, r, a = _metrics_cells(report.metrics)
    print(f" all  {p:>9}  {r:>6}  {a:>8}")
    return 0


def cmd_ablate(args) -> int:
    vectors = load_vectors(args.vectors)
    X, y = vectors.labeled_matrix()
    rows = ablate(_algo(args.algo), X, y, n_folds=args.folds, rng_seed=args.seed)
    if args.json:
        print(json.dumps(
            [{"features": r.label, "groups": list(r.groups), "accuracy": r.accuracy}
             for r in rows],
            indent=1,
        ))
        return 0
    print("features     accuracy")
    for row in rows:
        print(f"{row.label:<12} {row.accuracy:.4f}")
    return 0


def cmd_importance(args) -> int:
    model = load_model(args.model)
    vectors = load_vectors(args.vectors)
    X, y = vectors.labeled_matrix()
    report = permutation_importance(model, X, y, rng_seed=args.seed)
    if args.json:
        print(json.dumps(
            {
                "baseline_error": report.baseline_error,
                "ranking": [
                    {"feature": name, "importance": report.scores[name]}
                    for name in report.ranking
                ],
            },
            indent=1,
        ))
        return 0
    print(f"baseline error {report.baseline_error:.4f}")
    print("rank  feature                   importance")
    for rank, name in enumerate(report.ranking, start=1):
        print(f"{rank:>4}  {name:<24}  {report.scores[name]:+.4f}")
    return 0


def cmd_classify(args) -> int:
    tweet = cp.tweet_from_json(json.loads(Path(args.tweet).read_text(encoding="utf-8")))
    model = load_model(args.model)
    extractor = fixture_extractor(args.fixtures, trends_path=args.trends)
    extractor.registrar_table = dict(model.registrar_freq_table)
    vector = np.array(extractor.extract(tweet), dtype=float)
    verdict = "phishing" if model.predict(vector) == 1 else "safe"
    print(json.dumps(
        {"tweet_id": tweet.id, "verdict": verdict, "score": float(model.score(vector))},
        indent=1,
    ))
    return 2 if verdict == "phishing" else 0


def cmd_compare_blacklist(args) -> int:
    corpus = cp.load(args.corpus)
    model = load_model(args.model)
    stores = [bl.BlacklistStore.from_file(p) for p in args.blacklist]
    extractor = fixture_extractor(args.fixtures, trends_path=args.trends)
    extractor.registrar_table = dict(model.registrar_freq_table)
    observations = [
        (tweet.urls, np.array(extractor.extract(tweet), dtype=float))
        for tweet in corpus.tweets()
    ]
    t0 = parse_timestamp(args.t0)
    delay_s = parse_duration(args.delay)
    rate = bl.zero_hour_catch_rate(model, observations, stores, t0, delay_s)
    doc = {"zero_hour_catch_rate": rate, "t0": args.t0, "delay_s": delay_s}
    _emit(doc, args.json, [f"zero-hour catch rate: {rate:.4f} (delay {delay_s}s)"])
    return 0


def cmd_synth(args) -> int:
    vectors = synthetic_vector_set(args.n, args.sep, rng_seed=args.seed)
    save_vectors(vectors, args.output)
    n_phish = sum(1 for e in vectors.entries if e.label == "phishing")
    doc = {"entries": args.n, "phishing": n_phish, "separability": args.sep,
           "seed": args.seed, "output": str(args.output)}
    _emit(
        doc,
        args.json,
        [f"wrote {args.n} synthetic vectors ({n_phish} phishing, "
         f"separability {args.sep}) to {args.output}"],
    )
    return 0


def cmd_serve(args) -> int:
    from .pipeline import JsonlTweetProvider
    from .service import build_app, serve

    model = load_model(args.model)
    delays = DEMO_GROUP_DELAYS_S if args.demo_latency else None
    extractor = fixture_extractor(args.fixtures, trends_path=args.trends,
                                  group_delays_s=delays)
    extractor.registrar_table = dict(model.registrar_freq_table)
    store = Path(args.fixtures) / "tweets.jsonl"
    provider = JsonlTweetProvider(store) if store.is_file() else None
    app = build_app(model, extractor, provider, sequential=args.sequential)
    print(f"serving on {args.host}:{args.port} "
          f"({'sequential' if args.sequential else 'concurrent'} extraction)")
    serve(app, args.host, args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="phishscan",
        description="Phishing-tweet detection: corpus tools, classifiers, and the realtime API.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def reporting(p):
        p.add_argument("--json", action="store_true", help="machine-readable output")

    p = sub.add_parser("ingest", help="read a tweet JSONL stream into a corpus file")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--dedupe-text", action="store_true",
                   help="drop tweets whose text duplicates an earlier one")
    reporting(p)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("label", help="label a corpus against blacklists")
    p.add_argument("corpus")
    p.add_argument("--blacklist", action="append", required=True,
                   help="blacklist TSV; repeatable")
    p.add_argument("--at", required=True, help="lookup timestamp (ISO 8601 UTC)")
    p.add_argument("--recheck-after", default=None,
                   help="re-check this long after each tweet posted, flipping late listings")
    p.add_argument("-o", "--output", default=None, help="output path (default: in place)")
    reporting(p)
    p.set_defaults(func=cmd_label)

    p = sub.add_parser("extract", help="turn a corpus into feature vectors")
    p.add_argument("corpus")
    p.add_argument("--fixtures", required=True, help="fixture directory (redirects.json, whois/)")
    p.add_argument("--trends", default=None, help="trending-topics JSON")
    p.add_argument("-o", "--output", required=True)
    reporting(p)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("train", help="train a classifier on extracted vectors")
    p.add_argument("vectors")
    p.add_argument("--algo", default="rf", help="nb, dt, or rf")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", required=True)
    reporting(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="stratified cross-validation metrics")
    p.add_argument("vectors")
    p.add_argument("--algo", default="rf")
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    reporting(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("ablate", help="accuracy as feature groups accumulate")
    p.add_argument("vectors")
    p.add_argument("--algo", default="rf")
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    reporting(p)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("importance", help="permutation importance ranking")
    p.add_argument("model")
    p.add_argument("vectors")
    p.add_argument("--seed", type=int, default=0)
    reporting(p)
    p.set_defaults(func=cmd_importance)

    p = sub.add_parser("classify", help="classify one tweet JSON file")
    p.add_argument("tweet")
    p.add_argument("--model", required=True)
    p.add_argument("--fixtures", required=True)
    p.add_argument("--trends", default=None)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("compare-blacklist",
                       help="zero-hour catch rate against delayed blacklists")
    p.add_argument("corpus")
    p.add_argument("--model", required=True)
    p.add_argument("--blacklist", action="append", required=True)
    p.add_argument("--t0", required=True, help="classification time (ISO 8601 UTC)")
    p.add_argument("--delay", required=True, help="blacklist maturity delay (e.g. 3d)")
    p.add_argument("--fixtures", required=True)
    p.add_argument("--trends", default=None)
    reporting(p)
    p.set_defaults(func=cmd_compare_blacklist)

    p = sub.add_parser("synth", help="generate the synthetic benchmark vectors")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--sep", type=float, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", required=True)
    reporting(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("serve", help="run the classification API")
    p.add_argument("--model", required=True)
    p.add_argument("--fixtures", required=True)
    p.add_argument("--trends", default=None)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--sequential", action="store_true",
                   help="force one-group-at-a-time extraction (for timing comparisons)")
    p.add_argument("--demo-latency", action="store_true",
                   help="simulate per-group network cost on fixture extractors")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except EXPECTED_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

"""Command-line pipelines: fit, decode, oracle, metrics, detect.

Every subcommand is deterministic given --seed, validates all inputs before
writing any output file, and never embeds timestamps, so re-runs are
byte-identical. Exit codes: 0 success, 2 usage error (bad flags, missing
files), 3 data error (malformed or inconsistent inputs).
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import decay, detect, metrics, oracle, recordio, sampler
from .errors import (
    ConfigurationError,
    DataError,
    ParameterError,
    RealsampError,
)

_KIND_ALIASES = {"fp": "fractional_polynomial", "exp": "exponential", "logistic": "logistic"}


def _write_json(path, obj) -> None:
    text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


# ---------------------------------------------------------------------------
# fit


def _fit_one(task):
    profile, family, kind, K, config = task
    curve, loss = decay.fit_curve(profile, family, kind, K, config)
    return decay.curve_record(curve, profile.context_id, profile.position, loss)


def cmd_fit(args) -> int:
    header, profiles = recordio.read_records(args.records)
    if args.window > 1:
        profiles = decay.smooth_profiles(profiles, args.window)
    config = decay.FitConfig(
        max_iterations=args.max_iterations,
        loss_tolerance=args.loss_tolerance,
        num_restarts=args.restarts,
        rng_seed=args.seed,
    )
    kind = _KIND_ALIASES[args.kind]
    tasks = [(p, header.family, kind, args.K, config) for p in profiles]
    if args.threads > 1:
        with ProcessPoolExecutor(max_workers=args.threads) as pool:
            records = list(pool.map(_fit_one, tasks, chunksize=8))
    else:
        records = [_fit_one(t) for t in tasks]
    records.sort(key=lambda r: (r["context_id"], r["position"]))
    recordio.write_curves(args.curves, records)
    print(f"fit {len(records)} profiles -> {args.curves}")
    return 0


# ---------------------------------------------------------------------------
# decode


def cmd_decode(args) -> int:
    steps = recordio.read_logit_stream(args.logits)
    if not steps:
        raise DataError(f"{args.logits}: empty logit stream")

    config = sampler.SamplerConfig(
        method=args.method,
        t_p=args.p,
        t_k=args.k,
        T=args.T,
        tau=args.tau,
        eta=args.eta,
        typical_mass=args.typical_mass,
        cd_alpha=args.alpha,
    )

    family = None
    if args.records:
        family = recordio.read_records(args.records)[0].family

    curves = None
    if args.curves:
        fitted = recordio.read_curves(args.curves)
        fitted.sort(key=lambda rec: (rec[1], rec[2]))
        curves = [rec[0] for rec in fitted]
        if len(curves) < len(steps):
            raise DataError(
                f"{args.curves}: {len(curves)} curves for {len(steps)} decode steps"
            )

    terminals = frozenset(int(t) for t in args.terminals.split(",") if t != "")
    state = sampler.DecodeState(
        rng=np.random.default_rng(args.seed), sentence_terminals=terminals
    )

    tokens: list[int] = []
    traces: list[dict] = []
    for step, (expert, amateur) in enumerate(steps):
        curve = curves[step] if curves else None
        token, decision, state = sampler.decode_step(
            config, expert, amateur, curve, family, state
        )
        tokens.append(token)
        traces.append(recordio.trace_row(step, decision, token))

    with open(args.out, "w", encoding="utf-8") as fh:
        fh.writelines(f"{t}\n" for t in tokens)
    if args.traces:
        recordio.write_traces(args.traces, traces)
    print(f"decoded {len(tokens)} steps -> {args.out}")
    return 0


# ---------------------------------------------------------------------------
# oracle


def _oracle_family(args) -> decay.ModelFamilySpec:
    if args.sizes:
        return decay.ModelFamilySpec(np.array([float(v) for v in args.sizes.split(",")]))
    return oracle.default_family()


def cmd_oracle_generate(args) -> int:
    family = _oracle_family(args)
    fam = oracle.MixtureFamily(
        ideal=oracle.uniform_ideal(args.vocab),
        mix_rate=args.mix_rate,
        s_ref=args.s_ref,
        sizes=family,
    )
    contexts = oracle.generate_profiles(fam, args.contexts, args.noise_sd, args.seed)
    recordio.write_records(
        args.out, family, [c.profile for c in contexts], corpus_name="oracle-mixture"
    )
    truth_rows = [
        {
            "context_id": c.profile.context_id,
            "position": c.profile.position,
            "true_asymptote": c.true_asymptote,
            "true_entropies": c.true_entropies.tolist(),
        }
        for c in contexts
    ]
    recordio.write_curves(args.truths, truth_rows)  # plain JSONL rows
    print(f"generated {len(contexts)} contexts -> {args.out} (truths: {args.truths})")
    return 0


def cmd_oracle_theorem(args) -> int:
    temps = [float(t) for t in args.temps.split(",")]
    violations, worst = oracle.theorem_sweep(args.cases, temps, args.seed)
    print(
        f"threshold-bound sweep: {violations} violations in {args.cases} cases "
        f"x temps {temps}; worst margin {worst:.3e}"
    )
    return 0 if violations == 0 else 1


def cmd_oracle_score(args) -> int:
    truths = {}
    with open(args.truths, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                row = json.loads(line)
                truths[(row["context_id"], row["position"])] = row

    fitted = recordio.read_curves(args.curves)
    if not fitted:
        raise DataError(f"{args.curves}: no fitted curves")
    header, _ = recordio.read_records(args.records) if args.records else (None, None)

    ae_err, pred_err, rows = [], [], []
    for curve, context_id, position, loss in fitted:
        key = (context_id, position)
        if key not in truths:
            raise DataError(f"no truth row for context {context_id!r} position {position}")
        truth = truths[key]
        true_ents = np.asarray(truth["true_entropies"], dtype=np.float64)
        e_ae = abs(decay.asymptote(curve) - truth["true_asymptote"])
        if header is not None:
            s_n = header.family.largest
            pred = decay.eval_curve(curve, s_n)
        else:
            pred = decay.eval_curve(curve, oracle.DEFAULT_FAMILY_SIZES[-1])
        e_pred = abs(float(pred) - float(true_ents[-1]))
        ae_err.append(e_ae)
        pred_err.append(e_pred)
        rows.append(
            {"context_id": context_id, "position": position, "ae_error": e_ae, "pred_error": e_pred, "loss": loss}
        )

    report = {
        "contexts": len(rows),
        "ae_tolerance": args.ae_tol,
        "ae_within_tolerance": float(np.mean(np.asarray(ae_err) <= args.ae_tol)),
        "mean_ae_error": float(np.mean(ae_err)),
        "pred_tolerance": args.pred_tol,
        "pred_within_tolerance": float(np.mean(np.asarray(pred_err) <= args.pred_tol)),
        "mean_pred_error": float(np.mean(pred_err)),
        "per_context": rows,
    }
    _write_json(args.out, report)
    return 0


# ---------------------------------------------------------------------------
# metrics


def cmd_metrics_diversity(args) -> int:
    corpus = metrics.Corpus(recordio.read_corpus(args.corpus))
    report = {
        f"dist_{args.n}": metrics.distinct_n(corpus, args.n),
        "rep": metrics.repetition_ratio(corpus, args.rep_n),
        "rep_ngram": args.rep_n,
        "prompts": len(corpus.generations),
        "generations": len(corpus.all_sequences()),
    }
    _write_json(args.out, report)
    return 0


def cmd_metrics_aggregate(args) -> int:
    rows = recordio.read_score_rows(args.scores)
    aggregates = metrics.minmax_aggregate(rows)
    report = {
        method: {
            "agg_factuality": agg.agg_factuality,
            "agg_diversity": agg.agg_diversity,
            "normalized": agg.normalized,
        }
        for method, agg in aggregates.items()
    }
    _write_json(args.out, report)
    return 0


# ---------------------------------------------------------------------------
# detect


def cmd_detect(args) -> int:
    header, profiles = recordio.read_records(args.records)
    labels = recordio.read_labels(args.labels)
    fitted = {(ctx, pos): curve for curve, ctx, pos, _ in recordio.read_curves(args.curves)}

    by_context: dict[str, list] = {}
    for p in profiles:
        by_context.setdefault(p.context_id, []).append(p)

    missing = sorted(set(by_context) - set(labels))
    if missing:
        raise DataError(f"{args.labels}: no label for contexts {missing[:5]}")

    feature_rows = []
    for context_id in sorted(by_context):
        span_profiles = sorted(by_context[context_id], key=lambda p: p.position)
        try:
            curves = [fitted[(context_id, p.position)] for p in span_profiles]
        except KeyError as exc:
            raise DataError(f"{args.curves}: missing curve for {exc}") from None
        span = detect.LabeledSpan(context_id, labels[context_id], span_profiles)
        features = detect.extract_features(span, curves, header.family, args.aggregation)
        feature_rows.append({"context_id": context_id, "label": span.label, **features.as_dict()})

    recordio.write_feature_csv(args.features_out, feature_rows)
    print(f"wrote {len(feature_rows)} feature rows -> {args.features_out}")

    if args.score:
        label_col = [row["label"] for row in feature_rows]
        report = {}
        for name in detect.FEATURE_NAMES:
            column = [row[name] for row in feature_rows]
            if any(v is None for v in column):
                report[name] = None
                continue
            report[name] = detect.score_feature(column, label_col, higher_is_nonfactual=True)
        _write_json(args.score_out, report)
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="realsamp",
        description="Entropy-decay fitting, residual-entropy sampling, and evaluation pipelines.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_fit = sub.add_parser("fit", help="fit decay curves to an entropy record file")
    p_fit.add_argument("--records", required=True)
    p_fit.add_argument("--curves", required=True, help="output curve JSONL")
    p_fit.add_argument("--kind", choices=sorted(_KIND_ALIASES), default="fp")
    p_fit.add_argument("--K", type=int, default=10)
    p_fit.add_argument("--restarts", type=int, default=8)
    p_fit.add_argument("--seed", type=int, default=0)
    p_fit.add_argument("--threads", type=int, default=1)
    p_fit.add_argument("--window", type=int, default=1, help="odd smoothing window over positions")
    p_fit.add_argument("--max-iterations", type=int, default=500)
    p_fit.add_argument("--loss-tolerance", type=float, default=1e-8)
    p_fit.set_defaults(func=cmd_fit)

    p_dec = sub.add_parser("decode", help="run a sampler over a logit stream")
    p_dec.add_argument("--logits", required=True, help="JSONL or framed binary stream")
    p_dec.add_argument("--method", choices=sampler.METHODS, required=True)
    p_dec.add_argument("--out", required=True, help="output token file (one index per line)")
    p_dec.add_argument("--traces", default=None, help="output decision-trace JSONL")
    p_dec.add_argument("--records", default=None, help="record file supplying the model family")
    p_dec.add_argument("--curves", default=None, help="fitted curves, one per decode step")
    p_dec.add_argument("--p", type=float, default=0.9)
    p_dec.add_argument("--k", type=float, default=40)
    p_dec.add_argument("--T", type=float, default=1.0)
    p_dec.add_argument("--tau", type=float, default=1.0)
    p_dec.add_argument("--eta", type=float, default=0.0009)
    p_dec.add_argument("--typical-mass", type=float, default=0.95)
    p_dec.add_argument("--alpha", type=float, default=0.3)
    p_dec.add_argument("--seed", type=int, default=0)
    p_dec.add_argument("--terminals", default="", help="comma-separated sentence-terminal token ids")
    p_dec.set_defaults(func=cmd_decode)

    p_or = sub.add_parser("oracle", help="synthetic ground-truth suites")
    or_sub = p_or.add_subparsers(dest="oracle_command", required=True)

    p_gen = or_sub.add_parser("generate", help="simulate a model family with known asymptotes")
    p_gen.add_argument("--out", required=True, help="output record file")
    p_gen.add_argument("--truths", required=True, help="output truth JSONL")
    p_gen.add_argument("--contexts", type=int, default=500)
    p_gen.add_argument("--noise-sd", type=float, default=0.0)
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("--vocab", type=int, default=50)
    p_gen.add_argument("--mix-rate", type=float, default=0.5)
    p_gen.add_argument("--s-ref", type=float, default=16.0)
    p_gen.add_argument("--sizes", default=None, help="comma-separated log sizes (default: 7-member family)")
    p_gen.set_defaults(func=cmd_oracle_generate)

    p_th = or_sub.add_parser("theorem", help="brute-force the adaptive-threshold bound")
    p_th.add_argument("--cases", type=int, default=10000)
    p_th.add_argument("--temps", default="0.5,1,2")
    p_th.add_argument("--seed", type=int, default=0)
    p_th.set_defaults(func=cmd_oracle_theorem)

    p_sc = or_sub.add_parser("score", help="score fitted curves against oracle truth")
    p_sc.add_argument("--truths", required=True)
    p_sc.add_argument("--curves", required=True)
    p_sc.add_argument("--records", default=None, help="record file supplying the family sizes")
    p_sc.add_argument("--ae-tol", type=float, default=0.1)
    p_sc.add_argument("--pred-tol", type=float, default=0.02)
    p_sc.add_argument("--out", default=None, help="report JSON (stdout if omitted)")
    p_sc.set_defaults(func=cmd_oracle_score)

    p_me = sub.add_parser("metrics", help="diversity metrics and score aggregation")
    me_sub = p_me.add_subparsers(dest="metrics_command", required=True)

    p_div = me_sub.add_parser("diversity", help="distinct-n and repetition ratio of a corpus")
    p_div.add_argument("--corpus", required=True, help="JSONL of {prompt_id, tokens}")
    p_div.add_argument("--n", type=int, default=2)
    p_div.add_argument("--rep-n", type=int, default=4)
    p_div.add_argument("--out", default=None)
    p_div.set_defaults(func=cmd_metrics_diversity)

    p_agg = me_sub.add_parser("aggregate", help="max-min normalize and combine method scores")
    p_agg.add_argument("--scores", required=True, help="CSV or JSONL of score rows")
    p_agg.add_argument("--out", default=None)
    p_agg.set_defaults(func=cmd_metrics_aggregate)

    p_det = sub.add_parser("detect", help="hallucination-detection feature tables")
    p_det.add_argument("--records", required=True, help="record file with surprisals")
    p_det.add_argument("--labels", required=True, help="JSONL of {context_id, label}")
    p_det.add_argument("--curves", required=True)
    p_det.add_argument("--features-out", required=True, help="output feature CSV")
    p_det.add_argument("--aggregation", choices=("mean", "first_token"), default="mean")
    p_det.add_argument("--score", action="store_true", help="also report per-feature AUC/accuracy")
    p_det.add_argument("--score-out", default=None)
    p_det.set_defaults(func=cmd_detect)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ParameterError, ConfigurationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except RealsampError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())

"""Command line: measure a model family over a text corpus and emit a
record file for the curve-fitting toolkit.

The corpus is a UTF-8 text file with one document per non-empty line.
Backends: ``hf`` loads Hugging Face causal LMs by name; ``ngram`` trains an
in-process count-based family (orders given in --models) for offline use.
"""

from __future__ import annotations

import argparse
import sys

from . import core, ngram
from .core import ExtractionError, ExtractionJob


def read_corpus(path, max_docs=None) -> dict[str, str]:
    docs: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                docs[f"doc{len(docs):05d}"] = line
            if max_docs is not None and len(docs) >= max_docs:
                break
    if not docs:
        raise ExtractionError(f"{path}: no documents")
    return docs


def run_job(job: ExtractionJob, backend: str = "hf") -> dict:
    documents = read_corpus(job.corpus_path, job.max_docs)

    if backend == "ngram":
        try:
            orders = [int(o) for o in job.models]
        except ValueError:
            raise ExtractionError("ngram backend expects integer orders in --models") from None
        tokenizer = ngram.WordTokenizer(list(documents.values()))
        tokenized = {cid: tokenizer.encode(text) for cid, text in documents.items()}
        models = ngram.build_family(orders, tokenized, tokenizer.size)
        labels = [m.name for m in models]
    else:
        from . import hf

        tokenizer, models = hf.load_family(job.models, job.device)
        tokenized = hf.tokenize_documents(tokenizer, documents)
        labels = [m.name for m in models]

    tokenized = {cid: toks for cid, toks in tokenized.items() if len(toks) >= 2}
    if not tokenized:
        raise ExtractionError("every document tokenized to fewer than 2 tokens")

    sizes, records = core.measure_family(models, tokenized, job.window)
    core.write_records(
        job.output_path,
        sizes,
        records,
        labels=labels,
        corpus_name=str(job.corpus_path),
    )
    return core.size_decay_summary(sizes, records)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="realsamp-extract",
        description="Emit per-token entropy/surprisal records for a model family.",
    )
    parser.add_argument("--models", required=True, help="comma-separated model names (or orders for --backend ngram)")
    parser.add_argument("--corpus", required=True, help="text file, one document per line")
    parser.add_argument("--out", required=True, help="output record file (JSONL)")
    parser.add_argument("--window", type=int, default=core.DEFAULT_WINDOW)
    parser.add_argument("--backend", choices=("hf", "ngram"), default="hf")
    parser.add_argument("--device", default="cpu")
    parser.add_argument("--max-docs", type=int, default=None)
    args = parser.parse_args(argv)

    job = ExtractionJob(
        models=tuple(m.strip() for m in args.models.split(",") if m.strip()),
        corpus_path=args.corpus,
        output_path=args.out,
        window=args.window,
        device=args.device,
        max_docs=args.max_docs,
    )
    try:
        summary = run_job(job, backend=args.backend)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ExtractionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    print(
        f"wrote {summary['positions']} positions x {len(summary['sizes'])} sizes -> {args.out}"
    )
    print(
        "mean entropy by size:",
        " ".join(f"{v:.3f}" for v in summary["mean_entropy_by_size"]),
    )
    print(
        f"share of positions with smallest-model entropy above largest: "
        f"{summary['share_smallest_above_largest']:.1%}"
    )
    return 0


if __name__ == "__main__":
    sys.exit(main())

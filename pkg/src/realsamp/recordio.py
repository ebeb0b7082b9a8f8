"""On-disk formats: entropy-record files, fitted-curve files, decode traces,
logit streams, and the small helper formats used by the metrics and
detection subcommands.

Everything row-oriented is JSONL for streamability; floats round-trip
exactly (shortest-repr serialization). A record file is a JSON header line
holding the model family followed by one profile per line; every profile
must match the header's family size.
"""

from __future__ import annotations

import csv
import json
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from .decay import DecayCurve, EntropyProfile, ModelFamilySpec, curve_from_record
from .errors import DataError, FormatError
from .metrics import ScoreRow

DEFAULT_WINDOW_HINT = 40
_LOGIT_MAGIC = b"RSL1"


@dataclass(frozen=True)
class RecordHeader:
    family: ModelFamilySpec
    corpus_name: str = ""
    window_hint: int = DEFAULT_WINDOW_HINT


def _dump_line(obj) -> str:
    return json.dumps(obj, separators=(",", ":")) + "\n"


def _parse_line(line: str, path, lineno: int) -> dict:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from None
    if not isinstance(obj, dict):
        raise FormatError(f"{path}:{lineno}: expected a JSON object")
    return obj


# ---------------------------------------------------------------------------
# Record files (header + profiles)


def write_records(
    path,
    family: ModelFamilySpec,
    profiles: Iterable[EntropyProfile],
    corpus_name: str = "",
    window_hint: int = DEFAULT_WINDOW_HINT,
) -> None:
    header = {
        "family": {
            "sizes": family.sizes.tolist(),
            "labels": list(family.labels) if family.labels else None,
        },
        "corpus_name": corpus_name,
        "window_hint": window_hint,
    }
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(_dump_line(header))
        for p in profiles:
            fh.write(
                _dump_line(
                    {
                        "context_id": p.context_id,
                        "position": p.position,
                        "entropies": p.entropies.tolist(),
                        "surprisals": None if p.surprisals is None else p.surprisals.tolist(),
                    }
                )
            )


def read_records(path) -> tuple[RecordHeader, list[EntropyProfile]]:
    """Parse and validate a record file; malformed lines are reported with
    their line number."""
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        first = fh.readline()
        if not first.strip():
            raise FormatError(f"{path}:1: missing header line")
        head = _parse_line(first, path, 1)
        try:
            fam = head["family"]
            family = ModelFamilySpec(
                np.asarray(fam["sizes"], dtype=np.float64),
                tuple(fam["labels"]) if fam.get("labels") else None,
            )
            header = RecordHeader(
                family=family,
                corpus_name=str(head.get("corpus_name", "")),
                window_hint=int(head.get("window_hint", DEFAULT_WINDOW_HINT)),
            )
        except (KeyError, TypeError) as exc:
            raise FormatError(f"{path}:1: bad header ({exc})") from None

        profiles = []
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            obj = _parse_line(line, path, lineno)
            try:
                profile = EntropyProfile(
                    context_id=str(obj["context_id"]),
                    position=int(obj["position"]),
                    entropies=np.asarray(obj["entropies"], dtype=np.float64),
                    surprisals=(
                        None
                        if obj.get("surprisals") is None
                        else np.asarray(obj["surprisals"], dtype=np.float64)
                    ),
                )
            except KeyError as exc:
                raise FormatError(f"{path}:{lineno}: missing field {exc}") from None
            except DataError as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from None
            if profile.entropies.size != family.count:
                raise FormatError(
                    f"{path}:{lineno}: profile has {profile.entropies.size} entropies, "
                    f"header family has {family.count} sizes"
                )
            profiles.append(profile)
    return header, profiles


# ---------------------------------------------------------------------------
# Curve files


def write_curves(path, records: Iterable[dict]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(_dump_line(rec))


def read_curves(path) -> list[tuple[DecayCurve, str, int, float]]:
    path = Path(path)
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            obj = _parse_line(line, path, lineno)
            try:
                out.append(curve_from_record(obj))
            except DataError as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from None
    return out


# ---------------------------------------------------------------------------
# Decode traces


def trace_row(step: int, decision, token: int) -> dict:
    return {
        "step": step,
        "method": decision.trace.method,
        "d_RE": decision.trace.d_re,
        "raw_threshold": decision.trace.raw_threshold,
        "effective_threshold": decision.effective_threshold,
        "kept_count": decision.kept_count,
        "sampled_token": token,
    }


def write_traces(path, rows: Iterable[dict]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(_dump_line(row))


# ---------------------------------------------------------------------------
# Logit streams: JSONL ({"expert": [...], "amateur": [...]?} per step) or a
# framed little-endian binary (magic, vocab size, amateur flag, float64 rows).


def write_logit_stream_jsonl(path, expert_rows, amateur_rows=None) -> None:
    expert_rows = [np.asarray(r, dtype=np.float64) for r in expert_rows]
    amateur_rows = None if amateur_rows is None else [np.asarray(r, dtype=np.float64) for r in amateur_rows]
    if amateur_rows is not None and len(amateur_rows) != len(expert_rows):
        raise DataError("expert and amateur streams must have the same number of steps")
    with open(path, "w", encoding="utf-8") as fh:
        for i, row in enumerate(expert_rows):
            obj = {"expert": row.tolist()}
            if amateur_rows is not None:
                obj["amateur"] = amateur_rows[i].tolist()
            fh.write(_dump_line(obj))


def write_logit_stream_binary(path, expert_rows, amateur_rows=None) -> None:
    expert_rows = [np.asarray(r, dtype=np.float64) for r in expert_rows]
    amateur_rows = None if amateur_rows is None else [np.asarray(r, dtype=np.float64) for r in amateur_rows]
    if not expert_rows:
        raise DataError("empty logit stream")
    vocab = expert_rows[0].size
    with open(path, "wb") as fh:
        fh.write(_LOGIT_MAGIC)
        fh.write(struct.pack("<IB", vocab, 1 if amateur_rows is not None else 0))
        for i, row in enumerate(expert_rows):
            if row.size != vocab:
                raise DataError(f"step {i}: expected {vocab} logits, got {row.size}")
            fh.write(row.astype("<f8").tobytes())
            if amateur_rows is not None:
                am = amateur_rows[i]
                if am.size != vocab:
                    raise DataError(f"step {i}: amateur row has {am.size} logits")
                fh.write(am.astype("<f8").tobytes())


def read_logit_stream(path) -> list[tuple[np.ndarray, np.ndarray | None]]:
    """Read either stream format (sniffed by magic bytes). Returns one
    (expert, amateur-or-None) pair per step."""
    path = Path(path)
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic == _LOGIT_MAGIC:
            vocab, has_amateur = struct.unpack("<IB", fh.read(5))
            row_bytes = 8 * vocab
            steps = []
            while True:
                buf = fh.read(row_bytes)
                if not buf:
                    break
                if len(buf) != row_bytes:
                    raise FormatError(f"{path}: truncated logit frame at step {len(steps)}")
                expert = np.frombuffer(buf, dtype="<f8").copy()
                amateur = None
                if has_amateur:
                    buf = fh.read(row_bytes)
                    if len(buf) != row_bytes:
                        raise FormatError(f"{path}: truncated amateur frame at step {len(steps)}")
                    amateur = np.frombuffer(buf, dtype="<f8").copy()
                steps.append((expert, amateur))
            return steps

    steps = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            obj = _parse_line(line, path, lineno)
            if "expert" not in obj:
                raise FormatError(f"{path}:{lineno}: missing 'expert' logits")
            expert = np.asarray(obj["expert"], dtype=np.float64)
            amateur = None if obj.get("amateur") is None else np.asarray(obj["amateur"], dtype=np.float64)
            steps.append((expert, amateur))
    return steps


# ---------------------------------------------------------------------------
# Helper row formats


def read_corpus(path) -> dict[str, list[tuple[int, ...]]]:
    """JSONL of {"prompt_id": ..., "tokens": [...]} grouped by prompt."""
    path = Path(path)
    groups: dict[str, list[tuple[int, ...]]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            obj = _parse_line(line, path, lineno)
            try:
                groups.setdefault(str(obj["prompt_id"]), []).append(
                    tuple(int(t) for t in obj["tokens"])
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise FormatError(f"{path}:{lineno}: bad corpus row ({exc})") from None
    return groups


def read_score_rows(path) -> list[ScoreRow]:
    """Score rows from CSV (method,model,prompt_type,metric,value header) or
    JSONL objects with the same keys."""
    path = Path(path)
    rows: list[ScoreRow] = []
    if path.suffix.lower() == ".csv":
        with open(path, encoding="utf-8", newline="") as fh:
            for lineno, rec in enumerate(csv.DictReader(fh), start=2):
                rows.append(_score_row(rec, path, lineno))
    else:
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if line.strip():
                    rows.append(_score_row(_parse_line(line, path, lineno), path, lineno))
    return rows


def _score_row(rec: dict, path, lineno: int) -> ScoreRow:
    try:
        return ScoreRow(
            method=str(rec["method"]),
            model=str(rec["model"]),
            prompt_type=str(rec["prompt_type"]),
            metric=str(rec["metric"]),
            value=float(rec["value"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"{path}:{lineno}: bad score row ({exc})") from None


def read_labels(path) -> dict[str, str]:
    """JSONL of {"context_id": ..., "label": "factual"|"nonfactual"}."""
    path = Path(path)
    labels: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            obj = _parse_line(line, path, lineno)
            try:
                labels[str(obj["context_id"])] = str(obj["label"])
            except KeyError as exc:
                raise FormatError(f"{path}:{lineno}: missing field {exc}") from None
    return labels


def write_feature_csv(path, rows: Iterable[dict]) -> None:
    """One row per span: context_id, label, then the 8 feature columns."""
    from .detect import FEATURE_NAMES

    fieldnames = ["context_id", "label", *FEATURE_NAMES]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fieldnames)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: ("" if row.get(k) is None else row.get(k)) for k in fieldnames})


__all__ = [
    "DEFAULT_WINDOW_HINT",
    "RecordHeader",
    "write_records",
    "read_records",
    "write_curves",
    "read_curves",
    "trace_row",
    "write_traces",
    "write_logit_stream_jsonl",
    "write_logit_stream_binary",
    "read_logit_stream",
    "read_corpus",
    "read_score_rows",
    "read_labels",
    "write_feature_csv",
]

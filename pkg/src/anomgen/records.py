"""Persisted anomaly records: JSONL streams with a version header, CSV tables.

Every record is self-contained: menus plus predicted probabilities are enough
to re-run verification and reproduce the stored verdicts bit-for-bit.  Writes
go through a temp file and an atomic rename so interrupted batch runs never
leave half-written outputs.
"""

from __future__ import annotations

import json
import os
import tempfile

from .lotteries import Example, ExampleCollection, Menu

FORMAT_VERSION = 1


def candidate_to_record(collection: ExampleCollection, record_id: str | None = None) -> dict:
    prov = dict(collection.provenance)
    procedure = prov.get("procedure", "unknown")
    run_index = prov.get("run_index", 0)
    return {
        "id": record_id or f"{procedure}-{run_index:06d}",
        "procedure": procedure,
        "predictor": prov.get("predictor"),
        "master_seed": prov.get("master_seed"),
        "run_index": run_index,
        "iterations": prov.get("iterations"),
        "flags": prov.get("flags", []),
        "menus": [m.to_json_dict() for m in collection.menus],
        "predicted_probs": [float(e.choice_prob) for e in collection],
        "implied_choices": [int(c) for c in collection.implied_choices],
    }


def record_to_collection(record: dict) -> ExampleCollection:
    menus = [Menu.from_json_dict(m) for m in record["menus"]]
    probs = record["predicted_probs"]
    examples = tuple(Example(m, p) for m, p in zip(menus, probs))
    prov = {k: record.get(k) for k in
            ("procedure", "predictor", "master_seed", "run_index", "iterations")}
    return ExampleCollection(examples, prov)


def atomic_write_text(path, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-anomgen-")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_jsonl(path, records, kind: str) -> None:
    header = {"version": FORMAT_VERSION, "kind": kind}
    lines = [json.dumps(header, sort_keys=True)]
    lines += [json.dumps(r, sort_keys=True) for r in records]
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_jsonl(path, expected_kind: str | None = None):
    with open(path) as fh:
        lines = [ln for ln in fh.read().splitlines() if ln.strip()]
    if not lines:
        raise ValueError(f"{path}: empty stream")
    header = json.loads(lines[0])
    if header.get("version") != FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported version {header.get('version')}")
    if expected_kind is not None and header.get("kind") != expected_kind:
        raise ValueError(f"{path}: kind {header.get('kind')!r}, expected {expected_kind!r}")
    return header, [json.loads(ln) for ln in lines[1:]]


def write_csv(path, header_row, rows) -> None:
    lines = [",".join(header_row)]
    for row in rows:
        lines.append(",".join(str(v) for v in row))
    atomic_write_text(path, "\n".join(lines) + "\n")

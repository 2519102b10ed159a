#!/usr/bin/env python3
"""Derive the corrupted audit fixtures from a clean trace.

usage: generate.py CLEAN_TRACE OUT_DIR
"""
import hashlib
import json
import sys
from pathlib import Path


def dump(obj):
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def redigest(event):
    event["digest"] = hashlib.sha256(dump(event["snapshot"]).encode()).hexdigest()


def load(path):
    lines = Path(path).read_text().splitlines()
    return json.loads(lines[0]), [json.loads(l) for l in lines[1:-1]], json.loads(lines[-1])


def save(path, header, events, end):
    Path(path).write_text("".join(dump(r) + "\n" for r in [header, *events, end]))


def conservation_broken(events):
    events[-1]["snapshot"]["channel"]["balanceA"] += 1
    redigest(events[-1])


def fiat_leak(events):
    mid = len(events) // 2
    for e in events[mid:]:
        e["snapshot"]["banks"]["B_I"]["equity"] -= 1
        redigest(e)


def unsigned_transition(events):
    for prev, e in zip(events, events[1:]):
        if e["snapshot"]["channel"]["seq"] != prev["snapshot"]["channel"]["seq"] and e["cause"]["type"] == "message":
            e["cause"]["verified"] = False
            return
    raise SystemExit("no message-driven state change to corrupt")


def unauthorised_settlement(events):
    for e in events:
        e.pop("transcript", None)


MUTATIONS = {
    "conservation_broken": conservation_broken,
    "fiat_leak": fiat_leak,
    "unsigned_transition": unsigned_transition,
    "unauthorised_settlement": unauthorised_settlement,
}

if __name__ == "__main__":
    src, out = sys.argv[1], Path(sys.argv[2])
    for name, mutate in MUTATIONS.items():
        header, events, end = load(src)
        mutate(events)
        save(out / f"{name}.jsonl", header, events, end)

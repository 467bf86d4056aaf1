"""Trace <-> JSON.

Atoms are written in rule-language surface syntax.  Linear occurrences are
``[id, "atom"]`` pairs so that a trace can be replayed and graphed without
the program that produced it.
"""
from __future__ import annotations

import json
from typing import Any

from .dsl import parse_atom, parse_term
from .engine import Firing, SimState, Trace


def _occ(pairs) -> list[list[Any]]:
    return [[oid, str(a)] for oid, a in pairs]


def trace_to_dict(trace: Trace) -> dict[str, Any]:
    return {
        "seed": trace.seed,
        "termination": trace.termination,
        "initial": _occ(trace.initial.linear.items()),
        "permanent": sorted(str(a) for a in trace.initial.permanent),
        "firings": [
            {
                "step": f.step,
                "rule": f.rule,
                "binding": {k: str(f.binding[k]) for k in sorted(f.binding)},
                "consumed": list(f.consumed),
                "produced": _occ(f.produced),
                "read": [r if isinstance(r, int) else str(r) for r in f.read],
            }
            for f in trace.firings
        ],
        "final": _occ(trace.final.linear.items()),
    }


def dumps(trace: Trace) -> str:
    """Byte-stable JSON: fixed key order, one list element per line."""
    parts = []
    for key, value in trace_to_dict(trace).items():
        if isinstance(value, list):
            items = ",\n".join("  " + json.dumps(v, ensure_ascii=False) for v in value)
            body = f"[\n{items}\n ]" if value else "[]"
        else:
            body = json.dumps(value, ensure_ascii=False)
        parts.append(f" {json.dumps(key)}: {body}")
    return "{\n" + ",\n".join(parts) + "\n}\n"


class TraceFormatError(ValueError):
    pass


def trace_from_dict(doc: dict[str, Any]) -> Trace:
    try:
        permanent = frozenset(parse_atom(s) for s in doc.get("permanent", []))
        initial = {int(i): parse_atom(s) for i, s in doc["initial"]}
        firings = []
        top = max(initial, default=-1)
        for f in doc["firings"]:
            produced = tuple((int(i), parse_atom(s)) for i, s in f["produced"])
            top = max([top, *(i for i, _ in produced)])
            firings.append(Firing(
                f["rule"],
                {k: parse_term(v) for k, v in f["binding"].items()},
                tuple(int(i) for i in f["consumed"]),
                tuple(r if isinstance(r, int) else parse_atom(r) for r in f["read"]),
                produced,
                int(f["step"]),
            ))
        final = {int(i): parse_atom(s) for i, s in doc["final"]}
        top = max([top, *final])
        start = SimState(initial, permanent, max(initial, default=-1) + 1)
        end = SimState(final, permanent, top + 1)
        return Trace(start, tuple(firings), end, int(doc["seed"]), doc["termination"])
    except (KeyError, TypeError, ValueError) as e:
        raise TraceFormatError(f"malformed trace: {e}") from e


def loads(text: str) -> Trace:
    return trace_from_dict(json.loads(text))

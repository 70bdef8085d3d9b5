"""Append-only event trace, report derivation and trace-level invariant checks.

One JSON object per line with sorted keys. The metrics report is computed
from the trace records alone, so a saved trace reproduces its report.
"""

from __future__ import annotations

import json
from collections import Counter, defaultdict
from pathlib import Path
from typing import Any, Iterable

Record = dict[str, Any]

FORWARDER_DROP_KINDS = ("drop", "link_drop", "channel_drop")


class Trace:
    def __init__(self) -> None:
        self.records: list[Record] = []

    def emit(self, t: int, node: str, kind: str, **details: Any) -> None:
        rec = {"t": t, "node": node, "kind": kind}
        rec.update(details)
        self.records.append(rec)

    def of_kind(self, *kinds: str) -> list[Record]:
        return [r for r in self.records if r["kind"] in kinds]

    def count(self, kind: str, **match: Any) -> int:
        return sum(1 for r in self.records
                   if r["kind"] == kind and all(r.get(k) == v for k, v in match.items()))

    def dumps(self) -> str:
        return "".join(dump_record(r) + "\n" for r in self.records)

    def write(self, path: str | Path) -> None:
        Path(path).write_text(self.dumps(), encoding="utf-8")


def dump_record(rec: Record) -> str:
    return json.dumps(rec, sort_keys=True, separators=(",", ":"))


def read_trace(path: str | Path) -> list[Record]:
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def percentile(values: list[int], pct: int) -> int:
    """Nearest-rank percentile, ``pct`` in whole percent."""
    ordered = sorted(values)
    rank = -(-pct * len(ordered) // 100)
    return ordered[max(rank, 1) - 1]


def derive_report(records: Iterable[Record]) -> dict[str, Any]:
    flows: dict[str, dict[str, Any]] = {}
    latencies: dict[str, list[int]] = defaultdict(list)
    slices: dict[str, Counter] = defaultdict(Counter)
    net: Counter = Counter()
    end_time = 0

    def flow(fid: str) -> dict[str, Any]:
        return flows.setdefault(fid, {"interests_sent": 0, "chunks_received": 0,
                                      "chunks_lost": 0, "timeouts": 0, "in_flight_at_end": 0})

    for r in records:
        kind = r["kind"]
        end_time = max(end_time, r["t"])
        if kind == "c_interest":
            flow(r["flow"])["interests_sent"] += 1
        elif kind == "c_data":
            flow(r["flow"])["chunks_received"] += 1
            latencies[r["flow"]].append(r["latency"])
        elif kind == "c_timeout":
            flow(r["flow"])["timeouts"] += 1
        elif kind == "c_lost":
            flow(r["flow"])["chunks_lost"] += 1
        elif kind == "flow_end":
            flow(r["flow"])["in_flight_at_end"] = r["in_flight"]
        elif kind == "vnf":
            slices[r["slice"]]["vnf_count"] += 1 if r["event"] == "placed" else -1
        elif kind == "control":
            slices[r["slice"]]["control_messages"] += 1
            if r["op"] == "fib_install":
                slices[r["slice"]]["fib_rules"] += 1
            elif r["op"] == "fib_remove":
                slices[r["slice"]]["fib_rules"] -= 1
        elif kind == "cache_hit":
            net["cache_hits"] += 1
        elif kind == "aggregate":
            net["aggregated_interests"] += 1
        elif kind == "redirect":
            net["redirected_interests"] += 1
        elif kind in FORWARDER_DROP_KINDS:
            net["dropped_packets"] += 1
        elif kind == "signal":
            net["nrs_messages"] += 1
        elif kind == "msa_resolve":
            net["resolution_calls"] += 1

    for fid, stats in flows.items():
        lat = latencies.get(fid, [])
        stats["latency_mean_us"] = round(sum(lat) / len(lat), 3) if lat else 0
        stats["latency_p95_us"] = percentile(lat, 95) if lat else 0

    network = {k: net.get(k, 0) for k in ("cache_hits", "aggregated_interests", "redirected_interests",
                                           "dropped_packets", "nrs_messages", "resolution_calls")}
    return {
        "duration_us": end_time,
        "flows": {fid: dict(sorted(flows[fid].items())) for fid in sorted(flows)},
        "slices": {sid: {k: slices[sid].get(k, 0) for k in ("vnf_count", "control_messages", "fib_rules")}
                   for sid in sorted(slices)},
        "network": network,
    }


def dump_report(report: dict[str, Any]) -> str:
    return json.dumps(report, sort_keys=True, indent=2) + "\n"


def check_trace(records: list[Record]) -> list[str]:
    """Return a list of invariant violations found in a trace (empty when clean)."""
    problems: list[str] = []
    last = None
    for i, r in enumerate(records):
        if last is not None and r["t"] < last:
            problems.append(f"record {i}: time {r['t']} precedes {last}")
        last = r["t"]
        if r["kind"] == "vnf" and (r["used_cpu"] > r["cap_cpu"] or r["used_storage"] > r["cap_storage"]):
            problems.append(f"record {i}: node {r['node']} over capacity")

    report = derive_report(records)
    for fid, s in report["flows"].items():
        settled = s["chunks_received"] + s["timeouts"] + s["in_flight_at_end"]
        if s["interests_sent"] != settled:
            problems.append(f"flow {fid}: sent {s['interests_sent']} != satisfied+timed out+in flight {settled}")
        for key, value in s.items():
            if value < 0:
                problems.append(f"flow {fid}: negative {key}")
    for sid, s in report["slices"].items():
        for key, value in s.items():
            if value < 0:
                problems.append(f"slice {sid}: negative {key}")
    return problems

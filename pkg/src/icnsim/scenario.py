"""Scenario files: loading with line-precise validation, and running them."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import yaml

from .errors import IcnSimError, InvariantViolation, ScenarioError
from .names import Name
from .orchestration import Intent, ServiceType, Sla
from .sim import SimConfig, Simulation
from .substrate import EventKind, MetricsSnapshot, PhysLink, PhysNode, Role, Topology
from .trace import Trace, check_trace, derive_report

log = logging.getLogger(__name__)

ACTIONS = ("submit_intent", "ue_attach", "ue_detach", "ue_move", "join_conference", "start_fetch",
           "enable_mobility", "disable_mobility", "teardown_slice")

CORPUS_DIR = Path(__file__).parent / "scenarios"


class _Map(dict):
    """A mapping that remembers the source line of itself and of each key."""

    line = 0
    key_lines: dict[str, int]


def _to_py(node: yaml.Node) -> Any:
    if isinstance(node, yaml.MappingNode):
        out = _Map()
        out.line = node.start_mark.line + 1
        out.key_lines = {}
        for k, v in node.value:
            key = _to_py(k)
            out[key] = _to_py(v)
            out.key_lines[key] = k.start_mark.line + 1
        return out
    if isinstance(node, yaml.SequenceNode):
        return [_to_py(v) for v in node.value]
    return yaml.SafeLoader(" ").construct_object(node) if node.tag != "tag:yaml.org,2002:str" else node.value


def _line(obj: Any, key: Optional[str] = None, default: int = 1) -> int:
    if isinstance(obj, _Map):
        if key is not None and key in obj.key_lines:
            return obj.key_lines[key]
        return obj.line
    return default


@dataclass(frozen=True)
class TimelineEntry:
    time: int
    action: str
    params: dict[str, Any]
    line: int
    phase: Optional[str] = None


@dataclass
class Scenario:
    topology: Topology
    seed: int = 0
    duration_us: int = 0
    config: SimConfig = field(default_factory=SimConfig)
    ues: list[str] = field(default_factory=list)
    timeline: list[TimelineEntry] = field(default_factory=list)
    name: str = "scenario"


class _Reader:
    def __init__(self, text: str):
        self.text = text

    def fail(self, line: int, message: str):
        raise ScenarioError(line, message)

    def need(self, m: Any, key: str, kind: type | tuple, where: str) -> Any:
        if not isinstance(m, dict):
            self.fail(_line(m), f"{where}: expected a mapping")
        if key not in m:
            self.fail(_line(m), f"{where}: missing '{key}'")
        return self.check(m, key, kind, where)

    def opt(self, m: dict, key: str, kind: type | tuple, where: str, default: Any = None) -> Any:
        if key not in m or m[key] is None:
            return default
        return self.check(m, key, kind, where)

    def check(self, m: dict, key: str, kind: type | tuple, where: str) -> Any:
        value = m[key]
        ok = isinstance(value, kind) and not (isinstance(value, bool) and kind in (int, (int, float)))
        if not ok:
            names = kind.__name__ if isinstance(kind, type) else "/".join(k.__name__ for k in kind)
            self.fail(_line(m, key), f"{where}: '{key}' must be {names}, got {value!r}")
        return value

    def name(self, m: dict, key: str, where: str) -> Name:
        text = self.need(m, key, str, where)
        try:
            return Name.parse(text)
        except ValueError as exc:
            self.fail(_line(m, key), f"{where}: bad name {text!r}: {exc}")


def _parse(text: str, name: str) -> Scenario:
    try:
        root_node = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ScenarioError(mark.line + 1 if mark else 1, f"unparseable scenario: {exc}") from None
    if root_node is None:
        raise ScenarioError(1, "empty scenario file")
    root = _to_py(root_node)
    r = _Reader(text)
    if not isinstance(root, dict):
        r.fail(1, "top level must be a mapping")

    topo = r.need(root, "topology", dict, "scenario")
    nodes: list[PhysNode] = []
    for raw in r.need(topo, "nodes", list, "topology"):
        where = f"node {raw.get('id', '?') if isinstance(raw, dict) else '?'}"
        node_id = r.need(raw, "id", str, where)
        role = r.need(raw, "role", str, where)
        if role not in {x.value for x in Role}:
            r.fail(_line(raw, "role"), f"{where}: unknown role {role!r}")
        if any(n.id == node_id for n in nodes):
            r.fail(_line(raw, "id"), f"duplicate node id {node_id!r}")
        kwargs = {}
        for key in ("radio_latency", "radio_bandwidth", "radio_queue"):
            if key in raw:
                kwargs[key] = r.check(raw, key, int, where)
        locator = Name.parse(r.need(raw, "locator", str, where)) if "locator" in raw else None
        nodes.append(PhysNode(node_id, Role(role), r.need(raw, "cpu", int, where),
                              r.need(raw, "storage", int, where), locator, **kwargs))
    node_ids = {n.id for n in nodes}
    links: list[PhysLink] = []
    for raw in r.opt(topo, "links", list, "topology", []):
        where = f"link {raw.get('id', '?') if isinstance(raw, dict) else '?'}"
        link_id = r.need(raw, "id", str, where)
        ends = []
        for key in ("a", "b"):
            end = r.need(raw, key, str, where)
            if end not in node_ids:
                r.fail(_line(raw, key), f"{where}: undefined node {end!r}")
            ends.append(end)
        if any(link.id == link_id for link in links):
            r.fail(_line(raw, "id"), f"duplicate link id {link_id!r}")
        try:
            links.append(PhysLink(link_id, (ends[0], ends[1]), r.need(raw, "latency", int, where),
                                  r.need(raw, "bandwidth", int, where),
                                  r.opt(raw, "queue", int, where, 64)))
        except ValueError as exc:
            r.fail(_line(raw), str(exc))
    topology = Topology(nodes, links)

    cfg_raw = r.opt(root, "config", dict, "scenario", {})
    cfg_kwargs = {}
    for key in ("interest_lifetime", "hop_limit", "grace", "chunk_size", "data_freshness"):
        if key in cfg_raw:
            cfg_kwargs[key] = r.check(cfg_raw, key, int, "config")
    unknown = set(cfg_raw) - set(cfg_kwargs)
    if unknown:
        key = sorted(unknown)[0]
        r.fail(_line(cfg_raw, key), f"config: unknown key {key!r}")
    config = SimConfig(**cfg_kwargs)

    ues = [str(u) for u in r.opt(root, "ues", list, "scenario", [])]
    if len(set(ues)) != len(ues):
        r.fail(_line(root, "ues"), "duplicate UE id")

    timeline: list[TimelineEntry] = []
    slices = {"base", "mobility"}
    last = 0
    for raw in r.opt(root, "timeline", list, "scenario", []):
        where = f"timeline entry at line {_line(raw)}"
        t = r.need(raw, "at", int, where)
        if t < 0:
            r.fail(_line(raw, "at"), f"{where}: negative time")
        if t < last:
            r.fail(_line(raw, "at"), f"timeline not sorted: {t} after {last}")
        last = t
        action = r.need(raw, "action", str, where)
        if action not in ACTIONS:
            r.fail(_line(raw, "action"), f"unknown action {action!r}")
        params = {k: v for k, v in raw.items() if k not in ("at", "action", "phase")}
        _validate_action(r, raw, action, where, node_ids, topology, ues, slices)
        timeline.append(TimelineEntry(t, action, params, _line(raw), r.opt(raw, "phase", str, where)))

    seed = r.opt(root, "seed", int, "scenario", 0)
    duration = r.opt(root, "duration_us", int, "scenario", last)
    if duration < last:
        r.fail(_line(root, "duration_us"), f"duration_us {duration} ends before the last action at {last}")
    return Scenario(topology, seed, duration, config, ues, timeline, name)


def _validate_action(r: _Reader, raw: dict, action: str, where: str, node_ids: set, topology: Topology,
                     ues: list[str], slices: set[str]) -> None:
    def ue() -> str:
        ue_id = r.need(raw, "ue", str, where)
        if ue_id not in ues:
            r.fail(_line(raw, "ue"), f"{where}: undefined UE {ue_id!r}")
        return ue_id

    def poa() -> str:
        p = r.need(raw, "poa", str, where)
        if p not in node_ids or not topology.nodes[p].is_poa:
            r.fail(_line(raw, "poa"), f"{where}: {p!r} is not a defined point of attachment")
        return p

    def slice_ref() -> str:
        s = r.need(raw, "slice", str, where)
        if s not in slices:
            r.fail(_line(raw, "slice"), f"{where}: undefined slice {s!r}")
        return s

    if action == "submit_intent":
        service = r.need(raw, "service", str, where)
        if service not in {s.value for s in ServiceType}:
            r.fail(_line(raw, "service"), f"{where}: unknown service {service!r}")
        if service == "conference":
            slices.add(r.need(raw, "slice", str, where))
            if "name_space" in raw:
                r.name(raw, "name_space", where)
            parts = r.need(raw, "participants", dict, where)
            for region, count in parts.items():
                if region not in node_ids:
                    r.fail(_line(parts, region), f"{where}: undefined node {region!r}")
                if not isinstance(count, int) or count < 0:
                    r.fail(_line(parts, region), f"{where}: participant count must be a nonnegative integer")
            sla = r.opt(raw, "sla", dict, where, {})
            for key in sla:
                if key not in ("latency_bound", "bandwidth_floor"):
                    r.fail(_line(sla, key), f"{where}: unknown SLA field {key!r}")
                r.check(sla, key, int, where)
        r.opt(raw, "cache_bytes", int, where)
    elif action == "ue_attach":
        ue(), poa()
    elif action == "ue_detach":
        ue()
    elif action == "ue_move":
        ue(), poa()
        r.opt(raw, "gap", int, where)
    elif action == "join_conference":
        ue(), slice_ref()
    elif action == "start_fetch":
        ue()
        r.name(raw, "target", where)
        r.opt(raw, "rate", (int, float), where)
        r.opt(raw, "count", int, where)
        r.opt(raw, "lifetime", int, where)
        r.opt(raw, "media", str, where)
        r.opt(raw, "start_seq", int, where)
    elif action in ("enable_mobility", "disable_mobility"):
        slice_ref()
        prefixes = r.need(raw, "prefixes", list, where)
        for p in prefixes:
            try:
                Name.parse(p)
            except (ValueError, TypeError):
                r.fail(_line(raw, "prefixes"), f"{where}: bad prefix {p!r}")
    elif action == "teardown_slice":
        slice_ref()


def load_scenario(path: str | Path) -> Scenario:
    path = Path(path)
    if not path.exists():
        raise ScenarioError(0, f"{path}: no such file")
    return _parse(path.read_text(encoding="utf-8"), path.stem)


def loads_scenario(text: str, name: str = "scenario") -> Scenario:
    return _parse(text, name)


def corpus_path(name: str) -> Path:
    return CORPUS_DIR / f"{name}.yaml"


# -- running -------------------------------------------------------------------------


def _apply(sim: Simulation, entry: TimelineEntry) -> None:
    p = entry.params
    orch = sim.orchestrator
    if entry.phase:
        sim.trace.emit(sim.now, "scenario", "phase", phase=entry.phase, action=entry.action)
    if entry.action == "submit_intent":
        sla = Sla(**p.get("sla", {}))
        intent = Intent(ServiceType(p["service"]), tuple(p.get("participants", {}).items()), sla,
                        frozenset(p.get("network_services", ())), float(p.get("demand_pattern", 0.0)),
                        p.get("slice"), Name.parse(p["name_space"]) if "name_space" in p else None,
                        p.get("cache_bytes"))
        orch.submit_intent(intent)
    elif entry.action == "ue_attach":
        sim.attach(p["ue"], p["poa"])
    elif entry.action == "ue_detach":
        sim.detach(p["ue"])
    elif entry.action == "ue_move":
        sim.handover(p["ue"], p["poa"], p.get("gap", 0))
    elif entry.action == "join_conference":
        sim.ues[p["ue"]].app.bootstrap(p["slice"], join=p.get("join", True))
    elif entry.action == "start_fetch":
        kwargs = {k: p[k] for k in ("rate", "count", "lifetime", "media", "start_seq") if k in p}
        sim.ues[p["ue"]].app.start_fetch(Name.parse(p["target"]), **kwargs)
    elif entry.action == "enable_mobility":
        orch.enable_mobility(p["slice"], [Name.parse(x) for x in p["prefixes"]])
    elif entry.action == "disable_mobility":
        orch.disable_mobility(p["slice"], [Name.parse(x) for x in p["prefixes"]])
    elif entry.action == "teardown_slice":
        orch.teardown_slice(p["slice"])


def _run_action(sim: Simulation, entry: TimelineEntry) -> None:
    try:
        _apply(sim, entry)
    except InvariantViolation:
        raise
    except IcnSimError as exc:
        # A refused action is a result, not a crash: record it and keep going.
        sim.trace.emit(sim.now, "scenario", "action_error", action=entry.action, line=entry.line,
                       error=type(exc).__name__, message=str(exc))
        log.info("line %d: %s failed: %s", entry.line, entry.action, exc)


@dataclass
class RunResult:
    report: dict[str, Any]
    trace: Trace
    violations: list[str]
    metrics: MetricsSnapshot
    sim: Simulation


def build(scenario: Scenario, seed: Optional[int] = None) -> Simulation:
    sim = Simulation(scenario.topology, scenario.seed if seed is None else seed, scenario.config)
    for ue_id in scenario.ues:
        sim.add_ue(ue_id)
    for entry in scenario.timeline:
        sim.engine.schedule(entry.time, EventKind.SCENARIO_ACTION, _run_action, sim, entry)
    return sim


def run(scenario: Scenario, seed: Optional[int] = None, until: Optional[int] = None) -> RunResult:
    """Run a scenario to completion; raises InvariantViolation (trace kept on ``exc.sim``) on an internal fault."""
    sim = build(scenario, seed)
    end = scenario.duration_us if until is None else until
    try:
        metrics = sim.run_until(end)
    except InvariantViolation as exc:
        exc.sim = sim  # type: ignore[attr-defined]
        raise
    sim.finalize()
    report = derive_report(sim.trace.records)
    return RunResult(report, sim.trace, check_trace(sim.trace.records), metrics, sim)

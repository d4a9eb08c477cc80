"""
Structural legality checks and the finiteness (acyclicity) check.
"""
import logging
from dataclasses import dataclass, field
from typing import FrozenSet, List, Optional, Tuple

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from src.config import LEGAL_INTER_FLOWS, LEGAL_INTRA_FLOWS, MAX_CYCLES, TRIGGER_TARGETS
from src.model import StageKind, flow_violation

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class LegalityRelation:
    """Permitted (source kind, target kind, same machine) triples."""
    triples: FrozenSet[Tuple[str, str, bool]]

    @classmethod
    def default(cls):
        intra = {(a, b, True) for a, b in LEGAL_INTRA_FLOWS}
        inter = {(a, b, False) for a, b in LEGAL_INTER_FLOWS}
        return cls(frozenset(intra | inter))

    def permits(self, source_kind, target_kind, same_machine):
        return (source_kind, target_kind, same_machine) in self.triples


LEGALITY = LegalityRelation.default()


@dataclass(frozen=True)
class Violation:
    element: str
    rule: str
    message: str
    path: str

    def __str__(self):
        return f"{self.rule} at {self.path}: {self.message}"


@dataclass
class ValidationReport:
    violations: List[Violation] = field(default_factory=list)

    @property
    def ok(self):
        return not self.violations

    def lines(self):
        return [str(v) for v in self.violations]


@dataclass
class FinitenessReport:
    acyclic: bool
    cycles: List[Tuple[str, ...]] = field(default_factory=list)
    repeat_marked: FrozenSet[str] = frozenset()
    truncated: bool = False

    def describe(self, model):
        lines = [f"acyclic: {'true' if self.acyclic else 'false'}"]
        for cycle in self.cycles:
            lines.append('cycle: ' + ', '.join(model.edge_text(edge) for edge in cycle))
        if self.truncated:
            lines.append(f"(cycle enumeration capped at {MAX_CYCLES})")
        return lines


def _safe_path(model, element):
    try:
        return model.path(element)
    except Exception:
        return element


def validate_structure(model):
    """Checks every structural rule and lists each violation once."""
    report = ValidationReport()

    def flag(element, rule, message):
        report.violations.append(Violation(element, rule, message, _safe_path(model, element)))

    # Hierarchy
    for machine_id, machine in model.machines.items():
        if machine.parent is not None and machine.parent not in model.machines:
            flag(machine_id, 'DanglingReference', f"Parent '{machine.parent}' does not exist")
            continue
        seen = {machine_id}
        current = machine.parent
        while current is not None and current in model.machines:
            if current in seen:
                flag(machine_id, 'HierarchyCycle', "Machine is its own ancestor")
                break
            seen.add(current)
            current = model.machines[current].parent

    # Stages
    for machine_id, machine in model.machines.items():
        kinds = [model.stages[s].kind for s in machine.stages if s in model.stages]
        for kind in StageKind:
            if kinds.count(kind) > 1:
                flag(machine_id, 'DuplicateStageKind', f"More than one {kind.value} stage")
    for stage_id, stage in model.stages.items():
        if stage.owner not in model.machines:
            flag(stage_id, 'DanglingReference', f"Owner '{stage.owner}' does not exist")
        if stage.annotation.emit is not None and stage.kind is not StageKind.CREATE:
            flag(stage_id, 'EmitOnNonCreate', "'emit' is only allowed on create stages")
    for storage_id, storage in model.storages.items():
        if storage.owner not in model.machines:
            flag(storage_id, 'DanglingReference', f"Owner '{storage.owner}' does not exist")

    # Flows
    endpoints = set(model.stages) | set(model.storages)
    for flow_id, flow in model.flows.items():
        missing = [e for e in (flow.source, flow.target) if e not in endpoints]
        if missing:
            flag(flow_id, 'DanglingReference', f"Endpoint '{missing[0]}' does not exist")
            continue
        rule, message = flow_violation(model, flow.source, flow.target)
        if rule is not None:
            flag(flow_id, rule, message)

    # Triggers
    for trigger_id, trigger in model.triggers.items():
        missing = [e for e in (trigger.source, trigger.target) if e not in model.stages]
        if missing:
            flag(trigger_id, 'DanglingReference', f"Endpoint '{missing[0]}' does not exist")
            continue
        kind = model.stages[trigger.target].kind.value
        if kind not in TRIGGER_TARGETS:
            flag(trigger_id, 'IllegalTriggerTarget', f"Trigger target is a {kind} stage")

    # Inputs
    for binding in model.inputs.values():
        if binding.stage not in model.stages:
            flag(binding.stage, 'DanglingReference', f"Input '{binding.name}' targets a missing stage")
        elif model.stages[binding.stage].kind not in (StageKind.TRANSFER, StageKind.CREATE):
            flag(binding.stage, 'InvalidInputTarget', f"Input '{binding.name}' must target transfer or create")

    logger.debug("Validated %s: %d violation(s)", model.name, len(report.violations))
    return report


# ---------------------------------------------------------
# Finiteness
# ---------------------------------------------------------
def _flow_nodes(model, source, target):
    """Graph nodes of a flow's endpoints, with Transfer split into in/out roles."""
    same = model.owner(source) == model.owner(target)
    src_role = dst_role = None
    if source in model.stages and model.stages[source].kind is StageKind.TRANSFER:
        src_role = 'in' if same else 'out'
    if target in model.stages and model.stages[target].kind is StageKind.TRANSFER:
        dst_role = 'out' if same else 'in'
    return (source, src_role), (target, dst_role)


def _trigger_nodes(model, source, target):
    src_role = 'out' if model.stages[source].kind is StageKind.TRANSFER else None
    return (source, src_role), (target, None)


def finiteness_graph(model, repeat_marked=frozenset()):
    """Returns (nodes, edges) where edges are (edge id, source index, target index)."""
    nodes = []
    for stage_id, stage in model.stages.items():
        if stage.kind is StageKind.TRANSFER:
            nodes.extend([(stage_id, 'in'), (stage_id, 'out')])
        else:
            nodes.append((stage_id, None))
    nodes.extend((storage_id, None) for storage_id in model.storages)
    index = {node: i for i, node in enumerate(nodes)}

    edges = []
    for flow_id, flow in model.flows.items():
        if flow_id in repeat_marked:
            continue
        a, b = _flow_nodes(model, flow.source, flow.target)
        edges.append((flow_id, index[a], index[b]))
    for trigger_id, trigger in model.triggers.items():
        if trigger_id in repeat_marked:
            continue
        a, b = _trigger_nodes(model, trigger.source, trigger.target)
        edges.append((trigger_id, index[a], index[b]))
    return nodes, edges


def _strong_components(n_nodes, edges):
    if n_nodes == 0:
        return 0, np.zeros(0, dtype=int)
    rows = np.array([e[1] for e in edges], dtype=int)
    cols = np.array([e[2] for e in edges], dtype=int)
    data = np.ones(len(edges), dtype=int)
    graph = csr_matrix((data, (rows, cols)), shape=(n_nodes, n_nodes))
    return connected_components(graph, directed=True, connection='strong')


def _enumerate_cycles(n_nodes, edges, labels, cap):
    """Elementary cycles, each rooted at its lowest node index; stops at `cap`."""
    adjacency = [[] for _ in range(n_nodes)]
    for edge_id, a, b in edges:
        if labels[a] == labels[b]:
            adjacency[a].append((edge_id, b))

    cycles = []

    def search(start, node, path, on_path):
        for edge_id, nxt in adjacency[node]:
            if len(cycles) >= cap:
                return
            if nxt == start:
                cycles.append(tuple(path + [edge_id]))
            elif nxt > start and nxt not in on_path:
                on_path.add(nxt)
                search(start, nxt, path + [edge_id], on_path)
                on_path.discard(nxt)

    for start in range(n_nodes):
        if len(cycles) >= cap:
            break
        search(start, start, [], {start})
    return cycles


def check_finiteness(model, repeat_marked=frozenset(), cap=MAX_CYCLES):
    """
    Cycle detection over flows and triggers, excluding repeat-marked edges.
    The verdict is exact; the list of cycles is capped.
    """
    repeat_marked = frozenset(repeat_marked)
    nodes, edges = finiteness_graph(model, repeat_marked)
    n_components, labels = _strong_components(len(nodes), edges)
    self_loop = any(a == b for _, a, b in edges)
    acyclic = n_components == len(nodes) and not self_loop
    # one past the cap tells a full list from a cut one
    cycles = [] if acyclic else _enumerate_cycles(len(nodes), edges, labels, cap + 1)
    report = FinitenessReport(acyclic, cycles[:cap], repeat_marked, truncated=len(cycles) > cap)
    logger.debug("Finiteness of %s: acyclic=%s, %d cycle(s)", model.name, acyclic, len(report.cycles))
    return report


def find_edges(model, text):
    """Flow or trigger ids whose path text (source->target) matches."""
    wanted = text.replace('=>', '->').replace(' ', '')
    found = [e for e in list(model.flows) + list(model.triggers)
             if model.edge_text(e).replace('=>', '->') == wanted]
    return found


def repeat_marks(model, texts):
    """Resolves `source->target` texts to the set of edge ids to repeat-mark."""
    marked = set()
    for text in texts:
        found = find_edges(model, text)
        if not found:
            raise ValueError(f"No flow or trigger matches '{text}'")
        marked.update(found)
    return frozenset(marked)

"""
Regions, events and the behavior graph (B).

A region is a weakly connected subdiagram of the static model: a set of
stages and storages plus the flows and triggers induced between them. An
event is a region injected with time; the behavior graph orders events.
"""
import logging
from dataclasses import dataclass, field
from graphlib import CycleError, TopologicalSorter
from typing import Any, FrozenSet, Optional, Tuple

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from src.model import StageKind

logger = logging.getLogger(__name__)


class RegionError(ValueError):
    pass


class EmptyRegion(RegionError):
    pass


class DisconnectedRegion(RegionError):
    def __init__(self, message, components):
        super().__init__(message)
        self.components = components


class ForeignRegion(RegionError):
    pass


class EventError(ValueError):
    pass


class NegativeDuration(EventError):
    pass


class NonzeroGenericDuration(EventError):
    pass


class BehaviorError(ValueError):
    pass


class UnknownEvent(BehaviorError):
    pass


class CyclicBehavior(BehaviorError):
    def __init__(self, message, cycle):
        super().__init__(message)
        self.cycle = cycle


@dataclass(frozen=True)
class Region:
    stages: FrozenSet[str]
    storages: FrozenSet[str]
    flows: FrozenSet[str]
    triggers: FrozenSet[str]
    model: Any = field(default=None, compare=False, hash=False, repr=False)

    @property
    def nodes(self):
        return self.stages | self.storages

    def is_generic(self):
        return len(self.stages) == 1 and not self.storages

    def paths(self):
        return sorted(self.model.path(e) for e in self.nodes)

    def covers(self, stage, direction=None):
        """
        True when an instance at `stage` belongs to this region. Transfer
        instances also need a region flow matching their direction, unless the
        region has no flow incident to that stage.
        """
        if stage not in self.stages:
            return False
        if direction is None:
            return True
        roles = set()
        for flow_id in self.flows:
            flow = self.model.flows[flow_id]
            if stage not in (flow.source, flow.target):
                continue
            other = flow.target if flow.source == stage else flow.source
            same = self.model.owner(other) == self.model.owner(stage)
            outgoing = flow.source == stage
            # Intra flows out of / inter flows into a transfer carry inbound things
            roles.add('in' if same == outgoing else 'out')
        return not roles or direction in roles


@dataclass(frozen=True)
class EventDef:
    name: str
    region: Region
    duration: int = 0
    label: Optional[str] = None

    def is_generic(self):
        return self.region.is_generic()


@dataclass(frozen=True)
class BehaviorGraph:
    events: Tuple[EventDef, ...]
    edges: Tuple[Tuple[str, str], ...]
    repeats: FrozenSet[str]

    def event(self, name):
        for event in self.events:
            if event.name == name:
                return event
        raise UnknownEvent(f"Unknown event '{name}'")

    def predecessors(self, name):
        return [a for a, b in self.edges if b == name and a != name]

    def topological_order(self):
        sorter = TopologicalSorter({e.name: set() for e in self.events})
        for a, b in self.edges:
            if a != b:
                sorter.add(b, a)
        return list(sorter.static_order())


def _induced(model, nodes):
    flows = frozenset(f for f, flow in model.flows.items()
                      if flow.source in nodes and flow.target in nodes)
    triggers = frozenset(t for t, trig in model.triggers.items()
                         if trig.source in nodes and trig.target in nodes)
    return flows, triggers


def _components(model, nodes, flows, triggers):
    ordered = sorted(nodes)
    index = {n: i for i, n in enumerate(ordered)}
    pairs = [(model.flows[f].source, model.flows[f].target) for f in flows]
    pairs += [(model.triggers[t].source, model.triggers[t].target) for t in triggers]
    rows = np.array([index[a] for a, _ in pairs], dtype=int)
    cols = np.array([index[b] for _, b in pairs], dtype=int)
    graph = csr_matrix((np.ones(len(pairs), dtype=int), (rows, cols)), shape=(len(ordered), len(ordered)))
    count, labels = connected_components(graph, directed=True, connection='weak')
    groups = [[] for _ in range(count)]
    for node, label in zip(ordered, labels):
        groups[label].append(node)
    return groups


def define_region(model, elements):
    """
    Builds the region induced by a set of stage/storage ids. Flow and trigger
    ids in `elements` are accepted and contribute their endpoints.
    """
    nodes = set()
    for element in elements:
        if element in model.stages or element in model.storages:
            nodes.add(element)
        elif element in model.flows:
            nodes.update((model.flows[element].source, model.flows[element].target))
        elif element in model.triggers:
            nodes.update((model.triggers[element].source, model.triggers[element].target))
        else:
            raise ForeignRegion(f"Element '{element}' is not part of model '{model.name}'")
    if not nodes:
        raise EmptyRegion("A region needs at least one stage or storage")
    if not any(n in model.stages for n in nodes):
        raise EmptyRegion("A region needs at least one stage")
    flows, triggers = _induced(model, nodes)
    groups = _components(model, nodes, flows, triggers)
    if len(groups) > 1:
        described = [sorted(model.path(n) for n in g) for g in groups]
        raise DisconnectedRegion(f"Region is not connected: {described}", described)
    return Region(frozenset(n for n in nodes if n in model.stages),
                  frozenset(n for n in nodes if n in model.storages),
                  flows, triggers, model)


def define_event(name, region, duration=0, label=None):
    if duration < 0:
        raise NegativeDuration(f"Event '{name}' has negative duration {duration}")
    if region.is_generic() and duration != 0:
        raise NonzeroGenericDuration(f"Generic event '{name}' (one stage) must have duration 0")
    return EventDef(name, region, duration, label)


def compose(events, name, label=None):
    """Composite event: union of regions, duration = longest constituent."""
    events = list(events)
    if len(events) < 2:
        raise EventError("A composite event needs at least two events")
    model = events[0].region.model
    if any(e.region.model is not model for e in events):
        raise ForeignRegion("Composite events must come from the same model")
    nodes = set()
    for event in events:
        nodes |= event.region.nodes
    try:
        region = define_region(model, nodes)
    except DisconnectedRegion as exc:
        raise DisconnectedRegion(f"Composite '{name}' is not connected: {exc.components}", exc.components)
    return EventDef(name, region, max(e.duration for e in events), label)


def build_behavior(events, edges=(), repeats=()):
    events = tuple(events)
    names = [e.name for e in events]
    if len(set(names)) != len(names):
        raise BehaviorError("Event names must be unique")
    for a, b in edges:
        for endpoint in (a, b):
            if endpoint not in names:
                raise UnknownEvent(f"Unknown event '{endpoint}' in behavior edge {a} -> {b}")
    for name in repeats:
        if name not in names:
            raise UnknownEvent(f"Unknown event '{name}' in repeat")
    repeats = frozenset(repeats)
    for a, b in edges:
        if a == b and a not in repeats:
            raise CyclicBehavior(f"Self-loop on '{a}' without repeat", [a, a])
    graph = BehaviorGraph(events, tuple(edges), repeats)
    try:
        graph.topological_order()
    except CycleError as exc:
        cycle = list(exc.args[1])
        raise CyclicBehavior(f"Behavior edges form a cycle: {' -> '.join(cycle)}", cycle)
    return graph

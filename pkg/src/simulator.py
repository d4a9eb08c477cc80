"""
Deterministic discrete-event execution of annotated static models.

Work items live in a heap ordered by (time, seq). A thing arriving at a stage
is checked against the guard, transformed by the action, held for the delay
and then fanned out: flows first in insertion order, then triggers whose
condition holds. Every stage activation is recorded as a GenericEventInstance.
"""
import heapq
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

from src.config import DEFAULT_MAX_CLOCK, DEFAULT_MAX_INSTANCES
from src.dynamics import ForeignRegion
from src.expressions import (Assign, EvalContext, EvaluationError, SetVerdict, Transform, TypeMismatch,
                             evaluate, is_true)
from src.model import InvalidInputTarget, StageKind, UnknownElement
from src.things import render, type_name

logger = logging.getLogger(__name__)


class SimulationLimitExceeded(RuntimeError):
    """Raised when a run exceeds its limits; `trace` holds what ran so far."""

    def __init__(self, limit, message, trace):
        super().__init__(message)
        self.limit = limit
        self.trace = trace


@dataclass(frozen=True)
class SimulationLimits:
    max_instances: int = DEFAULT_MAX_INSTANCES
    max_clock: int = DEFAULT_MAX_CLOCK
    horizon: Optional[int] = None

    def __post_init__(self):
        if self.max_instances <= 0 or self.max_clock <= 0:
            raise ValueError("Simulation limits must be positive")
        if self.horizon is not None and self.horizon <= 0:
            raise ValueError("Horizon must be positive")


@dataclass(frozen=True)
class GenericEventInstance:
    seq: int
    stage: str
    path: str
    kind: StageKind
    thing: Any
    start: int
    end: int
    direction: Optional[str] = None   # 'in' / 'out' for transfer stages
    cause: Optional[int] = None       # seq of the instance that scheduled this one


@dataclass
class Trace:
    instances: List[GenericEventInstance] = field(default_factory=list)
    final_storages: Dict[str, Any] = field(default_factory=dict)
    outputs: Dict[str, List[Any]] = field(default_factory=dict)
    output_log: List[Tuple[int, str, Any]] = field(default_factory=list)
    verdict: Optional[str] = None
    horizon_reached: bool = False
    model: Any = field(default=None, compare=False, repr=False)

    def __len__(self):
        return len(self.instances)

    def at(self, path):
        return [i for i in self.instances if i.path == path]


# ---------------------------------------------------------
# Execution
# ---------------------------------------------------------
class _Run:
    """Mutable state of one execution."""

    def __init__(self, model, limits):
        self.model = model
        self.limits = limits
        self.trace = Trace(model=model)
        self.values = {d: s.initial for d, s in model.storages.items()}
        self.heap = []
        self.counter = 0

    # -- scheduling --
    def push(self, time, item):
        self.counter += 1
        heapq.heappush(self.heap, (time, self.counter, item))

    def arrive(self, time, stage, thing, direction=None, cause=None):
        self.push(time, ('arrive', stage, thing, direction, cause))

    # -- storages --
    def view(self, stage):
        machine = self.model.stages[stage].owner
        return {name: self.values[d] for name, d in self.model.visible_storages(machine).items()}

    def write(self, stage, name, value):
        visible = self.model.visible_storages(self.model.stages[stage].owner)
        if name not in visible:
            raise EvaluationError(f"Storage '{name}' is not visible")
        self.values[visible[name]] = value

    # -- instances --
    def record(self, stage, thing, start, end, direction, cause):
        if len(self.trace.instances) >= self.limits.max_instances:
            raise SimulationLimitExceeded(
                'max_instances', f"More than {self.limits.max_instances} instances", self.finish())
        instance = GenericEventInstance(len(self.trace.instances) + 1, stage, self.model.path(stage),
                                        self.model.stages[stage].kind, thing, start, end, direction, cause)
        self.trace.instances.append(instance)
        return instance

    def finish(self):
        self.trace.final_storages = {self.model.path(d): v for d, v in self.values.items()}
        return self.trace

    # -- stage semantics --
    def context(self, stage, thing, now):
        return EvalContext(it=thing, storages=self.view(stage), now=now)

    def activate(self, now, stage_id, thing, direction, cause):
        stage = self.model.stages[stage_id]
        note = stage.annotation
        if note.guard is not None and not is_true(note.guard, self.context(stage_id, thing, now)):
            logger.debug("t=%s guard dropped %s at %s", now, render(thing), self.model.path(stage_id))
            return
        delay = 0
        if note.delay is not None:
            delay = evaluate(note.delay, self.context(stage_id, thing, now))
            if type_name(delay) != 'integer' or delay < 0:
                raise TypeMismatch(f"Delay must be a non-negative integer, got {render(delay)}")

        value = thing
        for item in note.action:
            if isinstance(item, Assign):
                self.write(stage_id, item.name, evaluate(item.expr, self.context(stage_id, value, now)))
            elif isinstance(item, Transform):
                value = evaluate(item.expr, self.context(stage_id, value, now))
            elif isinstance(item, SetVerdict) and self.trace.verdict is None:
                self.trace.verdict = item.verdict

        if stage.kind is StageKind.CREATE and note.emit is not None:
            produced = list(note.emit)
        else:
            produced = [] if value is None else [value]

        if not produced:
            self.record(stage_id, None, now, now + delay, direction, cause)
            return
        for out in produced:
            instance = self.record(stage_id, out, now, now + delay, direction, cause)
            if delay:
                self.push(now + delay, ('depart', stage_id, out, direction, instance.seq))
            else:
                self.fan_out(now, stage_id, out, direction, instance.seq)

    def fan_out(self, now, stage_id, thing, direction, cause):
        model = self.model
        owner = model.stages[stage_id].owner
        is_transfer = model.stages[stage_id].kind is StageKind.TRANSFER
        sent_outside = False
        for flow in model.flows.values():
            if flow.source != stage_id:
                continue
            target = flow.target
            if target in model.storages:
                self.values[target] = thing
                continue
            inside = model.owner(target) == owner
            if is_transfer and inside != (direction == 'in'):
                continue
            if not inside:
                sent_outside = True
            role = None
            if model.stages[target].kind is StageKind.TRANSFER:
                role = 'out' if inside else 'in'
            self.arrive(now, target, thing, role, cause)
        if is_transfer and direction == 'out' and not sent_outside:
            path = model.path(stage_id)
            self.trace.outputs.setdefault(path, []).append(thing)
            self.trace.output_log.append((now, path, thing))
        for trigger in model.triggers.values():
            if trigger.source != stage_id:
                continue
            if trigger.condition is None or is_true(trigger.condition, self.context(stage_id, thing, now)):
                target = trigger.target
                self.arrive(now, target, thing, None, cause)

    # -- main loop --
    def seed(self, inputs):
        model = self.model
        bound = set()
        for binding in model.inputs.values():
            values = inputs.get(binding.name, binding.values)
            self.feed(binding.stage, values, binding.every)
            bound.add(binding.stage)
        for name, values in inputs.items():
            if name in model.inputs:
                continue
            try:
                stage = model.find(name)
            except UnknownElement:
                raise UnknownElement(f"Unknown input '{name}'")
            if stage not in model.stages:
                raise UnknownElement(f"Input '{name}' does not name a stage")
            if model.stages[stage].kind not in (StageKind.TRANSFER, StageKind.CREATE):
                raise InvalidInputTarget(f"Input '{name}' must target a transfer or create stage")
            self.feed(stage, values, 0)
            bound.add(stage)
        fed = {f.target for f in model.flows.values()} | {t.target for t in model.triggers.values()} | bound
        for stage_id, stage in model.stages.items():
            if stage.kind is StageKind.CREATE and stage.annotation.emit is not None and stage_id not in fed:
                self.arrive(0, stage_id, None)

    def feed(self, stage, values, every):
        if self.model.stages[stage].kind is StageKind.CREATE:
            self.arrive(0, stage, tuple(values))
            return
        for k, value in enumerate(values):
            self.arrive(k * every, stage, value, 'in')

    def loop(self):
        while self.heap:
            time, _, item = self.heap[0]
            if self.limits.horizon is not None and time >= self.limits.horizon:
                self.trace.horizon_reached = True
                break
            if time > self.limits.max_clock:
                raise SimulationLimitExceeded(
                    'max_clock', f"Clock passed {self.limits.max_clock}", self.finish())
            heapq.heappop(self.heap)
            kind, stage, thing, direction, cause = item
            try:
                if kind == 'arrive':
                    self.activate(time, stage, thing, direction, cause)
                else:
                    self.fan_out(time, stage, thing, direction, cause)
            except EvaluationError as exc:
                error = type(exc)(f"At {self.model.path(stage)} (t={time}): {exc}")
                error.stage = self.model.path(stage)
                error.trace = self.finish()
                raise error from exc
        return self.finish()


def execute(model, inputs=None, limits=None):
    """
    Runs a model. `inputs` maps input names (or absolute stage paths) to lists
    of things and overrides the model's own `input` declarations.
    """
    limits = limits or SimulationLimits()
    run = _Run(model, limits)
    run.seed(dict(inputs or {}))
    trace = run.loop()
    logger.info("Simulated %s: %d instance(s), verdict=%s", model.name, len(trace), trace.verdict)
    return trace


def signature(trace):
    """Id-free view of a trace, for comparing runs of different models."""
    return [(i.kind.value, i.direction, i.start, i.end, render(i.thing)) for i in trace.instances]


# ---------------------------------------------------------
# Attribution and conformance
# ---------------------------------------------------------
@dataclass
class Occurrence:
    event: str
    index: int
    start: int
    end: int
    duration: int
    instances: List[int] = field(default_factory=list)

    def covers(self, t):
        return self.duration > 0 and self.start <= t < self.start + self.duration


@dataclass
class AttributedTrace:
    trace: Trace
    events: Tuple[Any, ...]
    labels: List[Tuple[str, ...]]
    occurrences: List[Occurrence]

    @property
    def unattributed(self):
        return [inst for inst, names in zip(self.trace.instances, self.labels) if not names]

    def activation_sequence(self):
        return [o.event for o in self.occurrences]

    def counts(self):
        result = {e.name: 0 for e in self.events}
        for occurrence in self.occurrences:
            result[occurrence.event] += 1
        return result


@dataclass
class ConformanceReport:
    ok: bool
    offending: Optional[Tuple[str, str]] = None
    message: str = ''
    sequence: List[str] = field(default_factory=list)


def attribute(trace, events):
    """Labels every instance with the events whose region covers it."""
    events = tuple(events)
    for event in events:
        if trace.model is not None and event.region.model is not trace.model:
            raise ForeignRegion(f"Event '{event.name}' belongs to a different model")
    labels = []
    occurrences = []
    open_by_seq = {}
    for instance in trace.instances:
        names = tuple(e.name for e in events if e.region.covers(instance.stage, instance.direction))
        labels.append(names)
        current = {}
        parent = open_by_seq.get(instance.cause, {})
        for event in events:
            if event.name not in names:
                continue
            occurrence = parent.get(event.name)
            if occurrence is None:
                index = sum(1 for o in occurrences if o.event == event.name)
                occurrence = Occurrence(event.name, index, instance.start, instance.end, event.duration)
                occurrences.append(occurrence)
            occurrence.end = max(occurrence.end, instance.end)
            occurrence.instances.append(instance.seq)
            current[event.name] = occurrence
        open_by_seq[instance.seq] = current
    return AttributedTrace(trace, events, labels, occurrences)


def conformance(attributed, behavior):
    """
    Checks event occurrences against the behavior graph: every occurrence
    needs all predecessors seen before it, and a second occurrence needs a
    repeat mark.
    """
    seen = set()
    sequence = attributed.activation_sequence()
    for occurrence in attributed.occurrences:
        name = occurrence.event
        for before in behavior.predecessors(name):
            if before not in seen:
                return ConformanceReport(False, (name, before),
                                         f"{name} occurred before its predecessor {before}", sequence)
        if name in seen and name not in behavior.repeats:
            return ConformanceReport(False, (name, name), f"{name} occurred again without repeat", sequence)
        seen.add(name)
    return ConformanceReport(True, None, 'conforms', sequence)


def query_state(attributed, t):
    """Names of timed events whose occurrence interval covers t."""
    if t < 0:
        raise ValueError("Time must be non-negative")
    return {o.event for o in attributed.occurrences if o.covers(t)}

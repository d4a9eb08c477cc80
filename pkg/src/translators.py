"""
Translation of finite-state-machine specifications into thinging-machine
models.

Every state becomes a machine with a Create stage that emits the state's
symbol; pure outputs become Create-Release-Transfer machines. Input-driven
transitions fire from an Input machine's Process stage and are latched by
one boolean storage per state, so an output is only produced when the state
actually changes. Timed states hold in a delayed Process stage and leave it
when the elapsed time since `start_time` equals the state's duration.
"""
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Tuple

from src.dsl import ModelDocument, Parser, tokenize
from src.dynamics import build_behavior, define_event, define_region
from src.expressions import (Assign, Binary, Field, Index, It, Len, ListDisplay, Literal, Name, Now, Unary,
                             free_names)
from src.model import Annotation, StageKind, new_model
from src.things import Symbol

logger = logging.getLogger(__name__)


class InvalidSpec(ValueError):
    pass


@dataclass(frozen=True)
class Transition:
    source: str
    target: str
    guard: Any = None
    outputs: Tuple[str, ...] = ()


@dataclass
class FsmSpec:
    name: str
    states: Tuple[str, ...]
    initial: str
    inputs: Tuple[Tuple[str, Optional[str]], ...] = ()
    outputs: Tuple[str, ...] = ()
    transitions: Tuple[Transition, ...] = ()
    durations: Dict[str, int] = field(default_factory=dict)

    @property
    def input_names(self):
        return [name for name, _ in self.inputs]

    def is_timed(self, state):
        return self.durations.get(state, 0) > 0

    def validate(self):
        if not self.states:
            raise InvalidSpec(f"FSM '{self.name}' has no states")
        if len(set(self.states)) != len(self.states):
            raise InvalidSpec("State names must be unique")
        if self.initial not in self.states:
            raise InvalidSpec(f"Initial state '{self.initial}' is not a state")
        for t in self.transitions:
            for state in (t.source, t.target):
                if state not in self.states:
                    raise InvalidSpec(f"Transition {t.source} -> {t.target} names unknown state '{state}'")
            for out in t.outputs:
                if out not in self.outputs:
                    raise InvalidSpec(f"Transition {t.source} -> {t.target} emits undeclared output '{out}'")
            unknown = free_names(t.guard) - set(self.input_names)
            if unknown:
                raise InvalidSpec(f"Guard of {t.source} -> {t.target} reads unknown input(s) {sorted(unknown)}")
            if not self.is_timed(t.source) and not self.inputs:
                raise InvalidSpec(f"Transition from untimed state '{t.source}' needs an input")
        for state, duration in self.durations.items():
            if state not in self.states:
                raise InvalidSpec(f"Duration given for unknown state '{state}'")
            if duration < 0:
                raise InvalidSpec(f"State '{state}' has negative duration {duration}")
        names = [machine_name(n) for n in list(self.states) + list(self.outputs)]
        if self.inputs:
            names.append('Input')
        if len(set(names)) != len(names):
            raise InvalidSpec("State, output and input machine names collide")
        return self


def machine_name(word):
    return ''.join(part[:1].upper() + part[1:] for part in word.split('_'))


# ---------------------------------------------------------
# FSM text format
# ---------------------------------------------------------
def parse_fsm(source, file='<input>'):
    """Reads an `fsm name { ... }` block into an FsmSpec."""
    p = Parser(tokenize(source, file), source, file)
    p.expect('ident', 'fsm', text='fsm', what="'fsm'")
    name = p.expect('ident', 'fsm', what='FSM name').text
    p.expect('lbrace', 'fsm', what="'{'")
    states, initial, inputs, outputs, transitions, durations = [], None, [], [], [], {}

    def ident_list():
        items = [p.expect('ident', 'fsm', what='name').text]
        while p.accept('comma'):
            items.append(p.expect('ident', 'fsm', what='name').text)
        return items

    while not p.accept('rbrace'):
        token = p.peek()
        if token is None:
            p.error("Expected '}', found end of input", 'fsm')
        word = token.text
        p.advance()
        if word == 'states':
            states.extend(ident_list())
        elif word == 'initial':
            initial = p.expect('ident', 'fsm', what='state name').text
        elif token.kind == 'kw-input':
            input_name = p.expect('ident', 'fsm', what='input name').text
            input_type = p.expect('ident', 'fsm', what='type name').text if p.accept('colon') else None
            inputs.append((input_name, input_type))
        elif word == 'output':
            outputs.extend(ident_list())
        elif word == 'transition':
            source_state = p.expect('ident', 'fsm', what='state name').text
            p.expect('arrow', 'fsm', what="'->'")
            target_state = p.expect('ident', 'fsm', what='state name').text
            guard = p.expression() if p.accept('kw-when') else None
            emitted = tuple(ident_list()) if p.accept('kw-emit') else ()
            transitions.append(Transition(source_state, target_state, guard, emitted))
        elif token.kind == 'kw-duration':
            state = p.expect('ident', 'fsm', what='state name').text
            p.expect('eq', 'fsm', what="'='")
            durations[state] = p.expect('int', 'fsm', what='integer').value
        else:
            p.error(f"Unexpected '{word}' in fsm block", 'fsm', token)
        p.expect('semi', 'fsm', what="';'")
    if not p.at_end():
        p.error(f"Unexpected '{p.peek().text}' after fsm block", 'fsm')
    if initial is None:
        p.error("Missing 'initial' declaration", 'fsm')
    return FsmSpec(name, tuple(states), initial, tuple(inputs), tuple(outputs), tuple(transitions), durations)


# ---------------------------------------------------------
# Translation
# ---------------------------------------------------------
def _substitute_inputs(expr, inputs):
    """Replaces input names with `it`: the Input machine carries the sample."""
    if isinstance(expr, Name):
        return It() if expr.name in inputs else expr
    if isinstance(expr, ListDisplay):
        return ListDisplay(tuple(_substitute_inputs(i, inputs) for i in expr.items))
    if isinstance(expr, Index):
        return Index(_substitute_inputs(expr.target, inputs), _substitute_inputs(expr.index, inputs))
    if isinstance(expr, Field):
        return Field(_substitute_inputs(expr.target, inputs), expr.name)
    if isinstance(expr, Len):
        return Len(_substitute_inputs(expr.arg, inputs))
    if isinstance(expr, Unary):
        return Unary(expr.op, _substitute_inputs(expr.operand, inputs))
    if isinstance(expr, Binary):
        return Binary(expr.op, _substitute_inputs(expr.left, inputs), _substitute_inputs(expr.right, inputs))
    return expr


def _conjoin(left, right):
    if right is None:
        return left
    return Binary('and', left, right)


def _reaches(edges, start, goal):
    stack, seen = [start], set()
    while stack:
        node = stack.pop()
        if node == goal:
            return True
        if node in seen:
            continue
        seen.add(node)
        stack.extend(b for a, b in edges if a == node)
    return False


def fsm_to_tm(spec):
    """Builds a ModelDocument (model, events, behavior) from an FSM spec."""
    spec.validate()
    model = new_model(spec.name)
    top = model.add_machine(machine_name(spec.name))
    driven = [t for t in spec.transitions if not spec.is_timed(t.source)]
    timed = any(spec.is_timed(s) for s in spec.states)

    if driven:
        for state in spec.states:
            model.add_storage(top, f"in_{state}", state == spec.initial)
    if timed:
        model.add_storage(top, 'start_time', 0)

    stage = {}
    if spec.inputs:
        machine = model.add_machine('Input', top)
        for kind in (StageKind.TRANSFER, StageKind.RECEIVE, StageKind.PROCESS):
            stage['Input', kind] = model.add_stage(machine, kind)
        model.add_flow(stage['Input', StageKind.TRANSFER], stage['Input', StageKind.RECEIVE])
        model.add_flow(stage['Input', StageKind.RECEIVE], stage['Input', StageKind.PROCESS])

    for state in spec.states:
        action = []
        if driven:
            action += [Assign(f"in_{other}", Literal(other == state)) for other in spec.states]
        if timed:
            action.append(Assign('start_time', Now()))
        machine = model.add_machine(machine_name(state), top)
        create = Annotation(action=tuple(action), emit=(Symbol(state),))
        stage[state, StageKind.CREATE] = model.add_stage(machine, StageKind.CREATE, create)
        if spec.is_timed(state):
            hold = Annotation(delay=Literal(spec.durations[state]))
            stage[state, StageKind.PROCESS] = model.add_stage(machine, StageKind.PROCESS, hold)
            model.add_flow(stage[state, StageKind.CREATE], stage[state, StageKind.PROCESS])

    for out in spec.outputs:
        machine = model.add_machine(machine_name(out), top)
        create = model.add_stage(machine, StageKind.CREATE, Annotation(emit=(Symbol(out),)))
        release = model.add_stage(machine, StageKind.RELEASE)
        transfer = model.add_stage(machine, StageKind.TRANSFER)
        model.add_flow(create, release)
        model.add_flow(release, transfer)
        stage[out, StageKind.CREATE] = create
        stage[out, StageKind.RELEASE] = release
        stage[out, StageKind.TRANSFER] = transfer

    inputs = set(spec.input_names)
    for t in spec.transitions:
        guard = _substitute_inputs(t.guard, inputs) if t.guard is not None else None
        if spec.is_timed(t.source):
            elapsed = Binary('=', Binary('-', Now(), Name('start_time')), Literal(spec.durations[t.source]))
            source = stage[t.source, StageKind.PROCESS]
            condition = _conjoin(elapsed, guard)
        else:
            source = stage['Input', StageKind.PROCESS]
            condition = _conjoin(Name(f"in_{t.source}"), guard)
        model.add_trigger(source, stage[t.target, StageKind.CREATE], condition)
        for out in t.outputs:
            model.add_trigger(source, stage[out, StageKind.CREATE], condition)

    for input_name in spec.input_names:
        model.add_input(input_name, stage['Input', StageKind.TRANSFER], (), 1)
    # a timed initial state is only left by its own clock, so it has to be entered once
    if spec.is_timed(spec.initial) or (timed and not spec.inputs):
        start = 'start'
        while start in spec.input_names:
            start = f"_{start}"
        model.add_input(start, stage[spec.initial, StageKind.CREATE], (Symbol(spec.initial),))

    events, edges, named = [], [], {}
    counter = 0

    def declare(label, members, duration=0):
        nonlocal counter
        counter += 1
        event = define_event(f"E{counter}_{label}", define_region(model, members), duration)
        events.append(event)
        return event.name

    if spec.inputs:
        named['Input'] = declare('sense', [stage['Input', k] for k in
                                           (StageKind.TRANSFER, StageKind.RECEIVE, StageKind.PROCESS)])
    for state in spec.states:
        if spec.is_timed(state):
            named[state] = declare(state, [stage[state, StageKind.CREATE], stage[state, StageKind.PROCESS]],
                                   spec.durations[state])
            named[state, 'calc'] = declare('calc', [stage[state, StageKind.PROCESS]])
        else:
            named[state] = declare(state, [stage[state, StageKind.CREATE]])
    for out in spec.outputs:
        named[out] = declare(out, [stage[out, k] for k in
                                   (StageKind.CREATE, StageKind.RELEASE, StageKind.TRANSFER)])

    def link(a, b):
        if a != b and (a, b) not in edges and not _reaches(edges, b, a):
            edges.append((a, b))

    for state in spec.states:
        if spec.is_timed(state):
            link(named[state], named[state, 'calc'])
    for t in spec.transitions:
        before = named[t.source, 'calc'] if spec.is_timed(t.source) else named['Input']
        link(before, named[t.target])
        for out in t.outputs:
            link(before, named[out])

    behavior = build_behavior(events, edges, [e.name for e in events])
    logger.info("Translated FSM %s: %d machine(s), %d trigger(s)", spec.name, len(model.machines),
                len(model.triggers))
    return ModelDocument(model, events, behavior)

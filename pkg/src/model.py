"""
In-memory representation of thinging-machine static models (S) and the
construction API.

A model is a forest of machines. Each machine owns at most one stage of each
of the five kinds, plus named storage cells. Flows (solid arrows) connect
stages and storages; triggers (dashed arrows) activate Create or Process
stages. All collections are dicts, so iteration follows insertion order.
"""
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Tuple

from src.config import LEGAL_INTER_FLOWS, LEGAL_INTRA_FLOWS, STORAGE, TRIGGER_TARGETS
from src.things import is_thing, render

logger = logging.getLogger(__name__)


class StageKind(str, Enum):
    CREATE = 'create'
    PROCESS = 'process'
    RELEASE = 'release'
    TRANSFER = 'transfer'
    RECEIVE = 'receive'


class ModelError(ValueError):
    """Base class for construction errors."""


class EmptyName(ModelError):
    pass


class DuplicateName(ModelError):
    pass


class UnknownElement(ModelError):
    pass


class DuplicateStageKind(ModelError):
    pass


class EmitOnNonCreate(ModelError):
    pass


class IllegalFlow(ModelError):
    def __init__(self, source_kind, target_kind, rule, message):
        super().__init__(message)
        self.source_kind = source_kind
        self.target_kind = target_kind
        self.rule = rule


class IllegalTriggerTarget(ModelError):
    pass


class DuplicateStorageName(ModelError):
    pass


class InvalidInputTarget(ModelError):
    pass


class FrozenModel(ModelError):
    pass


@dataclass(frozen=True)
class Annotation:
    guard: Any = None                 # boolean expression (`when`)
    delay: Any = None                 # non-negative integer expression (`after`)
    action: Tuple[Any, ...] = ()      # action items (`do`)
    emit: Optional[Tuple[Any, ...]] = None  # literal things (`emit`, Create only)


@dataclass
class Machine:
    id: str
    name: str
    parent: Optional[str] = None
    stages: List[str] = field(default_factory=list)
    storages: List[str] = field(default_factory=list)
    children: List[str] = field(default_factory=list)


@dataclass
class Stage:
    id: str
    owner: str
    kind: StageKind
    annotation: Annotation = field(default_factory=Annotation)


@dataclass
class Flow:
    id: str
    source: str
    target: str
    label: Optional[str] = None


@dataclass
class Trigger:
    id: str
    source: str
    target: str
    condition: Any = None
    label: Optional[str] = None


@dataclass
class Storage:
    id: str
    owner: str
    name: str
    initial: Any = None


@dataclass
class InputBinding:
    name: str
    stage: str
    values: Tuple[Any, ...] = ()
    every: int = 0


@dataclass
class StaticModel:
    name: str
    machines: Dict[str, Machine] = field(default_factory=dict)
    stages: Dict[str, Stage] = field(default_factory=dict)
    flows: Dict[str, Flow] = field(default_factory=dict)
    triggers: Dict[str, Trigger] = field(default_factory=dict)
    storages: Dict[str, Storage] = field(default_factory=dict)
    inputs: Dict[str, InputBinding] = field(default_factory=dict)
    frozen: bool = False
    _counter: int = 0

    # ---------------------------------------------------------
    # Construction
    # ---------------------------------------------------------
    def _next_id(self, prefix):
        self._counter += 1
        return f"{prefix}{self._counter}"

    def _check_mutable(self):
        if self.frozen:
            raise FrozenModel(f"Model '{self.name}' is frozen")

    def add_machine(self, name, parent=None):
        """Adds a machine (optionally nested) and returns its id."""
        self._check_mutable()
        if not name:
            raise EmptyName("Machine name must not be empty")
        if parent is not None and parent not in self.machines:
            raise UnknownElement(f"Unknown parent machine '{parent}'")
        if any(self.machines[m].name == name for m in self.siblings(parent)):
            raise DuplicateName(f"Machine '{name}' already exists at this level")
        machine_id = self._next_id('m')
        self.machines[machine_id] = Machine(machine_id, name, parent)
        if parent is not None:
            self.machines[parent].children.append(machine_id)
        return machine_id

    def add_stage(self, machine, kind, annotation=None):
        self._check_mutable()
        if machine not in self.machines:
            raise UnknownElement(f"Unknown machine '{machine}'")
        kind = StageKind(kind)
        annotation = annotation or Annotation()
        if self.stage_of(machine, kind) is not None:
            raise DuplicateStageKind(f"Machine '{self.path(machine)}' already has a {kind.value} stage")
        if annotation.emit is not None:
            if kind is not StageKind.CREATE:
                raise EmitOnNonCreate(f"'emit' is only allowed on create stages, not {kind.value}")
            if not all(is_thing(t) for t in annotation.emit):
                raise ModelError("'emit' values must be things")
        stage_id = self._next_id('s')
        self.stages[stage_id] = Stage(stage_id, machine, kind, annotation)
        self.machines[machine].stages.append(stage_id)
        return stage_id

    def add_flow(self, source, target, label=None, enforce=True):
        """
        Adds a flow edge. With enforce=False the legality check is skipped so
        that illegal models can be built for validation.
        """
        self._check_mutable()
        self._require_endpoint(source)
        self._require_endpoint(target)
        if source in self.storages and target in self.storages:
            raise IllegalFlow(STORAGE, STORAGE, 'StorageToStorage', "A flow cannot connect two storages")
        if enforce:
            rule, message = flow_violation(self, source, target)
            if rule is not None:
                raise IllegalFlow(self.endpoint_kind(source), self.endpoint_kind(target), rule, message)
        flow_id = self._next_id('f')
        self.flows[flow_id] = Flow(flow_id, source, target, label)
        return flow_id

    def add_trigger(self, source, target, condition=None, label=None):
        self._check_mutable()
        for endpoint in (source, target):
            if endpoint not in self.stages:
                raise UnknownElement(f"Unknown stage '{endpoint}'")
        kind = self.stages[target].kind
        if kind.value not in TRIGGER_TARGETS:
            raise IllegalTriggerTarget(
                f"Trigger target {self.path(target)} is a {kind.value} stage; only create or process can be triggered")
        trigger_id = self._next_id('t')
        self.triggers[trigger_id] = Trigger(trigger_id, source, target, condition, label)
        return trigger_id

    def add_storage(self, machine, name, initial=None):
        self._check_mutable()
        if machine not in self.machines:
            raise UnknownElement(f"Unknown machine '{machine}'")
        if not name:
            raise EmptyName("Storage name must not be empty")
        if any(self.storages[s].name == name for s in self.machines[machine].storages):
            raise DuplicateStorageName(f"Storage '{name}' already exists in '{self.path(machine)}'")
        if initial is not None and not is_thing(initial):
            raise ModelError(f"Initial value of '{name}' is not a thing")
        storage_id = self._next_id('d')
        self.storages[storage_id] = Storage(storage_id, machine, name, initial)
        self.machines[machine].storages.append(storage_id)
        return storage_id

    def add_input(self, name, stage, values=(), every=0):
        self._check_mutable()
        if stage not in self.stages:
            raise UnknownElement(f"Unknown stage '{stage}'")
        if self.stages[stage].kind not in (StageKind.TRANSFER, StageKind.CREATE):
            raise InvalidInputTarget(f"Input '{name}' must target a transfer or create stage, "
                                     f"not {self.path(stage)}")
        if name in self.inputs:
            raise DuplicateName(f"Input '{name}' is already bound")
        if every < 0:
            raise ModelError(f"Input '{name}' spacing must be non-negative")
        self.inputs[name] = InputBinding(name, stage, tuple(values), every)

    def freeze(self):
        self.frozen = True
        return self

    def _require_endpoint(self, element):
        if element not in self.stages and element not in self.storages:
            raise UnknownElement(f"Unknown stage or storage '{element}'")

    # ---------------------------------------------------------
    # Queries
    # ---------------------------------------------------------
    def siblings(self, parent):
        if parent is None:
            return [m for m, machine in self.machines.items() if machine.parent is None]
        return list(self.machines[parent].children)

    def roots(self):
        return self.siblings(None)

    def stage_of(self, machine, kind):
        kind = StageKind(kind)
        for stage_id in self.machines[machine].stages:
            if self.stages[stage_id].kind is kind:
                return stage_id
        return None

    def ancestors(self, machine):
        """The machine itself followed by its ancestors (guarded against cycles)."""
        chain = []
        current = machine
        while current is not None and current not in chain:
            chain.append(current)
            current = self.machines[current].parent
        return chain

    def owner(self, element):
        if element in self.stages:
            return self.stages[element].owner
        if element in self.storages:
            return self.storages[element].owner
        raise UnknownElement(f"Unknown stage or storage '{element}'")

    def endpoint_kind(self, element):
        if element in self.storages:
            return STORAGE
        return self.stages[element].kind.value

    def visible_storages(self, machine):
        """name -> storage id visible from a machine; inner cells shadow outer ones."""
        visible = {}
        for scope in self.ancestors(machine):
            for storage_id in self.machines[scope].storages:
                visible.setdefault(self.storages[storage_id].name, storage_id)
        return visible

    def is_visible(self, storage, machine):
        return self.storages[storage].owner in self.ancestors(machine)

    def path(self, element):
        """Dotted path of a machine, stage or storage (e.g. Customer.Order.release)."""
        if element in self.machines:
            names = [self.machines[m].name for m in reversed(self.ancestors(element))]
            return '.'.join(names)
        if element in self.stages:
            stage = self.stages[element]
            return f"{self.path(stage.owner)}.{stage.kind.value}"
        if element in self.storages:
            storage = self.storages[element]
            return f"{self.path(storage.owner)}.{storage.name}"
        if element in self.flows:
            flow = self.flows[element]
            return f"{self.path(flow.source)}->{self.path(flow.target)}"
        if element in self.triggers:
            trigger = self.triggers[element]
            return f"{self.path(trigger.source)}=>{self.path(trigger.target)}"
        raise UnknownElement(f"Unknown element '{element}'")

    def find(self, path):
        """Resolves an absolute dotted path to a machine, stage or storage id."""
        for collection in (self.machines, self.stages, self.storages):
            for element in collection:
                if self.path(element) == path:
                    return element
        raise UnknownElement(f"No element at path '{path}'")

    def edge_text(self, edge):
        return self.path(edge)

    def describe(self, element):
        if element in self.storages:
            storage = self.storages[element]
            initial = '' if storage.initial is None else f" = {render(storage.initial)}"
            return f"storage {self.path(element)}{initial}"
        return self.path(element)


def new_model(name):
    """Creates an empty model."""
    if not name:
        raise EmptyName("Model name must not be empty")
    return StaticModel(name)


def flow_violation(model, source, target):
    """
    Checks a flow against the legality relation.

    Returns (rule, message) for an illegal flow and (None, None) for a legal one.
    """
    source_kind = model.endpoint_kind(source)
    target_kind = model.endpoint_kind(target)
    pair = (source_kind, target_kind)
    if source_kind == STORAGE or target_kind == STORAGE:
        storage, stage = (source, target) if source_kind == STORAGE else (target, source)
        if pair not in LEGAL_INTRA_FLOWS:
            return 'IllegalFlow', f"Storage flow {source_kind} -> {target_kind} is not permitted"
        if not model.is_visible(storage, model.owner(stage)):
            return 'StorageNotVisible', (f"Storage {model.path(storage)} is not visible from "
                                         f"{model.path(stage)}")
        return None, None
    same_machine = model.owner(source) == model.owner(target)
    if same_machine and pair not in LEGAL_INTRA_FLOWS:
        return 'IllegalFlow', f"Intra-machine flow {source_kind} -> {target_kind} is not permitted"
    if not same_machine and pair not in LEGAL_INTER_FLOWS:
        return 'IllegalFlow', (f"Inter-machine flow {source_kind} -> {target_kind} is not permitted; "
                               f"machines connect transfer to transfer")
    return None, None

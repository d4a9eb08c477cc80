"""
The bundled corpus of worked examples, its manifest and the oracles the
acceptance tests compare simulations against.
"""
import logging
import os
import re
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Tuple

from src.config import CORPUS_DIR, MANIFEST_FILE
from src.dsl import parse_literal
from src.io_handler import ModelLoader
from src.simulator import SimulationLimits, attribute, conformance, execute
from src.things import Symbol
from src.validator import check_finiteness, repeat_marks, validate_structure

logger = logging.getLogger(__name__)

ROOT_DIR = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


# ---------------------------------------------------------
# Oracles
# ---------------------------------------------------------
def identity(values):
    return list(values)


def parity(number):
    return Symbol('Odd') if number % 2 else Symbol('Even')


def narrative_acceptor(bits):
    """0 1+ 0: a leading 0, at least one 1, a closing 0."""
    return re.fullmatch(r'01+0', ''.join(str(b) for b in bits)) is not None


def reverse_equality(bits):
    return list(bits) == list(reversed(bits))


def hysteresis(stream, low=18, high=22, heating=False):
    """Pure outputs of a two-threshold heater starting in the given state."""
    outputs = []
    for temperature in stream:
        if not heating and temperature <= low:
            heating = True
            outputs.append(Symbol('heatOn'))
        elif heating and temperature >= high:
            heating = False
            outputs.append(Symbol('heatOff'))
    return outputs


TRAFFIC_PHASES = (('E1_red', 50), ('E3_green', 100), ('E5_yellow', 15))


def traffic_period(t, phases=TRAFFIC_PHASES):
    """The light that is on at time t, by modular arithmetic over the cycle."""
    offset = t % sum(d for _, d in phases)
    for name, duration in phases:
        if offset < duration:
            return name
        offset -= duration
    raise ValueError(f"No phase covers t={t}")


def behavior_conformance(result):
    return result.conformance is not None and result.conformance.ok


ORACLES = {
    'identity': identity,
    'parity': parity,
    'narrative_acceptor': narrative_acceptor,
    'reverse_equality': reverse_equality,
    'hysteresis': hysteresis,
    'traffic_period': traffic_period,
    'behavior_conformance': behavior_conformance,
}


# ---------------------------------------------------------
# Manifest
# ---------------------------------------------------------
@dataclass(frozen=True)
class CorpusEntry:
    name: str
    path: str
    figures: Tuple[str, ...] = ()
    oracles: Tuple[str, ...] = ()
    inputs: Dict[str, Any] = field(default_factory=dict)
    horizon: Optional[int] = None
    repeat: Tuple[str, ...] = ()
    expected: Dict[str, Any] = field(default_factory=dict)
    fsm: Optional[str] = None

    def load(self):
        return ModelLoader.load_document(self.path)

    def limits(self):
        return SimulationLimits(horizon=self.horizon)


def corpus_dir():
    return os.path.join(ROOT_DIR, CORPUS_DIR)


def corpus_manifest(directory=None):
    """Entries of the corpus manifest, with file paths made absolute."""
    directory = directory or corpus_dir()
    data = ModelLoader.load_json(os.path.join(directory, MANIFEST_FILE))
    entries = []
    for item in data['entries']:
        unknown = [o for o in item.get('oracles', []) if o not in ORACLES]
        if unknown:
            raise ValueError(f"Corpus entry '{item['name']}' names unknown oracle(s) {unknown}")
        entries.append(CorpusEntry(
            name=item['name'],
            path=os.path.join(directory, item['file']),
            figures=tuple(item.get('figures', [])),
            oracles=tuple(item.get('oracles', [])),
            inputs={k: parse_literal(v) for k, v in item.get('inputs', {}).items()},
            horizon=item.get('horizon'),
            repeat=tuple(item.get('repeat', [])),
            expected=item.get('expected', {}),
            fsm=os.path.join(directory, item['fsm']) if item.get('fsm') else None,
        ))
    return entries


@dataclass
class EntryResult:
    entry: CorpusEntry
    document: Any
    validation: Any
    finiteness: Any
    trace: Any = None
    attributed: Any = None
    conformance: Any = None


def run_entry(entry):
    """Parse, validate, simulate, attribute and check one corpus entry."""
    document = entry.load()
    model = document.model
    validation = validate_structure(model)
    finiteness = check_finiteness(model, repeat_marks(model, entry.repeat))
    result = EntryResult(entry, document, validation, finiteness)
    if not validation.ok:
        logger.warning("Corpus entry %s fails validation", entry.name)
        return result
    result.trace = execute(model, entry.inputs, entry.limits())
    result.attributed = attribute(result.trace, document.events)
    if document.behavior is not None:
        result.conformance = conformance(result.attributed, document.behavior)
    return result

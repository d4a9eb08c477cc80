import os

import numpy as np
import pytest

from src.config import LEGAL_INTER_FLOWS, LEGAL_INTRA_FLOWS
from src.corpus import corpus_dir
from src.dsl import ModelDocument, ParseError, canonical, parse, print_model, tokenize
from src.dynamics import build_behavior, define_event, define_region
from src.expressions import Assign, Binary, It, Literal, Name
from src.model import Annotation, StageKind, new_model
from src.things import Symbol

CORPUS_FILES = sorted(f for f in os.listdir(corpus_dir()) if f.endswith('.tm'))


def kinds(source):
    return [t.kind for t in tokenize(source)]


def diagnostics(source):
    with pytest.raises(ParseError) as info:
        parse(source, 'bad.tm')
    return info.value.diagnostics


class TestTokenize:
    def test_minimal_machine(self):
        assert kinds("machine M { create; }") == ['kw-machine', 'ident', 'lbrace', 'kw-create', 'semi', 'rbrace']

    def test_empty(self):
        assert tokenize("") == []

    def test_comments_and_whitespace(self):
        assert kinds("// note\n  flow  // trailing\n") == ['kw-flow']

    def test_illegal_character_span(self):
        with pytest.raises(ParseError) as info:
            tokenize("machine M§", 'x.tm')
        diagnostic = info.value.diagnostics[0]
        assert diagnostic.rule == 'IllegalCharacter'
        assert (diagnostic.span.line, diagnostic.span.column) == (1, 10)

    def test_non_ascii_digits_are_illegal(self):
        with pytest.raises(ParseError) as info:
            tokenize("model m { } ²", 'x.tm')
        diagnostic = info.value.diagnostics[0]
        assert diagnostic.rule == 'IllegalCharacter'
        assert (diagnostic.span.line, diagnostic.span.column, diagnostic.span.length) == (1, 13, 1)

    def test_ascii_digits_stop_at_unicode_digit(self):
        with pytest.raises(ParseError):
            tokenize("12٣")

    def test_two_character_operators(self):
        assert kinds("a := b -> c != d <= e >= f") == [
            'ident', 'assign', 'ident', 'arrow', 'ident', 'ne', 'ident', 'le', 'ident', 'ge', 'ident']

    def test_string_escapes(self):
        token = tokenize('"a\\"b\\n"')[0]
        assert token.value == 'a"b\n'

    def test_unterminated_string(self):
        with pytest.raises(ParseError) as info:
            tokenize('"abc')
        assert info.value.diagnostics[0].rule == 'UnterminatedString'

    def test_lines_and_columns(self):
        tokens = tokenize("model m {\n  machine A { }\n}")
        machine = tokens[3]
        assert (machine.span.line, machine.span.column) == (2, 3)


class TestParse:
    def test_minimal_model(self, build):
        doc = build("model m { machine M { create; process; flow create -> process; } }")
        assert len(doc.model.machines) == 1
        assert len(doc.model.flows) == 1
        assert doc.warnings == []

    def test_traffic_light_structure(self, traffic_light):
        model = traffic_light.model
        top = model.find('TrafficLight')
        assert len(model.machines[top].children) == 3
        assert [model.storages[d].name for d in model.storages] == ['start_time']
        assert [e.name for e in traffic_light.events if e.duration] == ['E1_red', 'E3_green', 'E5_yellow']

    def test_unresolved_machine_in_path(self):
        found = diagnostics("model m { machine B { process; } flow A.create -> B.process; }")
        assert found[0].rule == 'UnresolvedName'
        assert "'A'" in found[0].message
        assert found[0].span.line == 1

    def test_syntax_error_expected_found(self):
        found = diagnostics("model m { machine M { create } }")
        assert "Expected ';'" in found[0].message
        assert found[0].severity == 'error'

    def test_duplicate_declaration(self):
        found = diagnostics("model m { machine M { create; } machine M { process; } }")
        assert found[0].rule == 'DuplicateDeclaration'

    def test_stage_outside_machine(self):
        found = diagnostics("model m { create; }")
        assert found[0].rule == 'stage'

    def test_unknown_storage_name(self):
        found = diagnostics("model m { machine M { process do total := it; } }")
        assert found[0].rule == 'UnresolvedName'

    def test_illegal_flow_is_left_to_the_validator(self, build):
        doc = build("model m { machine A { create; } machine B { process; } flow A.create -> B.process; }")
        assert len(doc.model.flows) == 1

    def test_empty_machine_warns(self, build):
        doc = build("model m { machine Empty { } }")
        assert len(doc.warnings) == 1
        assert doc.warnings[0].severity == 'warning'

    def test_relative_paths_resolve_outward(self, build):
        doc = build("""
        model m {
          machine Outer {
            transfer;
            machine Inner { transfer; }
            flow Inner.transfer -> transfer;
          }
        }""")
        flow = next(iter(doc.model.flows.values()))
        assert doc.model.path(flow.source) == 'Outer.Inner.transfer'
        assert doc.model.path(flow.target) == 'Outer.transfer'

    def test_annotations_any_order(self, build):
        doc = build("model m { machine M { storage n = 0; create emit [#a] do n := n + 1 when true; } }")
        stage = next(iter(doc.model.stages.values()))
        assert stage.annotation.emit == (Symbol('a'),)
        assert stage.annotation.action == (Assign('n', Binary('+', Name('n'), Literal(1))),)
        assert stage.annotation.guard == Literal(True)

    def test_event_duration_and_behavior(self, build):
        doc = build("""
        model m { machine M { create; process after 5; flow create -> process; } }
        event E1 "holding" over { M.create, M.process } duration 2 + 3;
        event E2 over { M.process };
        behavior { E1 -> E2; repeat E1; }
        """)
        assert doc.event('E1').duration == 5
        assert doc.event('E1').label == 'holding'
        assert doc.behavior.edges == (('E1', 'E2'),)
        assert doc.behavior.repeats == frozenset({'E1'})

    def test_disconnected_event(self):
        found = diagnostics("""
        model m { machine A { create; } machine B { process; } }
        event E over { A.create, B.process };
        """)
        assert found[0].rule == 'DisconnectedRegion'

    def test_generic_event_duration(self):
        found = diagnostics("model m { machine A { create; } } event E over { A.create } duration 3;")
        assert found[0].rule == 'NonzeroGenericDuration'

    def test_unknown_event_in_behavior(self):
        found = diagnostics("model m { machine A { create; } } event E over { A.create }; behavior { E -> F; }")
        assert found[0].rule == 'UnresolvedName'

    def test_inputs(self, build):
        doc = build("""
        model m { machine A { transfer; receive; flow transfer -> receive; } }
        input numbers: A.transfer = [1, 2] every 2;
        input A.transfer = [3];
        """)
        assert list(doc.inputs) == ['numbers', 'A.transfer']
        assert doc.inputs['numbers'].every == 2


class TestParseIsTotal:
    """Every input either parses or carries at least one error diagnostic."""

    @staticmethod
    def outcome(source):
        try:
            return parse(source, 'fuzz.tm')
        except ParseError as exc:
            assert exc.diagnostics
            assert all(d.severity == 'error' for d in exc.diagnostics)
            return None

    @pytest.mark.parametrize('source', [
        "",
        "model",
        "model m {",
        "model m { machine }",
        "model m { machine M { create do ; } }",
        "model m { machine M { process; } } event E over { M.process } duration ²;",
        "model m { machine M { process when (; } }",
        "model m { machine M { create; } } trailing",
        "model m { machine M { create emit #; } }",
        'model m { machine M { create emit "open; } }',
        "model m { behavior { E1 -> ; } }",
    ])
    def test_malformed(self, source):
        assert self.outcome(source) is None

    @pytest.mark.parametrize('name', CORPUS_FILES)
    def test_every_prefix(self, name):
        with open(os.path.join(corpus_dir(), name), encoding='utf-8') as handle:
            source = handle.read()
        for end in range(0, len(source), 7):
            self.outcome(source[:end])
        assert self.outcome(source) is not None

    def test_non_ascii_insertions(self):
        rng = np.random.default_rng(31)
        with open(os.path.join(corpus_dir(), 'palindrome.tm'), encoding='utf-8') as handle:
            source = handle.read()
        for _ in range(200):
            at = int(rng.integers(0, len(source) + 1))
            ch = str(rng.choice(['²', '٣', '§', 'é', ' ', '½']))
            self.outcome(source[:at] + ch + source[at:])


class TestPrint:
    def test_empty_model(self, build):
        assert print_model(build("model m { }")) == "model m { }\n"

    def test_one_trigger_line(self, build):
        text = print_model(build("""
        model m {
          machine A { process; }
          machine B { create; }
          trigger A.process -> B.create "go" when it > 3;
        }"""))
        lines = [line.strip() for line in text.splitlines() if line.strip().startswith('trigger')]
        assert lines == ['trigger A.process -> B.create "go" when it > 3;']

    @pytest.mark.parametrize('name', CORPUS_FILES)
    def test_corpus_round_trip(self, name):
        with open(os.path.join(corpus_dir(), name), encoding='utf-8') as handle:
            doc = parse(handle.read(), name)
        printed = print_model(doc)
        again = parse(printed, 'printed.tm')
        assert canonical(again) == canonical(doc)
        assert print_model(again) == printed

    def test_canonical_ignores_construction_order(self, build):
        a = build("model m { machine A { create; release; flow create -> release; } machine B { process; } }")
        b = build("model m { machine B { process; } machine A { release; create; flow create -> release; } }")
        assert canonical(a) == canonical(b)


# ---------------------------------------------------------
# Random documents
# ---------------------------------------------------------
def random_document(rng, index):
    """A valid document built through the construction API."""
    model = new_model(f"random{index}")
    machines = []
    for k in range(int(rng.integers(1, 5))):
        parent = machines[int(rng.integers(len(machines)))] if machines and rng.random() < 0.4 else None
        machines.append(model.add_machine(f"M{k}", parent))

    for machine in machines:
        cells = [model.add_storage(machine, f"c{j}", int(rng.integers(10)) if rng.random() < 0.5 else None)
                 for j in range(int(rng.integers(0, 3)))]
        chosen = [kind for kind in StageKind if rng.random() < 0.6] or [StageKind.PROCESS]
        for kind in chosen:
            guard = Binary('>', It(), Literal(int(rng.integers(10)))) if rng.random() < 0.3 else None
            delay = Literal(int(rng.integers(4))) if rng.random() < 0.3 else None
            action = ()
            if cells and rng.random() < 0.4:
                action = (Assign(model.storages[cells[0]].name, Literal(int(rng.integers(10)))),)
            emit = (Symbol(f"t{int(rng.integers(3))}"),) if kind is StageKind.CREATE and rng.random() < 0.5 else None
            model.add_stage(machine, kind, Annotation(guard, delay, action, emit))

    endpoints = list(model.stages) + list(model.storages)
    for _ in range(int(rng.integers(0, 8))):
        a = endpoints[int(rng.integers(len(endpoints)))]
        b = endpoints[int(rng.integers(len(endpoints)))]
        if a in model.storages and b in model.storages:
            continue
        same = model.owner(a) == model.owner(b)
        pair = (model.endpoint_kind(a), model.endpoint_kind(b))
        storage_edge = a in model.storages or b in model.storages
        if (same or storage_edge) and pair not in LEGAL_INTRA_FLOWS:
            continue
        if not same and not storage_edge and pair not in LEGAL_INTER_FLOWS:
            continue
        if storage_edge and not same:
            continue
        label = str(int(rng.integers(20))) if rng.random() < 0.3 else None
        model.add_flow(a, b, label)

    stages = list(model.stages)
    targets = [s for s in stages if model.stages[s].kind in (StageKind.CREATE, StageKind.PROCESS)]
    for _ in range(int(rng.integers(0, 3))):
        if not targets:
            break
        condition = Binary('=', It(), Literal(int(rng.integers(5)))) if rng.random() < 0.5 else None
        model.add_trigger(stages[int(rng.integers(len(stages)))], targets[int(rng.integers(len(targets)))],
                          condition)

    ports = [s for s in stages if model.stages[s].kind in (StageKind.CREATE, StageKind.TRANSFER)]
    for j, stage in enumerate(ports[:2]):
        values = tuple(int(v) for v in rng.integers(0, 10, size=int(rng.integers(0, 4))))
        model.add_input(f"in{j}", stage, values, int(rng.integers(0, 3)))

    events = [define_event(f"E{j}", define_region(model, [stage]))
              for j, stage in enumerate(stages[:int(rng.integers(0, 4))])]
    behavior = None
    if events:
        names = [e.name for e in events]
        edges = [(names[i], names[j]) for i in range(len(names)) for j in range(i + 1, len(names))
                 if rng.random() < 0.5]
        repeats = [n for n in names if rng.random() < 0.5]
        behavior = build_behavior(events, edges, repeats)
    return ModelDocument(model, events, behavior)


class TestRandomRoundTrip:
    def test_two_hundred_documents(self):
        rng = np.random.default_rng(20240601)
        for index in range(200):
            doc = random_document(rng, index)
            text = print_model(doc)
            parsed = parse(text, f"random{index}.tm")
            assert canonical(parsed) == canonical(doc), text

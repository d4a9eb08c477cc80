import pytest

from src.dynamics import ForeignRegion, build_behavior
from src.expressions import IndexOutOfRange, TypeMismatch
from src.model import InvalidInputTarget, StageKind, UnknownElement
from src.simulator import (
    SimulationLimitExceeded, SimulationLimits, attribute, conformance, execute, query_state, signature,
)
from src.things import Symbol, render


def outputs(trace):
    return {path: [render(t) for t in things] for path, things in trace.outputs.items()}


class TestExecute:
    def test_ten_integers_identity(self, ten_integers):
        trace = execute(ten_integers.model)
        assert trace.outputs['Algorithm.transfer'] == list(range(1, 11))
        assert trace.final_storages['Algorithm.last'] == 10
        assert trace.verdict is None

    def test_transfer_directions(self, ten_integers):
        trace = execute(ten_integers.model, {'numbers': [5]})
        transfers = trace.at('Algorithm.transfer')
        assert [i.direction for i in transfers] == ['in', 'out']
        assert [i.kind for i in trace.instances] == [
            StageKind.TRANSFER, StageKind.RECEIVE, StageKind.PROCESS, StageKind.RELEASE, StageKind.TRANSFER]

    def test_causes_chain(self, ten_integers):
        trace = execute(ten_integers.model, {'numbers': [5]})
        assert trace.instances[0].cause is None
        for before, after in zip(trace.instances, trace.instances[1:]):
            assert after.cause == before.seq

    def test_odd_even(self, odd_even):
        assert outputs(execute(odd_even.model)) == {'Odd.transfer': ['#Odd']}
        assert outputs(execute(odd_even.model, {'number': [12]})) == {'Even.transfer': ['#Even']}

    def test_input_by_stage_path(self, odd_even):
        trace = execute(odd_even.model, {'Algorithm.transfer': [4]})
        # The declared binding still fires; the extra one adds a second number
        assert trace.outputs['Odd.transfer'] == [Symbol('Odd')]
        assert trace.outputs['Even.transfer'] == [Symbol('Even')]

    def test_input_path_must_name_transfer_or_create(self, odd_even):
        with pytest.raises(InvalidInputTarget):
            execute(odd_even.model, {'Algorithm.process': [5]})

    def test_input_path_to_create(self, odd_even):
        trace = execute(odd_even.model, {'Odd.create': [1]})
        assert trace.outputs['Odd.transfer'][-1] == Symbol('Odd')

    def test_unknown_input(self, odd_even):
        with pytest.raises(UnknownElement):
            execute(odd_even.model, {'nothing': [1]})

    def test_every_spaces_inputs(self, thermostat):
        trace = execute(thermostat.model)
        receives = trace.at('Thermostat.Input.transfer')
        assert [i.start for i in receives] == [0, 1, 2, 3, 4]
        assert trace.output_log == [(2, 'Thermostat.HeatOn.transfer', Symbol('heatOn')),
                                    (3, 'Thermostat.HeatOff.transfer', Symbol('heatOff'))]

    def test_restaurant_storages(self, restaurant):
        trace = execute(restaurant.model)
        assert trace.final_storages['Restaurant.System.inventory'] == 98
        assert trace.final_storages['Restaurant.System.sold'] == (Symbol('burger'), Symbol('fries'))
        assert trace.outputs == {}
        assert len(trace.at('Restaurant.Manager.receive')) == 1

    def test_delay_records_interval(self, traffic_light):
        trace = execute(traffic_light.model, limits=SimulationLimits(horizon=165))
        red = trace.at('TrafficLight.Red.process')[0]
        assert (red.start, red.end) == (0, 50)
        assert trace.at('TrafficLight.Green.create')[0].start == 50
        assert trace.horizon_reached

    def test_verdicts(self, acceptor, palindrome):
        assert execute(acceptor.model).verdict == 'accepted'
        assert execute(acceptor.model, {'tape': [0, 0]}).verdict == 'rejected'
        assert execute(palindrome.model).verdict == 'accepted'
        assert execute(palindrome.model, {'tape': [0, 1]}).verdict == 'rejected'

    def test_guard_drops_thing(self, build):
        doc = build("""
        model m {
          machine A { transfer; receive when it > 2; flow transfer -> receive; }
        }
        input A.transfer = [1, 5];
        """)
        trace = execute(doc.model)
        assert [i.thing for i in trace.at('A.receive')] == [5]

    def test_first_verdict_wins(self, build):
        doc = build("""
        model m {
          machine A { create do verdict(rejected); process do verdict(accepted); flow create -> process; }
        }
        input A.create = [1];
        """)
        assert execute(doc.model).verdict == 'rejected'

    def test_spontaneous_create(self, build):
        doc = build("model m { machine A { create emit [#x]; release; transfer; "
                    "flow create -> release; flow release -> transfer; } }")
        assert execute(doc.model).outputs == {'A.transfer': [Symbol('x')]}

    def test_deterministic(self, restaurant):
        assert signature(execute(restaurant.model)) == signature(execute(restaurant.model))


class TestErrors:
    def test_instance_limit(self, build):
        doc = build("model m { machine A { create emit [#t]; process; flow create -> process; } "
                    "trigger A.process -> A.process; }")
        with pytest.raises(SimulationLimitExceeded) as info:
            execute(doc.model, limits=SimulationLimits(max_instances=20))
        assert info.value.limit == 'max_instances'
        assert len(info.value.trace) == 20

    def test_clock_limit(self, traffic_light):
        with pytest.raises(SimulationLimitExceeded) as info:
            execute(traffic_light.model, limits=SimulationLimits(max_clock=100))
        assert info.value.limit == 'max_clock'
        assert len(info.value.trace) > 0

    def test_evaluation_error_names_stage(self, build):
        doc = build("""
        model m { machine A { storage tape = [1]; create do tape[3]; } }
        input A.create = [1];
        """)
        with pytest.raises(IndexOutOfRange) as info:
            execute(doc.model)
        assert info.value.stage == 'A.create'
        assert 'A.create (t=0)' in str(info.value)

    def test_negative_delay(self, build):
        doc = build("model m { machine A { create; process after 0 - 1; flow create -> process; } } "
                    "input A.create = [1];")
        with pytest.raises(TypeMismatch):
            execute(doc.model)

    def test_limits_must_be_positive(self):
        with pytest.raises(ValueError):
            SimulationLimits(max_instances=0)
        with pytest.raises(ValueError):
            SimulationLimits(horizon=0)


class TestAttribution:
    def test_every_instance_labeled(self, restaurant):
        attributed = attribute(execute(restaurant.model), restaurant.events)
        assert attributed.unattributed == []
        assert attributed.activation_sequence()[0] == 'E1'
        assert attributed.counts() == {'E1': 1, 'E2': 1, 'E3': 1, 'E4': 1, 'E5': 1, 'E6': 1}

    def test_transfer_attributed_by_direction(self, restaurant):
        trace = execute(restaurant.model)
        attributed = attribute(trace, restaurant.events)
        for instance, labels in zip(trace.instances, attributed.labels):
            if instance.path == 'Restaurant.System.Order.transfer':
                assert labels == (('E1',) if instance.direction == 'in' else ('E2',))

    def test_overlapping_regions(self, acceptor):
        trace = execute(acceptor.model)
        attributed = attribute(trace, acceptor.events)
        flag = [labels for i, labels in zip(trace.instances, attributed.labels)
                if i.path == 'Acceptor.Flag.process']
        assert flag and all(labels == ('E2', 'E4') for labels in flag)

    def test_repeated_occurrences(self, ten_integers):
        attributed = attribute(execute(ten_integers.model), ten_integers.events)
        assert attributed.counts() == {'E1': 10, 'E2': 10}

    def test_foreign_events(self, restaurant, ten_integers):
        with pytest.raises(ForeignRegion):
            attribute(execute(restaurant.model), ten_integers.events)


class TestConformance:
    def test_corpus_conforms(self, restaurant, ten_integers, odd_even, acceptor, palindrome, thermostat):
        for doc in (restaurant, ten_integers, odd_even, acceptor, palindrome, thermostat):
            report = conformance(attribute(execute(doc.model), doc.events), doc.behavior)
            assert report.ok, (doc.file, report.message)

    def test_declared_order_with_repeats(self, ten_integers):
        behavior = build_behavior(ten_integers.events, [('E1', 'E2')], ['E1', 'E2'])
        report = conformance(attribute(execute(ten_integers.model), ten_integers.events), behavior)
        assert report.ok

    @pytest.mark.parametrize('repeats', [[], ['E1', 'E2']])
    def test_reversed_precedence(self, ten_integers, repeats):
        behavior = build_behavior(ten_integers.events, [('E2', 'E1')], repeats)
        report = conformance(attribute(execute(ten_integers.model), ten_integers.events), behavior)
        assert not report.ok
        assert report.offending == ('E1', 'E2')

    def test_missing_repeat(self, ten_integers):
        behavior = build_behavior(ten_integers.events, [('E1', 'E2')], ['E1'])
        report = conformance(attribute(execute(ten_integers.model), ten_integers.events), behavior)
        assert not report.ok
        assert report.offending == ('E2', 'E2')


class TestQueryState:
    def test_timed_events(self, traffic_light):
        attributed = attribute(execute(traffic_light.model, limits=SimulationLimits(horizon=330)),
                               traffic_light.events)
        assert query_state(attributed, 0) == {'E1_red'}
        assert query_state(attributed, 49) == {'E1_red'}
        assert query_state(attributed, 50) == {'E3_green'}
        assert query_state(attributed, 160) == {'E5_yellow'}
        assert query_state(attributed, 400) == set()

    def test_negative_time(self, traffic_light):
        attributed = attribute(execute(traffic_light.model, limits=SimulationLimits(horizon=10)),
                               traffic_light.events)
        with pytest.raises(ValueError):
            query_state(attributed, -1)

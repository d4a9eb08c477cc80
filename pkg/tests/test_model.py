import pytest

from src.model import (
    Annotation, DuplicateName, DuplicateStageKind, DuplicateStorageName, EmitOnNonCreate, EmptyName,
    FrozenModel, IllegalFlow, IllegalTriggerTarget, InvalidInputTarget, StageKind, UnknownElement,
    new_model,
)
from src.things import Symbol


@pytest.fixture
def restaurant_skeleton():
    model = new_model('restaurant')
    customer = model.add_machine('Customer')
    order = model.add_machine('Order', customer)
    system = model.add_machine('System')
    stages = {
        'create': model.add_stage(order, 'create'),
        'release': model.add_stage(order, 'release'),
        'transfer': model.add_stage(order, 'transfer'),
        'sys_transfer': model.add_stage(system, 'transfer'),
        'sys_receive': model.add_stage(system, 'receive'),
        'sys_process': model.add_stage(system, 'process'),
    }
    return model, {'customer': customer, 'order': order, 'system': system}, stages


class TestConstruction:
    def test_paths(self, restaurant_skeleton):
        model, machines, stages = restaurant_skeleton
        assert model.path(machines['order']) == 'Customer.Order'
        assert model.path(stages['release']) == 'Customer.Order.release'
        assert model.find('System.process') == stages['sys_process']
        assert model.roots() == [machines['customer'], machines['system']]

    def test_empty_names(self):
        with pytest.raises(EmptyName):
            new_model('')
        model = new_model('m')
        with pytest.raises(EmptyName):
            model.add_machine('')

    def test_duplicate_sibling_machine(self):
        model = new_model('m')
        model.add_machine('A')
        with pytest.raises(DuplicateName):
            model.add_machine('A')

    def test_same_name_under_different_parents(self):
        model = new_model('m')
        a = model.add_machine('A')
        b = model.add_machine('B')
        model.add_machine('Order', a)
        model.add_machine('Order', b)
        assert model.find('B.Order') != model.find('A.Order')

    def test_one_stage_per_kind(self, restaurant_skeleton):
        model, machines, _ = restaurant_skeleton
        with pytest.raises(DuplicateStageKind):
            model.add_stage(machines['order'], 'create')

    def test_emit_only_on_create(self, restaurant_skeleton):
        model, machines, _ = restaurant_skeleton
        with pytest.raises(EmitOnNonCreate):
            model.add_stage(machines['system'], 'release', Annotation(emit=(Symbol('x'),)))

    def test_unknown_machine(self):
        model = new_model('m')
        with pytest.raises(UnknownElement):
            model.add_stage('m99', 'create')

    def test_storage_names_unique_per_machine(self, restaurant_skeleton):
        model, machines, _ = restaurant_skeleton
        model.add_storage(machines['system'], 'inventory', 100)
        with pytest.raises(DuplicateStorageName):
            model.add_storage(machines['system'], 'inventory')
        model.add_storage(machines['order'], 'inventory')

    def test_inner_storage_shadows_outer(self):
        model = new_model('m')
        outer = model.add_machine('Outer')
        inner = model.add_machine('Inner', outer)
        outer_cell = model.add_storage(outer, 'x', 1)
        inner_cell = model.add_storage(inner, 'x', 2)
        assert model.visible_storages(inner) == {'x': inner_cell}
        assert model.visible_storages(outer) == {'x': outer_cell}

    def test_frozen(self, restaurant_skeleton):
        model, machines, _ = restaurant_skeleton
        model.freeze()
        with pytest.raises(FrozenModel):
            model.add_machine('Kitchen')


class TestFlows:
    def test_legal_chain(self, restaurant_skeleton):
        model, _, s = restaurant_skeleton
        model.add_flow(s['create'], s['release'])
        model.add_flow(s['release'], s['transfer'])
        model.add_flow(s['transfer'], s['sys_transfer'])
        model.add_flow(s['sys_transfer'], s['sys_receive'])
        assert len(model.flows) == 4

    def test_release_cannot_skip_transfer(self, restaurant_skeleton):
        model, _, s = restaurant_skeleton
        with pytest.raises(IllegalFlow) as info:
            model.add_flow(s['release'], s['sys_transfer'])
        assert info.value.source_kind == 'release'
        assert info.value.target_kind == 'transfer'

    def test_inter_machine_needs_transfer(self, restaurant_skeleton):
        model, _, s = restaurant_skeleton
        with pytest.raises(IllegalFlow):
            model.add_flow(s['create'], s['sys_process'])

    def test_unenforced_flow_is_kept(self, restaurant_skeleton):
        model, _, s = restaurant_skeleton
        flow = model.add_flow(s['create'], s['sys_process'], enforce=False)
        assert flow in model.flows

    def test_storage_visibility(self, restaurant_skeleton):
        model, machines, s = restaurant_skeleton
        inventory = model.add_storage(machines['system'], 'inventory', 100)
        model.add_flow(s['sys_process'], inventory)
        with pytest.raises(IllegalFlow):
            model.add_flow(s['create'], inventory)

    def test_storage_to_storage(self, restaurant_skeleton):
        model, machines, _ = restaurant_skeleton
        a = model.add_storage(machines['system'], 'a')
        b = model.add_storage(machines['system'], 'b')
        with pytest.raises(IllegalFlow):
            model.add_flow(a, b, enforce=False)

    def test_unknown_endpoint(self, restaurant_skeleton):
        model, _, s = restaurant_skeleton
        with pytest.raises(UnknownElement):
            model.add_flow(s['create'], 's999')


class TestTriggersAndInputs:
    def test_trigger_targets(self, restaurant_skeleton):
        model, _, s = restaurant_skeleton
        model.add_trigger(s['sys_process'], s['create'])
        with pytest.raises(IllegalTriggerTarget):
            model.add_trigger(s['sys_process'], s['release'])

    def test_input_targets(self, restaurant_skeleton):
        model, _, s = restaurant_skeleton
        model.add_input('order', s['create'], (Symbol('burger'),))
        model.add_input('feed', s['sys_transfer'], (1, 2), every=3)
        assert model.inputs['feed'].every == 3
        with pytest.raises(InvalidInputTarget):
            model.add_input('bad', s['sys_process'], (1,))
        with pytest.raises(DuplicateName):
            model.add_input('order', s['create'], ())

    def test_stage_kinds(self):
        assert [k.value for k in StageKind] == ['create', 'process', 'release', 'transfer', 'receive']

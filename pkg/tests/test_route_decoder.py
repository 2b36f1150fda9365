import numpy as np
import pytest

from routing.flow_model import build_model, build_varmap, evaluate
from routing.instance_io import euclid_distance_matrix, read_instance
from routing.route_decoder import (
    CAPACITY_EXCEEDED,
    DEPOT_RULE,
    MISSED_CUSTOMER,
    REVISIT,
    SUBTOUR,
    EncodingError,
    RouteSet,
    canonical,
    decode,
    encode,
    enumerate_optimal_routes,
    format_solution,
    is_route_set,
    parse_solution,
    route_cost,
)
from tests.conftest import make_instance, random_instance, random_routes


def _bits(vm, arcs):
    x = np.zeros(vm.total_binary, dtype=np.int8)
    for r, i, j in arcs:
        x[vm.arc(r, i, j)] = 1
    return x


def _kinds(result):
    return {v.kind for v in result}


def test_single_route_decodes():
    vm = build_varmap(2, 1)
    result = decode(_bits(vm, [(1, 0, 1), (1, 1, 2), (1, 2, 0)]), vm)
    assert is_route_set(result)
    assert result.routes == ((0, 1, 2, 0),)


def test_isolated_loop_is_subtour():
    vm = build_varmap(2, 1)
    result = decode(_bits(vm, [(1, 1, 2), (1, 2, 1)]), vm)
    assert SUBTOUR in _kinds(result)


def test_empty_assignment_misses_everyone():
    vm = build_varmap(3, 2)
    result = decode(np.zeros(vm.total_binary), vm)
    missed = [v for v in result if v.kind == MISSED_CUSTOMER]
    assert len(missed) == 3


def test_loop_beside_depot_route():
    vm = build_varmap(4, 1)
    arcs = [(1, 0, 1), (1, 1, 0), (1, 2, 3), (1, 3, 4), (1, 4, 2)]
    assert SUBTOUR in _kinds(decode(_bits(vm, arcs), vm))


def test_customer_on_two_trucks_is_revisit():
    vm = build_varmap(2, 2)
    arcs = [(1, 0, 1), (1, 1, 2), (1, 2, 0), (2, 0, 2), (2, 2, 0)]
    assert REVISIT in _kinds(decode(_bits(vm, arcs), vm))


def test_truck_leaving_depot_twice_breaks_depot_rule():
    vm = build_varmap(2, 1)
    arcs = [(1, 0, 1), (1, 1, 0), (1, 0, 2), (1, 2, 0)]
    assert DEPOT_RULE in _kinds(decode(_bits(vm, arcs), vm))


def test_idle_truck_breaks_depot_rule():
    vm = build_varmap(2, 2)
    arcs = [(1, 0, 1), (1, 1, 2), (1, 2, 0)]
    assert _kinds(decode(_bits(vm, arcs), vm)) == {DEPOT_RULE}


def test_overloaded_route(small_instance):
    _, vm = build_model(small_instance, euclid_distance_matrix(small_instance))
    arcs = [(1, 0, 1), (1, 1, 2), (1, 2, 3), (1, 3, 0), (2, 0, 4), (2, 4, 0)]
    assert _kinds(decode(_bits(vm, arcs), vm, small_instance)) == {CAPACITY_EXCEEDED}


def test_route_cost():
    inst = make_instance([(0, 0), (7, 0)], [0, 1], 1, 1)
    dm = euclid_distance_matrix(inst)
    assert route_cost(((0, 1, 0),), dm) == 14
    assert route_cost((), dm) == 0


def test_encode_sets_arcs_and_cumulative_loads(tiny_instance):
    _, vm = build_model(tiny_instance, euclid_distance_matrix(tiny_instance))
    values = encode([(0, 1, 2, 0)], vm, tiny_instance)
    arcs = {key for key, idx in vm.arc_index.items() if values[idx]}
    assert arcs == {(1, 0, 1), (1, 1, 2), (1, 2, 0)}
    assert (values[vm.u(1, 1)], values[vm.u(1, 2)]) == (1, 2)


@pytest.mark.parametrize("routes", [[(1, 2)], [(0, 1, 1, 0)], [(0, 1, 0), (0, 2, 0)]])
def test_encode_rejects_malformed_routes(tiny_instance, routes):
    _, vm = build_model(tiny_instance, euclid_distance_matrix(tiny_instance))
    with pytest.raises(EncodingError):
        encode(routes, vm, tiny_instance)


def test_decode_inverts_encode(rng):
    cases = 0
    for n in range(5, 16):
        inst = random_instance(rng, n, int(rng.integers(1, 5)))
        vm = build_varmap(n, inst.fleet_size)
        for _ in range(100):
            routes = random_routes(rng, inst)
            result = decode(encode(routes, vm, inst), vm, inst)
            assert is_route_set(result)
            assert result.routes == routes
            cases += 1
    assert cases >= 1000


def test_decoder_agrees_with_model_constraints(rng):
    for _ in range(40):
        inst = random_instance(rng, int(rng.integers(3, 7)), int(rng.integers(1, 4)))
        model, vm = build_model(inst, euclid_distance_matrix(inst))
        values = encode(random_routes(rng, inst), vm, inst)
        assert is_route_set(decode(values, vm, inst))
        assert evaluate(model, values) == []
        for _ in range(10):
            broken = values.copy()
            for k in rng.choice(vm.total_binary, size=int(rng.integers(1, 3)), replace=False):
                broken[k] = 1 - broken[k]
            result = decode(broken, vm, inst)
            if is_route_set(result):
                # 다른 feasible 경로 → MTZ 를 만족하는 u 가 존재
                assert evaluate(model, encode(result, vm, inst)) == []
            else:
                assert evaluate(model, broken) != []


def test_canonical_ignores_truck_identity():
    a = RouteSet(((), (0, 3, 0), (0, 1, 2, 0)), (0, 1, 2))
    assert canonical(a) == ((0, 1, 2, 0), (0, 3, 0))
    assert canonical([(0, 3, 0), (0, 1, 2, 0)]) == a.canonical()


def test_a32_reference_solution(a32_path, a32_solution_text):
    inst = read_instance(a32_path)
    routes, cost = parse_solution(a32_solution_text)
    assert cost == 784
    assert len(routes) == 5
    dm = euclid_distance_matrix(inst)
    assert route_cost(routes, dm) == 784
    _, vm = build_model(inst, dm)
    decoded = decode(encode(routes, vm, inst), vm, inst)
    assert is_route_set(decoded)
    assert format_solution(decoded, 784) == a32_solution_text


def test_oracle_on_two_clusters(small_instance):
    dm = euclid_distance_matrix(small_instance)
    cost, routes = enumerate_optimal_routes(small_instance, dm)
    assert routes == ((0, 1, 2, 0), (0, 3, 4, 0))
    assert cost == 12
    assert cost == route_cost(routes, dm)


def test_oracle_matches_tiny_optimum(tiny_instance, tiny_distances):
    cost, routes = enumerate_optimal_routes(tiny_instance, tiny_distances)
    assert cost == 12
    assert len(routes) == 1


def test_oracle_infeasible_and_too_large():
    inst = make_instance([(0, 0), (1, 0), (2, 0)], [0, 3, 3], 5, 1)
    assert enumerate_optimal_routes(inst, euclid_distance_matrix(inst)) == (None, None)
    big = make_instance([(k, 0) for k in range(11)], [0] + [1] * 10, 10, 2)
    with pytest.raises(ValueError):
        enumerate_optimal_routes(big, euclid_distance_matrix(big))

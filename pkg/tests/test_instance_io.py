import logging

import numpy as np
import pytest

from routing import check_tightness, load_best_known_table, lookup_best_known, reference_tightness
from routing.instance_io import (
    InstanceParseError,
    InstanceValidationError,
    UnsupportedFormatError,
    checked_tightness,
    euclid_distance_matrix,
    format_instance,
    parse_instance_text,
    read_instance,
    synthetic_instance,
    tightness,
)
from tests.conftest import cvrplib_file, make_instance

HEADER = """NAME : toy-n3-k1
TYPE : CVRP
DIMENSION : 3
EDGE_WEIGHT_TYPE : EUC_2D
CAPACITY : 10
"""

BODY = """NODE_COORD_SECTION
1 0 0
2 3 0
3 0 4
DEMAND_SECTION
1 0
2 4
3 5
DEPOT_SECTION
1
-1
EOF
"""


def test_a32_parses_to_reference_instance(a32_path):
    inst = read_instance(a32_path)
    assert inst.name == "A-n32-k5"
    assert inst.n_customers == 31
    assert inst.fleet_size == 5
    assert inst.capacity == 100
    assert inst.best_known == 784
    assert inst.total_demand == 410
    assert inst.coords[0] == (82.0, 76.0)
    assert inst.demands[0] == 0


def test_fleet_override_beats_name_suffix(a32_path):
    assert read_instance(a32_path, fleet_size=6).fleet_size == 6


def test_a32_tightness(a32_path):
    assert tightness(read_instance(a32_path)) == pytest.approx(0.820, abs=1e-3)


def test_depot_moved_to_index_zero():
    text = HEADER + BODY.replace("DEPOT_SECTION\n1\n", "DEPOT_SECTION\n2\n").replace(
        "1 0\n2 4\n", "1 4\n2 0\n"
    )
    inst = parse_instance_text(text)
    assert inst.coords[0] == (3.0, 0.0)
    assert inst.demands == (0, 4, 5)
    assert inst.coords[1] == (0.0, 0.0)


def test_missing_dimension_is_parse_error():
    text = HEADER.replace("DIMENSION : 3\n", "") + BODY
    with pytest.raises(InstanceParseError, match="DIMENSION"):
        parse_instance_text(text)


def test_bad_number_reports_line():
    text = HEADER + BODY.replace("2 3 0", "2 three 0")
    with pytest.raises(InstanceParseError) as info:
        parse_instance_text(text)
    assert info.value.line_no == 8


def test_explicit_edge_weights_unsupported():
    text = HEADER.replace("EUC_2D", "EXPLICIT") + BODY
    with pytest.raises(UnsupportedFormatError):
        parse_instance_text(text)


def test_demand_above_capacity_rejected():
    with pytest.raises(InstanceValidationError):
        parse_instance_text(HEADER + BODY.replace("3 5", "3 11"))


def test_unknown_fleet_size_rejected():
    text = HEADER.replace("toy-n3-k1", "toy") + BODY
    with pytest.raises(InstanceValidationError):
        parse_instance_text(text)
    assert parse_instance_text(text, fleet_size=2).fleet_size == 2


def test_distance_rounds_half_up():
    inst = make_instance([(0, 0), (1.5, 0), (2.5, 0)], [0, 1, 1], 5, 1)
    dm = euclid_distance_matrix(inst)
    assert dm[0, 1] == 2
    assert dm[0, 2] == 3
    assert dm[1, 2] == 1
    assert dm[0, 0] == 0


def test_distance_matrix_is_symmetric_and_read_only(a32_path):
    dm = euclid_distance_matrix(read_instance(a32_path))
    assert (dm.costs == dm.costs.T).all()
    assert dm[0, 1] == 35
    with pytest.raises(ValueError):
        dm.costs[0, 1] = 1


def test_format_then_parse_preserves_instance(rng):
    from tests.conftest import random_instance

    inst = random_instance(rng, 7, 3)
    assert parse_instance_text(format_instance(inst)) == inst


def test_reference_table_lookup():
    assert lookup_best_known("A-n80-k10") == 1763
    assert lookup_best_known("unknown-n3-k1") is None
    assert reference_tightness("A-n80-k10") == {"table": 0.948, "density": 0.941}


def test_conflicting_reference_tightness_logs_warning(caplog):
    with caplog.at_level(logging.WARNING, logger="routing"):
        assert check_tightness("A-n80-k10", 0.94) == 0.94
    assert "A-n80-k10" in caplog.text


def test_matching_tightness_is_silent(caplog):
    with caplog.at_level(logging.WARNING, logger="routing"):
        check_tightness("A-n32-k5", 0.82)
    assert caplog.text == ""


# ========================
# A-series 기준표
# ========================

CATALOGUE = sorted(load_best_known_table())


def test_catalogue_lists_a_series():
    assert len(CATALOGUE) == 27
    table = load_best_known_table()
    assert (table["A-n60-k9"]["n_customers"], table["A-n60-k9"]["trucks"]) == (59, 9)
    assert (table["A-n80-k10"]["n_customers"], table["A-n80-k10"]["trucks"]) == (79, 10)
    assert reference_tightness("A-n60-k9") == {"table": 0.921, "density": 0.921}
    assert reference_tightness("A-n45-k6") == {"table": 1.050}


def test_tightness_above_one_is_reported_not_trusted(caplog):
    with caplog.at_level(logging.WARNING, logger="routing"):
        assert check_tightness("A-n45-k6", 0.99) == 0.99
    assert "A-n45-k6" in caplog.text


@pytest.mark.parametrize("name", CATALOGUE)
def test_catalogue_sizes_give_symmetric_distances(name):
    row = load_best_known_table()[name]
    dm = euclid_distance_matrix(synthetic_instance(row["n_customers"], row["trucks"]))
    assert dm.dim == row["n_customers"] + 1
    assert (dm.costs == dm.costs.T).all()
    assert (np.diag(dm.costs) == 0).all()


@pytest.mark.parametrize("name", ["A-n60-k9", "A-n80-k10"])
def test_a_series_file_counts(name):
    inst = read_instance(cvrplib_file(name))
    row = load_best_known_table()[name]
    assert (inst.n_customers, inst.fleet_size) == (row["n_customers"], row["trucks"])
    assert inst.best_known == row["best_known"]


def test_a60_file_tightness():
    assert tightness(read_instance(cvrplib_file("A-n60-k9"))) == pytest.approx(0.921, abs=1e-3)


def test_a45_k6_file_tightness():
    inst = read_instance(cvrplib_file("A-n45-k6"))
    tau = tightness(inst)
    assert tau == pytest.approx(inst.total_demand / (6 * inst.capacity))
    assert checked_tightness(inst) == tau


@pytest.mark.parametrize("name", CATALOGUE)
def test_a_series_file_distances_are_symmetric(name):
    dm = euclid_distance_matrix(read_instance(cvrplib_file(name)))
    assert (dm.costs == dm.costs.T).all()


# ========================
# 합성 인스턴스
# ========================

@pytest.mark.parametrize("n, p", [(1, 1), (5, 2), (15, 3)])
def test_synthetic_instance_is_partitionable(n, p):
    inst = synthetic_instance(n, p, seed=4)
    assert inst.name == f"synthetic-n{n + 1}-k{p}"
    assert (inst.n_customers, inst.fleet_size) == (n, p)
    assert tightness(inst) <= 1.0
    assert max(inst.demands) <= inst.capacity


def test_synthetic_instance_is_seeded():
    assert synthetic_instance(6, 2, seed=1) == synthetic_instance(6, 2, seed=1)
    assert synthetic_instance(6, 2, seed=1) != synthetic_instance(6, 2, seed=2)


def test_synthetic_instance_needs_a_customer_per_truck():
    with pytest.raises(InstanceValidationError):
        synthetic_instance(2, 3)

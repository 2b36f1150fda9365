import os
from pathlib import Path

import numpy as np
import pytest

from routing.instance_io import Instance, euclid_distance_matrix, write_instance

DATA_DIR = Path(__file__).resolve().parent / "data"
# CVRPLIB A-series .vrp 폴더 (tests/data 에 없는 파일용)
ENV_CVRPLIB = "QUBO_BENCH_CVRPLIB"


def make_instance(coords, demands, capacity, fleet_size, name="synthetic"):
    return Instance(
        name=name,
        n_customers=len(coords) - 1,
        capacity=capacity,
        fleet_size=fleet_size,
        coords=tuple(tuple(float(v) for v in c) for c in coords),
        demands=tuple(demands),
    )


def random_instance(rng, n, p, name="random"):
    """고객 n 명, 차량 p 대. capacity 는 총 demand 라서 어떤 분할도 적재 가능"""
    coords = [tuple(int(v) for v in rng.integers(0, 50, size=2)) for _ in range(n + 1)]
    demands = [0] + [int(d) for d in rng.integers(1, 4, size=n)]
    return make_instance(coords, demands, sum(demands), p, name)


def cvrplib_file(name):
    """tests/data 또는 QUBO_BENCH_CVRPLIB 폴더의 <name>.vrp, 둘 다 없으면 skip"""
    for folder in (DATA_DIR, os.environ.get(ENV_CVRPLIB)):
        if folder and (Path(folder) / f"{name}.vrp").is_file():
            return Path(folder) / f"{name}.vrp"
    pytest.skip(f"{name}.vrp 없음 ({ENV_CVRPLIB} 에 A-series 폴더 지정)")


def random_routes(rng, instance, trucks=None):
    """용량을 지키는 임의의 경로 집합. 모든 차량이 depot 을 한 번씩 떠나므로 n >= p 필요"""
    p = instance.fleet_size if trucks is None else trucks
    n = instance.n_customers
    assert n >= p
    order = [int(v) for v in rng.permutation(np.arange(1, n + 1))]
    cuts = sorted(int(c) for c in rng.choice(np.arange(1, n), size=p - 1, replace=False))
    blocks = np.split(np.asarray(order), cuts)
    routes = [(0,) + tuple(int(v) for v in b) + (0,) for b in blocks]
    assert all(
        sum(instance.demands[v] for v in r) <= instance.capacity for r in routes
    )
    return tuple(routes)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def a32_path():
    return DATA_DIR / "A-n32-k5.vrp"


@pytest.fixture
def a32_solution_text():
    return (DATA_DIR / "A-n32-k5.sol").read_text(encoding="utf-8")


@pytest.fixture
def tiny_instance():
    """고객 2, 차량 1. 최적 경로 0-1-2-0 비용 3+5+4 = 12"""
    return make_instance([(0, 0), (3, 0), (0, 4)], [0, 1, 1], 3, 1, name="tiny-n3-k1")


@pytest.fixture
def small_instance():
    """고객 4, 차량 2. 두 무리로 나뉜 고객"""
    return make_instance(
        [(0, 0), (2, 0), (3, 1), (0, 2), (1, 3)],
        [0, 2, 2, 2, 2],
        4,
        2,
        name="small-n5-k2",
    )


@pytest.fixture
def tiny_path(tmp_path, tiny_instance):
    path = tmp_path / "tiny-n3-k1.vrp"
    write_instance(tiny_instance, path)
    return path


@pytest.fixture
def tiny_distances(tiny_instance):
    return euclid_distance_matrix(tiny_instance)

"""
assignment ↔ 차량 경로 변환, 경로 검증/비용 계산, 소형 인스턴스 전수 최적해.
위반 사항은 예외가 아니라 Violation 데이터로 돌려준다.
"""
import itertools
import math
from collections import defaultdict
from dataclasses import dataclass
from typing import Optional

import numpy as np

REVISIT = "revisit"
MISSED_CUSTOMER = "missed_customer"
CAPACITY_EXCEEDED = "capacity_exceeded"
SUBTOUR = "subtour"
DEPOT_RULE = "depot_rule"

# 전수조사 oracle 허용 최대 고객 수
ORACLE_MAX_CUSTOMERS = 9


class EncodingError(ValueError):
    pass


# ========================
# 도메인 타입
# ========================

@dataclass(frozen=True)
class RouteSet:
    # 차량 r (1..p) 순서. 사용하지 않은 차량은 빈 튜플
    routes: tuple
    loads: tuple
    total_cost: Optional[int] = None

    def canonical(self):
        return canonical(self.routes)


@dataclass(frozen=True)
class Violation:
    kind: str
    detail: str


def canonical(routes):
    """비교용 정규형: 빈 경로 제외, 첫 고객 기준 정렬"""
    routes = routes.routes if isinstance(routes, RouteSet) else routes
    return tuple(sorted((tuple(r) for r in routes if len(r) > 2), key=lambda r: r[1:]))


def _arc_keys(varmap):
    keys = [None] * varmap.total_binary
    for key, idx in varmap.arc_index.items():
        keys[idx] = key
    return keys


# ========================
# decode / encode
# ========================

def decode(assignment, varmap, instance=None):
    """
    arc 비트 → RouteSet, 위반이 있으면 Violation 리스트.
    slack / 정수 인코딩 비트는 보지 않는다. instance 가 있으면 적재량도 검사.
    """
    x = np.zeros(varmap.total_binary, dtype=np.int8)
    raw = np.asarray(assignment).ravel()[:varmap.total_binary]
    x[:len(raw)] = raw != 0
    keys = _arc_keys(varmap)
    n, p = varmap.n, varmap.p

    succ = defaultdict(list)
    indeg = defaultdict(int)
    for idx in np.flatnonzero(x):
        r, i, j = keys[idx]
        succ[(r, i)].append(j)
        indeg[(r, j)] += 1

    violations = []
    visits = [0] * (n + 1)
    routes = []
    loads = []
    for r in range(1, p + 1):
        touched = set()
        for node in range(n + 1):
            out_deg = len(succ[(r, node)])
            in_deg = indeg[(r, node)]
            if node > 0:
                visits[node] += in_deg
            if out_deg or in_deg:
                touched.add(node)
            if node == 0:
                if out_deg != 1:
                    violations.append(Violation(DEPOT_RULE, f"차량 {r}: depot 출발 {out_deg}회"))
                if in_deg != out_deg:
                    violations.append(Violation(DEPOT_RULE, f"차량 {r}: depot 도착 {in_deg}회 / 출발 {out_deg}회"))
            elif in_deg != out_deg or out_deg > 1:
                violations.append(Violation(REVISIT, f"차량 {r}: 노드 {node} 진입 {in_deg} / 진출 {out_deg}"))

        route = []
        if succ[(r, 0)]:
            route = [0]
            seen = {0}
            cur = succ[(r, 0)][0]
            while True:
                route.append(cur)
                if cur == 0 or cur in seen or not succ[(r, cur)]:
                    break
                seen.add(cur)
                cur = succ[(r, cur)][0]
            if route[-1] != 0:
                violations.append(Violation(REVISIT, f"차량 {r}: depot 으로 돌아오지 않음 {route}"))
        off_route = sorted(touched - set(route))
        if off_route:
            violations.append(Violation(SUBTOUR, f"차량 {r}: depot 과 연결되지 않은 노드 {off_route}"))

        load = 0
        if instance is not None:
            load = sum(instance.demands[j] * indeg[(r, j)] for j in range(1, n + 1))
            if load > instance.capacity:
                violations.append(Violation(
                    CAPACITY_EXCEEDED, f"차량 {r}: 적재 {load} > capacity {instance.capacity}"
                ))
        routes.append(tuple(route) if len(route) > 2 else ())
        loads.append(load)

    for j in range(1, n + 1):
        if visits[j] == 0:
            violations.append(Violation(MISSED_CUSTOMER, f"고객 {j} 미방문"))
        elif visits[j] > 1:
            violations.append(Violation(REVISIT, f"고객 {j} 방문 {visits[j]}회"))

    if violations:
        return violations
    return RouteSet(tuple(routes), tuple(loads))


def is_route_set(result):
    return isinstance(result, RouteSet)


def encode(routes, varmap, instance):
    """
    경로 → 모델 변수 값 (arc 비트 + u 정수값).
    u 는 경로를 따라 누적 적재량, 방문하지 않은 (차량, 고객) 은 하한 q_i.
    """
    routes = routes.routes if isinstance(routes, RouteSet) else routes
    if len(routes) > varmap.p:
        raise EncodingError(f"경로 {len(routes)}개 > 차량 {varmap.p}대")
    q = instance.demands
    values = np.zeros(varmap.total_binary + varmap.total_integer, dtype=np.int64)
    for (r, i), idx in varmap.u_index.items():
        values[idx] = q[i]
    for r, route in enumerate(routes, 1):
        route = list(route)
        if not route or all(v == 0 for v in route):
            continue
        if route[0] != 0 or route[-1] != 0:
            raise EncodingError(f"차량 {r}: 경로는 depot(0) 에서 시작/종료해야 함: {route}")
        customers = route[1:-1]
        if len(set(customers)) != len(customers) or 0 in customers:
            raise EncodingError(f"차량 {r}: 경로 안에 중복 노드: {route}")
        for i, j in zip(route, route[1:]):
            if (r, i, j) not in varmap.arc_index:
                raise EncodingError(f"차량 {r}: 없는 arc ({i}, {j})")
            values[varmap.arc(r, i, j)] = 1
        load = 0
        for j in customers:
            load += q[j]
            values[varmap.u(r, j)] = load
    return values


# ========================
# 비용
# ========================

def route_cost(routes, distances):
    routes = routes.routes if isinstance(routes, RouteSet) else routes
    costs = distances.costs
    return int(sum(costs[i, j] for route in routes for i, j in zip(route, route[1:])))


def with_cost(route_set, distances):
    return RouteSet(route_set.routes, route_set.loads, route_cost(route_set, distances))


# ========================
# .sol 포맷
# ========================

def format_solution(routes, cost):
    routes = routes.routes if isinstance(routes, RouteSet) else routes
    lines = []
    k = 0
    for route in routes:
        customers = [v for v in route if v != 0]
        if not customers:
            continue
        k += 1
        lines.append(f"Route #{k}: " + " ".join(str(v) for v in customers))
    lines.append(f"Cost {cost}")
    return "\n".join(lines) + "\n"


def parse_solution(text):
    routes = []
    cost = None
    for line in text.splitlines():
        line = line.strip()
        if line.startswith("Route"):
            _, _, body = line.partition(":")
            routes.append((0,) + tuple(int(v) for v in body.split()) + (0,))
        elif line.lower().startswith("cost"):
            cost = int(float(line.split()[1]))
    return tuple(routes), cost


# ========================
# 전수조사 oracle
# ========================

def _partitions(items, k):
    """items 를 정확히 k 개의 비어있지 않은 블록으로 분할"""
    if k == 0:
        if not items:
            yield []
        return
    if len(items) < k:
        return
    first, rest = items[0], items[1:]
    # first 가 단독 블록
    for part in _partitions(rest, k - 1):
        yield [[first]] + part
    # first 를 기존 블록 중 하나에 추가
    for part in _partitions(rest, k):
        for b in range(len(part)):
            yield part[:b] + [[first] + part[b]] + part[b + 1:]


def _best_order(block, costs):
    best, best_route = math.inf, None
    for perm in itertools.permutations(block):
        route = (0,) + perm + (0,)
        c = sum(costs[i, j] for i, j in zip(route, route[1:]))
        if c < best:
            best, best_route = c, route
    return best, best_route


def enumerate_optimal_routes(instance, distances, trucks=None):
    """정확히 p 개의 비어있지 않은 경로로 모든 분할 × 방문 순서를 조사한 최적 비용"""
    n = instance.n_customers
    p = instance.fleet_size if trucks is None else trucks
    if n > ORACLE_MAX_CUSTOMERS:
        raise ValueError(f"전수조사 oracle 은 고객 {ORACLE_MAX_CUSTOMERS}명 이하만 허용 (n={n})")
    costs = distances.costs
    q = instance.demands
    cache = {}
    best, best_routes = math.inf, None
    for part in _partitions(list(range(1, n + 1)), p):
        if any(sum(q[j] for j in block) > instance.capacity for block in part):
            continue
        total = 0
        routes = []
        for block in part:
            key = tuple(sorted(block))
            if key not in cache:
                cache[key] = _best_order(key, costs)
            c, route = cache[key]
            total += c
            routes.append(route)
        if total < best:
            best, best_routes = total, routes
    if best_routes is None:
        return None, None
    return int(best), canonical(best_routes)

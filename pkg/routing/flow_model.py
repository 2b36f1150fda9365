"""
flow 기반 제약 모델 생성 (dimod ConstrainedQuadraticModel).
목적함수 + 다섯 가지 제약(visit_once, depot_leave, flow_conservation, capacity, mtz)
과 모델 크기 통계(변수/제약/bias 수)를 계산한다.

제약 label 은 "kind[상세]" 형식이고, kind 는 label 에서 다시 읽는다.
"""
import json
import logging
from dataclasses import dataclass, field

import dimod
import numpy as np
from dimod.sym import Sense

logger = logging.getLogger(__name__)

VISIT_ONCE = "visit_once"
DEPOT_LEAVE = "depot_leave"
FLOW_CONSERVATION = "flow_conservation"
CAPACITY = "capacity"
MTZ = "mtz"
KINDS = (VISIT_ONCE, DEPOT_LEAVE, FLOW_CONSERVATION, CAPACITY, MTZ)
BOUNDS = "bounds"

SENSE_BY_KIND = {
    VISIT_ONCE: Sense.Eq,
    DEPOT_LEAVE: Sense.Eq,
    FLOW_CONSERVATION: Sense.Eq,
    CAPACITY: Sense.Le,
    MTZ: Sense.Ge,
}

DFJ = "DFJ"
# int64 에 담기는 최대 제약 수
MAX_COUNT = 2 ** 63 - 1


class ModelError(ValueError):
    pass


class SecOverflowError(OverflowError):
    pass


# ========================
# 도메인 타입
# ========================

@dataclass(frozen=True)
class VarMap:
    n: int
    p: int
    arc_index: dict = field(repr=False)
    u_index: dict = field(repr=False)

    @property
    def total_binary(self):
        return len(self.arc_index)

    @property
    def total_integer(self):
        return len(self.u_index)

    def arc(self, r, i, j):
        return self.arc_index[(r, i, j)]

    def u(self, r, i):
        return self.u_index[(r, i)]


@dataclass(frozen=True)
class ModelStats:
    name: str
    num_variables: int
    num_constraints: int
    num_biases: int
    tau: float

    def as_row(self):
        return {
            "instance": self.name,
            "variables": self.num_variables,
            "constraints": self.num_constraints,
            "biases": self.num_biases,
            "tau": round(self.tau, 3),
        }


@dataclass(frozen=True)
class SecSize:
    formulation: str
    n: int
    constraints: int
    dominant_constraints: int
    binary_variables: int
    continuous_variables: int


@dataclass(frozen=True)
class ConstraintCheck:
    label: str
    kind: str
    lhs: float
    rhs: float
    violation: float


# ========================
# label / kind
# ========================

def constraint_label(kind, *detail):
    return f"{kind}[{','.join(str(d) for d in detail)}]"


def constraint_kind(label):
    """'mtz[1,2,3]' → 'mtz'. 괄호가 없으면 label 전체"""
    return str(label).split("[", 1)[0]


def model_kinds(cqm):
    """모델에 쓰인 제약 종류 (KINDS 순서, 그 밖의 종류는 뒤에 이름순)"""
    found = {constraint_kind(label) for label in cqm.constraints}
    return sorted(found, key=lambda k: (KINDS.index(k) if k in KINDS else len(KINDS), k))


def as_sample(cqm, values):
    """변수 순서 값 배열 → dimod samples-like"""
    values = np.asarray(values)
    if values.shape[-1] != len(cqm.variables):
        raise ModelError(f"values 길이 {values.shape[-1]} != 모델 변수 수 {len(cqm.variables)}")
    return np.atleast_2d(values), list(cqm.variables)


def integer_bounds(cqm):
    """정수 변수 번호 → (lower, upper)"""
    return {
        k: (int(cqm.lower_bound(v)), int(cqm.upper_bound(v)))
        for k, v in enumerate(cqm.variables)
        if cqm.vartype(v) is dimod.INTEGER
    }


# ========================
# 변수 번호 매기기
# ========================

def build_varmap(n, p):
    """x_rij (r=1..p, i≠j, 0..n) 다음에 u_ri (r=1..p, i=1..n) 순서로 번호 부여"""
    arc_index = {}
    for r in range(1, p + 1):
        for i in range(n + 1):
            for j in range(n + 1):
                if i != j:
                    arc_index[(r, i, j)] = len(arc_index)
    offset = len(arc_index)
    u_index = {}
    for r in range(1, p + 1):
        for i in range(1, n + 1):
            u_index[(r, i)] = offset + len(u_index)
    return VarMap(n=n, p=p, arc_index=arc_index, u_index=u_index)


def arc_name(r, i, j):
    return f"x_{r}_{i}_{j}"


def u_name(r, i):
    return f"u_{r}_{i}"


# ========================
# 모델 생성
# ========================

def build_model(instance, distances, trucks=None):
    """Instance + 거리 행렬 → (ConstrainedQuadraticModel, VarMap)"""
    n = instance.n_customers
    p = instance.fleet_size if trucks is None else trucks
    if n <= 0:
        raise ModelError(f"{instance.name}: 고객이 없어 빈 모델")
    if p <= 0:
        raise ModelError(f"{instance.name}: 차량 수는 1 이상이어야 함 (p={p})")
    if distances.dim != n + 1:
        raise ModelError(f"거리 행렬 크기 {distances.dim} != n+1 ({n + 1})")

    vm = build_varmap(n, p)
    Q = instance.capacity
    q = instance.demands
    costs = distances.costs
    nodes = range(n + 1)
    customers = range(1, n + 1)
    trucks_range = range(1, p + 1)

    # 비용 0 인 arc 도 계수 0 으로 남긴다 (bias 수 보존)
    objective = dimod.QuadraticModel()
    for (r, i, j) in vm.arc_index:
        name = arc_name(r, i, j)
        objective.add_variable(dimod.BINARY, name)
        objective.set_linear(name, int(costs[i, j]))
    for (r, i) in vm.u_index:
        objective.add_variable(dimod.INTEGER, u_name(r, i), lower_bound=q[i], upper_bound=Q)

    cqm = dimod.ConstrainedQuadraticModel()
    cqm.set_objective(objective)

    x = arc_name
    for j in customers:
        terms = [(x(r, i, j), 1) for r in trucks_range for i in nodes if i != j]
        cqm.add_constraint_from_iterable(terms, "==", rhs=1, label=constraint_label(VISIT_ONCE, j))
    for r in trucks_range:
        terms = [(x(r, 0, j), 1) for j in customers]
        cqm.add_constraint_from_iterable(terms, "==", rhs=1, label=constraint_label(DEPOT_LEAVE, r))
    for j in nodes:
        for r in trucks_range:
            inflow = [(x(r, i, j), 1) for i in nodes if i != j]
            outflow = [(x(r, j, i), -1) for i in nodes if i != j]
            cqm.add_constraint_from_iterable(
                inflow + outflow, "==", rhs=0, label=constraint_label(FLOW_CONSERVATION, r, j)
            )
    for r in trucks_range:
        terms = [(x(r, i, j), q[j]) for i in nodes for j in customers if i != j]
        cqm.add_constraint_from_iterable(terms, "<=", rhs=Q, label=constraint_label(CAPACITY, r))
    # u_j - u_i >= q_j - Q(1 - x_rij)  →  u_j - u_i - Q x_rij >= q_j - Q
    for r in trucks_range:
        for i in customers:
            for j in customers:
                if i == j:
                    continue
                terms = [(u_name(r, j), 1), (u_name(r, i), -1), (x(r, i, j), -Q)]
                cqm.add_constraint_from_iterable(
                    terms, ">=", rhs=q[j] - Q, label=constraint_label(MTZ, r, i, j)
                )

    logger.info(
        "%s 모델 생성: 이진 %d, 정수 %d, 제약 %d",
        instance.name, vm.total_binary, vm.total_integer, len(cqm.constraints),
    )
    return cqm, vm


def model_stats(cqm, varmap, tau, name=""):
    """변수/제약/bias 수. bias 는 목적함수(모든 변수)와 제약 좌변의 계수 수"""
    if len(cqm.variables) != varmap.total_binary + varmap.total_integer:
        raise ModelError("모델과 VarMap 의 변수 수가 다름")
    return ModelStats(
        name=name,
        num_variables=len(cqm.variables),
        num_constraints=len(cqm.constraints),
        num_biases=cqm.num_biases(),
        tau=tau,
    )


def expected_counts(n, p):
    """폐형식 크기 (변수, 제약) - 생성된 모델과 교차 검증용"""
    variables = p * (n + 1) * n + n * p
    constraints = n + p + (n + 1) * p + p + n * (n - 1) * p
    return variables, constraints


# ========================
# SEC 크기 비교
# ========================

def sec_size(formulation, n):
    """DFJ / MTZ 부분경로 제거 제약 크기 (정확한 값 + 지배항)"""
    if n < 2:
        raise ModelError(f"n 은 2 이상이어야 함: {n}")
    formulation = formulation.upper()
    if formulation == DFJ:
        exact = 2 ** n + 2 * n - 2
        if exact > MAX_COUNT:
            raise SecOverflowError(f"n={n}: DFJ 제약 수 2^n+2n-2 가 64비트 정수 범위를 넘음")
        return SecSize(DFJ, n, exact, 2 ** n, n * (n - 1), 0)
    if formulation == MTZ.upper():
        return SecSize(MTZ.upper(), n, n * n - n + 2, n * n, n * (n - 1), n - 1)
    raise ModelError(f"알 수 없는 formulation: {formulation}")


# ========================
# 검증 / 내보내기
# ========================

def objective_value(cqm, values):
    return float(cqm.objective.energy(as_sample(cqm, values)))


def _bound_checks(cqm, values, tol):
    failed = []
    for k, (lo, hi) in integer_bounds(cqm).items():
        v = values[k]
        if v < lo - tol or v > hi + tol:
            label = str(cqm.variables[k])
            failed.append(ConstraintCheck(label, BOUNDS, float(v), lo if v < lo else hi, float(max(lo - v, v - hi))))
    return failed


def evaluate(cqm, values, tol=0):
    """위반된 제약 목록 (정수 bound 위반은 kind='bounds')"""
    values = np.asarray(values)
    failed = _bound_checks(cqm, values, tol)
    for datum in cqm.iter_constraint_data(as_sample(cqm, values)):
        if datum.violation > tol:
            failed.append(ConstraintCheck(
                str(datum.label), constraint_kind(datum.label),
                float(datum.lhs_energy), float(datum.rhs_energy), float(datum.violation),
            ))
    return failed


def violations(cqm, values):
    """제약 label → 위반량 (만족이면 0)"""
    return dict(cqm.iter_violations(as_sample(cqm, values), clip=True))


def is_feasible(cqm, values):
    values = np.asarray(values)
    return not _bound_checks(cqm, values, 0) and cqm.check_feasible(as_sample(cqm, values))


def model_to_dict(cqm):
    def sense_text(sense):
        return sense.value if isinstance(sense, Sense) else str(sense)

    variables = []
    for v in cqm.variables:
        vartype = cqm.vartype(v)
        entry = {"name": str(v), "type": vartype.name}
        if vartype is dimod.INTEGER:
            entry["lower"] = int(cqm.lower_bound(v))
            entry["upper"] = int(cqm.upper_bound(v))
        else:
            entry["lower"], entry["upper"] = 0, 1
        variables.append(entry)
    return {
        "variables": variables,
        "objective": {
            "linear": [[str(v), float(b)] for v, b in cqm.objective.linear.items()],
            "quadratic": [[str(u), str(v), float(b)] for (u, v), b in cqm.objective.quadratic.items()],
            "offset": float(cqm.objective.offset),
        },
        "constraints": [
            {
                "label": str(label),
                "kind": constraint_kind(label),
                "sense": sense_text(comp.sense),
                "rhs": float(comp.rhs - comp.lhs.offset),
                "terms": [[str(v), float(b)] for v, b in comp.lhs.linear.items()],
            }
            for label, comp in cqm.constraints.items()
        ],
    }


def model_to_json(cqm, path=None):
    text = json.dumps(model_to_dict(cqm), separators=(",", ":"))
    if path is not None:
        with open(path, "w", encoding="utf-8") as f:
            f.write(text)
    return text

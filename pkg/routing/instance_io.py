"""
CVRPLIB(.vrp) 인스턴스 파싱, 거리 행렬, tightness 계산.
파일의 1-base 노드 번호는 depot=0 인 0-base 로 정규화한다.
"""
import io
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from routing import check_tightness, lookup_best_known

logger = logging.getLogger(__name__)

SUPPORTED_EDGE_WEIGHT_TYPES = {"EUC_2D"}
SECTION_KEYS = {"NODE_COORD_SECTION", "DEMAND_SECTION", "DEPOT_SECTION"}
FLEET_SUFFIX = re.compile(r"-k(\d+)$")


# ========================
# 예외
# ========================

class InstanceError(ValueError):
    pass


class InstanceParseError(InstanceError):
    def __init__(self, message, line_no=None):
        self.line_no = line_no
        if line_no is not None:
            message = f"{line_no}번째 줄: {message}"
        super().__init__(message)


class InstanceValidationError(InstanceError):
    pass


class UnsupportedFormatError(InstanceError):
    pass


# ========================
# 도메인 타입
# ========================

@dataclass(frozen=True)
class Instance:
    name: str
    n_customers: int
    capacity: int
    fleet_size: int
    coords: tuple
    demands: tuple
    best_known: Optional[int] = None

    def __post_init__(self):
        validate_instance(self)

    @property
    def dim(self):
        return self.n_customers + 1

    @property
    def total_demand(self):
        return sum(self.demands)


@dataclass(frozen=True)
class DistanceMatrix:
    dim: int
    costs: np.ndarray = field(repr=False)

    def __getitem__(self, key):
        return self.costs[key]

    @property
    def max_cost(self):
        return int(self.costs.max()) if self.dim else 0


def validate_instance(instance):
    if len(instance.demands) != instance.n_customers + 1:
        raise InstanceValidationError(
            f"demand 개수 {len(instance.demands)} != 고객수+1 ({instance.n_customers + 1})"
        )
    if len(instance.coords) != instance.n_customers + 1:
        raise InstanceValidationError(
            f"좌표 개수 {len(instance.coords)} != 고객수+1 ({instance.n_customers + 1})"
        )
    if instance.demands and instance.demands[0] != 0:
        raise InstanceValidationError(f"depot demand 가 0 이 아님: {instance.demands[0]}")
    if instance.capacity <= 0:
        raise InstanceValidationError(f"capacity 는 양수여야 함: {instance.capacity}")
    if instance.fleet_size < 1:
        raise InstanceValidationError(f"fleet_size 는 1 이상이어야 함: {instance.fleet_size}")
    for i, d in enumerate(instance.demands):
        if d < 0:
            raise InstanceValidationError(f"노드 {i} demand 가 음수: {d}")
        if d > instance.capacity:
            raise InstanceValidationError(
                f"노드 {i} demand {d} 가 capacity {instance.capacity} 초과"
            )


# ========================
# 파싱
# ========================

def _split_header(line):
    key, _, value = line.partition(":")
    return key.strip().upper(), value.strip()


def _int_field(value, key, line_no):
    try:
        return int(float(value))
    except ValueError:
        raise InstanceParseError(f"{key} 값이 정수가 아님: {value!r}", line_no)


def parse_instance(source, fleet_size=None):
    """
    TSPLIB/CVRPLIB 텍스트 스트림 → Instance.
    fleet_size 인자가 있으면 이름의 -k<p> 접미사보다 우선한다.
    """
    header = {}
    coords = {}
    demands = {}
    depots = []
    section = None

    for line_no, raw in enumerate(source, 1):
        line = raw.strip()
        if not line:
            continue
        upper = line.upper()
        if upper == "EOF":
            break
        if upper in SECTION_KEYS:
            section = upper
            continue
        if ":" in line and not line[0].isdigit() and not line.startswith("-"):
            key, value = _split_header(line)
            header[key] = (value, line_no)
            section = None
            continue
        if section is None:
            raise InstanceParseError(f"알 수 없는 줄: {line!r}", line_no)

        parts = line.split()
        try:
            if section == "NODE_COORD_SECTION":
                if len(parts) != 3:
                    raise InstanceParseError(f"좌표 줄은 'id x y' 형식이어야 함: {line!r}", line_no)
                coords[int(parts[0])] = (float(parts[1]), float(parts[2]))
            elif section == "DEMAND_SECTION":
                if len(parts) != 2:
                    raise InstanceParseError(f"demand 줄은 'id d' 형식이어야 함: {line!r}", line_no)
                demands[int(parts[0])] = int(parts[1])
            else:
                for token in parts:
                    node = int(token)
                    if node == -1:
                        section = None
                        break
                    depots.append(node)
        except ValueError:
            raise InstanceParseError(f"숫자 형식 오류: {line!r}", line_no)

    edge_type, edge_line = header.get("EDGE_WEIGHT_TYPE", ("EUC_2D", None))
    if edge_type.upper() not in SUPPORTED_EDGE_WEIGHT_TYPES:
        raise UnsupportedFormatError(f"지원하지 않는 EDGE_WEIGHT_TYPE: {edge_type} ({edge_line}번째 줄)")

    for key in ("DIMENSION", "CAPACITY"):
        if key not in header:
            raise InstanceParseError(f"{key} 항목 없음")
    dimension = _int_field(header["DIMENSION"][0], "DIMENSION", header["DIMENSION"][1])
    capacity = _int_field(header["CAPACITY"][0], "CAPACITY", header["CAPACITY"][1])
    name = header.get("NAME", ("unnamed", None))[0]

    if not coords:
        raise InstanceParseError("NODE_COORD_SECTION 없음")
    if not demands:
        raise InstanceParseError("DEMAND_SECTION 없음")
    file_nodes = list(range(1, dimension + 1))
    missing = [i for i in file_nodes if i not in coords or i not in demands]
    if missing:
        raise InstanceParseError(f"좌표/demand 가 없는 노드: {missing[:10]}")

    depot = depots[0] if depots else 1
    if len(depots) > 1:
        raise InstanceValidationError(f"depot 이 여러 개: {depots}")
    if depot not in coords:
        raise InstanceValidationError(f"DEPOT_SECTION 의 depot {depot} 가 노드 목록에 없음")
    if demands[depot] != 0:
        raise InstanceValidationError(f"depot demand 가 0 이 아님: {demands[depot]}")

    # depot 을 0번으로, 나머지는 파일 순서 유지
    order = [depot] + [i for i in file_nodes if i != depot]

    trucks = fleet_size
    if trucks is None:
        match = FLEET_SUFFIX.search(name)
        if match:
            trucks = int(match.group(1))
        elif "VEHICLES" in header:
            trucks = _int_field(header["VEHICLES"][0], "VEHICLES", header["VEHICLES"][1])
        else:
            raise InstanceValidationError(
                f"{name}: 차량 수를 알 수 없음 (이름에 -k<p> 없음, --trucks 로 지정)"
            )

    instance = Instance(
        name=name,
        n_customers=dimension - 1,
        capacity=capacity,
        fleet_size=trucks,
        coords=tuple(coords[i] for i in order),
        demands=tuple(demands[i] for i in order),
        best_known=lookup_best_known(name),
    )
    logger.info(
        "%s 파싱: 고객 %d, 차량 %d, Q=%d, 총 demand %d",
        name, instance.n_customers, instance.fleet_size, capacity, instance.total_demand,
    )
    return instance


def read_instance(path, fleet_size=None):
    with open(path, encoding="utf-8") as f:
        return parse_instance(f, fleet_size=fleet_size)


def parse_instance_text(text, fleet_size=None):
    return parse_instance(io.StringIO(text), fleet_size=fleet_size)


def _fmt_number(value):
    value = float(value)
    return str(int(value)) if value.is_integer() else repr(value)


def format_instance(instance):
    """Instance → CVRPLIB 텍스트 (depot 은 1번 노드)"""
    lines = [
        f"NAME : {instance.name}",
        "TYPE : CVRP",
        f"DIMENSION : {instance.dim}",
        "EDGE_WEIGHT_TYPE : EUC_2D",
        f"CAPACITY : {instance.capacity}",
    ]
    if not FLEET_SUFFIX.search(instance.name):
        lines.append(f"VEHICLES : {instance.fleet_size}")
    lines.append("NODE_COORD_SECTION")
    for i, (x, y) in enumerate(instance.coords, 1):
        lines.append(f" {i} {_fmt_number(x)} {_fmt_number(y)}")
    lines.append("DEMAND_SECTION")
    for i, d in enumerate(instance.demands, 1):
        lines.append(f"{i} {d}")
    lines += ["DEPOT_SECTION", " 1", " -1", "EOF"]
    return "\n".join(lines) + "\n"


def write_instance(instance, path):
    Path(path).write_text(format_instance(instance), encoding="utf-8")


# ========================
# 거리 / tightness
# ========================

def euclid_distance_matrix(instance):
    """EUC_2D 거리: 반올림(half-up) 정수"""
    xy = np.asarray(instance.coords, dtype=np.float64).reshape(-1, 2)
    diff = xy[:, None, :] - xy[None, :, :]
    dist = np.sqrt((diff ** 2).sum(axis=-1))
    costs = np.floor(dist + 0.5).astype(np.int64)
    np.fill_diagonal(costs, 0)
    costs.setflags(write=False)
    return DistanceMatrix(dim=len(xy), costs=costs)


def tightness(instance):
    """τ = 총 demand / (차량수 × capacity)"""
    return sum(instance.demands) / (instance.fleet_size * instance.capacity)


def checked_tightness(instance):
    """τ 계산 + 기준표와 비교 (불일치는 경고만)"""
    return check_tightness(instance.name, tightness(instance))


# ========================
# 합성 인스턴스
# ========================

def synthetic_instance(n, p, seed=0, grid=100, max_demand=9):
    """
    고객 n 명, 차량 p 대 무작위 인스턴스.
    고객을 p 묶음으로 나눈 뒤 가장 무거운 묶음 적재량을 capacity 로 잡아서 항상 분할 가능.
    """
    if p < 1 or n < p:
        raise InstanceValidationError(f"고객 수 n 은 차량 수 p 이상이어야 함 (n={n}, p={p})")
    if max_demand < 1:
        raise InstanceValidationError(f"max_demand 는 1 이상이어야 함: {max_demand}")
    rng = np.random.default_rng([int(seed), n, p])
    coords = tuple(tuple(int(v) for v in rng.integers(0, grid + 1, size=2)) for _ in range(n + 1))
    demands = (0,) + tuple(int(d) for d in rng.integers(1, max_demand + 1, size=n))
    order = rng.permutation(np.arange(1, n + 1))
    capacity = max(sum(demands[int(c)] for c in order[k::p]) for k in range(p))
    return Instance(
        name=f"synthetic-n{n + 1}-k{p}",
        n_customers=n,
        capacity=capacity,
        fleet_size=p,
        coords=coords,
        demands=demands,
    )

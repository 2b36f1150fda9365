"""
제약 모델 → QUBO 컴파일러.

등식 제약은 P·(a·x - b)^2, 부등식은 이진 slack 을 붙여 등식으로 만든 뒤 제곱한다.
정수 변수는 [lower, upper] 범위를 slack 과 같은 방식(상위 계수 clip 된 2^k)으로 이진 인코딩.
제곱 전개의 상수항은 offset 에 모아서 energy = x^T Q x + offset 이 패널티 목적함수와 정확히 같다.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import dimod
import numpy as np
from dimod.sym import Sense
from scipy import sparse

from routing.flow_model import KINDS, constraint_kind, objective_value

logger = logging.getLogger(__name__)

ROLE_BINARY = "binary"
ROLE_INT_BIT = "u_bit"
ROLE_SLACK = "slack"


class CompileError(ValueError):
    pass


class PenaltyConfigError(CompileError):
    pass


class DimensionError(CompileError):
    pass


# ========================
# slack / 정수 인코딩
# ========================

def slack_bits(gap):
    """gap 까지 표현하는 최소 비트 수 (gap=0 → 0)"""
    gap = int(gap)
    if gap < 0:
        raise CompileError(f"gap 은 0 이상이어야 함: {gap}")
    return gap.bit_length()


def slack_coefficients(gap):
    """비트 계수 (1, 2, 4, ..., top). top 은 합이 정확히 gap 이 되도록 clip"""
    r = slack_bits(gap)
    if r == 0:
        return ()
    coefs = [1 << k for k in range(r - 1)]
    coefs.append(int(gap) - ((1 << (r - 1)) - 1))
    return tuple(coefs)


def encode_value(value, coefs):
    """0..sum(coefs) 범위의 정수 → 비트 튜플"""
    value = int(value)
    total = sum(coefs)
    if value < 0 or value > total:
        raise CompileError(f"값 {value} 가 인코딩 범위 [0, {total}] 밖")
    if not coefs:
        return ()
    bits = [0] * len(coefs)
    top = coefs[-1]
    low_max = total - top
    if value > low_max:
        bits[-1] = 1
        value -= top
    for k in range(len(coefs) - 1):
        bits[k] = (value >> k) & 1
    return tuple(bits)


def decode_value(bits, coefs):
    return int(sum(b * c for b, c in zip(bits, coefs)))


# ========================
# 도메인 타입
# ========================

@dataclass(frozen=True)
class PenaltyConfig:
    multipliers: dict

    def __post_init__(self):
        for kind, value in self.multipliers.items():
            if not value > 0:
                raise PenaltyConfigError(f"{kind} 패널티는 양수여야 함: {value}")

    def covering(self, kinds):
        missing = [k for k in kinds if k not in self.multipliers]
        if missing:
            raise PenaltyConfigError(f"패널티 계수 없음: {', '.join(missing)}")
        return self

    def with_overrides(self, overrides):
        merged = dict(self.multipliers)
        merged.update(overrides or {})
        return PenaltyConfig(merged)


@dataclass(frozen=True)
class LedgerEntry:
    name: str
    role: str
    # binary: 모델 변수 번호, u_bit: 정수 변수 번호, slack: 제약 번호
    ref: int
    coef: int = 1


@dataclass(frozen=True)
class SlackEncoding:
    constraint: int
    kind: str
    ordinals: tuple
    coefs: tuple
    gap: int
    # +1: a·x + s = b (<=),  -1: a·x - s = b (>=)
    sign: int


@dataclass(frozen=True)
class PenaltyTerm:
    constraint: int
    kind: str
    ordinals: np.ndarray = field(repr=False)
    coefs: np.ndarray = field(repr=False)
    rhs: float


@dataclass(frozen=True)
class QuboLayout:
    """모델 변수 ↔ QUBO 비트 배치. 같은 모델의 모든 패널티 조합이 공유"""
    ledger: tuple
    binary_map: dict
    int_encodings: dict
    slacks: tuple
    penalty_terms: tuple
    num_model_variables: int

    @property
    def dim(self):
        return len(self.ledger)


@dataclass(frozen=True)
class QuboModel:
    dim: int
    linear: np.ndarray = field(repr=False)
    # 상삼각 (i<j) CSR
    quadratic: sparse.csr_matrix = field(repr=False)
    offset: float
    layout: Optional[QuboLayout] = field(default=None, repr=False)
    multipliers: dict = field(default_factory=dict)

    @property
    def ledger(self):
        return self.layout.ledger if self.layout else ()

    @property
    def num_interactions(self):
        return int(self.quadratic.nnz)

    def quadratic_items(self):
        """(i, j, coef) i<j, 행/열 순 정렬"""
        coo = self.quadratic.tocoo()
        order = np.lexsort((coo.col, coo.row))
        for k in order:
            yield int(coo.row[k]), int(coo.col[k]), float(coo.data[k])

    def to_dense(self):
        mat = self.quadratic.toarray()
        mat[np.diag_indices(self.dim)] += self.linear
        return mat

    def adjacency(self):
        """대칭 CSR (U + U^T) - 국소장 갱신용"""
        sym = (self.quadratic + self.quadratic.T).tocsr()
        sym.sort_indices()
        return sym

    def max_abs_coefficient(self):
        vals = [np.abs(self.linear).max(initial=0.0)]
        if self.quadratic.nnz:
            vals.append(np.abs(self.quadratic.data).max())
        return float(max(vals))


@dataclass(frozen=True)
class QuboParts:
    """Q(P) = base + Σ P_kind · correction_kind"""
    layout: QuboLayout
    base: QuboModel
    corrections: dict

    @property
    def kinds(self):
        return tuple(self.corrections)


@dataclass(frozen=True)
class SlackFreeForm:
    """
    slack 비트를 최적값으로 소거한 형태.
    energy = rest(x) + Σ_c weight_c · (z_c + clip(round(-z_c), 0, gap_c))^2,  z_c = sign_c · (a_c·x - rhs_c)
    """
    free: np.ndarray = field(repr=False)
    rest: QuboModel = field(repr=False)
    # free 비트 × slack 제약 (계수 a)
    incidence: sparse.csr_matrix = field(repr=False)
    rhs: np.ndarray = field(repr=False)
    sign: np.ndarray = field(repr=False)
    gap: np.ndarray = field(repr=False)
    weight: np.ndarray = field(repr=False)

    @property
    def num_terms(self):
        return len(self.rhs)


# ========================
# 레이아웃
# ========================

def _expand(terms, layout_bits, int_encodings):
    """모델 변수 항 → (QUBO 비트 번호, 계수) 배열 + 상수"""
    idx = []
    coefs = []
    const = 0
    for v, a in terms:
        if v in layout_bits:
            idx.append(layout_bits[v])
            coefs.append(a)
        else:
            bits, bit_coefs, lower = int_encodings[v]
            const += a * lower
            idx.extend(bits)
            coefs.extend(a * c for c in bit_coefs)
    return idx, coefs, const


def _merge(idx, coefs):
    """같은 비트가 여러 번 나오면 계수 합산 (x^2 = x 전개가 성립하도록)"""
    if len(set(idx)) == len(idx):
        return np.asarray(idx, dtype=np.int64), np.asarray(coefs, dtype=np.float64)
    acc = {}
    for i, c in zip(idx, coefs):
        acc[i] = acc.get(i, 0) + c
    keys = sorted(acc)
    return np.asarray(keys, dtype=np.int64), np.asarray([acc[k] for k in keys], dtype=np.float64)


def _linear_constraint(label, comparison):
    lhs = comparison.lhs
    if len(lhs.quadratic):
        raise CompileError(f"제약 {label}: 이차 제약은 지원하지 않음")
    sense = comparison.sense
    if not isinstance(sense, Sense):
        sense = Sense(sense)
    return list(lhs.linear.items()), sense, float(comparison.rhs) - float(lhs.offset)


def build_layout(cqm):
    labels = tuple(cqm.variables)
    index = {v: k for k, v in enumerate(labels)}
    ledger = []
    binary_map = {}
    for k, v in enumerate(labels):
        vartype = cqm.vartype(v)
        if vartype is dimod.BINARY:
            binary_map[k] = len(ledger)
            ledger.append(LedgerEntry(str(v), ROLE_BINARY, k))
        elif vartype is not dimod.INTEGER:
            raise CompileError(f"{v}: {vartype.name} 변수는 지원하지 않음")

    int_encodings = {}
    for k, v in enumerate(labels):
        if cqm.vartype(v) is not dimod.INTEGER:
            continue
        lower, upper = int(cqm.lower_bound(v)), int(cqm.upper_bound(v))
        span = upper - lower
        if span < 0:
            raise CompileError(f"{v}: upper < lower")
        coefs = slack_coefficients(span)
        ordinals = []
        for b, c in enumerate(coefs):
            ordinals.append(len(ledger))
            ledger.append(LedgerEntry(f"{v}#b{b}", ROLE_INT_BIT, k, c))
        int_encodings[k] = (tuple(ordinals), coefs, lower)

    slacks = []
    penalty_terms = []
    for ci, (label, comparison) in enumerate(cqm.constraints.items()):
        kind = constraint_kind(label)
        terms, sense, rhs = _linear_constraint(label, comparison)
        idx, coefs, const = _expand(((index[v], a) for v, a in terms), binary_map, int_encodings)
        rhs = rhs - const
        if sense is not Sense.Eq:
            pos = sum(c for c in coefs if c > 0)
            neg = sum(c for c in coefs if c < 0)
            if sense is Sense.Le:
                gap, sign = rhs - neg, 1
            else:
                gap, sign = pos - rhs, -1
            if gap < 0:
                raise CompileError(f"제약 {label} 는 만족 불가능 (gap={gap})")
            gap = int(math.floor(gap))
            s_coefs = slack_coefficients(gap)
            s_ord = []
            for b, c in enumerate(s_coefs):
                s_ord.append(len(ledger))
                ledger.append(LedgerEntry(f"slack[{label}]#b{b}", ROLE_SLACK, ci, c))
            slacks.append(SlackEncoding(ci, kind, tuple(s_ord), s_coefs, gap, sign))
            idx = idx + s_ord
            coefs = coefs + [sign * c for c in s_coefs]
        ords, vals = _merge(idx, coefs)
        penalty_terms.append(PenaltyTerm(ci, kind, ords, vals, rhs))

    return QuboLayout(
        ledger=tuple(ledger),
        binary_map=binary_map,
        int_encodings=int_encodings,
        slacks=tuple(slacks),
        penalty_terms=tuple(penalty_terms),
        num_model_variables=len(labels),
    )


# ========================
# 행렬 조립
# ========================

class _Accumulator:
    def __init__(self, dim):
        self.dim = dim
        self.linear = np.zeros(dim, dtype=np.float64)
        self.rows = []
        self.cols = []
        self.vals = []
        self.offset = 0.0

    def add_pairs(self, i, j, v):
        i = np.asarray(i, dtype=np.int64)
        j = np.asarray(j, dtype=np.int64)
        self.rows.append(np.minimum(i, j))
        self.cols.append(np.maximum(i, j))
        self.vals.append(np.asarray(v, dtype=np.float64))

    def add_square(self, ords, coefs, rhs, weight=1.0):
        """w·(a·y - b)^2 = w·(Σ a_k^2 y_k - 2bΣ a_k y_k + 2Σ_{k<l} a_k a_l y_k y_l + b^2)"""
        np.add.at(self.linear, ords, weight * (coefs * coefs - 2.0 * rhs * coefs))
        if len(ords) > 1:
            ku, lu = np.triu_indices(len(ords), k=1)
            self.add_pairs(ords[ku], ords[lu], weight * 2.0 * coefs[ku] * coefs[lu])
        self.offset += weight * float(rhs) * float(rhs)

    def build(self, layout):
        if self.rows:
            rows = np.concatenate(self.rows)
            cols = np.concatenate(self.cols)
            vals = np.concatenate(self.vals)
        else:
            rows = cols = np.zeros(0, dtype=np.int64)
            vals = np.zeros(0, dtype=np.float64)
        quad = sparse.coo_matrix((vals, (rows, cols)), shape=(self.dim, self.dim)).tocsr()
        quad.sum_duplicates()
        quad.eliminate_zeros()
        quad.sort_indices()
        return QuboModel(self.dim, self.linear, quad, self.offset, layout)


def _objective_part(cqm, layout):
    acc = _Accumulator(layout.dim)
    index = {v: k for k, v in enumerate(cqm.variables)}
    objective = cqm.objective
    terms = [(index[v], a) for v, a in objective.linear.items() if a]
    idx, coefs, const = _expand(terms, layout.binary_map, layout.int_encodings)
    if idx:
        np.add.at(acc.linear, np.asarray(idx, dtype=np.int64), np.asarray(coefs, dtype=np.float64))
    acc.offset += const + float(objective.offset)
    pi, pj, pv = [], [], []
    for (u, v), c in objective.quadratic.items():
        i, j = index[u], index[v]
        if i not in layout.binary_map or j not in layout.binary_map:
            raise CompileError("목적함수 이차항은 이진 변수만 지원")
        pi.append(layout.binary_map[i])
        pj.append(layout.binary_map[j])
        pv.append(c)
    if pi:
        acc.add_pairs(pi, pj, pv)
    return acc.build(layout)


def compile_parts(cqm):
    """목적함수 QUBO + 제약 종류별 단위 패널티(P=1) QUBO"""
    layout = build_layout(cqm)
    base = _objective_part(cqm, layout)
    accs = {}
    for term in layout.penalty_terms:
        acc = accs.get(term.kind)
        if acc is None:
            acc = accs[term.kind] = _Accumulator(layout.dim)
        acc.add_square(term.ordinals, term.coefs, term.rhs)
    ordered = sorted(accs, key=lambda k: (KINDS.index(k) if k in KINDS else len(KINDS), k))
    corrections = {kind: accs[kind].build(layout) for kind in ordered}
    logger.info(
        "QUBO 레이아웃: 비트 %d (정수 인코딩 %d, slack %d)",
        layout.dim,
        sum(len(e[0]) for e in layout.int_encodings.values()),
        sum(len(s.ordinals) for s in layout.slacks),
    )
    return QuboParts(layout, base, corrections)


def combine(parts, config):
    """base + Σ P_kind · correction_kind"""
    config.covering(parts.kinds)
    linear = parts.base.linear.copy()
    quad = parts.base.quadratic.copy()
    offset = parts.base.offset
    used = {}
    for kind, part in parts.corrections.items():
        P = float(config.multipliers[kind])
        used[kind] = P
        linear += P * part.linear
        quad = quad + P * part.quadratic
        offset += P * part.offset
    quad = quad.tocsr()
    quad.sum_duplicates()
    quad.eliminate_zeros()
    quad.sort_indices()
    return QuboModel(parts.layout.dim, linear, quad, offset, parts.layout, used)


def compile(cqm, config):
    """제약 모델 → QUBO (패널티 방식)"""
    parts = compile_parts(cqm)
    qubo = combine(parts, config)
    logger.info("QUBO 컴파일: dim=%d, 이차항 %d, offset=%g", qubo.dim, qubo.num_interactions, qubo.offset)
    return qubo


def compile_sweep(cqm, configs):
    """여러 패널티 설정으로 컴파일 (레이아웃/부분행렬 재사용)"""
    parts = compile_parts(cqm)
    return [combine(parts, cfg) for cfg in configs]


def default_penalties(distances, n, kinds=KINDS, overrides=None):
    """P = 2 · max C_ij · (n+1) - 제약 하나 위반이 어떤 경로 비용 절감보다 크도록"""
    max_cost = max(int(distances.costs.max()), 1)
    value = float(2 * max_cost * (n + 1))
    return PenaltyConfig({k: value for k in kinds}).with_overrides(overrides)


# ========================
# slack 소거
# ========================

def eliminate_slack(qubo):
    """slack 제약을 떼어낸 free 비트 QUBO + 제약별 잔차 데이터. slack 이 없으면 None"""
    layout = qubo.layout
    if layout is None or not layout.slacks:
        return None
    missing = {s.kind for s in layout.slacks} - set(qubo.multipliers)
    if missing:
        raise PenaltyConfigError(f"패널티 계수 없음: {', '.join(sorted(missing))}")

    acc = _Accumulator(qubo.dim)
    for s in layout.slacks:
        term = layout.penalty_terms[s.constraint]
        acc.add_square(term.ordinals, term.coefs, term.rhs, weight=float(qubo.multipliers[s.kind]))
    removed = acc.build(layout)

    free = np.asarray([k for k, e in enumerate(layout.ledger) if e.role != ROLE_SLACK], dtype=np.int64)
    quad = (qubo.quadratic - removed.quadratic).tocsr()[free][:, free]
    quad = sparse.triu(quad, k=1).tocsr()
    quad.eliminate_zeros()
    quad.sort_indices()
    rest = QuboModel(len(free), (qubo.linear - removed.linear)[free], quad, qubo.offset - removed.offset)

    rows, cols, vals = [], [], []
    rhs, sign, gap, weight = [], [], [], []
    for c, s in enumerate(layout.slacks):
        term = layout.penalty_terms[s.constraint]
        keep = ~np.isin(term.ordinals, s.ordinals)
        rows.append(np.searchsorted(free, term.ordinals[keep]))
        cols.append(np.full(int(keep.sum()), c, dtype=np.int64))
        vals.append(term.coefs[keep])
        rhs.append(term.rhs)
        sign.append(s.sign)
        gap.append(s.gap)
        weight.append(float(qubo.multipliers[s.kind]))
    incidence = sparse.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(len(free), len(layout.slacks)),
    )
    incidence.sort_indices()
    return SlackFreeForm(
        free=free,
        rest=rest,
        incidence=incidence,
        rhs=np.asarray(rhs, dtype=np.float64),
        sign=np.asarray(sign, dtype=np.float64),
        gap=np.asarray(gap, dtype=np.float64),
        weight=np.asarray(weight, dtype=np.float64),
    )


def slack_free_energy(form, x_free):
    """SlackFreeForm 기준 에너지. fill_slack 으로 채운 전체 비트의 QUBO 에너지와 같다"""
    x = np.asarray(x_free, dtype=np.float64)
    z = form.sign * (form.incidence.T @ x - form.rhs)
    s = np.clip(np.floor(-z + 0.5), 0.0, form.gap)
    return float(energy(form.rest, x) + form.weight @ ((z + s) ** 2))


# ========================
# 평가
# ========================

def _as_bits(qubo, assignment):
    x = np.asarray(assignment, dtype=np.float64).ravel()
    if x.shape[0] != qubo.dim:
        raise DimensionError(f"assignment 길이 {x.shape[0]} != QUBO 차원 {qubo.dim}")
    if not np.isin(x, (0.0, 1.0)).all():
        raise CompileError("assignment 값은 0 또는 1 이어야 함")
    return x


def energy(qubo, assignment):
    """x^T Q x + offset"""
    x = _as_bits(qubo, assignment)
    return float(x @ qubo.linear + x @ (qubo.quadratic @ x) + qubo.offset)


def energies(qubo, samples):
    """여러 샘플 (행 단위) 에너지"""
    X = np.atleast_2d(np.asarray(samples, dtype=np.float64))
    if X.shape[1] != qubo.dim:
        raise DimensionError(f"assignment 길이 {X.shape[1]} != QUBO 차원 {qubo.dim}")
    if not np.isin(X, (0.0, 1.0)).all():
        raise CompileError("assignment 값은 0 또는 1 이어야 함")
    quad = np.asarray((qubo.quadratic @ X.T).T)
    return X @ qubo.linear + (X * quad).sum(axis=1) + qubo.offset


def lower(qubo, assignment):
    """QUBO 비트 → 모델 변수 값 (이진 그대로, 정수는 lower + 인코딩 값)"""
    x = _as_bits(qubo, assignment)
    layout = qubo.layout
    values = np.zeros(layout.num_model_variables, dtype=np.int64)
    for v, q in layout.binary_map.items():
        values[v] = int(x[q])
    for v, (ords, coefs, lo) in layout.int_encodings.items():
        values[v] = lo + decode_value([int(x[o]) for o in ords], coefs)
    return values


def fill_slack(layout, bits):
    """slack 비트를 나머지 비트 기준 최적값(범위 clip)으로 덮어쓴다 (bits 를 직접 수정)"""
    for s in layout.slacks:
        bits[list(s.ordinals)] = 0
        term = layout.penalty_terms[s.constraint]
        partial = float(term.coefs @ bits[term.ordinals])
        need = (term.rhs - partial) if s.sign > 0 else (partial - term.rhs)
        need = min(max(int(math.floor(need + 0.5)), 0), s.gap)
        for o, b in zip(s.ordinals, encode_value(need, s.coefs)):
            bits[o] = b
    return bits


def lift(qubo, values):
    """모델 변수 값 → QUBO 비트. 정수는 인코딩, slack 은 최적값으로 채움"""
    layout = qubo.layout
    values = np.asarray(values)
    if values.shape[0] != layout.num_model_variables:
        raise DimensionError(f"values 길이 {values.shape[0]} != 모델 변수 수 {layout.num_model_variables}")
    bits = np.zeros(layout.dim, dtype=np.int8)
    for v, q in layout.binary_map.items():
        bits[q] = 1 if values[v] else 0
    for v, (ords, coefs, lo) in layout.int_encodings.items():
        span = sum(coefs)
        target = min(max(int(values[v]) - lo, 0), span)
        for o, b in zip(ords, encode_value(target, coefs)):
            bits[o] = b
    return fill_slack(layout, bits)


def penalty_breakdown(qubo, cqm, assignment):
    """(목적함수 값, 제약 종류별 패널티 합). 목적함수 + Σ 패널티 = energy"""
    x = _as_bits(qubo, assignment)
    value = objective_value(cqm, lower(qubo, x))
    totals = {kind: 0.0 for kind in qubo.multipliers}
    for term in qubo.layout.penalty_terms:
        P = qubo.multipliers.get(term.kind, 0.0)
        resid = float(term.coefs @ x[term.ordinals]) - term.rhs
        totals[term.kind] = totals.get(term.kind, 0.0) + P * resid * resid
    return value, totals

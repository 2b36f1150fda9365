"""
QUBO 샘플러: simulated annealing (주력), 전수조사 (검증용 oracle).
모든 샘플러는 (qubo, params) → SampleSet 계약을 따른다.
"""
import logging
import math
import time
from dataclasses import asdict, dataclass, field
from typing import Optional

import numba as nb
import numpy as np

from qubo.compiler import eliminate_slack, fill_slack
from qubo.compiler import energies as qubo_energies

logger = logging.getLogger(__name__)

BRUTE_FORCE_MAX_DIM = 24
# 전수조사 한 번에 평가할 assignment 수
BRUTE_FORCE_CHUNK = 1 << 16
# 가장 큰 단일 flip 을 1/2 확률로 받는 온도에서 시작
HOT_ACCEPTANCE = 0.5
# 가장 작은 에너지 차이를 1% 확률로만 받는 온도에서 끝
COLD_ACCEPTANCE = 0.01


class SamplerError(RuntimeError):
    pass


class SizeGuardError(SamplerError, ValueError):
    pass


# ========================
# 도메인 타입
# ========================

@dataclass(frozen=True)
class SamplerParams:
    num_reads: int = 100
    sweeps: int = 10000
    # None → QUBO 의 단일 flip 에너지 폭으로 정함 (default_temperatures)
    initial_temperature: Optional[float] = None
    final_temperature: Optional[float] = None
    # None → 전체 sweep 에 걸친 기하 스케줄. 값이 있으면 sweep 마다 곱하고 final 에서 멈춤
    cooling_ratio: Optional[float] = None
    # slack 비트는 flip 하지 않고 나머지 비트 기준 최적값으로 둔다
    exact_slack: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.num_reads < 1:
            raise SamplerError(f"num_reads 는 1 이상: {self.num_reads}")
        if self.sweeps < 1:
            raise SamplerError(f"sweeps 는 1 이상: {self.sweeps}")
        for name in ("initial_temperature", "final_temperature"):
            value = getattr(self, name)
            if value is not None and not value > 0:
                raise SamplerError(f"{name} 는 양수: {value}")
        if (
            self.initial_temperature is not None
            and self.final_temperature is not None
            and self.initial_temperature < self.final_temperature
        ):
            raise SamplerError("initial_temperature 는 final_temperature 이상이어야 함")
        if self.cooling_ratio is not None and not 0 < self.cooling_ratio < 1:
            raise SamplerError(f"cooling_ratio 는 (0,1) 범위: {self.cooling_ratio}")

    def as_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class SampleSet:
    """에너지 오름차순 (동률은 read 순) 으로 정렬된 샘플 묶음"""
    assignments: np.ndarray = field(repr=False)
    energies: np.ndarray
    times_us: np.ndarray
    read_index: np.ndarray
    metadata: dict = field(default_factory=dict)
    feasible: Optional[np.ndarray] = None

    @classmethod
    def build(cls, assignments, energies, times_us, metadata, feasible=None):
        assignments = np.asarray(assignments, dtype=np.int8)
        energies = np.asarray(energies, dtype=np.float64)
        reads = np.arange(len(energies))
        order = np.lexsort((reads, energies))
        return cls(
            assignments=assignments[order],
            energies=energies[order],
            times_us=np.asarray(times_us, dtype=np.int64)[order],
            read_index=reads[order],
            metadata=metadata,
            feasible=None if feasible is None else np.asarray(feasible, dtype=bool)[order],
        )

    def __len__(self):
        return len(self.energies)

    @property
    def best(self):
        return self.assignments[0], float(self.energies[0])

    def samples(self):
        for k in range(len(self)):
            yield self.assignments[k], float(self.energies[k]), int(self.times_us[k])


def read_seeds(seed, num_reads):
    """(seed, read 번호) 별 독립 스트림 시드. 병렬/직렬 결과가 같도록 read 마다 파생"""
    seeds = np.empty(num_reads, dtype=np.uint64)
    for k in range(num_reads):
        state = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, k]).generate_state(1, dtype=np.uint64)
        seeds[k] = state[0] | np.uint64(1)
    return seeds


# ========================
# 온도 스케줄
# ========================

def default_temperatures(qubo):
    """
    (시작, 끝) 온도.
    시작: 비트 하나를 뒤집을 때 가능한 최대 |ΔE| (|linear_i| + Σ_j |J_ij|) 를 1/2 확률로 받는 온도.
    끝: 0 이 아닌 최소 |계수| 를 1% 확률로 받는 온도.
    """
    adj = qubo.adjacency()
    field_sizes = np.abs(qubo.linear) + np.asarray(abs(adj).sum(axis=1)).ravel()
    max_field = float(field_sizes.max(initial=0.0))
    coefs = np.concatenate([np.abs(qubo.linear), np.abs(qubo.quadratic.data)])
    coefs = coefs[coefs > 0]
    if max_field == 0 or coefs.size == 0:
        return 1.0, 1.0
    hot = max_field / math.log(1 / HOT_ACCEPTANCE)
    cold = float(coefs.min()) / math.log(1 / COLD_ACCEPTANCE)
    return hot, min(cold, hot)


def temperature_schedule(params, qubo):
    """sweep 별 온도 배열"""
    hot, cold = default_temperatures(qubo)
    t_initial = params.initial_temperature or hot
    t_final = min(params.final_temperature or cold, t_initial)
    if params.cooling_ratio is None:
        return np.geomspace(t_initial, t_final, num=params.sweeps)
    steps = t_initial * params.cooling_ratio ** np.arange(params.sweeps)
    return np.maximum(steps, t_final)


# ========================
# annealing 커널
# ========================

@nb.njit(cache=True)
def _uniform(state):
    x = state[0]
    x ^= x >> np.uint64(12)
    x ^= x << np.uint64(25)
    x ^= x >> np.uint64(27)
    state[0] = x
    return float((x * np.uint64(2685821657736338717)) >> np.uint64(11)) / 9007199254740992.0


@nb.njit(cache=True)
def _init_state(linear, indptr, indices, data, state):
    n = linear.shape[0]
    x = np.zeros(n, dtype=np.int8)
    for i in range(n):
        if _uniform(state) < 0.5:
            x[i] = 1
    # 국소장 h_i = linear_i + Σ_j J_ij x_j
    local = linear.copy()
    for i in range(n):
        if x[i] == 1:
            for k in range(indptr[i], indptr[i + 1]):
                local[indices[k]] += data[k]
    e = 0.0
    for i in range(n):
        if x[i] == 1:
            e += 0.5 * (linear[i] + local[i])
    return x, local, e


@nb.njit(parallel=True, cache=True)
def _anneal(linear, indptr, indices, data, seeds, temps, out):
    n = linear.shape[0]
    for r in nb.prange(seeds.shape[0]):
        state = np.empty(1, dtype=np.uint64)
        state[0] = seeds[r]
        x, local, e = _init_state(linear, indptr, indices, data, state)
        best_e = e
        best_x = x.copy()
        for t in temps:
            for i in range(n):
                delta = local[i] if x[i] == 0 else -local[i]
                if delta <= 0.0 or _uniform(state) < math.exp(-delta / t):
                    x[i] = 1 - x[i]
                    sign = 1.0 if x[i] == 1 else -1.0
                    for k in range(indptr[i], indptr[i + 1]):
                        local[indices[k]] += sign * data[k]
                    e += delta
            if e < best_e:
                best_e = e
                best_x[:] = x
        out[r, :] = best_x


@nb.njit(cache=True)
def _slack_penalty(z, gap):
    """min_{s=0..gap} (z + s)^2"""
    s = np.floor(-z + 0.5)
    if s < 0.0:
        s = 0.0
    elif s > gap:
        s = gap
    v = z + s
    return v * v


@nb.njit(parallel=True, cache=True)
def _anneal_slack_free(linear, indptr, indices, data,
                       inc_ptr, inc_term, inc_coef,
                       rhs, sign, gap, weight,
                       seeds, temps, out):
    n = linear.shape[0]
    m = rhs.shape[0]
    for r in nb.prange(seeds.shape[0]):
        state = np.empty(1, dtype=np.uint64)
        state[0] = seeds[r]
        x, local, e = _init_state(linear, indptr, indices, data, state)
        # 제약별 잔차 a·x - rhs
        resid = -rhs.copy()
        for i in range(n):
            if x[i] == 1:
                for k in range(inc_ptr[i], inc_ptr[i + 1]):
                    resid[inc_term[k]] += inc_coef[k]
        for c in range(m):
            e += weight[c] * _slack_penalty(sign[c] * resid[c], gap[c])
        best_e = e
        best_x = x.copy()
        for t in temps:
            for i in range(n):
                step = 1.0 if x[i] == 0 else -1.0
                delta = step * local[i]
                for k in range(inc_ptr[i], inc_ptr[i + 1]):
                    c = inc_term[k]
                    before = _slack_penalty(sign[c] * resid[c], gap[c])
                    after = _slack_penalty(sign[c] * (resid[c] + step * inc_coef[k]), gap[c])
                    delta += weight[c] * (after - before)
                if delta <= 0.0 or _uniform(state) < math.exp(-delta / t):
                    x[i] = 1 - x[i]
                    for k in range(indptr[i], indptr[i + 1]):
                        local[indices[k]] += step * data[k]
                    for k in range(inc_ptr[i], inc_ptr[i + 1]):
                        resid[inc_term[k]] += step * inc_coef[k]
                    e += delta
            if e < best_e:
                best_e = e
                best_x[:] = x
        out[r, :] = best_x


def _csr_args(qubo):
    adj = qubo.adjacency()
    return (
        np.ascontiguousarray(qubo.linear, dtype=np.float64),
        adj.indptr.astype(np.int64),
        adj.indices.astype(np.int64),
        adj.data.astype(np.float64),
    )


def _run_slack_free(qubo, form, seeds, temps):
    inc = form.incidence
    free_bits = np.zeros((len(seeds), len(form.free)), dtype=np.int8)
    _anneal_slack_free(
        *_csr_args(form.rest),
        inc.indptr.astype(np.int64),
        inc.indices.astype(np.int64),
        inc.data.astype(np.float64),
        form.rhs, form.sign, form.gap, form.weight,
        seeds, temps, free_bits,
    )
    out = np.zeros((len(seeds), qubo.dim), dtype=np.int8)
    out[:, form.free] = free_bits
    for row in out:
        fill_slack(qubo.layout, row)
    return out


def sample_sa(qubo, params=None):
    """single-bit-flip Metropolis + 기하 냉각. 같은 seed 면 같은 SampleSet"""
    params = params or SamplerParams()
    if qubo.dim < 1:
        raise SamplerError("빈 QUBO 는 샘플링할 수 없음")
    temps = temperature_schedule(params, qubo)
    seeds = read_seeds(params.seed, params.num_reads)
    form = eliminate_slack(qubo) if params.exact_slack else None

    started = time.perf_counter()
    if form is not None:
        out = _run_slack_free(qubo, form, seeds, temps)
    else:
        out = np.zeros((params.num_reads, qubo.dim), dtype=np.int8)
        _anneal(*_csr_args(qubo), seeds, temps, out)
    elapsed_us = int((time.perf_counter() - started) * 1e6)

    per_read = elapsed_us // params.num_reads
    sampleset = SampleSet.build(
        out,
        qubo_energies(qubo, out),
        np.full(params.num_reads, per_read),
        {
            "sampler": "sa",
            "params": params.as_dict(),
            "seed": params.seed,
            "initial_temperature": float(temps[0]),
            "final_temperature": float(temps[-1]),
            "slack_free": form is not None,
            "timing": {"source": "local_wall_clock", "total_us": elapsed_us},
        },
    )
    logger.debug("SA: dim=%d reads=%d best=%g", qubo.dim, params.num_reads, sampleset.energies[0])
    return sampleset


# ========================
# 전수조사
# ========================

def brute_force(qubo, max_dim=BRUTE_FORCE_MAX_DIM):
    """전역 최소. 동률은 assignment 를 이진수(첫 비트가 최상위)로 봤을 때 가장 작은 것"""
    d = qubo.dim
    if d > max_dim:
        raise SizeGuardError(f"전수조사는 dim ≤ {max_dim} 만 허용 (dim={d})")
    if d == 0:
        return np.zeros(0, dtype=np.int8), float(qubo.offset)
    shifts = np.arange(d - 1, -1, -1, dtype=np.int64)
    total = 1 << d
    best_k, best_e = 0, math.inf
    for start in range(0, total, BRUTE_FORCE_CHUNK):
        ks = np.arange(start, min(start + BRUTE_FORCE_CHUNK, total), dtype=np.int64)
        X = ((ks[:, None] >> shifts) & 1).astype(np.int8)
        e = qubo_energies(qubo, X)
        k = int(np.argmin(e))
        if e[k] < best_e:
            best_e = float(e[k])
            best_k = int(ks[k])
    bits = ((best_k >> shifts) & 1).astype(np.int8)
    return bits, best_e


def sample_brute(qubo, params=None):
    """brute_force 를 SampleSet 계약으로 감싼 것"""
    started = time.perf_counter()
    bits, e = brute_force(qubo)
    elapsed_us = int((time.perf_counter() - started) * 1e6)
    return SampleSet.build(
        bits[None, :],
        [e],
        [elapsed_us],
        {
            "sampler": "brute",
            "params": params.as_dict() if params else {},
            "seed": params.seed if params else None,
            "timing": {"source": "local_wall_clock", "total_us": elapsed_us},
        },
    )

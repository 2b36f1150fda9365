"""
벤치마크 프로토콜: 인스턴스당 N 회 샘플러 실행 → MAPE, AE, 집계, feasibility, 히스토그램.
"""
import logging
import math
import statistics
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from qubo.compiler import compile as compile_qubo
from qubo.compiler import default_penalties
from qubo.remote import sample_remote
from qubo.samplers import SamplerError, SamplerParams, sample_brute, sample_sa
from routing.flow_model import build_model
from routing.instance_io import euclid_distance_matrix, synthetic_instance
from routing.route_decoder import decode, enumerate_optimal_routes, is_route_set, route_cost

logger = logging.getLogger(__name__)

DEFAULT_BINS = 10
# best_known 이 없을 때 전수조사로 E_best 를 구하는 최대 고객 수
ORACLE_CUSTOMERS = 8

TIMING_LOCAL = "local_wall_clock"
TIMING_SERVICE = "service"


class MetricError(ValueError):
    pass


# ========================
# 지표
# ========================

def absolute_error(energy, e_best):
    """|energy - E_best| / E_best"""
    if e_best <= 0:
        raise MetricError(f"E_best 는 양수여야 함: {e_best}")
    return abs(energy - e_best) / e_best


def mape(energies, e_best):
    """절대오차 평균 (n 개 항을 n 으로 나눔)"""
    energies = list(energies)
    if not energies:
        raise MetricError("MAPE 계산할 값이 없음")
    return math.fsum(absolute_error(e, e_best) for e in energies) / len(energies)


def histogram(errors, bins=DEFAULT_BINS):
    """[0, max] 등간격 구간. 구간은 (left, right], 첫 구간은 0 포함"""
    if bins < 1:
        raise MetricError(f"bins 는 1 이상: {bins}")
    values = np.asarray(list(errors), dtype=np.float64)
    if values.size == 0:
        return {"edges": [], "counts": []}
    hi = float(values.max())
    edges = np.linspace(0.0, hi, bins + 1) if hi > 0 else np.zeros(bins + 1)
    idx = np.clip(np.searchsorted(edges, values, side="left") - 1, 0, bins - 1)
    counts = np.bincount(idx, minlength=bins)
    return {"edges": [float(e) for e in edges], "counts": [int(c) for c in counts]}


def aggregates(energies):
    energies = list(energies)
    if not energies:
        return {"best": None, "worst": None, "mean": None, "stddev": None}
    return {
        "best": min(energies),
        "worst": max(energies),
        "mean": math.fsum(energies) / len(energies),
        "stddev": statistics.stdev(energies) if len(energies) > 1 else 0.0,
    }


def mape_curve(records, e_best):
    """k 번째 실행까지의 feasible 결과로 계산한 누적 MAPE (아직 없으면 None)"""
    curve = []
    total = 0.0
    count = 0
    for rec in records:
        if rec.feasible:
            total = math.fsum([total, absolute_error(rec.energy, e_best)])
            count += 1
        curve.append(total / count if count else None)
    return curve


# ========================
# 도메인 타입
# ========================

@dataclass(frozen=True)
class RunRecord:
    run: int
    feasible: bool
    energy: Optional[int]
    qubo_energy: Optional[float]
    time_us: Optional[int]
    timing_source: str
    seed: int
    sampler: str
    dim: int = 0
    # 선택된 샘플 비트 (packbits 후 hex)
    assignment: Optional[str] = None
    feasible_samples: int = 0
    error: Optional[str] = None

    def __post_init__(self):
        if self.feasible != (self.energy is not None):
            raise MetricError(f"run {self.run}: energy 는 feasible 일 때만 존재")


@dataclass(frozen=True)
class BenchReport:
    instance: str
    e_best: int
    records: tuple
    mape_curve: tuple
    aggregates: dict
    feasibility_rate: float
    histogram: dict
    errors: tuple = ()

    @property
    def feasible_energies(self):
        return [r.energy for r in self.records if r.feasible]

    @property
    def mape(self):
        """마지막 누적 MAPE. feasible 실행이 없으면 None"""
        return self.mape_curve[-1] if self.mape_curve else None

    @property
    def runs(self):
        return len(self.records)

    def timing_summary(self):
        times = [r.time_us for r in self.records if r.time_us is not None]
        if not times:
            return {"min_us": None, "mean_us": None, "stddev_us": None, "source": None}
        return {
            "min_us": min(times),
            "mean_us": math.fsum(times) / len(times),
            "stddev_us": statistics.stdev(times) if len(times) > 1 else 0.0,
            "source": self.records[0].timing_source,
        }


@dataclass(frozen=True)
class BenchConfig:
    sampler: str = "sa"
    params: SamplerParams = field(default_factory=SamplerParams)
    penalties: dict = field(default_factory=dict)
    endpoint: Optional[str] = None
    time_limit_ms: Optional[int] = None
    retries: int = 0
    timeout_s: float = 30.0
    bins: int = DEFAULT_BINS
    record_wall_time: bool = False
    trucks: Optional[int] = None


def assemble_report(instance_name, e_best, records, bins=DEFAULT_BINS):
    """실행 기록 → 보고서. 저장된 기록에서 다시 계산할 때도 같은 함수 사용"""
    records = tuple(sorted(records, key=lambda r: r.run))
    feasible = [r.energy for r in records if r.feasible]
    errors = [absolute_error(e, e_best) for e in feasible]
    return BenchReport(
        instance=instance_name,
        e_best=e_best,
        records=records,
        mape_curve=tuple(mape_curve(records, e_best)),
        aggregates=aggregates(feasible),
        feasibility_rate=len(feasible) / len(records) if records else 0.0,
        histogram=histogram(errors, bins),
        errors=tuple(errors),
    )


# ========================
# 비트 압축
# ========================

def pack_bits(bits):
    return np.packbits(np.asarray(bits, dtype=np.uint8)).tobytes().hex()


def unpack_bits(text, dim):
    raw = np.frombuffer(bytes.fromhex(text), dtype=np.uint8)
    return np.unpackbits(raw)[:dim].astype(np.int8)


# ========================
# 실행
# ========================

def run_seed(seed, run):
    """(seed, 실행 번호) 파생 시드"""
    return int(np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, run]).generate_state(1, dtype=np.uint32)[0])


def resolve_e_best(instance, distances, trucks=None):
    if instance.best_known:
        return int(instance.best_known)
    if instance.n_customers <= ORACLE_CUSTOMERS:
        cost, _ = enumerate_optimal_routes(instance, distances, trucks)
        if cost is None:
            raise MetricError(f"{instance.name}: 가능한 경로 분할이 없음")
        logger.info("%s: 전수조사 최적값 %d 를 E_best 로 사용", instance.name, cost)
        return cost
    raise MetricError(f"{instance.name}: best-known 값이 없고 전수조사하기엔 큼")


def make_sampler(config):
    """BenchConfig → (qubo, params) → SampleSet"""
    if config.sampler == "sa":
        return sample_sa
    if config.sampler == "brute":
        return sample_brute
    if config.sampler == "remote":
        if not config.endpoint:
            raise SamplerError("remote 샘플러에는 endpoint 가 필요함")

        def _remote(qubo, params):
            return sample_remote(
                qubo, config.endpoint, params,
                time_limit_ms=config.time_limit_ms,
                timeout_s=config.timeout_s,
                retries=config.retries,
            )
        return _remote
    raise SamplerError(f"알 수 없는 샘플러: {config.sampler}")


def select_best_feasible(sampleset, varmap, instance, distances):
    """decode 로 검증된 샘플 중 경로 비용 최소 (동률은 에너지 순). 없으면 None"""
    best = None
    count = 0
    for k, (bits, e, _) in enumerate(sampleset.samples()):
        result = decode(bits, varmap, instance)
        if not is_route_set(result):
            continue
        count += 1
        cost = route_cost(result, distances)
        if best is None or cost < best[0]:
            best = (cost, k, e)
    return best, count


def _record_time(sampleset, config):
    timing = sampleset.metadata.get("timing", {})
    if timing.get("source") == TIMING_SERVICE:
        us = timing.get("service_us")
        return (None if us is None else int(round(us))), TIMING_SERVICE
    if config.record_wall_time:
        return int(timing.get("total_us", 0)), TIMING_LOCAL
    return None, TIMING_LOCAL


def _bench_runs(instance, config, repetitions, sampler=None, on_record=None):
    """N 회 샘플러 실행 → RunRecord 목록. QUBO 는 한 번만 컴파일해서 재사용"""
    if repetitions < 1:
        raise MetricError(f"repetitions 는 1 이상: {repetitions}")
    distances = euclid_distance_matrix(instance)
    model, varmap = build_model(instance, distances, trucks=config.trucks)
    penalties = default_penalties(distances, instance.n_customers, overrides=config.penalties)
    qubo = compile_qubo(model, penalties)
    sampler = sampler or make_sampler(config)

    records = []
    for run in range(1, repetitions + 1):
        seed = run_seed(config.params.seed, run)
        params = replace(config.params, seed=seed)
        try:
            sampleset = sampler(qubo, params)
        except SamplerError as e:
            logger.error("%s run %d 샘플러 실패: %s", instance.name, run, e)
            record = RunRecord(run, False, None, None, None, TIMING_LOCAL, seed,
                               config.sampler, qubo.dim, error=str(e))
        else:
            best, count = select_best_feasible(sampleset, varmap, instance, distances)
            time_us, source = _record_time(sampleset, config)
            if best is not None:
                cost, k, e = best
                record = RunRecord(run, True, cost, e, time_us, source, seed, config.sampler,
                                   qubo.dim, pack_bits(sampleset.assignments[k]), count)
            else:
                bits, e = sampleset.best
                record = RunRecord(run, False, None, e, time_us, source, seed, config.sampler,
                                   qubo.dim, pack_bits(bits), 0)
            logger.info(
                "%s run %d/%d: %s",
                instance.name, run, repetitions,
                f"비용 {record.energy}" if record.feasible else "feasible 해 없음",
            )
        records.append(record)
        if on_record is not None:
            on_record(record)
    return records, qubo.dim


def run_benchmark(instance, config, repetitions, *, sampler=None, e_best=None, on_record=None):
    """
    N 회 반복 실행.
    feasible 실행이 하나도 없으면 feasibility_rate 0, MAPE 없음 (None) 으로 보고.
    """
    if repetitions < 1:
        raise MetricError(f"repetitions 는 1 이상: {repetitions}")
    if e_best is None:
        e_best = resolve_e_best(instance, euclid_distance_matrix(instance), config.trucks)
    records, _ = _bench_runs(instance, config, repetitions, sampler, on_record)
    report = assemble_report(instance.name, e_best, records, config.bins)
    if report.mape is None:
        logger.warning("%s: feasible 해를 하나도 찾지 못함", instance.name)
    return report


# ========================
# 크기별 feasibility
# ========================

@dataclass(frozen=True)
class SweepRow:
    n: int
    p: int
    dim: int
    runs: int
    feasibility_rate: float
    e_best: Optional[int]
    mape: Optional[float]

    def as_row(self):
        return {
            "n": self.n,
            "p": self.p,
            "dim": self.dim,
            "runs": self.runs,
            "feasibility_rate": self.feasibility_rate,
            "e_best": self.e_best,
            "mape": self.mape,
        }


def feasibility_sweep(sizes, config, runs, *, instance_seed=0, max_demand=9, sampler=None):
    """
    (고객 수 n, 차량 수 p) 조합별 합성 인스턴스로 feasibility rate 측정.
    전수조사 가능한 크기면 MAPE 도 같이 계산하고, 아니면 None.
    """
    rows = []
    for n, p in sizes:
        instance = synthetic_instance(n, p, seed=instance_seed, max_demand=max_demand)
        try:
            e_best = resolve_e_best(instance, euclid_distance_matrix(instance))
        except MetricError:
            e_best = None
        records, dim = _bench_runs(instance, config, runs, sampler)
        feasible = [r.energy for r in records if r.feasible]
        rows.append(SweepRow(
            n=n,
            p=p,
            dim=dim,
            runs=len(records),
            feasibility_rate=len(feasible) / len(records),
            e_best=e_best,
            mape=mape(feasible, e_best) if feasible and e_best else None,
        ))
        logger.info("sweep n=%d p=%d: dim %d, feasibility %.2f", n, p, dim, rows[-1].feasibility_rate)
    return rows


def verify_report(report, varmap, instance, tol=1e-12):
    """저장된 기록 기준 재계산 검증. 불일치 항목 목록 반환"""
    problems = []
    rebuilt = assemble_report(report.instance, report.e_best, report.records, len(report.histogram["counts"]) or DEFAULT_BINS)
    if (report.mape is None) != (rebuilt.mape is None) or (
        report.mape is not None and abs(report.mape - rebuilt.mape) > tol
    ):
        problems.append("mape")
    for key in ("mean", "stddev"):
        a, b = report.aggregates[key], rebuilt.aggregates[key]
        if (a is None) != (b is None) or (a is not None and abs(a - b) > tol):
            problems.append(key)
    if sum(report.histogram["counts"]) != len(report.feasible_energies):
        problems.append("histogram")
    for rec in report.records:
        if rec.feasible:
            bits = unpack_bits(rec.assignment, rec.dim)
            if not is_route_set(decode(bits, varmap, instance)):
                problems.append(f"run {rec.run}")
    return problems

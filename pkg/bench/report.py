"""
벤치마크 결과 저장/출력.
- 실행 기록: JSON lines (실행당 한 줄)
- 요약 CSV, 히스토그램 CSV (pandas)
- 사람이 읽는 표: 모델 크기표, SEC 크기표, 결과표, 시간표
"""
import json
import logging
from dataclasses import asdict
from pathlib import Path

import pandas as pd

from bench.harness import DEFAULT_BINS, RunRecord, assemble_report

logger = logging.getLogger(__name__)

SUMMARY_COLUMNS = ["run", "energy", "feasible", "ae", "cumulative_mape", "time_us"]
HISTOGRAM_COLUMNS = ["bin_left", "bin_right", "count"]
RESULT_LABELS = [
    ("best_known", "Best Known Solution"),
    ("best", "Best Solution"),
    ("worst", "Worst Solution"),
    ("mean", "Average"),
    ("stddev", "Std. Dev."),
    ("mape", "MAPE"),
    ("min_time_us", "Min time (us)"),
]
TIMING_LABELS = [
    ("mean_time_us", "Avg time (us)"),
    ("stddev_time_us", "Std. Dev. time (us)"),
]


# ========================
# 실행 기록 (JSON lines)
# ========================

def _record_doc(report, record):
    doc = {"instance": report.instance, "e_best": report.e_best}
    doc.update(asdict(record))
    return doc


def format_run_log(report):
    return "".join(json.dumps(_record_doc(report, r), ensure_ascii=False) + "\n" for r in report.records)


def write_run_log(report, path):
    path = Path(path)
    path.write_text(format_run_log(report), encoding="utf-8")
    return path


def read_run_log(path, bins=DEFAULT_BINS):
    """저장된 실행 기록 → BenchReport (지표는 기록에서 다시 계산)"""
    records = []
    instance = e_best = None
    fields = set(RunRecord.__dataclass_fields__)
    with open(path, encoding="utf-8") as f:
        for line_no, line in enumerate(f, 1):
            if not line.strip():
                continue
            try:
                doc = json.loads(line)
            except json.JSONDecodeError as e:
                raise ValueError(f"{path} {line_no}번째 줄: JSON 형식 오류 ({e})")
            instance = doc.get("instance", instance)
            e_best = doc.get("e_best", e_best)
            records.append(RunRecord(**{k: v for k, v in doc.items() if k in fields}))
    if not records:
        raise ValueError(f"{path}: 실행 기록이 없음")
    return assemble_report(instance, e_best, records, bins)


# ========================
# CSV
# ========================

def summary_frame(report):
    rows = []
    ae = iter(report.errors)
    for rec, cumulative in zip(report.records, report.mape_curve):
        rows.append({
            "run": rec.run,
            "energy": rec.energy,
            "feasible": rec.feasible,
            "ae": next(ae) if rec.feasible else None,
            "cumulative_mape": cumulative,
            "time_us": rec.time_us,
        })
    df = pd.DataFrame(rows, columns=SUMMARY_COLUMNS)
    df["energy"] = df["energy"].astype("Int64")
    df["time_us"] = df["time_us"].astype("Int64")
    return df


def histogram_frame(report):
    edges = report.histogram["edges"]
    counts = report.histogram["counts"]
    rows = [
        {"bin_left": edges[k], "bin_right": edges[k + 1], "count": c}
        for k, c in enumerate(counts)
    ]
    return pd.DataFrame(rows, columns=HISTOGRAM_COLUMNS)


def write_bench_artifacts(report, out_dir):
    """<name>.runs.jsonl, <name>.summary.csv, <name>.histogram.csv"""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {
        "runs": write_run_log(report, out_dir / f"{report.instance}.runs.jsonl"),
        "summary": out_dir / f"{report.instance}.summary.csv",
        "histogram": out_dir / f"{report.instance}.histogram.csv",
    }
    summary_frame(report).to_csv(paths["summary"], index=False, lineterminator="\n")
    histogram_frame(report).to_csv(paths["histogram"], index=False, lineterminator="\n")
    logger.info("%s: 결과 저장 → %s", report.instance, out_dir)
    return paths


# ========================
# 모델 크기표 / SEC 크기표
# ========================

def stats_frame(stats):
    return pd.DataFrame([s.as_row() for s in stats], columns=["instance", "variables", "constraints", "biases", "tau"])


def format_stats_table(stats):
    lines = ["instance variables constraints biases tau"]
    for s in stats:
        lines.append(f"{s.name} {s.num_variables} {s.num_constraints} {s.num_biases} {s.tau:.3f}")
    return "\n".join(lines) + "\n"


def sec_frame(sizes):
    return pd.DataFrame([
        {
            "n": s.n,
            "formulation": s.formulation,
            "dominant_constraints": s.dominant_constraints,
            "constraints": s.constraints,
            "binary_variables": s.binary_variables,
            "continuous_variables": s.continuous_variables,
        }
        for s in sizes
    ])


def format_sec_table(sizes):
    lines = ["n formulation constraints(dominant) constraints(exact) binary continuous"]
    for s in sizes:
        lines.append(
            f"{s.n} {s.formulation} {s.dominant_constraints:,} {s.constraints:,} "
            f"{s.binary_variables} {s.continuous_variables}"
        )
    return "\n".join(lines) + "\n"


# ========================
# 결과표
# ========================

def results_row(report):
    """BenchReport → 결과표 한 열"""
    agg = report.aggregates
    timing = report.timing_summary()
    return {
        "instance": report.instance,
        "best_known": report.e_best,
        "best": agg["best"],
        "worst": agg["worst"],
        "mean": agg["mean"],
        "stddev": agg["stddev"],
        "mape": report.mape,
        "runs": report.runs,
        "min_time_us": timing["min_us"],
        "mean_time_us": timing["mean_us"],
        "stddev_time_us": timing["stddev_us"],
    }


def _cell(key, value):
    if value is None:
        return "-"
    if key == "mape":
        return f"{value:.2f}"
    if key == "stddev_time_us":
        return f"{value:.1f}"
    return f"{value:.0f}"


def _render(rows, labels):
    if not rows:
        return ""
    label_w = max(len(label) for _, label in labels)
    columns = []
    for row in rows:
        cells = [_cell(key, row.get(key)) for key, _ in labels]
        width = max(len(row["instance"]), *(len(c) for c in cells))
        columns.append((row["instance"], cells, width))
    lines = [" " * label_w + "".join("  " + name.rjust(w) for name, _, w in columns)]
    for k, (_, label) in enumerate(labels):
        lines.append(label.ljust(label_w) + "".join("  " + cells[k].rjust(w) for _, cells, w in columns))
    return "\n".join(lines) + "\n"


def format_results_table(rows):
    """인스턴스별 열: best known / best / worst / 평균 / 표준편차 / MAPE(N) / 최소 시간"""
    runs = rows[0].get("runs") if rows else None
    labels = [(k, f"MAPE ({runs})" if k == "mape" and runs else label) for k, label in RESULT_LABELS]
    return _render(rows, labels)


def format_timing_table(rows):
    return _render(rows, TIMING_LABELS)


def results_frame(rows):
    return pd.DataFrame(rows)


# ========================
# 크기별 feasibility 표
# ========================

SWEEP_COLUMNS = ["n", "p", "dim", "runs", "feasibility_rate", "e_best", "mape"]


def sweep_frame(rows):
    return pd.DataFrame([r.as_row() for r in rows], columns=SWEEP_COLUMNS)


def format_sweep_table(rows):
    lines = ["n p dim runs feasibility e_best mape"]
    for r in rows:
        e_best = "-" if r.e_best is None else str(r.e_best)
        mape = "-" if r.mape is None else f"{r.mape:.2f}"
        lines.append(f"{r.n} {r.p} {r.dim} {r.runs} {r.feasibility_rate:.2f} {e_best} {mape}")
    return "\n".join(lines) + "\n"

"""
QUBO 텍스트 포맷.
첫 줄 `dim offset`, 이후 대각 `i i coeff`, 비대각 `i j coeff` (i<j).
ledger 는 별도 JSON 파일로 저장.
"""
import json
from pathlib import Path

import numpy as np
from scipy import sparse

from qubo.compiler import CompileError, LedgerEntry, QuboModel


def _fmt(value):
    value = float(value)
    return str(int(value)) if value.is_integer() else repr(value)


def format_qubo(qubo):
    lines = [f"{qubo.dim} {_fmt(qubo.offset)}"]
    for i in np.flatnonzero(qubo.linear):
        lines.append(f"{i} {i} {_fmt(qubo.linear[i])}")
    for i, j, c in qubo.quadratic_items():
        lines.append(f"{i} {j} {_fmt(c)}")
    return "\n".join(lines) + "\n"


def parse_qubo(text):
    rows = [line.split() for line in text.splitlines() if line.strip()]
    if not rows or len(rows[0]) != 2:
        raise CompileError("QUBO 헤더는 'dim offset' 형식이어야 함")
    dim = int(rows[0][0])
    offset = float(rows[0][1])
    linear = np.zeros(dim, dtype=np.float64)
    qi, qj, qv = [], [], []
    for line_no, parts in enumerate(rows[1:], 2):
        if len(parts) != 3:
            raise CompileError(f"{line_no}번째 줄: 'i j coeff' 형식이 아님")
        i, j, c = int(parts[0]), int(parts[1]), float(parts[2])
        if not (0 <= i < dim and 0 <= j < dim):
            raise CompileError(f"{line_no}번째 줄: 인덱스가 dim={dim} 범위 밖")
        if i == j:
            linear[i] += c
        elif i < j:
            qi.append(i)
            qj.append(j)
            qv.append(c)
        else:
            raise CompileError(f"{line_no}번째 줄: 비대각 항은 i<j 여야 함")
    quad = sparse.coo_matrix((qv, (qi, qj)), shape=(dim, dim)).tocsr()
    quad.sum_duplicates()
    quad.sort_indices()
    return QuboModel(dim, linear, quad, offset)


def write_qubo(qubo, path, ledger_path=None):
    path = Path(path)
    path.write_text(format_qubo(qubo), encoding="utf-8")
    if ledger_path is None:
        ledger_path = path.with_suffix(".ledger.json")
    write_ledger(qubo.ledger, ledger_path)
    return path, Path(ledger_path)


def read_qubo(path):
    return parse_qubo(Path(path).read_text(encoding="utf-8"))


def write_ledger(ledger, path):
    doc = {
        "entries": [
            {"index": k, "name": e.name, "role": e.role, "ref": e.ref, "coef": e.coef}
            for k, e in enumerate(ledger)
        ]
    }
    Path(path).write_text(json.dumps(doc, indent=1), encoding="utf-8")


def read_ledger(path):
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    return tuple(
        LedgerEntry(e["name"], e["role"], int(e["ref"]), int(e.get("coef", 1)))
        for e in doc["entries"]
    )

import json
import logging
from functools import lru_cache
from pathlib import Path

logger = logging.getLogger(__name__)

DATA_DIR = Path(__file__).resolve().parent / "data"
BEST_KNOWN_PATH = DATA_DIR / "best_known.json"

# 표에 적힌 τ 와 계산값 비교 허용 오차
TAU_TOLERANCE = 0.001


# ========================
# 기준 테이블 로드
# ========================

@lru_cache(maxsize=None)
def load_best_known_table(path=None):
    """번들된 A-series 기준표 로드 (인스턴스명 → 행 dict)"""
    target = Path(path) if path else BEST_KNOWN_PATH
    with open(target, encoding="utf-8") as f:
        doc = json.load(f)
    if doc.get("version") != 1:
        raise ValueError(f"지원하지 않는 기준표 버전: {doc.get('version')}")
    return doc["instances"]


def lookup_best_known(name):
    """인스턴스명으로 best-known 비용 조회, 없으면 None"""
    row = load_best_known_table().get(name)
    if not row:
        return None
    return int(row["best_known"])


def reference_tightness(name):
    """기준표의 τ 값들 반환 (table τ, density τ). 없으면 빈 dict"""
    row = load_best_known_table().get(name)
    if not row:
        return {}
    values = {"table": float(row["tau"])}
    if "density_tau" in row:
        values["density"] = float(row["density_tau"])
    return values


def check_tightness(name, tau):
    """계산된 τ 를 기준표와 비교. 불일치는 경고만 남기고 계산값을 그대로 반환"""
    refs = reference_tightness(name)
    if not refs:
        return tau
    mismatched = {k: v for k, v in refs.items() if abs(v - tau) > TAU_TOLERANCE}
    if len(set(refs.values())) > 1:
        logger.warning(
            "%s: 기준 τ 값이 서로 다름 (table=%.3f, density=%.3f), 계산값 %.3f 사용",
            name, refs["table"], refs["density"], tau,
        )
    elif mismatched:
        logger.warning(
            "%s: 계산 τ=%.3f 가 기준값 %.3f 와 다름",
            name, tau, refs["table"],
        )
    return tau

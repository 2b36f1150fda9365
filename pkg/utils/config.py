import logging
import os
try:
    import tomllib
except ImportError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path

ENV_ENDPOINT = "QUBO_BENCH_ENDPOINT"
ENV_CONFIG = "QUBO_BENCH_CONFIG"
ENV_LOG_LEVEL = "QUBO_BENCH_LOG_LEVEL"

LOG_FORMAT = "%(levelname)s | %(name)s | %(message)s"

# 설정 파일에서 허용하는 최상위 키
TOP_LEVEL_KEYS = {"trucks", "runs", "seed", "sampler", "endpoint", "out", "bins", "record_wall_time"}
TABLE_KEYS = {
    "penalty": None,
    "sampler_params": {
        "num_reads", "sweeps", "initial_temperature", "final_temperature", "cooling_ratio", "exact_slack",
    },
    "remote": {"time_limit_ms", "timeout_s", "retries"},
}


class ConfigError(ValueError):
    pass


# ========================
# 설정 파일
# ========================

def load_config(path=None):
    """TOML 설정 로드. path 가 없으면 QUBO_BENCH_CONFIG, 그것도 없으면 빈 설정"""
    target = path or os.environ.get(ENV_CONFIG)
    if not target:
        return {}
    target = Path(target)
    if not target.exists():
        raise ConfigError(f"설정 파일 없음: {target}")
    try:
        with open(target, "rb") as f:
            doc = tomllib.load(f)
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"{target}: TOML 형식 오류 ({e})")

    for key, value in doc.items():
        if key in TABLE_KEYS:
            if not isinstance(value, dict):
                raise ConfigError(f"[{key}] 는 테이블이어야 함")
            allowed = TABLE_KEYS[key]
            unknown = set(value) - allowed if allowed is not None else set()
            if unknown:
                raise ConfigError(f"[{key}] 알 수 없는 키: {', '.join(sorted(unknown))}")
        elif key not in TOP_LEVEL_KEYS:
            raise ConfigError(f"알 수 없는 설정 키: {key}")
    return doc


def merge_config(file_cfg, flags):
    """기본값 < 설정 파일 < 명령행. flags 중 None 인 값은 덮어쓰지 않음"""
    merged = {}
    for key, value in (file_cfg or {}).items():
        merged[key] = dict(value) if isinstance(value, dict) else value
    for key, value in (flags or {}).items():
        if value is None:
            continue
        if isinstance(value, dict):
            table = merged.setdefault(key, {})
            table.update({k: v for k, v in value.items() if v is not None})
        else:
            merged[key] = value
    return merged


def get_endpoint(explicit=None, config=None):
    """원격 샘플러 주소: 명령행 > 설정 파일 > QUBO_BENCH_ENDPOINT"""
    if explicit:
        return explicit
    if config and config.get("endpoint"):
        return config["endpoint"]
    return os.environ.get(ENV_ENDPOINT)


# ========================
# 로깅
# ========================

def setup_logging(level=None, log_file=None):
    """stream 핸들러 + (선택) 파일 핸들러. 진입점에서 한 번만 호출"""
    name = (level or os.environ.get(ENV_LOG_LEVEL) or "INFO").upper()
    resolved = logging.getLevelName(name)
    if not isinstance(resolved, int):
        raise ConfigError(f"알 수 없는 로그 레벨: {level}")
    handlers = [logging.StreamHandler()]
    if log_file:
        log_path = Path(log_file)
        log_path.parent.mkdir(parents=True, exist_ok=True)
        handlers.append(logging.FileHandler(log_path, encoding="utf-8"))
    logging.basicConfig(level=resolved, format=LOG_FORMAT, handlers=handlers, force=True)
    # numba 컴파일 로그 억제
    logging.getLogger("numba").setLevel(logging.WARNING)
    return resolved

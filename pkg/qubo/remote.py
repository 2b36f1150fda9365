"""
원격 샘플링 서비스 클라이언트 (JSON over HTTP POST).

요청: {format: "qubo", dim, offset, linear[], quadratic[[i,j,c]...], num_reads, time_limit_ms}
응답: {samples: [{assignment: "0101..", energy, feasible?}], timing: {service_us}}
"""
import logging
import time

import httpx
import numpy as np

from qubo.compiler import QuboModel
from qubo.compiler import energies as qubo_energies
from qubo.samplers import SampleSet, SamplerError, SamplerParams

logger = logging.getLogger(__name__)

DEFAULT_TIMEOUT_S = 30.0
RETRYABLE_STATUS = {429, 500, 502, 503, 504}


# ========================
# 예외
# ========================

class RemoteError(SamplerError):
    retryable = False
    guidance = ""

    def __str__(self):
        base = super().__str__()
        return f"{base} ({self.guidance})" if self.guidance else base


class RemoteTransportError(RemoteError):
    retryable = True
    guidance = "네트워크 확인 후 재시도"


class RemoteStatusError(RemoteError):
    def __init__(self, status_code, body=""):
        self.status_code = status_code
        self.retryable = status_code in RETRYABLE_STATUS
        self.guidance = "잠시 후 재시도" if self.retryable else "요청 내용 확인, 재시도 불필요"
        super().__init__(f"서비스 응답 {status_code}: {body[:200]}")


class RemoteSchemaError(RemoteError):
    guidance = "서비스 버전/응답 형식 확인, 재시도 불필요"


# ========================
# 요청 / 응답
# ========================

def qubo_document(qubo, num_reads, time_limit_ms=None):
    return {
        "format": "qubo",
        "dim": qubo.dim,
        "offset": float(qubo.offset),
        "linear": [float(v) for v in qubo.linear],
        "quadratic": [[i, j, c] for i, j, c in qubo.quadratic_items()],
        "num_reads": int(num_reads),
        "time_limit_ms": time_limit_ms,
    }


def _bits(text, dim):
    if not isinstance(text, str) or len(text) != dim or set(text) - {"0", "1"}:
        raise RemoteSchemaError(f"assignment 는 길이 {dim} 의 0/1 문자열이어야 함")
    return np.frombuffer(text.encode("ascii"), dtype=np.uint8) - ord("0")


def parse_response(doc, dim):
    """응답 JSON → (비트 배열, 서비스 에너지, feasible 플래그, service_us)"""
    try:
        samples = doc["samples"]
        timing = doc.get("timing") or {}
        if not isinstance(samples, list) or not samples:
            raise RemoteSchemaError("samples 가 비어 있음")
        bits = np.stack([_bits(s["assignment"], dim) for s in samples]).astype(np.int8)
        service_energies = [float(s["energy"]) for s in samples]
        feasible = [s.get("feasible") for s in samples]
        service_us = timing.get("service_us")
        service_us = None if service_us is None else float(service_us)
    except RemoteSchemaError:
        raise
    except (KeyError, TypeError, ValueError, AttributeError) as e:
        raise RemoteSchemaError(f"응답 형식 오류: {e}")
    return bits, service_energies, feasible, service_us


def _post(client, endpoint, body):
    try:
        response = client.post(endpoint, json=body)
    except httpx.TransportError as e:
        raise RemoteTransportError(f"{endpoint} 연결 실패: {e}")
    if not response.is_success:
        raise RemoteStatusError(response.status_code, response.text)
    try:
        return response.json()
    except ValueError:
        raise RemoteSchemaError("응답이 JSON 이 아님")


def sample_remote(payload, endpoint, params=None, *, client=None, time_limit_ms=None,
                  timeout_s=DEFAULT_TIMEOUT_S, retries=0, backoff_s=0.5):
    """
    원격 서비스로 샘플링.
    payload 는 QuboModel 이나 이미 만들어진 요청 dict.
    서비스가 보고한 시간(service_us)은 그대로 metadata 에 기록한다.
    """
    params = params or SamplerParams()
    if isinstance(payload, QuboModel):
        body = qubo_document(payload, params.num_reads, time_limit_ms)
        dim = payload.dim
    else:
        body = dict(payload)
        body.setdefault("num_reads", params.num_reads)
        body.setdefault("time_limit_ms", time_limit_ms)
        dim = int(body["dim"])

    owns_client = client is None
    if owns_client:
        client = httpx.Client(timeout=timeout_s)
    try:
        attempt = 0
        while True:
            try:
                doc = _post(client, endpoint, body)
                break
            except RemoteError as e:
                if not e.retryable or attempt >= retries:
                    raise
                wait = backoff_s * (2 ** attempt)
                logger.warning("원격 샘플링 실패 (%s), %.1f초 후 재시도 %d/%d", e, wait, attempt + 1, retries)
                time.sleep(wait)
                attempt += 1
    finally:
        if owns_client:
            client.close()

    bits, service_energies, feasible, service_us = parse_response(doc, dim)
    if isinstance(payload, QuboModel):
        local = qubo_energies(payload, bits)
        if not np.allclose(local, service_energies):
            logger.warning("서비스 보고 에너지와 로컬 재계산 값이 다름, 로컬 값 사용")
        sample_energies = local
    else:
        sample_energies = service_energies

    times = [int(round(service_us)) if service_us is not None else 0] * len(bits)
    has_flags = all(f is not None for f in feasible)
    return SampleSet.build(
        bits,
        sample_energies,
        times,
        {
            "sampler": "remote",
            "endpoint": endpoint,
            "params": params.as_dict(),
            "seed": params.seed,
            "timing": {"source": "service", "service_us": service_us},
        },
        feasible=feasible if has_flags else None,
    )

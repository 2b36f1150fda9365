import json

import httpx
import pytest

from qubo.compiler import compile, default_penalties, energy, lift
from qubo_bench import EXIT_DATA, EXIT_OK, EXIT_USAGE, main
from routing.flow_model import build_model
from routing.instance_io import write_instance
from routing.route_decoder import encode
from utils.config import ENV_CONFIG, ENV_ENDPOINT


@pytest.fixture(autouse=True)
def clean_env(monkeypatch):
    monkeypatch.delenv(ENV_CONFIG, raising=False)
    monkeypatch.delenv(ENV_ENDPOINT, raising=False)


def test_sec_table(capsys):
    assert main(["sec-table"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "20 DFJ 1,048,576 1,048,614 380 0" in out
    assert "20 MTZ 400 382 380 19" in out


def test_stats_on_a32(capsys, a32_path, tmp_path):
    assert main(["stats", str(a32_path), "--out", str(tmp_path)]) == EXIT_OK
    assert "A-n32-k5 5115 4851 38750 0.820" in capsys.readouterr().out
    assert (tmp_path / "stats.csv").exists()


def test_parse_reports_bad_files(capsys, a32_path, tmp_path):
    code = main(["parse", str(a32_path), str(tmp_path / "missing.vrp")])
    captured = capsys.readouterr()
    assert code == EXIT_DATA
    assert "A-n32-k5: customers=31 trucks=5" in captured.out
    assert "missing.vrp" in captured.err


def test_usage_errors_exit_1():
    with pytest.raises(SystemExit) as info:
        main(["bench"])
    assert info.value.code == EXIT_USAGE
    with pytest.raises(SystemExit) as info:
        main(["compile", "--instance", "x.vrp", "--penalty", "gravity=3"])
    assert info.value.code == EXIT_USAGE


def test_remote_without_endpoint(tiny_path):
    assert main(["bench", "--instance", str(tiny_path), "--sampler", "remote", "--runs", "1"]) == EXIT_USAGE


def test_compile_writes_artifacts(tiny_path, tmp_path, capsys):
    out = tmp_path / "build"
    assert main(["compile", "--instance", str(tiny_path), "--out", str(out)]) == EXIT_OK
    for suffix in (".qubo", ".ledger.json", ".model.json"):
        assert (out / f"tiny-n3-k1{suffix}").exists()
    assert "dim=18" in capsys.readouterr().out


def test_solve_with_brute_force(tiny_path, capsys):
    assert main(["solve", "--instance", str(tiny_path), "--sampler", "brute"]) == EXIT_OK
    assert "Cost 12" in capsys.readouterr().out


def test_brute_force_size_guard(tmp_path, small_instance):
    path = tmp_path / "small-n5-k2.vrp"
    write_instance(small_instance, path)
    assert main(["solve", "--instance", str(path), "--sampler", "brute"]) == EXIT_DATA


def test_bench_then_report(tiny_path, tmp_path, capsys):
    out = tmp_path / "results"
    args = ["--seed", "3", "bench", "--instance", str(tiny_path), "--sampler", "brute",
            "--runs", "2", "--out", str(out)]
    assert main(args) == EXIT_OK
    assert "MAPE (2)" in capsys.readouterr().out
    runs = out / "tiny-n3-k1.runs.jsonl"
    assert runs.exists()
    assert (out / "tiny-n3-k1.summary.csv").exists()

    assert main(["report", str(runs), "--out", str(out)]) == EXIT_OK
    assert "Best Known Solution" in capsys.readouterr().out
    assert (out / "results.csv").exists()
    assert (out / "report.xlsx").exists()


def test_config_file_feeds_bench(tiny_path, tmp_path, monkeypatch):
    cfg = tmp_path / "bench.toml"
    cfg.write_text(f'sampler = "brute"\nruns = 1\nout = "{(tmp_path / "cfg").as_posix()}"\n', encoding="utf-8")
    monkeypatch.setenv(ENV_CONFIG, str(cfg))
    assert main(["bench", "--instance", str(tiny_path)]) == EXIT_OK
    assert (tmp_path / "cfg" / "tiny-n3-k1.runs.jsonl").exists()


def test_unknown_config_key_is_data_error(tiny_path, tmp_path):
    cfg = tmp_path / "bad.toml"
    cfg.write_text("speed = 3\n", encoding="utf-8")
    assert main(["--config", str(cfg), "parse", str(tiny_path)]) == EXIT_DATA


def test_bench_against_remote_service(tiny_path, tiny_instance, tiny_distances, tmp_path, monkeypatch):
    model, vm = build_model(tiny_instance, tiny_distances)
    qubo = compile(model, default_penalties(tiny_distances, 2))
    bits = lift(qubo, encode([(0, 1, 2, 0)], vm, tiny_instance))
    requests = []

    def handler(request):
        body = json.loads(request.content)
        requests.append(body)
        assert body["dim"] == qubo.dim
        return httpx.Response(200, json={
            "samples": [{"assignment": "".join(str(int(b)) for b in bits), "energy": energy(qubo, bits)}],
            "timing": {"service_us": 41},
        })

    real_client = httpx.Client
    monkeypatch.setattr(httpx, "Client", lambda **kw: real_client(transport=httpx.MockTransport(handler), **kw))

    out = tmp_path / "remote"
    args = ["bench", "--instance", str(tiny_path), "--sampler", "remote",
            "--endpoint", "http://sampler.test/v1/sample", "--runs", "2", "--out", str(out)]
    assert main(args) == EXIT_OK
    assert len(requests) == 2
    lines = (out / "tiny-n3-k1.runs.jsonl").read_text(encoding="utf-8").splitlines()
    records = [json.loads(line) for line in lines]
    assert [r["energy"] for r in records] == [12, 12]
    assert all(r["time_us"] == 41 and r["timing_source"] == "service" for r in records)
    assert all(r["sampler"] == "remote" for r in records)


def test_sweep_writes_table(tmp_path, capsys):
    out = tmp_path / "sweep"
    args = ["sweep", "--size", "2x1", "--max-demand", "1", "--sampler", "brute",
            "--runs", "2", "--out", str(out)]
    assert main(args) == EXIT_OK
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "n p dim runs feasibility e_best mape"
    cells = lines[1].split()
    assert cells[:2] == ["2", "1"]
    assert cells[3:5] == ["2", "1.00"]
    assert cells[-1] == "0.00"
    assert (out / "sweep.csv").exists()


def test_sweep_rejects_more_trucks_than_customers():
    with pytest.raises(SystemExit) as info:
        main(["sweep", "--size", "2x3"])
    assert info.value.code == EXIT_USAGE

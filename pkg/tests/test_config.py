import logging

import pytest

from utils.config import (
    ENV_CONFIG,
    ENV_ENDPOINT,
    ConfigError,
    get_endpoint,
    load_config,
    merge_config,
    setup_logging,
)


@pytest.fixture(autouse=True)
def clean_env(monkeypatch):
    monkeypatch.delenv(ENV_CONFIG, raising=False)
    monkeypatch.delenv(ENV_ENDPOINT, raising=False)


def _toml(tmp_path, text):
    path = tmp_path / "bench.toml"
    path.write_text(text, encoding="utf-8")
    return path


def test_no_config_is_empty():
    assert load_config() == {}


def test_load_tables(tmp_path):
    path = _toml(tmp_path, """
runs = 20
sampler = "brute"

[penalty]
mtz = 40.0

[sampler_params]
num_reads = 50

[remote]
retries = 2
""")
    cfg = load_config(path)
    assert cfg["runs"] == 20
    assert cfg["penalty"] == {"mtz": 40.0}
    assert cfg["sampler_params"] == {"num_reads": 50}
    assert cfg["remote"]["retries"] == 2


def test_env_points_to_config(tmp_path, monkeypatch):
    path = _toml(tmp_path, "seed = 9\n")
    monkeypatch.setenv(ENV_CONFIG, str(path))
    assert load_config() == {"seed": 9}


@pytest.mark.parametrize("text", ["colour = 1\n", "[sampler_params]\nwarmup = 3\n", "penalty = 3\n", "runs = \n"])
def test_bad_config_rejected(tmp_path, text):
    with pytest.raises(ConfigError):
        load_config(_toml(tmp_path, text))


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "nope.toml")


def test_flags_override_file():
    merged = merge_config(
        {"runs": 20, "sampler_params": {"num_reads": 50, "sweeps": 10}},
        {"runs": None, "seed": 3, "sampler_params": {"num_reads": 5, "sweeps": None}},
    )
    assert merged == {"runs": 20, "seed": 3, "sampler_params": {"num_reads": 5, "sweeps": 10}}


def test_merge_does_not_mutate_inputs():
    file_cfg = {"penalty": {"mtz": 1.0}}
    merge_config(file_cfg, {"penalty": {"capacity": 2.0}})
    assert file_cfg == {"penalty": {"mtz": 1.0}}


def test_endpoint_priority(monkeypatch):
    assert get_endpoint() is None
    monkeypatch.setenv(ENV_ENDPOINT, "http://env")
    assert get_endpoint() == "http://env"
    assert get_endpoint(config={"endpoint": "http://file"}) == "http://file"
    assert get_endpoint("http://flag", {"endpoint": "http://file"}) == "http://flag"


def test_log_level(tmp_path):
    assert setup_logging("debug", tmp_path / "logs" / "bench.log") == logging.DEBUG
    assert (tmp_path / "logs" / "bench.log").exists()
    with pytest.raises(ConfigError):
        setup_logging("chatty")

"""Command line behavior: exit codes, artifacts, and fail-closed configs."""

import argparse
import csv
import io
import json

import numpy as np
import pytest

from exactchain import RandomStream, sample_window
from exactchain.cli import ConfigError, RunConfig, main
import exactchain.cli as cli
from conftest import make_builtins


def run_cli(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


MARKOV_TOML = """
[kernel]
family = "markov"
table = [[0.9, 0.1], [0.2, 0.8]]

[run]
seed = 1
window = "-3..0"
"""


@pytest.fixture
def markov_toml(tmp_path):
    path = tmp_path / "chain.toml"
    path.write_text(MARKOV_TOML)
    return str(path)


# ---------------------------------------------------------------------------
# sample


def test_sample_stdout_matches_library(capsys):
    code, out, err = run_cli(
        capsys, "sample", "--kernel", "renewal", "--seed", "3", "--window=-5..0"
    )
    assert code == 0
    rows = list(csv.reader(io.StringIO(out)))
    assert rows[0] == ["index", "symbol", "depth"]
    assert len(rows) == 7

    res = sample_window(make_builtins()["renewal"], RandomStream(3), window=(-5, 0))
    for (idx, sym, dep), t in zip(rows[1:], range(-5, 1)):
        assert int(idx) == t
        assert int(sym) == res.symbols[t + 5]
        assert int(dep) == res.depths[t - res.start]

    sidecar = json.loads(err)
    assert sidecar["schema_version"] == 1
    assert sidecar["library"]["name"] == "exactchain"
    assert sidecar["horizon"] == res.record.horizon
    assert sidecar["coalescence"]["start"] == res.start
    assert sidecar["config"]["kernel"] == {"family": "renewal"}


def test_sample_writes_artifact_pair(tmp_path, capsys, markov_toml):
    out = tmp_path / "run.csv"
    code, _, _ = run_cli(capsys, "sample", "--config", markov_toml, "--out", str(out))
    assert code == 0
    assert out.exists()
    side = json.loads((tmp_path / "run.csv.json").read_text())
    co = side["coalescence"]
    assert co["anchor"] == 0
    assert co["block_starts"][-1] == co["start"]
    sizes = co["block_sizes"]
    assert sum(sizes) == co["anchor"] - co["start"] + 1
    assert len(sizes) == len(co["block_charges"])
    rows = list(csv.reader(out.open()))
    assert rows[0] == ["index", "symbol", "depth"] and len(rows) == 5


def test_sample_needs_seed(capsys):
    code, _, err = run_cli(capsys, "sample", "--kernel", "renewal")
    assert code == 2
    assert "seed" in err


# ---------------------------------------------------------------------------
# configuration


def test_config_file_with_flag_overlay(capsys, markov_toml):
    code, out1, _ = run_cli(capsys, "sample", "--config", markov_toml)
    assert code == 0
    code, out2, _ = run_cli(capsys, "sample", "--config", markov_toml, "--seed", "2")
    assert code == 0
    assert out1 != out2  # the flag really overrode the file

    res = sample_window(make_builtins()["markov"], RandomStream(2), window=(-3, 0))
    rows = list(csv.reader(io.StringIO(out2)))
    assert [int(r[1]) for r in rows[1:]] == list(res.symbols)


@pytest.mark.parametrize(
    "toml_text,needle",
    [
        ("[kernel]\nfamily = 'nosuch'\n", "family"),
        ("[kernel]\nfamily = 'renewal'\nbogus = 1\n", "bogus"),
        ("[kernel]\nfamily = 'renewal'\n\n[mystery]\nx = 1\n", "mystery"),
        ("[kernel]\nfamily = 'renewal'\n\n[engine]\nwhat = 3\n", "what"),
        ("[kernel]\nfamily = 'renewal'\neps = 0.7\n", "rejected"),
        ("[kernel]\nfamily = 'markov'\n", "table"),
        ("[run]\nseed = 1\n", "kernel"),
    ],
)
def test_bad_configs_fail_closed(tmp_path, capsys, toml_text, needle):
    cfg = tmp_path / "bad.toml"
    cfg.write_text(toml_text)
    code, _, err = run_cli(capsys, "sample", "--config", str(cfg), "--seed", "0")
    assert code == 2
    assert needle in err


def test_bad_flags(capsys):
    code, _, err = run_cli(
        capsys, "sample", "--kernel", "renewal", "--seed", "0", "--window", "5..0"
    )
    assert code == 2 and "window" in err
    code, _, err = run_cli(
        capsys, "sample", "--kernel", "renewal", "--seed", "0", "--window", "abc"
    )
    assert code == 2
    code, _, _ = run_cli(capsys, "tail", "--kernel", "renewal", "--replicas", "0")
    assert code == 2
    code, _, err = run_cli(capsys, "sample", "--seed", "0")
    assert code == 2 and "kernel" in err


def test_missing_config_file(capsys):
    code, _, err = run_cli(
        capsys, "sample", "--config", "/nonexistent.toml", "--seed", "0"
    )
    assert code == 2
    assert "cannot read" in err


def test_config_round_trip(markov_toml):
    cfg = RunConfig(
        kernel_family="renewal",
        kernel_params={"eps": 0.2, "q_power": 0.5},
        pairing={"skeleton": "lastone", "detector": "pattern", "patterns": [[1]]},
        seed=7,
        window=(-5, 0),
        replicas=200,
    )
    blob = json.loads(json.dumps(cfg.to_dict()))
    assert RunConfig.from_dict(blob) == cfg

    # the envelope echoes a config that parses back to the same run
    parsed = cli._config_from_args(
        argparse.Namespace(
            config=markov_toml,
            kernel=None,
            seed=None,
            seeds=None,
            window=None,
            replicas=None,
            max_depth=None,
            threads=None,
            out=None,
        )
    )
    assert RunConfig.from_dict(parsed.to_dict()) == parsed
    assert parsed.seed == 1 and parsed.window == (-3, 0)


# ---------------------------------------------------------------------------
# analysis commands


def test_tail_command(capsys):
    code, out, _ = run_cli(capsys, "tail", "--kernel", "renewal", "--seeds", "0..149")
    assert code == 0
    rep = json.loads(out)
    assert rep["replicas"] == 150
    surv = np.asarray(rep["survival"])
    assert surv[0] == 1.0 and np.all(np.diff(surv) <= 0)
    assert rep["config"]["run"]["seeds"] == [0, 149]

    code, _, err = run_cli(capsys, "tail", "--kernel", "renewal")
    assert code == 2 and "seed" in err


def test_regime_command(capsys, markov_toml):
    code, out, _ = run_cli(capsys, "regime", "--config", markov_toml, "--max-depth", "64")
    assert code == 0
    rep = json.loads(out)
    assert rep["regime"] == "iii"
    assert rep["horizon"] == 64
    assert len(rep["a"]) == 65
    assert rep["alpha_minus1"] == pytest.approx(0.3)
    assert rep["e_theta"] == 0.0 and rep["e_theta_exact"] is True


def test_regen_command(capsys):
    code, out, _ = run_cli(
        capsys, "regen", "--kernel", "renewal", "--seed", "5", "--window=-40..0"
    )
    assert code == 0
    rep = json.loads(out)
    assert rep["span"][1] == 0
    assert rep["right_censored"] is True
    assert rep["n_blocks"] == len(rep["block_lengths"])
    if rep["times"]:
        assert rep["n_blocks"] == len(rep["times"]) - 1
        assert sum(rep["block_lengths"]) == rep["times"][-1] - rep["times"][0]
        assert rep["mean_length"] is None or rep["mean_length"] > 0
    else:
        assert rep["n_blocks"] == 0 and rep["mean_length"] is None


def test_verify_command_and_failure_code(capsys, monkeypatch, markov_toml):
    code, out, _ = run_cli(capsys, "verify", "--config", markov_toml, "--replicas", "400")
    assert code == 0
    rep = json.loads(out)
    assert rep["passed"] is True
    assert {p["depth"] for p in rep["probes"]} == {1, 2, 3, 4, 5}

    class Failing:
        replicas, level, min_events = 400, 0.99, 200
        passed, inconclusive, probes = False, (), ()

    monkeypatch.setattr(cli, "verify_compatibility", lambda *a, **k: Failing())
    code, out, _ = run_cli(capsys, "verify", "--config", markov_toml, "--replicas", "400")
    assert code == 4
    assert json.loads(out)["passed"] is False


def test_depth_budget_exit_code(capsys):
    code, _, err = run_cli(
        capsys, "sample", "--kernel", "renewal", "--seed", "1", "--max-depth", "2"
    )
    assert code == 3
    assert "lookback" in err


def test_version(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0
    out = capsys.readouterr().out
    assert out.startswith("exactchain ")

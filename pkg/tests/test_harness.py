import csv
import io
import math

import numpy as np
import pytest

from bpve.harness import (
    ConfigError,
    ExperimentConfig,
    config_from_args,
    main,
    parse_checkpoints,
    run_classify,
    run_exact,
    run_simulate,
    run_theorem2,
    run_theorem3,
)


def read_rows(text):
    body = [line for line in text.splitlines() if not line.startswith("#")]
    return list(csv.DictReader(io.StringIO("\n".join(body))))


def preamble(text):
    return [line for line in text.splitlines() if line.startswith("#")]


def test_exact_critical_row():
    rows = read_rows(run_exact(ExperimentConfig("exact", n=10)))
    last = rows[-1]
    assert int(last["n"]) == 10
    assert float(last["D"]) == 11.0
    assert float(last["p_zero"]) == pytest.approx(1 / 11, rel=1e-15)


def test_exact_columns_drift_one():
    text = run_exact(ExperimentConfig("exact", env="near-critical", B=1.0, n=100, k=2))
    rows = read_rows(text)
    assert list(rows[0]) == ["n", "D", "log10_D", "p_zero", "expected_S", "extinction_tail", "p_in_Ck"]
    assert all(math.isfinite(float(v)) for r in rows for v in r.values())


def test_exact_expected_S_monotone():
    cfg = ExperimentConfig("exact", env="near-critical", B=0.5, n=10**6,
                           checkpoints=",".join(str(10**j) for j in range(1, 7)))
    es = [float(r["expected_S"]) for r in read_rows(run_exact(cfg))]
    assert len(es) == 6 and np.all(np.diff(es) > 0)


def test_preamble_records_config_and_version():
    text = run_exact(ExperimentConfig("exact", n=5))
    pre = preamble(text)
    assert pre[0].startswith("# bpve ")
    assert "# n = 5" in pre and "# env = critical" in pre
    assert not any("parallelism" in line for line in pre)


def test_simulate_byte_identical_across_parallelism():
    a = run_simulate(ExperimentConfig("simulate", n=200, replicas=300, seed=5, parallelism=1))
    b = run_simulate(ExperimentConfig("simulate", n=200, replicas=300, seed=5, parallelism=8))
    assert a == b
    rows = read_rows(a)
    assert list(rows[0]) == ["n", "mc_mean_S", "mc_stderr_S", "exact_expected_S", "zero_freq",
                             "exact_p_zero", "excluded_replicas"]


def test_classify_reports_verdicts():
    text = run_classify(ExperimentConfig("classify", env="near-critical", B=2.0, n=10**5))
    pre = preamble(text)
    assert "# classifier: finite" in pre
    assert "# diagnostic: converges-diagnostic" in pre
    sums = [float(r["partial_sum"]) for r in read_rows(text)]
    assert np.all(np.diff(sums) >= 0)


def test_theorem3_exact_ratio_stabilizes_critical():
    text = run_theorem3(ExperimentConfig("theorem3", env="near-critical", B=0.0, n=10**5, replicas=20))
    rows = {int(r["n"]): r for r in read_rows(text)}
    r4, r5 = float(rows[10**4]["exact_ratio_log"]), float(rows[10**5]["exact_ratio_log"])
    assert abs(r5 - r4) / r5 < 0.05


def test_theorem3_single_path_bound():
    text = run_theorem3(ExperimentConfig("theorem3", env="near-critical", B=0.5, n=10**6, replicas=2,
                                         checkpoints="100000,1000000"))
    last = read_rows(text)[-1]
    assert int(last["n"]) == 10**6
    assert float(last["path_ratio_eps0.5"]) < 1


def test_theorem3_refuses_finite_regime(capsys):
    with pytest.raises(ConfigError, match="B < 1"):
        run_theorem3(ExperimentConfig("theorem3", env="near-critical", B=1.0, n=100))
    assert main(["theorem3", "--env", "near-critical", "--B", "1", "--n", "100"]) == 2
    assert "classify" in capsys.readouterr().err


def test_theorem2_verdicts_drift_one():
    text = run_theorem2(ExperimentConfig("theorem2", env="near-critical", B=1.0, n=1000, replicas=50))
    row = read_rows(text)[0]
    assert row["classifier"] == "finite"
    assert row["diagnostic"] == "converges-diagnostic"


def test_theorem2_requires_near_critical():
    with pytest.raises(ConfigError, match="classify"):
        run_theorem2(ExperimentConfig("theorem2", env="critical", p=0.3, n=100))


def test_theorem2_horizons():
    text = run_theorem2(ExperimentConfig("theorem2", env="near-critical", B=0.5, n=20000, replicas=30))
    assert [int(r["n"]) for r in read_rows(text)] == [1000, 10000, 20000]


def test_config_file_and_flag_override(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# comment\nenv = near-critical\nB = 0.5\nn = 50\nreplicas = 7\n")
    c = config_from_args(["simulate", "--config", str(cfg), "--n", "80"])
    assert (c.env, c.B, c.n, c.replicas) == ("near-critical", 0.5, 80, 7)


def test_config_file_unknown_key(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("colour = blue\n")
    with pytest.raises(ConfigError, match="colour"):
        config_from_args(["exact", "--config", str(cfg)])


@pytest.mark.parametrize("argv,field", [
    (["exact", "--n", "0"], "n"),
    (["exact", "--env", "near-critical"], "B"),
    (["exact", "--env", "custom"], "env_file"),
    (["exact", "--p", "0.7"], "env"),
    (["exact", "--checkpoints", "5,abc"], "checkpoints"),
])
def test_usage_errors_name_field(argv, field, capsys):
    assert main(argv) == 2
    assert f"usage error: {field}" in capsys.readouterr().err


def test_unwritable_output(tmp_path, capsys):
    assert main(["exact", "--n", "5", "--out", str(tmp_path / "missing" / "x.csv")]) == 1
    assert "cannot write" in capsys.readouterr().err


def test_cli_writes_file_and_reruns_identically(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    args = ["simulate", "--env", "near-critical", "--B", "0.5", "--n", "100", "--replicas", "50", "--seed", "3"]
    assert main(args + ["--out", str(a)]) == 0
    assert main(args + ["--out", str(b), "--parallelism", "4"]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_custom_environment_file(tmp_path):
    env_file = tmp_path / "env.txt"
    env_file.write_text("# p_k\n0.5\n0.25\n0.5\n")
    out = tmp_path / "o.csv"
    assert main(["exact", "--env", "custom", "--env-file", str(env_file), "--n", "3",
                 "--checkpoints", "0,1,2,3", "--out", str(out)]) == 0
    rows = read_rows(out.read_text())
    assert [float(r["D"]) for r in rows] == pytest.approx([1, 2, 7, 8])


def test_custom_horizon_too_long(tmp_path, capsys):
    env_file = tmp_path / "env.txt"
    env_file.write_text("0.5\n0.5\n")
    assert main(["exact", "--env", "custom", "--env-file", str(env_file), "--n", "5"]) == 2


def test_parse_checkpoints():
    np.testing.assert_array_equal(parse_checkpoints("geometric:1", 1000), [1, 10, 100, 1000])
    with pytest.raises(ConfigError):
        parse_checkpoints("10,2000", 1000)

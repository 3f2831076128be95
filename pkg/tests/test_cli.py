import os

import pytest

from qmesh.cli import EXIT_CONFIG, EXIT_DRAIN_TIMEOUT, EXIT_OK, main
from qmesh.config import ConfigError, build_sim_config, load_config, parse_config_text

BASE_CONFIG = """\
[mesh]
width = 4
height = 4

[policy]
name = "qrasp"

[traffic]
pattern = "transpose"
rate = 0.05
packet_len = 4

[run]
warmup_cycles = 200
measure_cycles = 800
drain_timeout = 2500
seed = 7
"""


@pytest.fixture
def config_path(tmp_path):
    p = tmp_path / "exp.toml"
    p.write_text(BASE_CONFIG)
    return str(p)


class TestConfigParsing:
    def test_round_trip(self, config_path):
        cfg = load_config(config_path)
        assert cfg.policy == "qrasp"
        assert cfg.mesh.width == 4
        assert cfg.schedule.injection_rate == 0.05
        assert cfg.seed == 7

    def test_unknown_key_names_key_and_line(self):
        text = BASE_CONFIG.replace("[run]", "[policy2]")
        with pytest.raises(ConfigError, match="unknown section"):
            parse_config_text(text)
        bad = BASE_CONFIG + "\n[policy]\nalhpa = 0.5\n"
        with pytest.raises(ConfigError, match=r"line \d+: unknown key 'alhpa'"):
            parse_config_text(bad)

    def test_bad_value_type(self):
        bad = BASE_CONFIG.replace("rate = 0.05", "rate = fast")
        with pytest.raises(ConfigError, match="not a valid float"):
            parse_config_text(bad)

    def test_duplicate_key(self):
        bad = BASE_CONFIG + "\n[run]\nseed = 9\nseed = 10\n"
        with pytest.raises(ConfigError, match="duplicate key"):
            parse_config_text(bad)

    def test_schedule_string(self):
        data = parse_config_text(
            "[traffic]\nschedule = \"transpose:100,bit_reversal:200\"\nrate = 0.1\n"
        )
        cfg = build_sim_config(data)
        assert [p[0].value for p in cfg.schedule.phases] == ["transpose", "bit_reversal"]
        assert cfg.schedule.phases[1][1] == 200

    def test_pattern_and_schedule_conflict(self):
        data = parse_config_text(
            "[traffic]\npattern = \"uniform\"\nschedule = \"transpose:5\"\n"
        )
        with pytest.raises(ConfigError, match="not both"):
            build_sim_config(data)

    def test_unknown_policy_name(self):
        data = parse_config_text("[policy]\nname = \"rip\"\n")
        with pytest.raises(ConfigError, match="rip"):
            build_sim_config(data)

    def test_seed_override(self, config_path):
        assert load_config(config_path, seed_override=99).seed == 99


class TestCmdRun:
    def test_run_writes_csv(self, config_path, tmp_path, capsys):
        out = str(tmp_path / "run.csv")
        assert main(["run", "--config", config_path, "--out", out]) == EXIT_OK
        lines = open(out).read().splitlines()
        header = [l for l in lines if not l.startswith("#")][0]
        assert header.startswith("policy,pattern,rate,seed,delivered,injected,mean_latency")
        rows = [l for l in lines if not l.startswith("#")][1:]
        assert len(rows) == 1
        assert rows[0].startswith("qrasp,transpose,0.05,7,")

    def test_missing_config_is_config_error(self, tmp_path):
        assert main(["run", "--config", str(tmp_path / "nope.toml"), "--out",
                     str(tmp_path / "o.csv")]) == EXIT_CONFIG

    def test_unknown_key_exit_code(self, tmp_path):
        p = tmp_path / "bad.toml"
        p.write_text(BASE_CONFIG + "\n[policy]\nalhpa = 0.5\n")
        assert main(["run", "--config", str(p), "--out", str(tmp_path / "o.csv")]) == EXIT_CONFIG

    def test_drain_timeout_exit_code(self, tmp_path, capsys):
        p = tmp_path / "sat.toml"
        p.write_text(
            BASE_CONFIG.replace("rate = 0.05", "rate = 0.9")
            .replace("drain_timeout = 2500", "drain_timeout = 40")
            .replace("measure_cycles = 800", "measure_cycles = 600")
        )
        code = main(["run", "--config", str(p), "--out", str(tmp_path / "o.csv")])
        assert code == EXIT_DRAIN_TIMEOUT
        err = capsys.readouterr().err
        assert "in flight" in err and "packet" in err  # census printed

    def test_timeseries_output(self, config_path, tmp_path):
        out = str(tmp_path / "run.csv")
        ts = str(tmp_path / "ts.csv")
        assert main(["run", "--config", config_path, "--out", out, "--timeseries", ts]) == EXIT_OK
        lines = [l for l in open(ts).read().splitlines() if not l.startswith("#")]
        assert lines[0] == "window_start,window_end,pattern,delivered,mean_latency"
        assert len(lines) > 1

    def test_out_dir_env_default(self, config_path, tmp_path, monkeypatch):
        monkeypatch.setenv("QMESH_OUT_DIR", str(tmp_path))
        assert main(["run", "--config", config_path]) == EXIT_OK
        assert (tmp_path / "run.csv").exists()


class TestCmdSweep:
    def test_cardinality_and_byte_identical_rerun(self, config_path, tmp_path):
        out1, out2 = str(tmp_path / "s1.csv"), str(tmp_path / "s2.csv")
        args = ["sweep", "--config", config_path, "--rates", "0.02,0.05",
                "--policies", "xy,qrasp", "--seeds", "1,2", "--out"]
        assert main(args + [out1]) == EXIT_OK
        assert main(args + [out2]) == EXIT_OK
        b1, b2 = open(out1, "rb").read(), open(out2, "rb").read()
        assert b1 == b2
        rows = [l for l in b1.decode().splitlines() if not l.startswith("#")][1:]
        assert len(rows) == 8

    def test_row_order_stable(self, config_path, tmp_path):
        out = str(tmp_path / "s.csv")
        main(["sweep", "--config", config_path, "--rates", "0.05,0.02",
              "--policies", "xy", "--seeds", "2,1", "--out", out])
        rows = [l.split(",") for l in open(out).read().splitlines() if not l.startswith("#")][1:]
        keys = [(r[0], float(r[2]), int(r[3])) for r in rows]
        assert keys == [("xy", 0.05, 2), ("xy", 0.05, 1), ("xy", 0.02, 2), ("xy", 0.02, 1)]

    def test_unknown_policy_rejected(self, config_path, tmp_path):
        assert main(["sweep", "--config", config_path, "--policies", "ospf",
                     "--out", str(tmp_path / "s.csv")]) == EXIT_CONFIG


class TestVerifyTurns:
    def test_prints_proof_summary(self, capsys):
        assert main(["verify-turns"]) == EXIT_OK
        out = capsys.readouterr().out
        assert "acyclic" in out
        assert "cyclic as expected" in out


class TestDumpQtable:
    def test_dump(self, config_path, tmp_path):
        out = str(tmp_path / "q.csv")
        assert main(["dump-qtable", "--config", config_path, "--router", "6",
                     "--out", out]) == EXIT_OK
        lines = [l for l in open(out).read().splitlines() if not l.startswith("#")]
        assert lines[0] == "router,dest,q_h,q_v,route"
        assert len(lines) == 16  # 15 destinations for one router
        assert all(l.startswith("6,") for l in lines[1:])

    def test_tableless_policy_rejected(self, tmp_path):
        p = tmp_path / "xy.toml"
        p.write_text(BASE_CONFIG.replace('name = "qrasp"', 'name = "xy"'))
        assert main(["dump-qtable", "--config", str(p),
                     "--out", str(tmp_path / "q.csv")]) == EXIT_CONFIG

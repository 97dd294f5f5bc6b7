import os
import subprocess
import sys
from fractions import Fraction as F

import pytest

from amnet import stdlib
from amnet.sexpr import serialize_amn


def run_cli(*args, env_extra=None, cwd=None):
    env = dict(os.environ)
    env.pop("AMNET_SMT_SOLVER", None)
    env.pop("AMNET_TIMEOUT", None)
    if env_extra:
        env.update(env_extra)
    proc = subprocess.run(
        [sys.executable, "-m", "amnet.cli", *args],
        capture_output=True,
        text=True,
        env=env,
        cwd=cwd,
        timeout=300,
    )
    return proc.returncode, proc.stdout, proc.stderr


@pytest.fixture(scope="module")
def nets(tmp_path_factory):
    d = tmp_path_factory.mktemp("nets")
    paths = {}
    for name, ctor in [
        ("relu", stdlib.relu),
        ("abs", stdlib.abs1),
        ("sat", stdlib.sat),
    ]:
        p = d / f"{name}.amn"
        p.write_text(serialize_amn(ctor()))
        paths[name] = str(p)
    # constraint 3 - x <= 0
    from amnet.core import Builder

    b = Builder(1)
    ge3 = b.network(b.affine([[-1]], [3], b.input))
    p = d / "ge3.amn"
    p.write_text(serialize_amn(ge3))
    paths["ge3"] = str(p)
    paths["dir"] = str(d)
    return paths


class TestVerdictContract:
    def test_check_member_exit_zero(self, nets):
        code, out, _ = run_cli("check", nets["relu"], "--point", "5", "--output", "5")
        assert code == 0
        assert out.splitlines()[0] == "VERDICT: member"

    def test_check_nonmember_exit_one(self, nets):
        code, out, _ = run_cli("check", nets["relu"], "--point", "5", "--output", "4")
        assert code == 1
        assert out.splitlines()[0] == "VERDICT: non-member"

    def test_machine_parseable_lines(self, nets):
        code, out, _ = run_cli("eval", nets["sat"], "--input", "0.25")
        assert code == 0
        lines = out.splitlines()
        assert lines[0] == "VERDICT: ok"
        kv = dict(ln.split("=", 1) for ln in lines[1:])
        assert kv["output"] == "1/4"

    def test_usage_error_exit_above_two(self, nets):
        code, _, err = run_cli("check", nets["relu"])
        assert code == 64
        assert "error" in err

    def test_data_error_exit(self, nets):
        code, _, err = run_cli("eval", os.path.join(nets["dir"], "missing.amn"),
                               "--input", "1")
        assert code == 65


class TestEncode:
    def test_encode_smt_stdout(self, nets):
        code, out, _ = run_cli("encode", "smt", nets["relu"])
        assert code == 0
        assert "(set-logic QF_LRA)" in out
        assert out.count("declare-fun") == 4

    def test_encode_mip_file(self, nets, tmp_path):
        out_path = str(tmp_path / "relu.lp")
        code, out, _ = run_cli(
            "encode", "mip", nets["relu"], "--big-m", "100", "--out", out_path
        )
        assert code == 0
        text = open(out_path).read()
        assert "Binary" in text and "End" in text

    def test_encode_mip_auto_big_m(self, nets):
        code, out, _ = run_cli(
            "encode", "mip", nets["relu"], "--big-m", "auto", "--box=-10,10"
        )
        assert code == 0
        assert "20 b" in out  # M = 20 appears in guard rows


class TestMinimize:
    def test_abs_above_three(self, nets):
        code, out, _ = run_cli(
            "minimize",
            "--objective", nets["abs"],
            "--constraint", nets["ge3"],
            "--bracket", "0,8",
            "--eps", "0.01",
        )
        assert code == 0
        kv = dict(ln.split("=", 1) for ln in out.splitlines()[1:])
        assert F(kv["lo"]) < 3 <= F(kv["hi"])
        assert int(kv["bisection_queries"]) <= 10

    def test_bracket_error(self, nets):
        code, out, _ = run_cli(
            "minimize",
            "--objective", nets["abs"],
            "--constraint", nets["ge3"],
            "--bracket", "0,2",
            "--eps", "0.01",
        )
        assert code == 1
        assert out.startswith("VERDICT: bracket-error")

    def test_fuel_problem_via_cli(self, tmp_path):
        from test_acceptance import fuel_bruteforce, fuel_constraints, fuel_objective

        obj_path = tmp_path / "obj.amn"
        obj_path.write_text(serialize_amn(fuel_objective()))
        args = ["minimize", "--objective", str(obj_path),
                "--bracket", "0,8/15", "--eps", "0.001"]
        for i, net in enumerate(fuel_constraints()):
            p = tmp_path / f"c{i}.amn"
            p.write_text(serialize_amn(net))
            args += ["--constraint", str(p)]
        code, out, _ = run_cli(*args)
        assert code == 0
        kv = dict(ln.split("=", 1) for ln in out.splitlines()[1:])
        assert abs(F(kv["value"]) - fuel_bruteforce()) <= F(1, 1000)


class TestTrainCli:
    def test_consistency_params(self, nets, tmp_path):
        from amnet.core import Builder

        b = Builder(1)
        alpha = b.affine([[1]], [0], b.input)
        beta = b.affine([[2]], [1], b.input)
        gamma = b.affine([[1]], [-1], b.input)
        net_path = tmp_path / "perceptron.amn"
        net_path.write_text(serialize_amn(b.network(b.mux(alpha, beta, gamma))))
        data = tmp_path / "d.csv"
        data.write_text("x,y\n0,0\n1,1\n")
        code, out, _ = run_cli(
            "train", "consistency", "--net", str(net_path), "--data", str(data),
            "--eps", "0",
        )
        assert code == 0
        assert out.startswith("VERDICT: params")

    def test_gd_trains(self, nets, tmp_path):
        data = tmp_path / "lin.csv"
        rows = ["x,y"] + [f"{k/4},{k/2}" for k in range(-8, 9)]
        data.write_text("\n".join(rows) + "\n")
        from amnet.core import Builder

        b = Builder(1)
        net_path = tmp_path / "aff.amn"
        net_path.write_text(serialize_amn(b.network(b.affine([["0.1"]], [0], b.input))))
        code, out, _ = run_cli(
            "train", "gd", "--net", str(net_path), "--data", str(data),
            "--iters", "400", "--lr", "0.2",
        )
        assert code == 0
        kv = dict(ln.split("=", 1) for ln in out.splitlines()[1:])
        assert float(kv["loss"]) < 1e-6


class TestLyapunovCli:
    def test_stable_and_recheck(self, tmp_path):
        from conftest import STABLE_A
        from amnet.core import Builder

        b = Builder(2)
        dyn_path = tmp_path / "dyn.amn"
        dyn_path.write_text(
            serialize_amn(b.network(b.affine(STABLE_A, [0, 0], b.input)))
        )
        log_path = str(tmp_path / "cert.log")
        code, out, err = run_cli(
            "lyapunov", "--dynamics", str(dyn_path), "--variant", "roa",
            "--box=-10,10;-10,10", "--pieces", "6", "--max-iters", "50",
            "--x0", "10,10", "--log", log_path,
        )
        assert code == 0, err
        assert out.startswith("VERDICT: stable")
        assert os.path.exists(log_path)
        # heartbeat lines went to stderr
        assert "iter=" in err
        code, out, _ = run_cli(
            "lyapunov", "--dynamics", str(dyn_path), "--variant", "roa",
            "--box=-10,10;-10,10", "--recheck", log_path,
        )
        assert code == 0
        assert "source=recheck" in out


class TestContractiveCli:
    def test_verified_and_scaled_refuted(self, tmp_path):
        from test_contractive import A, B, FDBK, G_ROWS, W

        paths = {}
        for name, rows in [
            ("A", A), ("G", [[str(v) for v in r] for r in G_ROWS]),
        ]:
            p = tmp_path / f"{name}.csv"
            p.write_text("\n".join(",".join(str(c) for c in row) for row in rows) + "\n")
            paths[name] = str(p)
        for name, vec in [("B", B), ("F", FDBK), ("w", [str(v) for v in W])]:
            p = tmp_path / f"{name}.csv"
            p.write_text("\n".join(str(v) for v in vec) + "\n")
            paths[name] = str(p)
        base = [
            "contractive",
            "--A", paths["A"], "--B", paths["B"], "--F", paths["F"],
            "--G", paths["G"], "--w", paths["w"],
            "--lambda", "0.999", "--umin", "7", "--umax", "7",
        ]
        code, out, _ = run_cli(*base)
        assert code == 0
        assert out.startswith("VERDICT: verified")
        code, out, _ = run_cli(*base, "--scale-w", "1.01")
        assert code == 1
        assert out.startswith("VERDICT: refuted")
        kv = dict(ln.split("=", 1) for ln in out.splitlines()[1:])
        assert "x" in kv and "epsilon" in kv


class TestConfigPrecedence:
    def test_env_timeout_used(self, nets, tmp_path):
        # a mock solver that sleeps past the env timeout
        slow = tmp_path / "slow.py"
        slow.write_text("import time\ntime.sleep(20)\nprint('sat')\n")
        code, out, _ = run_cli(
            "check", nets["relu"], "--point", "1", "--output", "1",
            "--backend", "smt",
            env_extra={
                "AMNET_SMT_SOLVER": f"{sys.executable} {slow}",
                "AMNET_TIMEOUT": "0.5",
            },
        )
        assert code == 2
        assert out.startswith("VERDICT: unknown")

    def test_cli_flag_beats_config_file(self, nets, tmp_path):
        cfg = tmp_path / "amnet.cfg"
        bad = tmp_path / "bad.py"
        bad.write_text("print('unsat')\n")
        good = tmp_path / "good.py"
        good.write_text(
            "print('sat')\n"
            "print('((x 1.0) (y 1.0) (u 1.0) (v2 (- 1.0)))')\n"
        )
        cfg.write_text(f"solver={sys.executable} {bad}\n")
        code, out, _ = run_cli(
            "--config", str(cfg),
            "check", nets["relu"], "--point", "1", "--output", "1",
            "--backend", "smt", "--solver", f"{sys.executable} {good}",
        )
        assert code == 0
        code, out, _ = run_cli(
            "--config", str(cfg),
            "check", nets["relu"], "--point", "1", "--output", "1",
            "--backend", "smt",
        )
        assert code == 1  # config-file solver answered unsat

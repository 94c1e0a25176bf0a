import json
import subprocess
import sys

import numpy as np
import pytest

from qlienard import cli
from qlienard.figures import PANELS


def run(args, tmp_path=None):
    proc = subprocess.run(
        [sys.executable, "-m", "qlienard", *args],
        capture_output=True,
        text=True,
        cwd=tmp_path,
        env={"LC_ALL": "de_DE.UTF-8", "PATH": "/usr/bin:/bin", **_passthrough()},
    )
    return proc.returncode, proc.stdout, proc.stderr


def _passthrough():
    import os

    return {k: v for k, v in os.environ.items() if k in ("PYTHONPATH", "HOME", "QLIENARD_NO_JIT", "NUMBA_CACHE_DIR")}


def rows(text):
    return [ln for ln in text.splitlines() if ln and not ln.startswith("#")]


class TestFixedPoints:
    def test_centre_and_saddle(self):
        code, out, _ = run(["fixed-points", "--lam", "0.5", "--alpha", "1", "--beta", "0.34"])
        assert code == 0
        lines = rows(out)
        assert lines[0].startswith("branch,x_star,a21,eig_numeric,eig_closed_form,linear_class,closed_form_agrees")
        body = [ln.split(",") for ln in lines[1:]]
        assert [(r[0], r[5], r[6]) for r in body] == [("minus", "saddle", "true"), ("plus", "center", "true")]
        assert float(body[0][1]) == pytest.approx(-6.20467, abs=1e-4)
        assert float(body[1][1]) == pytest.approx(0.32232, abs=1e-4)

    def test_negative_lambda_two_centres(self):
        code, out, _ = run(["fixed-points", "--lam", "-0.5", "--alpha", "1", "--beta", "0.34"])
        assert code == 0
        assert [r.split(",")[5] for r in rows(out)[1:]] == ["center", "center"]

    def test_beta_zero(self):
        code, out, _ = run(["fixed-points", "--beta", "0"])
        body = rows(out)[1:]
        assert code == 0 and len(body) == 1 and body[0].split(",")[1] == "0.0"

    def test_discriminant_error(self):
        code, _, err = run(["fixed-points", "--lam", "-10", "--alpha", "1", "--beta", "0.34"])
        assert code == 2
        assert "discriminant" in err

    def test_quesne_ii_flags_disagreement(self):
        code, out, _ = run(["fixed-points", "--kind", "QuesneII", "--lam", "-0.5", "--alpha", "1", "--beta", "0.34"])
        body = {r.split(",")[0]: r.split(",") for r in rows(out)[1:]}
        assert code == 0
        assert body["plus"][6] == "true" and body["minus"][6] == "false"
        assert body["minus"][8] == "false"


class TestOutputs:
    def test_simulate_csv(self, tmp_path):
        out = tmp_path / "traj.csv"
        code, _, _ = run(["simulate", "--f", "5", "--t-end", "2", "--output", str(out)])
        text = out.read_text()
        assert code == 0
        assert text.splitlines()[0] == "t,x,y,E"
        assert text.endswith("# termination: completed\n")
        data = np.loadtxt(out, delimiter=",", skiprows=1, comments="#")
        assert data.shape[1] == 4 and data[-1, 0] == 2.0
        assert "," not in text.splitlines()[1].split(",")[0]  # dot decimals despite the locale

    def test_simulate_domain_violation(self):
        code, out, err = run(["simulate", "--lam", "-0.5", "--alpha", "1", "--beta", "1", "--x0", "0", "--y0", "0"])
        assert code == 2
        assert out.rstrip().endswith("# termination: domain_violation")
        assert "domain_violation" in err

    def test_poincare_header(self):
        code, out, _ = run(["poincare", "--f", "5", "--n-skip", "50", "--n-keep", "250", "--n-renorm", "300"])
        lines = out.splitlines()
        assert code == 0
        assert lines[0] == "# n_skip: 50" and lines[1] == "# n_keep: 250"
        assert lines[2].startswith("# regime: ")
        assert "k,x,y" in lines
        assert len(rows(out)) == 251

    def test_bifurcation_deterministic(self, tmp_path):
        args = ["bifurcation", "--f", "5", "--gamma-n", "6", "--n-skip", "30", "--n-keep", "10"]
        a = run(args + ["--workers", "1"])
        b = run(args + ["--workers", "3"])
        assert a[0] == b[0] == 0
        assert a[1] == b[1]
        assert a[1].splitlines()[0] == "gamma,y"

    def test_lyapunov(self, tmp_path):
        out = tmp_path / "l.csv"
        code, stdout, _ = run(["lyapunov", "--f", "5", "--n-transient", "500", "--output", str(out)])
        assert code == 0
        assert "lambda_max = " in stdout and "+/-" in stdout
        lines = out.read_text().splitlines()
        assert lines[0] == "i,running_average" and len(lines) == 2001

    def test_verify_equilibrium(self):
        code, out, _ = run(["verify-equilibrium", "--lam", "0.5", "--alpha", "1", "--beta", "0.34", "--horizon", "60"])
        body = [r.split(",") for r in rows(out)[1:]]
        assert code == 0
        assert [(r[1], r[2].split("(")[0], r[4]) for r in body] == [
            ("saddle", "escaped", "false"),
            ("center", "confined", "true"),
        ]

    def test_verify_needs_conservative(self):
        assert run(["verify-equilibrium", "--gamma", "0.1"])[0] == 2


class TestConfig:
    def test_file_and_flag_precedence(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("# comment\nkind = QuesneI\nlam = 0.5\nalpha = 1\nbeta = 0.34\n")
        code, out, _ = run(["fixed-points", "--config", str(cfg)])
        assert code == 0 and len(rows(out)) == 3
        code, out, _ = run(["fixed-points", "--config", str(cfg), "--beta", "0"])
        assert code == 0 and len(rows(out)) == 2

    def test_unknown_key(self, tmp_path):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("lam = 0.5\nbogus = 1\n")
        code, _, err = run(["fixed-points", "--config", str(cfg)])
        assert code == 1 and "bogus" in err

    def test_bad_value(self, tmp_path):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("lam = half\n")
        assert run(["fixed-points", "--config", str(cfg)])[0] == 1

    def test_usage_errors(self):
        assert run([])[0] == 1
        assert run(["fixed-points", "--nope"])[0] == 1
        assert run(["fixed-points", "--lam", "x"])[0] == 1

    @pytest.mark.parametrize(
        "flags",
        [["--alpha", "0"], ["--lam", "0"], ["--omega", "-1"], ["--gamma", "-1"], ["--kind", "duffing"], ["--n-keep", "0"]],
    )
    def test_constraint_errors(self, flags):
        code, _, err = run(["simulate", *flags])
        assert code == 2 and err.startswith("constraint violation")

    def test_build_config_in_process(self):
        cfg = cli.build_config({"lam": 0.25}, {"lam": None, "beta": 0.2})
        assert cfg.lam == 0.25 and cfg.beta == 0.2
        with pytest.raises(cli.UsageError):
            cli.build_config({"nope": 1}, {})


class TestReproduce:
    def test_panel_ids(self):
        expected = {"fg1a", "fg1b", "fg3a", "fg3b", "fg7"}
        expected |= {f"fg4{c}" for c in "abcd"} | {f"fg5{c}" for c in "abcdef"} | {f"fg6{c}" for c in "abcdef"}
        assert expected <= set(PANELS)

    def test_fg5b_single_point(self, tmp_path):
        code, _, _ = run(["reproduce", "fg5b", "--out-dir", str(tmp_path)])
        assert code == 0
        data = np.loadtxt(tmp_path / "fg5b.csv", delimiter=",", skiprows=1)
        assert np.ptp(data[:, 1]) < 1e-3 and np.ptp(data[:, 2]) < 1e-3
        man = json.loads((tmp_path / "manifest.json").read_text())
        assert man["fg5b"]["regime"] == "periodic(1)"
        assert man["fg5b"]["ic_rule"] == "commensurate"

    def test_fg1a_orbits(self, tmp_path):
        code, _, _ = run(["reproduce", "fg1a", "--out-dir", str(tmp_path)])
        assert code == 0
        assert (tmp_path / "fg1a.csv").read_text().splitlines()[0] == "orbit,t,x,y,E"
        data = np.loadtxt(tmp_path / "fg1a.csv", delimiter=",", skiprows=1)
        man = json.loads((tmp_path / "manifest.json").read_text())["fg1a"]
        ics = man["ics"]
        # orbits started near the centre stay on closed curves around 0.322
        for i, (x0, _) in enumerate(ics):
            orb = data[data[:, 0] == i]
            if abs(x0 - 0.3223) < 0.2:
                assert orb[:, 2].min() < 0.3223 < orb[:, 2].max()
                assert np.ptp(orb[:, 4]) < 1e-7
        # orbits started next to the saddle leave its neighbourhood
        far = [np.abs(data[data[:, 0] == i][:, 2] + 6.2047).max() for i, (x0, _) in enumerate(ics) if x0 < -5]
        assert far and max(far) > 2.0

    def test_manifest_rerun_bit_identical(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        assert run(["reproduce", "fg6d", "--out-dir", str(a)])[0] == 0
        assert run(["reproduce", "fg6d", "--out-dir", str(b)])[0] == 0
        assert (a / "fg6d.csv").read_bytes() == (b / "fg6d.csv").read_bytes()
        man = json.loads((a / "manifest.json").read_text())["fg6d"]
        for key in ("params", "solver", "ics", "n_skip", "n_keep", "kind"):
            assert key in man

    def test_unknown_panel(self, tmp_path):
        assert run(["reproduce", "fg9", "--out-dir", str(tmp_path)])[0] == 1

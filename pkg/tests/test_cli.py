"""Tests for the msdiffeo command line."""

import filecmp
import os

import numpy as np
import pytest

from msdiffeo.commands import (
    EXIT_CONFIG, EXIT_FAIL, EXIT_OK, build_parser, build_problem, get_commands, load_config, main
)
from msdiffeo.data import read_control, read_csv, read_field
from msdiffeo.registration import Control, energy, landmark_velocity_paths, optimize

VERIFY_CFG = "verify.checks = A1, A2, A9\nverify.oracle_tuples = 5\n"


def _write(path, text):
    path.write_text(text, encoding="utf-8")
    return str(path)


class TestCommands:
    """Tests for the command list and parser."""

    def test_command_names(self):
        """Four commands are offered."""
        assert sorted(get_commands()) == ["decompose", "oracle", "register", "verify"]

    def test_parser_options(self):
        """Every command takes --config, --out and --seed."""
        args = build_parser().parse_args(["verify", "--seed", "4", "--out", "x"])
        assert (args.command, args.seed, args.out, args.config) == ("verify", 4, "x", None)

    def test_command_required(self):
        """Running without a command is a usage error."""
        with pytest.raises(SystemExit):
            build_parser().parse_args([])


class TestVerifyCommand:
    """Tests for msdiffeo verify and oracle."""

    def test_writes_report(self, tmp_path):
        """A passing run exits 0 and writes the report with its run header."""
        cfg = _write(tmp_path / "v.cfg", VERIFY_CFG)
        out = str(tmp_path / "out")
        assert main(["verify", "--config", cfg, "--out", out, "--seed", "3"]) == EXIT_OK
        path = os.path.join(out, "verify_report.csv")
        with open(path, encoding="utf-8") as f:
            first = f.readline()
        assert first.startswith("# msdiffeo v") and "seed=3 cmd=verify" in first
        assert [r["check"] for r in read_csv(path)] == ["A1", "A2", "A9"]

    def test_failed_check_exit_code(self, tmp_path):
        """A failing check exits 3."""
        cfg = _write(tmp_path / "v.cfg", "verify.checks = A1\nverify.threshold_scale = 1e-300\n")
        assert main(["verify", "--config", cfg, "--out", str(tmp_path / "out")]) == EXIT_FAIL

    def test_oracle_report(self, tmp_path):
        """The oracle writes one row per length and law."""
        cfg = _write(tmp_path / "o.cfg", "verify.oracle_tuples = 3\n")
        out = str(tmp_path / "out")
        assert main(["oracle", "--config", cfg, "--out", out]) == EXIT_OK
        rows = read_csv(os.path.join(out, "oracle_report.csv"))
        assert rows and all(r["status"] == "PASS" for r in rows)


class TestConfigErrors:
    """Configuration problems exit 1."""

    def test_register_needs_config(self, tmp_path):
        """register cannot run on defaults."""
        assert main(["register", "--out", str(tmp_path)]) == EXIT_CONFIG

    def test_missing_config_file(self, tmp_path):
        """A config path that does not exist is reported."""
        assert main(["verify", "--config", str(tmp_path / "absent.cfg")]) == EXIT_CONFIG

    def test_bad_config(self, tmp_path):
        """An unknown key stops the run."""
        cfg = _write(tmp_path / "bad.cfg", "colour = red\n")
        assert main(["verify", "--config", cfg]) == EXIT_CONFIG

    def test_missing_shapes(self, tmp_path):
        """register without source and target is a configuration error."""
        cfg = _write(tmp_path / "r.cfg", f"out = {tmp_path / 'out'}\n")
        assert main(["register", "--config", cfg]) == EXIT_CONFIG


class TestVerifyDeterminism:
    """Repeated verify runs from one seed."""

    def test_reports_byte_identical(self, tmp_path):
        """Two runs into different directories write the same bytes."""
        cfg = _write(tmp_path / "v.cfg", "verify.checks = A1, A2, A3, A10\nverify.oracle_tuples = 5\n")
        paths = []
        for name in ("first", "second"):
            out = str(tmp_path / name)
            assert main(["verify", "--config", cfg, "--out", out, "--seed", "11"]) == EXIT_OK
            paths.append(os.path.join(out, "verify_report.csv"))
        assert filecmp.cmp(paths[0], paths[1], shallow=False)
        assert read_csv(paths[0])[-1]["check"] == "A10"


@pytest.mark.slow
class TestRegisterDecompose:
    """End-to-end runs on four landmarks."""

    SOURCE = "id,x,y\n0,0.3,0.3\n1,0.7,0.3\n2,0.7,0.7\n3,0.3,0.7\n"
    TARGET = "id,x,y\n0,0.33,0.28\n1,0.72,0.33\n2,0.68,0.72\n3,0.28,0.68\n"

    def _config(self, tmp_path, extra):
        _write(tmp_path / "src.csv", self.SOURCE)
        _write(tmp_path / "tgt.csv", self.TARGET)
        text = (
            f"source = {tmp_path / 'src.csv'}\ntarget = {tmp_path / 'tgt.csv'}\nout = {tmp_path / 'run'}\n"
            "data.sigma2 = 0.01\ngrid.nx = 24\ngrid.ny = 24\ngrid.h = 0.043478260869565216\n"
            "time.steps = 4\n" + extra
        )
        return _write(tmp_path / "run.cfg", text), str(tmp_path / "run")

    @pytest.fixture
    def run_config(self, tmp_path):
        return self._config(tmp_path, "kernel.component = 0.25, 1.0\nkernel.component = 0.08, 1.0\n"
                                      "optimizer.max_iters = 10\n")

    def test_register_then_decompose(self, run_config):
        """register writes its artifacts and decompose writes every per-scale map."""
        cfg, out = run_config
        assert main(["register", "--config", cfg]) == EXIT_OK
        for name in ("energy_log.csv", "control_final.csv", "phi_final.csv", "landmarks_final.csv",
                     "equivalence_report.csv", "config_used.cfg"):
            assert os.path.isfile(os.path.join(out, name)), name
        report = read_csv(os.path.join(out, "equivalence_report.csv"))
        assert report[0]["formulation"] == "sum_of_kernels"

        assert main(["decompose", "--config", cfg]) == EXIT_OK
        for k in (1, 2):
            for m in range(5):
                assert os.path.isfile(os.path.join(out, f"psi_scale{k}_t{m}.csv")), (k, m)
        for name in ("decomposition_report.csv", "vel_t0_s1.csv", "vel_t4_s2.csv"):
            assert os.path.isfile(os.path.join(out, name)), name

    def test_coarse_last_round_trip(self, tmp_path):
        """Velocities written by decompose pair each registered momentum with its own kernel."""
        cfg, out = self._config(tmp_path, "formulation = sdp_coarse_last\ndecompose.ordering = coarse_last\n"
                                          "kernel.component = 0.25, 1.0\nkernel.component = 0.08, 1.0\n"
                                          "optimizer.max_iters = 3\n")
        assert main(["register", "--config", cfg]) == EXIT_OK
        assert main(["decompose", "--config", cfg]) == EXIT_OK

        run = load_config(cfg)
        problem = build_problem(run)
        registered = optimize(problem, run.optimizer).control
        stored = read_control(os.path.join(out, "control_final.csv"), problem.source.ids)
        assert np.array_equal(stored, registered.momenta[::-1])

        grid = problem.velocity_grid
        for k, path in enumerate(landmark_velocity_paths(problem, registered), 1):
            written = read_field(os.path.join(out, f"vel_t0_s{k}.csv"), grid)
            assert np.max(np.abs(written.values - path.velocities[0].values)) < 1e-10, k

    def test_energy_log_matches_semidirect_energy(self, tmp_path):
        """The last logged total is the semidirect energy of the written control."""
        cfg, out = self._config(tmp_path, "formulation = sdp_coarse_first\n"
                                          "kernel.component = 0.25, 1.0\nkernel.component = 0.08, 1.0\n"
                                          "optimizer.max_iters = 3\n")
        assert main(["register", "--config", cfg]) == EXIT_OK
        problem = build_problem(load_config(cfg))
        control = Control.from_coarse_to_fine(
            problem, read_control(os.path.join(out, "control_final.csv"), problem.source.ids))
        log = read_csv(os.path.join(out, "energy_log.csv"))
        assert float(log[-1]["total"]) == pytest.approx(energy(problem, control).total, rel=1e-12)

    def test_continuum_decompose(self, tmp_path):
        """A continuum kernel decomposes into the flow in scale."""
        cfg, out = self._config(tmp_path, "formulation = integral_kernel\nkernel.mode = continuum\nkernel.nodes = 4\n"
                                          "time.scale_nodes = 3\ntime.bins = 2\noptimizer.max_iters = 5\n")
        assert main(["register", "--config", cfg]) == EXIT_OK
        assert main(["decompose", "--config", cfg]) == EXIT_OK
        assert os.path.isfile(os.path.join(out, "eta_s0.csv"))
        assert os.path.isfile(os.path.join(out, "decomposition_report.csv"))

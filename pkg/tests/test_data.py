"""Tests for CSV, image and run-directory input/output."""

import os

import numpy as np
import pytest

from msdiffeo.data import (
    read_control, read_csv, read_diffeomorphism, read_field, read_landmarks, run_header, write_control, write_csv,
    write_diffeomorphism, write_field, write_flowpath, write_landmarks
)
from msdiffeo.exceptions import ConfigError
from msdiffeo.fields import Grid2, LandmarkSet, ScalarField, VectorField
from msdiffeo.file import check_inputs, prepare_output_dir, write_text_atomic
from msdiffeo.flows import Diffeomorphism, FlowPath
from msdiffeo.image import load_image, load_pgm, save_pgm


class TestCsv:
    """Tests for the CSV helpers."""

    def test_header_line_and_full_precision(self, tmp_path):
        """Rows follow the run header and floats keep every digit."""
        path = str(tmp_path / "report.csv")
        assert write_csv([{"check": "A1", "measured": 0.1 + 0.2}], path, header=run_header(3, "verify"))
        with open(path, encoding="utf-8") as f:
            lines = f.read().splitlines()
        assert lines[0].startswith("# msdiffeo v") and lines[0].endswith("seed=3 cmd=verify")
        assert lines[2] == "A1,0.30000000000000004"
        assert read_csv(path) == [{"check": "A1", "measured": "0.30000000000000004"}]

    def test_nothing_to_write(self, tmp_path):
        """Empty data without field names is refused."""
        assert not write_csv([], str(tmp_path / "empty.csv"))

    def test_missing_file_reads_empty(self, tmp_path):
        """A missing file yields no rows."""
        assert read_csv(str(tmp_path / "absent.csv")) == []


class TestShapes:
    """Tests for landmark, field, map and control files."""

    def test_landmarks_sorted_by_id(self, tmp_path):
        """Landmark rows are ordered by id on reading."""
        path = tmp_path / "lm.csv"
        path.write_text("# source\nid,x,y\n2,0.5,0.5\n0,0.1,0.2\n", encoding="utf-8")
        q = read_landmarks(str(path))
        assert q.ids == (0, 2)
        assert np.allclose(q.points[0], [0.1, 0.2])

    def test_landmarks_missing_column(self, tmp_path):
        """A file without coordinates is a configuration error."""
        path = tmp_path / "lm.csv"
        path.write_text("id,x\n0,0.1\n", encoding="utf-8")
        with pytest.raises(ConfigError):
            read_landmarks(str(path))

    def test_landmarks_written_with_ids(self, tmp_path):
        """Written landmarks read back with their ids."""
        q = LandmarkSet([[0.25, 0.5], [0.75, 0.125]], ids=(7, 3))
        path = str(tmp_path / "out.csv")
        assert write_landmarks(q, path)
        back = read_landmarks(path)
        assert back.ids == (3, 7)
        assert np.array_equal(back.points, q.points[::-1])

    def test_field_and_map_files(self, tmp_path):
        """Fields and maps are stored node by node, inverse included."""
        g = Grid2.unit(5)
        v = VectorField.from_function(g, lambda X, Y: (X * Y, X - Y))
        write_field(v, str(tmp_path / "v.csv"))
        assert np.array_equal(read_field(str(tmp_path / "v.csv"), g).values, v.values)

        phi = Diffeomorphism.translation(g, [0.1, -0.2])
        write_diffeomorphism(phi, str(tmp_path / "phi.csv"))
        back = read_diffeomorphism(str(tmp_path / "phi.csv"), g)
        assert np.array_equal(back.map_values, phi.map_values)
        assert np.array_equal(back.inverse_values, phi.inverse_values)

    def test_flowpath_files(self, tmp_path):
        """One file per time node, tagged with the scale."""
        path = FlowPath.zeros(Grid2.unit(4), 2)
        assert write_flowpath(path, str(tmp_path), scale=2)
        assert sorted(os.listdir(tmp_path)) == ["vel_t0_s2.csv", "vel_t1_s2.csv", "vel_t2_s2.csv"]

    def test_control_file(self, tmp_path):
        """Controls keep their scale, interval and landmark layout."""
        momenta = np.arange(2 * 3 * 2 * 2, dtype=float).reshape(2, 3, 2, 2)
        path = str(tmp_path / "control.csv")
        write_control(momenta, (5, 9), path)
        assert np.array_equal(read_control(path, (5, 9)), momenta)

    def test_control_with_unknown_id(self, tmp_path):
        """A control for other landmarks is rejected."""
        path = str(tmp_path / "control.csv")
        write_control(np.zeros((1, 1, 1, 2)), (4,), path)
        with pytest.raises(ConfigError):
            read_control(path, (0,))


class TestImages:
    """Tests for grey-level image input/output."""

    def test_pgm_round_trip(self, tmp_path):
        """8-bit images survive a save and load."""
        g = Grid2(6, 4, 0.2)
        img = ScalarField(g, np.round(np.linspace(0, 1, 24).reshape(6, 4) * 255) / 255)
        path = str(tmp_path / "img.pgm")
        assert save_pgm(img, path)
        back = load_pgm(path)
        assert back.grid.shape == (6, 4)
        assert np.allclose(back.values, img.values)

    def test_value_csv(self, tmp_path):
        """CSV images use i, j, value columns."""
        path = tmp_path / "img.csv"
        path.write_text("i,j,value\n0,0,0.5\n1,0,1.0\n0,1,0.0\n1,1,0.25\n", encoding="utf-8")
        img = load_image(str(path))
        assert img.values[1, 1] == 0.25

    def test_unknown_extension(self, tmp_path):
        """Only .pgm and .csv images are read."""
        with pytest.raises(ConfigError):
            load_image(str(tmp_path / "img.png"))

    def test_broken_pgm(self, tmp_path):
        """An undecodable file is a configuration error."""
        path = tmp_path / "bad.pgm"
        path.write_bytes(b"not an image")
        with pytest.raises(ConfigError):
            load_pgm(str(path))


class TestRunDirectory:
    """Tests for output directories and atomic writes."""

    def test_created_and_reused(self, tmp_path):
        """The directory is created once and reused afterwards."""
        target = str(tmp_path / "runs" / "a")
        assert prepare_output_dir(target) == target
        assert prepare_output_dir(target) == target
        assert [n for n in os.listdir(tmp_path / "runs") if n.startswith(".")] == []

    def test_file_in_the_way(self, tmp_path):
        """A regular file at the output path is an error."""
        blocker = tmp_path / "out"
        blocker.write_text("x", encoding="utf-8")
        with pytest.raises(ConfigError):
            prepare_output_dir(str(blocker))

    def test_atomic_write_replaces(self, tmp_path):
        """Rewriting a file replaces its contents."""
        path = str(tmp_path / "a.txt")
        write_text_atomic("one", path)
        write_text_atomic("two", path)
        with open(path, encoding="utf-8") as f:
            assert f.read() == "two"

    def test_missing_inputs_listed(self, tmp_path):
        """Every missing input is reported."""
        with pytest.raises(ConfigError, match="b.csv"):
            check_inputs([str(tmp_path / "a.csv"), str(tmp_path / "b.csv")])

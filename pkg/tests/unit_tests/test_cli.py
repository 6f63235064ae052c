import pytest
import pytest_check as check
import json
import os
import h5py
from maxdual import __version__
from maxdual.cli import EXIT_CONFIG, EXIT_OK, build_parser, main
from maxdual.lattice import LatticeFunction
"""
Unit tests for the command-line interface.
"""


class TestParser:
    def test_commands(self):
        args = build_parser().parse_args(["rdf", "--m", "5", "--seed", "3"])
        check.equal(args.command, "rdf")
        check.equal(args.m, 5)
        check.equal(args.seed, 3)
        check.is_none(args.preset)

    def test_command_required(self):
        with pytest.raises(SystemExit):
            build_parser().parse_args([])

    def test_unknown_command(self):
        with pytest.raises(SystemExit):
            build_parser().parse_args(["plot"])

    def test_version(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["--version"])
        check.equal(exc.value.code, 0)
        check.is_in(__version__, capsys.readouterr().out)


class TestCommands:
    @pytest.fixture
    def make_out_dir(self, tmp_path):
        return str(tmp_path / "out")

    def test_norm_of_default_function(self, make_out_dir, capsys):
        status = main(["norm", "--out-dir", make_out_dir, "--m", "6", "--quiet"])
        check.equal(status, EXIT_OK)
        value = float(capsys.readouterr().out.strip().splitlines()[-1])
        check.almost_equal(value, 1.0, rel=1e-9)
        for ext in ("json", "csv", "txt"):
            check.is_true(os.path.isfile(os.path.join(make_out_dir, "norm." + ext)))
        with open(os.path.join(make_out_dir, "norm.json")) as fin:
            reports = json.load(fin)
        check.equal(reports[0]["inequality"], "norm")
        check.equal(reports[0]["resolution"], 6)

    def test_bad_preset(self, make_out_dir, capsys):
        status = main(["norm", "--out-dir", make_out_dir, "--preset", "nowhere"])
        check.equal(status, EXIT_CONFIG)
        check.is_in("maxdual: error:", capsys.readouterr().err)
        check.is_false(os.path.exists(make_out_dir))

    def test_bad_resolution(self, make_out_dir):
        check.equal(main(["norm", "--out-dir", make_out_dir, "--dim", "2", "--m", "9"]), EXIT_CONFIG)

    def test_config_file(self, tmp_path, make_out_dir):
        path = tmp_path / "run.toml"
        path.write_text("[lattice]\nm = 5\n[run]\nfunction = \"const:2\"\n")
        status = main(["norm", "--config", str(path), "--out-dir", make_out_dir, "--quiet"])
        check.equal(status, EXIT_OK)
        with open(os.path.join(make_out_dir, "norm.json")) as fin:
            report = json.load(fin)[0]
        check.equal(report["resolution"], 5)
        check.almost_equal(report["fitted"]["norm"], 2.0, rel=1e-9)

    def test_maximal_snapshot(self, make_out_dir):
        status = main(["maximal", "--out-dir", make_out_dir, "--m", "5", "--quiet"])
        check.equal(status, EXIT_OK)
        with h5py.File(os.path.join(make_out_dir, "maximal.h5"), "r") as h5:
            f = LatticeFunction.from_hdf5(h5, "f")
            mf = LatticeFunction.from_hdf5(h5, "Mf")
            check.equal(h5.attrs["function"], "indicator:0,0.25,2")
        check.equal(f.m, 5)
        check.is_true(bool((mf.values >= f.values * (1.0 - 1e-12)).all()))

    def test_sparse(self, make_out_dir):
        status = main(["sparse", "--out-dir", make_out_dir, "--m", "5", "--quiet"])
        check.equal(status, EXIT_OK)
        with open(os.path.join(make_out_dir, "sparse.json")) as fin:
            reports = json.load(fin)
        check.is_true(all(r["passed"] for r in reports))
        check.is_in("family", reports[0]["provenance"])

    def test_rdf(self, make_out_dir):
        status = main(["rdf", "--out-dir", make_out_dir, "--m", "5", "--quiet"])
        check.equal(status, EXIT_OK)
        with open(os.path.join(make_out_dir, "rdf.csv")) as fin:
            check.is_in("term 0", fin.read())

    def test_rdf_certified_bound(self, tmp_path, make_out_dir):
        config = tmp_path / "rdf.toml"
        config.write_text("[lattice]\nm = 5\n[run]\nkind = \"grid\"\n")
        status = main(["rdf", "--config", str(config), "--out-dir", make_out_dir, "--quiet"])
        check.equal(status, EXIT_OK)
        with open(os.path.join(make_out_dir, "rdf.json")) as fin:
            reports = json.load(fin)
        check.is_true(reports[0]["fitted"]["certified"])
        check.is_false(reports[0]["conditional"])
        check.almost_equal(reports[0]["fitted"]["A"], 2.0)

    def test_log_file(self, tmp_path, make_out_dir):
        log = tmp_path / "run.log"
        main(["norm", "--out-dir", make_out_dir, "--m", "4", "--log-file", str(log), "--quiet"])
        check.is_true(log.exists())

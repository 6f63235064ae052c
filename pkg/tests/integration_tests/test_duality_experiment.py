import pytest
import pytest_timeout
import pytest_check as check
import os
import json
from maxdual.cli import main
from maxdual.duallab import (
    VERDICT_CONSISTENT,
    VERDICT_HYPOTHESIS_FAILS,
    VERDICT_INSUFFICIENT,
    SpaceSpec,
    theorem11_experiment,
)
from maxdual.maximal import CandidateFamily
"""
Integration test for the end-to-end duality experiment on the calibration
space and on a weight outside every Muckenhoupt class
"""


class TestDualityExperiment:

    @pytest.mark.timeout(600)
    def test_calibration(self):
        space = SpaceSpec.named("calibration", 1, 4)
        report = theorem11_experiment(space, resolutions=(4, 6, 8), trials=3, seed=1)
        check.is_true(report.passed)
        check.is_true(report.verdict.startswith(VERDICT_CONSISTENT))
        check.is_true(report.fitted["stable_x"])
        check.is_true(report.fitted["stable_xprime"])
        check.equal([row["m"] for row in report.rows], [4, 6, 8])
        for row in report.rows:
            # the space is its own associate
            check.almost_equal(row["norm_x"], row["norm_xprime"], rel=1e-9)
            check.greater_equal(row["norm_x"], 1.0)

    # The weight |x - 1/2|^(-0.9) squares to a non integrable function, so the
    # estimates on X keep growing with the resolution
    @pytest.mark.timeout(600)
    def test_adversarial(self):
        space = SpaceSpec.named("adversarial", 1, 4)
        report = theorem11_experiment(space, resolutions=(4, 6, 8), trials=3, seed=1)
        check.is_true(report.verdict.startswith(VERDICT_HYPOTHESIS_FAILS))
        check.is_false(report.fitted["stable_x"])
        check.greater(report.fitted["growth_x"], 2.0)

    @pytest.mark.timeout(300)
    def test_single_resolution(self):
        space = SpaceSpec.named("calibration", 1, 5)
        report = theorem11_experiment(
            space, CandidateFamily("structured"), resolutions=(5,), trials=2
        )
        check.equal(report.verdict, VERDICT_INSUFFICIENT)
        with pytest.raises(ValueError):
            theorem11_experiment(space, resolutions=())

    @pytest.mark.timeout(600)
    def test_command_line(self, tmp_path):
        out = str(tmp_path / "duality")
        config = tmp_path / "duality.toml"
        config.write_text(
            "[lattice]\nm = 6\n"
            "[space]\npreset = \"calibration\"\n"
            "[run]\nresolutions = [4, 6]\ntrials = 2\n"
        )
        status = main(["duality", "--config", str(config), "--out-dir", out, "--quiet"])
        check.equal(status, 0)
        with open(os.path.join(out, "duality.json")) as fin:
            reports = json.load(fin)
        check.equal(reports[0]["inequality"], "duality-experiment")
        check.is_in(VERDICT_CONSISTENT, reports[0]["verdict"])
        check.equal([r["inequality"] for r in reports], ["duality-experiment", "adjoint-bound"])


class TestDualityAcceptanceResolutions:

    @pytest.mark.timeout(1200)
    @pytest.mark.parametrize("preset", ["calibration", "loghold"])
    def test_stable_spaces(self, preset):
        space = SpaceSpec.named(preset, 1, 6)
        report = theorem11_experiment(space, resolutions=(6, 8, 10, 12), trials=3, seed=1)
        check.is_true(report.passed)
        check.is_true(report.verdict.startswith(VERDICT_CONSISTENT))
        check.is_true(report.fitted["stable_x"])
        check.is_true(report.fitted["stable_xprime"])
        check.equal([row["m"] for row in report.rows], [6, 8, 10, 12])

    # |x - 1/2|^(-0.9) with p = 2 leaves every Muckenhoupt class
    @pytest.mark.timeout(1200)
    def test_adversarial_growth(self):
        space = SpaceSpec.named("adversarial", 1, 6)
        report = theorem11_experiment(space, resolutions=(6, 8, 10, 12), trials=3, seed=1)
        check.is_true(report.verdict.startswith(VERDICT_HYPOTHESIS_FAILS))
        check.is_false(report.fitted["stable_x"])
        norms = {row["m"]: row["norm_x"] for row in report.rows}
        check.greater_equal(norms[12] / norms[6], 2.0)
        check.almost_equal(report.fitted["growth_x"], norms[12] / norms[6], rel=1e-12)

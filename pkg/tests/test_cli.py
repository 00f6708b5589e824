"""CLI contract tests: exit codes, output formats, manifests, determinism."""

import json
import subprocess
import sys

import numpy as np
import pytest

from sagm import cli


def run(argv):
    return cli.main(argv)


def test_verify_bounds_small_sweep_passes(tmp_path):
    out = tmp_path / "r.csv"
    code = run(["verify-bounds", "--families", "5", "--out", str(out)])
    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[0].startswith("family,side,")
    assert len(lines) == 1 + 5 * 2  # header + both sides per family


def test_sandwich_and_sweep(tmp_path):
    assert run(["sandwich", "--families", "3", "--out", str(tmp_path / "s.csv")]) == 0
    assert run(["sweep", "--families", "3", "--out", str(tmp_path / "w.csv")]) == 0


def test_json_format(tmp_path):
    out = tmp_path / "r.json"
    assert run(["verify-bounds", "--families", "2", "--format", "json", "--out", str(out)]) == 0
    rows = json.loads(out.read_text())
    assert len(rows) == 4
    assert all(r["passed"] for r in rows)


def test_manifest_written(tmp_path):
    out = tmp_path / "r.csv"
    run(["verify-bounds", "--families", "2", "--out", str(out)])
    manifest = json.loads((tmp_path / "r.csv.manifest.json").read_text())
    assert manifest["subcommand"] == "verify-bounds"
    assert manifest["seed"] == cli.DEFAULT_SEED
    assert manifest["parameters"]["families"] == 2
    assert str(out) in manifest["outputs"]
    assert manifest["duration_seconds"] >= 0


def test_byte_identical_across_runs_and_worker_counts(tmp_path):
    blobs = []
    for i, workers in enumerate((1, 4, 16)):
        out = tmp_path / f"run{i}.csv"
        code = run(
            ["verify-bounds", "--families", "4", "--seed", "99",
             "--workers", str(workers), "--out", str(out)]
        )
        assert code == 0
        blobs.append(out.read_bytes())
    assert blobs[0] == blobs[1] == blobs[2]


def test_seed_changes_output(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    run(["verify-bounds", "--families", "4", "--seed", "1", "--out", str(a)])
    run(["verify-bounds", "--families", "4", "--seed", "2", "--out", str(b)])
    assert a.read_bytes() != b.read_bytes()


class TestDeviationCommand:
    def test_usage_errors(self, tmp_path, capsys):
        assert run(["deviation", "--trials", "5", "--out", str(tmp_path / "d.csv")]) == 2
        assert run(["deviation", "--n", "8", "--d-list", "3", "--trials", "30",
                    "--out", str(tmp_path / "d.csv")]) == 2

    def test_exact_sampler_zero_columns(self, tmp_path):
        out = tmp_path / "d.csv"
        code = run(["deviation", "--sampler", "exact", "--m", "2", "--n", "8",
                    "--d-list", "2", "--trials", "30", "--out", str(out)])
        assert code == 0
        header, row = out.read_text().splitlines()
        vals = dict(zip(header.split(","), row.split(",")))
        assert float(vals["epsilon_hat"]) <= 1e-12
        assert float(vals["delta_wo"]) <= 1e-12


class TestCounterexampleCommand:
    def test_usage_error_on_large_t(self, tmp_path):
        assert run(["counterexample", "--t", "1.5", "--out", str(tmp_path / "c.csv")]) == 2

    def test_degenerate_t(self, tmp_path):
        out = tmp_path / "c.csv"
        code = run(["counterexample", "--dim", "16", "--t", "1.0", "--seeds", "3",
                    "--out", str(out)])
        assert code == 0
        for line in out.read_text().splitlines()[1:]:
            _, residual, lam, _ = line.split(",")
            assert float(residual) <= 1e-9
            assert abs(float(lam)) <= 1e-10


class TestIgmCommand:
    def write_config(self, tmp_path, doc):
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(doc))
        return str(path)

    def test_scalar_closed_form(self, tmp_path):
        cfg = self.write_config(
            tmp_path,
            {
                "generator": {"kind": "explicit", "vectors": [[np.sqrt(2.0)]]},
                "gamma": 0.1,
                "rho": 0.0,
                "k": 6,
                "policy": "with_replacement",
                "trials": 2,
                "seed": 5,
                "x_star": [2.0],
                "x_0": [0.0],
            },
        )
        out = tmp_path / "igm.csv"
        assert run(["igm", "--config", cfg, "--out", str(out)]) == 0
        rows = out.read_text().splitlines()[1:]
        for k, line in enumerate(rows):
            mse = float(line.split(",")[2])
            assert mse == pytest.approx((1 - 0.2) ** (2 * k) * 4.0, abs=1e-12)

    def test_orbit_config_bound_populated(self, tmp_path):
        cfg = self.write_config(
            tmp_path,
            {
                "generator": {"kind": "group_orbit", "d": 4, "seed": 0},
                "gamma": 0.1,
                "rho": 0.02,
                "k": 6,
                "trials": 200,
                "seed": 6,
            },
        )
        out = tmp_path / "igm.csv"
        assert run(["igm", "--config", cfg, "--out", str(out)]) == 0
        for line in out.read_text().splitlines()[2:]:  # k >= 1 rows
            assert line.split(",")[4] != ""  # bound column populated

    def test_bad_config_is_usage_error(self, tmp_path):
        cfg = self.write_config(tmp_path, {"generator": {"kind": "bogus"}, "gamma": 1, "k": 1})
        assert run(["igm", "--config", cfg, "--out", str(tmp_path / "x.csv")]) == 2


class TestDesignsCommand:
    def test_designs_pass(self, tmp_path):
        for kind, m in (("simplex", 4), ("cross_polytope", 3), ("icosahedron", 3), ("group_orbit", 4)):
            out = tmp_path / f"{kind}.csv"
            assert run(["designs", "--kind", kind, "--m", str(m), "--out", str(out)]) == 0

    def test_usage_error(self, tmp_path):
        assert run(["designs", "--kind", "simplex", "--m", "1",
                    "--out", str(tmp_path / "d.csv")]) == 2


def test_console_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "sagm.cli", "verify-bounds", "--families", "1"],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0
    assert proc.stdout.startswith("family,side,")


def test_unknown_subcommand_exits_2():
    with pytest.raises(SystemExit) as exc:
        cli.main(["frobnicate"])
    assert exc.value.code == 2

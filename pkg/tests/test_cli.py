"""Tests for the command-line interface: exit codes, CSV output, determinism."""

import csv

import pytest

from barrierplan import cli
from barrierplan.scenarios import bundled_scenarios

MINI = """\
name: mini
models:
  - {kind: static, id: ground}
  - {kind: free, id: mover}
bodies:
  - id: floor
    frame: ground
    box: {half_extents: [1.0, 1.0, 0.1], center: [0.0, 0.0, -0.1]}
  - id: crate
    frame: mover
    box: {half_extents: [0.1, 0.1, 0.1]}
objective:
  - term: gravity-potential
    masses: {crate: 1.0}
  - term: configuration-regularizer
    weight: 0.5
    reference: initial
initial: [0.0, 0.0, 0.25, 0.0, 0.0, 0.0]
solver:
  eps: {eps}
  eta: 1.0e-5
  max_iters: 2000
"""


def run_cli(argv):
    try:
        return cli.main(argv)
    except SystemExit as err:
        return err.code


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def write_mini(tmp_path, eps="1.0e-6"):
    path = tmp_path / "mini.yaml"
    path.write_text(MINI.replace("{eps}", eps))
    return path


class TestRun:
    def test_converged_run_writes_both_csvs(self, tmp_path):
        scene = bundled_scenarios()["settle-2box"]
        code = run_cli(
            ["run", str(scene), "--solver", "icb", "--eps", "1e-4", "--out", str(tmp_path)]
        )
        assert code == 0
        rows = read_rows(tmp_path / "settle-2box-icb.csv")
        assert rows[0] == ["iter", "objective", "grad_inf_norm", "alpha", "active_pairs", "elapsed_s"]
        assert len(rows) > 1
        grads = [float(r[2]) for r in rows[1:]]
        assert grads[-1] <= 1e-4

    def test_result_file_distances_all_positive(self, tmp_path):
        scene = bundled_scenarios()["settle-2box"]
        assert run_cli(["run", str(scene), "--solver", "icb", "--out", str(tmp_path)]) == 0
        rows = read_rows(tmp_path / "settle-2box-icb-result.csv")
        by_record = {}
        for record, name, value in rows[1:]:
            by_record.setdefault(record, []).append((name, value))
        assert by_record["termination"][0][1] == "converged"
        assert len(by_record["theta"]) == 12
        distances = [float(v) for _, v in by_record["distance"]]
        assert distances and all(d > 0.0 for d in distances)
        assert len(by_record["plane"]) % 4 == 0

    def test_max_iters_one_exits_3_with_one_data_row(self, tmp_path):
        scene = bundled_scenarios()["settle-2box"]
        code = run_cli(
            ["run", str(scene), "--solver", "ao", "--max-iters", "1", "--out", str(tmp_path)]
        )
        assert code == 3
        rows = read_rows(tmp_path / "settle-2box-ao.csv")
        assert len(rows) == 2  # header + exactly one data row

    def test_stalled_run_exits_2(self, tmp_path):
        path = write_mini(tmp_path, eps="1.0e-15")
        code = run_cli(["run", str(path), "--solver", "ao", "--out", str(tmp_path)])
        assert code == 2

    def test_infeasible_scenario_exits_4(self, tmp_path):
        path = tmp_path / "bad.yaml"
        path.write_text(MINI.replace("{eps}", "1.0e-4").replace("0.25", "0.05"))
        assert run_cli(["run", str(path), "--out", str(tmp_path)]) == 4

    def test_malformed_scenario_exits_5(self, tmp_path):
        path = tmp_path / "bad.yaml"
        path.write_text("models: {kind: nope}\n")
        assert run_cli(["run", str(path), "--out", str(tmp_path)]) == 5

    def test_unknown_solver_flag_exits_5(self, tmp_path):
        path = write_mini(tmp_path)
        assert run_cli(["run", str(path), "--solver", "sgd", "--out", str(tmp_path)]) == 5

    def test_deterministic_reruns_match_modulo_elapsed(self, tmp_path):
        scene = bundled_scenarios()["settle-2box"]
        outs = []
        for sub in ("a", "b"):
            out = tmp_path / sub
            code = run_cli(
                ["run", str(scene), "--solver", "ecb", "--deterministic", "--out", str(out)]
            )
            assert code == 0
            outs.append(out)
        for fname in ("settle-2box-ecb.csv", "settle-2box-ecb-result.csv"):
            rows_a = read_rows(outs[0] / fname)
            rows_b = read_rows(outs[1] / fname)
            if fname.endswith("-result.csv"):
                assert rows_a == rows_b
            else:
                stripped_a = [row[:-1] for row in rows_a]
                stripped_b = [row[:-1] for row in rows_b]
                assert stripped_a == stripped_b


class TestSweep:
    def test_single_eps_single_scenario_shape(self, tmp_path):
        scene_dir = tmp_path / "scenes"
        scene_dir.mkdir()
        (scene_dir / "mini.yaml").write_text(MINI.replace("{eps}", "1.0e-4"))
        out = tmp_path / "out"
        code = run_cli(
            ["sweep", str(scene_dir), "--solvers", "ecb,icb,ao", "--eps", "1e-1", "--out", str(out)]
        )
        assert code == 0
        rows = read_rows(out / "sweep-iterations.csv")
        assert rows[0] == ["scenario", "ecb@0.1", "icb@0.1", "ao@0.1"]
        assert len(rows) == 2
        assert rows[1][0] == "mini"
        assert all(int(c) >= 1 for c in rows[1][1:])
        times = read_rows(out / "sweep-time.csv")
        assert times[0] == rows[0]
        assert all(float(c) >= 0.0 for c in times[1][1:])

    def test_budget_exhausted_prints_na(self, tmp_path):
        scene_dir = tmp_path / "scenes"
        scene_dir.mkdir()
        (scene_dir / "mini.yaml").write_text(MINI.replace("{eps}", "1.0e-4"))
        out = tmp_path / "out"
        code = run_cli(
            ["sweep", str(scene_dir), "--solvers", "ao", "--eps", "1e-1,1e-4",
             "--max-iters", "1", "--out", str(out)]
        )
        assert code == 0
        rows = read_rows(out / "sweep-iterations.csv")
        assert rows[1][1:] == ["N.A.", "N.A."]

    def test_empty_directory_exits_5(self, tmp_path):
        assert run_cli(["sweep", str(tmp_path), "--out", str(tmp_path)]) == 5

    def test_bad_solver_list_exits_5(self, tmp_path):
        scene_dir = tmp_path / "scenes"
        scene_dir.mkdir()
        (scene_dir / "mini.yaml").write_text(MINI.replace("{eps}", "1.0e-4"))
        assert run_cli(["sweep", str(scene_dir), "--solvers", "ecb,sgd", "--out", str(tmp_path)]) == 5


class TestCheck:
    def test_feasible_scenario_exits_0(self, tmp_path, capsys):
        path = write_mini(tmp_path)
        assert run_cli(["check", str(path)]) == 0
        out = capsys.readouterr().out
        assert "collision free" in out

    def test_infeasible_scenario_exits_4(self, tmp_path):
        path = tmp_path / "bad.yaml"
        path.write_text(MINI.replace("{eps}", "1.0e-4").replace("0.25", "0.05"))
        assert run_cli(["check", str(path)]) == 4

    def test_missing_subcommand_exits_5(self):
        assert run_cli([]) == 5

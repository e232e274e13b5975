import json

import pytest

from regtile import cli

def run_cli(capsys, *argv):
    code = cli.main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestSolve:
    def test_toy_solve_json(self, capsys, toy_files):
        instance_path, _ = toy_files
        code, out, _err = run_cli(
            capsys,
            "solve",
            "--instance", str(instance_path),
            "--registers", "6",
            "--seed", "1",
        )
        assert code == 0
        payload = json.loads(out)
        assert payload["status"] == "optimal"
        assert payload["cost"]["spill"] == "7/3"
        assert payload["manifest"]["subcommand"] == "solve"
        assert payload["solution"]["order"]

    def test_flag_overrides_document(self, capsys, toy_files):
        instance_path, _ = toy_files
        code, out, _ = run_cli(
            capsys,
            "solve", "--instance", str(instance_path),
            "--registers", "16", "--unroll", "2", "--max-width", "2",
        )
        assert code == 0
        payload = json.loads(out)
        # With 16 registers everything fits in registers: zero spill.
        assert payload["cost"]["spill"] == "0"

    def test_infeasible_exit_code(self, capsys, tmp_path):
        path = tmp_path / "tight.json"
        path.write_text(json.dumps({
            "name": "tight", "registers": 1, "unroll": 1,
            "nodes": [{"id": "A", "comp": 3}], "edges": [],
        }))
        code, _out, _err = run_cli(capsys, "solve", "--instance", str(path))
        assert code == 3

    def test_budget_exhausted_exit_code(self, capsys, toy_files):
        instance_path, _ = toy_files
        code, out, _ = run_cli(
            capsys,
            "solve", "--instance", str(instance_path),
            "--registers", "6", "--node-budget", "2",
        )
        assert code == 4
        assert json.loads(out)["status"] == "feasible-but-unproven"

    def test_env_time_budget(self, capsys, toy_files, monkeypatch):
        instance_path, _ = toy_files
        monkeypatch.setenv(cli.TIME_BUDGET_ENV, "0")
        code, out, _ = run_cli(
            capsys, "solve", "--instance", str(instance_path), "--registers", "6"
        )
        assert code == 4
        assert json.loads(out)["status"] == "feasible-but-unproven"


class TestCost:
    def test_paper_tiling_spill_is_three(self, capsys, toy_files):
        instance_path, solution_path = toy_files
        code, out, _ = run_cli(
            capsys,
            "cost", "--instance", str(instance_path), "--solution", str(solution_path),
        )
        assert code == 0
        payload = json.loads(out)
        assert payload["cost"]["spill"] == "3"
        assert payload["cost"]["uspill"] == 18
        assert payload["feasible"]["ok"] is False  # limit 3 in the document

    def test_validation_error_is_machine_readable(self, capsys, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{broken")
        sol = tmp_path / "sol.json"
        sol.write_text("{}")
        code, _out, err = run_cli(
            capsys, "cost", "--instance", str(bad), "--solution", str(sol)
        )
        assert code == 2
        assert json.loads(err)["error"]["type"] == "validation"


class TestMisc:
    def test_unknown_flag_exits_2_with_usage(self, capsys, toy_files):
        instance_path, _ = toy_files
        with pytest.raises(SystemExit) as exc:
            cli.main(["solve", "--instance", str(instance_path), "--bogus"])
        assert exc.value.code == 2
        assert "usage" in capsys.readouterr().err

    def test_oracle_subcommand(self, capsys, toy_files):
        instance_path, _ = toy_files
        code, out, _ = run_cli(
            capsys, "oracle", "--instance", str(instance_path), "--registers", "6"
        )
        assert code == 0
        payload = json.loads(out)
        assert payload["spill"] == "7/3"
        assert payload["candidates"] > 0

    def test_baseline_subcommand_default_budget(self, capsys, tmp_path, toy_files):
        instance_path, _ = toy_files
        # Document limit 3 and max comp 3: default budget 0 keeps naive cost.
        code, out, _ = run_cli(capsys, "baseline", "--instance", str(instance_path))
        assert code == 0
        payload = json.loads(out)
        assert payload["budget"] == 0
        assert payload["pipelined_loads"] == 5

    def test_baseline_budget_flag(self, capsys, toy_files):
        instance_path, _ = toy_files
        code, out, _ = run_cli(
            capsys, "baseline", "--instance", str(instance_path), "--budget", "1"
        )
        payload = json.loads(out)
        assert payload["pipelined_loads"] == 4
        assert payload["promoted"] == ["S1"]

    def test_stats_generate_csv(self, capsys):
        code, out, _ = run_cli(capsys, "stats", "--generate", "7,5")
        assert code == 0
        lines = out.strip().splitlines()
        assert lines[0].startswith("# ")
        assert lines[1] == "instance,name,nodes,scc_count,max_pressure,interesting"
        assert len(lines) == 7

    def test_stats_single_instance(self, capsys, toy_files):
        instance_path, _ = toy_files
        code, out, _ = run_cli(capsys, "stats", "--instance", str(instance_path))
        lines = out.strip().splitlines()
        assert lines[2].split(",") == ["0", "toy", "4", "4", "10", "true"]

    def test_codegen_text_output(self, capsys, toy_files):
        instance_path, solution_path = toy_files
        code, out, _ = run_cli(
            capsys,
            "codegen",
            "--instance", str(instance_path),
            "--registers", "6",
            "--solution", str(solution_path),
        )
        assert code == 0
        assert out.count("LOAD") == 18
        assert "EXEC S0 col=0" in out

    def test_codegen_infeasible_needs_force(self, capsys, toy_files):
        instance_path, solution_path = toy_files
        code, _out, err = run_cli(
            capsys,
            "codegen", "--instance", str(instance_path), "--solution", str(solution_path),
        )
        assert code == 3
        assert json.loads(err)["error"]["type"] == "infeasible"
        code, out, _ = run_cli(
            capsys,
            "codegen", "--instance", str(instance_path),
            "--solution", str(solution_path), "--force",
        )
        assert code == 0
        assert out.count("LOAD") == 18

    def test_codegen_emit_json(self, capsys, toy_files):
        instance_path, solution_path = toy_files
        code, out, _ = run_cli(
            capsys,
            "codegen", "--instance", str(instance_path), "--registers", "6",
            "--solution", str(solution_path), "--emit-json",
        )
        payload = json.loads(out)
        assert payload["unroll"] == 6
        assert sum(1 for op in payload["ops"] if op["op"] == "load") == 18

    def test_sweep(self, capsys, toy_files):
        instance_path, _ = toy_files
        code, out, _ = run_cli(
            capsys,
            "sweep", "--instance", str(instance_path),
            "--registers", "6", "--unroll", "1..4",
        )
        assert code == 0
        payload = json.loads(out)
        unrolls = [p["unroll"] for p in payload["points"]]
        assert unrolls == [1, 2, 3, 4]
        spills = [p["spill_float"] for p in payload["points"]]
        assert all(b <= a + 1e-9 for a, b in zip(spills, spills[1:]))

    def test_out_file(self, capsys, tmp_path, toy_files):
        instance_path, solution_path = toy_files
        target = tmp_path / "result.json"
        code, out, _ = run_cli(
            capsys,
            "cost", "--instance", str(instance_path),
            "--solution", str(solution_path), "--out", str(target),
        )
        assert code == 0
        assert out == ""
        assert json.loads(target.read_text())["cost"]["spill"] == "3"

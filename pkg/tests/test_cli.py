import json

from nodepack.aggregate import build_plan, read_plan
from nodepack.cli import main
from nodepack.model import AggregationStrategy, BenchmarkConfig, EventLog, paper_config
from nodepack.sim import SchedulerModel, simulate


class TestPlanCommand:
    def test_preset_per_node_scripts(self, tmp_path):
        out = tmp_path / "plan"
        assert main(
            ["plan", "--preset", "S1-long", "--strategy", "per-node", "--out", str(out)]
        ) == 0
        assert len(list(out.glob("unit_*.sh"))) == 32

    def test_flat_manifest(self, tmp_path):
        out = tmp_path / "plan"
        args = [
            "plan", "--nodes", "2", "--cores", "2", "--task-time", "5",
            "--job-time", "20", "--strategy", "flat", "--out", str(out),
        ]
        assert main(args) == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert len(manifest["units"]) == 16

    def test_divisibility_error(self, tmp_path, capsys):
        args = [
            "plan", "--nodes", "1", "--cores", "1", "--task-time", "7",
            "--job-time", "240", "--strategy", "flat", "--out", str(tmp_path / "p"),
        ]
        assert main(args) == 2
        assert "multiple" in capsys.readouterr().err

    def test_config_file_defaults(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"nodes": 2, "cores": 2, "task-time": 5, "job-time": 10}))
        out = tmp_path / "plan"
        assert main(
            ["plan", "--config", str(cfg), "--strategy", "per-core", "--out", str(out)]
        ) == 0
        assert len(json.loads((out / "manifest.json").read_text())["units"]) == 4


class TestSimulateCommand:
    def test_zero_cost_prints_exact_zero(self, tmp_path, capsys):
        args = [
            "simulate", "--nodes", "2", "--cores", "2", "--task-time", "1",
            "--job-time", "4", "--strategy", "per-node",
            "--dispatch-cost", "0", "--cleanup-cost", "0",
        ]
        assert main(args) == 0
        assert capsys.readouterr().out.strip() == "0"

    def test_serial_dispatch_toy(self, capsys):
        # 4 per-node units, 0.5 s dispatch: runtime 4.5 s -> overhead 0.5
        args = [
            "simulate", "--nodes", "4", "--cores", "1", "--task-time", "1",
            "--job-time", "3", "--strategy", "per-node",
            "--dispatch-cost", "0.5", "--cleanup-cost", "0",
        ]
        assert main(args) == 0
        assert capsys.readouterr().out.strip() == "0.500000"

    def test_plan_round_trip(self, tmp_path, capsys):
        out = tmp_path / "plan"
        main(
            ["plan", "--nodes", "2", "--cores", "2", "--task-time", "1",
             "--job-time", "2", "--strategy", "per-core", "--out", str(out)]
        )
        reread = read_plan(out / "manifest.json")
        direct = build_plan(
            BenchmarkConfig(1_000_000, 2_000_000, 2, 2, label=reread.config.label),
            AggregationStrategy.PER_CORE,
        )
        assert reread == direct
        log_path = tmp_path / "log.csv"
        assert main(
            ["simulate", "--plan", str(out / "manifest.json"),
             "--dispatch-cost", "0.25", "--cleanup-cost", "0", "--out", str(log_path)]
        ) == 0
        assert log_path.exists()
        assert (tmp_path / "log_sidecar.json").exists()

    def test_deterministic_output(self, tmp_path):
        paths = []
        for i in (0, 1):
            p = tmp_path / f"log{i}.csv"
            main(
                ["simulate", "--nodes", "2", "--cores", "3", "--task-time", "1",
                 "--job-time", "3", "--strategy", "flat",
                 "--dispatch-cost", "0.1", "--cleanup-cost", "0.05", "--out", str(p)]
            )
            paths.append(p)
        assert paths[0].read_bytes() == paths[1].read_bytes()


class TestRunCommand:
    def test_small_real_run(self, tmp_path, capsys):
        log_path = tmp_path / "run.csv"
        args = [
            "run", "--nodes", "1", "--cores", "2", "--task-time", "0.05",
            "--job-time", "0.1", "--strategy", "per-node",
            "--max-slots", "2", "--out", str(log_path),
        ]
        assert main(args) == 0
        assert "runtime" in capsys.readouterr().out
        assert len(EventLog.read_csv(log_path).records) == 4

    def test_oversubscription_exit_code(self, tmp_path, monkeypatch):
        monkeypatch.setenv("NODEPACK_MAX_SLOTS", "2")
        args = [
            "run", "--nodes", "2", "--cores", "4", "--task-time", "0.01",
            "--job-time", "0.01", "--strategy", "per-node",
        ]
        assert main(args) == 3


class TestAnalyzeCommand:
    def test_paper_overheads(self, capsys):
        assert main(["analyze", "--paper"]) == 0
        out = capsys.readouterr().out
        assert "0.00833" in out
        assert "[>10%]" in out

    def test_paper_ratios(self, tmp_path, capsys):
        out_dir = tmp_path / "reports"
        assert main(["analyze", "--paper", "--ratios", "--out", str(out_dir)]) == 0
        out = capsys.readouterr().out
        assert "92.5x" in out
        assert "note:" in out
        for name in ("overhead_cells.csv", "overhead_cells.json", "ratios.csv",
                     "ratios.json", "overhead.svg", "ratio_note.txt"):
            assert (out_dir / name).exists()

    def test_log_analysis(self, tmp_path, capsys):
        c = BenchmarkConfig(1_000_000, 3_000_000, 2, 2)
        plan = build_plan(c, AggregationStrategy.PER_NODE)
        log_path = tmp_path / "log.csv"
        simulate(plan, SchedulerModel(0, 0)).log.write_csv(log_path)
        out_dir = tmp_path / "reports"
        assert main(
            ["analyze", str(log_path), "--job-time", "3", "--processors", "4",
             "--out", str(out_dir)]
        ) == 0
        out = capsys.readouterr().out
        assert "job_runtime_s 3.000000" in out
        assert "normalized_overhead 0" in out
        assert (out_dir / "utilization.svg").exists()

    def test_empty_log_exit_code(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("unit_id,task_id,node,slot,start_us,end_us\n")
        assert main(["analyze", str(path), "--job-time", "1"]) == 2

    def test_malformed_log_exit_code(self, tmp_path, capsys):
        path = tmp_path / "bad.csv"
        path.write_text("not,a,log\n")
        assert main(["analyze", str(path)]) == 2
        assert "line 1" in capsys.readouterr().err


class TestSweepCommand:
    def test_ordering_and_medians(self, tmp_path):
        out = tmp_path / "sweep.csv"
        args = [
            "sweep", "--node-counts", "2", "--task-times", "1", "--cores", "4",
            "--job-time", "4", "--repetitions", "3",
            "--dispatch-cost", "0.05", "--cleanup-cost", "0", "--out", str(out),
        ]
        assert main(args) == 0
        lines = out.read_text().splitlines()
        rows = [dict(zip(lines[0].split(","), line.split(","))) for line in lines[1:]]
        medians = {
            r["strategy"]: float(r["runtime_us"])
            for r in rows
            if r["rep"] == "median"
        }
        assert medians["flat"] > medians["per-core"] > medians["per-node"]
        # deterministic simulator: three identical repetitions per cell
        for strategy in medians:
            reps = [
                r["runtime_us"]
                for r in rows
                if r["strategy"] == strategy and r["rep"] != "median"
            ]
            assert len(set(reps)) == 1

    def test_empty_strategy_list(self):
        args = [
            "sweep", "--node-counts", "2", "--task-times", "1",
            "--strategies", ",", "--job-time", "4",
        ]
        assert main(args) == 2

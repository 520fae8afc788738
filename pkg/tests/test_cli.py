import numpy as np
import pytest

from asyncadmm.cli import ExperimentConfig, main
from asyncadmm.digraph import random_strongly_connected, save_edge_list

FAST = [
    "--nodes", "8",
    "--edge-prob", "0.3",
    "--dim", "2",
    "--epsilon", "0.1",
    "--tau-bar", "2",
    "--kmax", "15",
    "--seed", "4",
]


def run_cli(*args):
    return main(list(args))


class TestConfigFile:
    def test_round_trip(self, tmp_path):
        cfg = ExperimentConfig(nodes=12, epsilon=0.05, tau_bar=4, seed=77, trace=True)
        path = tmp_path / "config.txt"
        cfg.to_file(path)
        assert ExperimentConfig.from_file(path) == cfg

    def test_rejects_unknown_keys(self, tmp_path):
        path = tmp_path / "config.txt"
        path.write_text("nodes=5\nbogus=1\n")
        with pytest.raises(ValueError):
            ExperimentConfig.from_file(path)

    def test_validation(self):
        with pytest.raises(ValueError):
            ExperimentConfig(mode="turbo").validate()
        with pytest.raises(ValueError):
            ExperimentConfig(topology="ring").validate()


class TestRunOnce:
    def test_writes_expected_files(self, tmp_path):
        out = tmp_path / "out"
        assert run_cli("run", *FAST, "--out", str(out)) == 0
        for name in ("run.csv", "summary.csv", "config.txt", "topology.txt"):
            assert (out / name).is_file()
        header = (out / "run.csv").read_text().splitlines()[0]
        assert header == "k,objective,primal_res,dual_res,consensus_steps,gap,max_node_err"

    def test_byte_identical_reruns(self, tmp_path):
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        assert run_cli("run", *FAST, "--out", str(out_a)) == 0
        assert run_cli("run", *FAST, "--out", str(out_b)) == 0
        assert (out_a / "run.csv").read_bytes() == (out_b / "run.csv").read_bytes()
        assert (out_a / "summary.csv").read_bytes() == (out_b / "summary.csv").read_bytes()

    def test_all_csv_fields_finite(self, tmp_path):
        out = tmp_path / "out"
        run_cli("run", *FAST, "--out", str(out))
        for line in (out / "run.csv").read_text().splitlines()[1:]:
            assert all(np.isfinite(float(v)) for v in line.split(","))
        summary = (out / "summary.csv").read_text().splitlines()[1]
        assert all(np.isfinite(float(v)) for v in summary.split(","))

    def test_config_file_round_trips_to_identical_run(self, tmp_path):
        out_a = tmp_path / "a"
        run_cli("run", *FAST, "--out", str(out_a))
        out_b = tmp_path / "b"
        assert run_cli("run", "--config", str(out_a / "config.txt"), "--out", str(out_b)) == 0
        assert (out_a / "run.csv").read_bytes() == (out_b / "run.csv").read_bytes()

    def test_missing_topology_file_exits_2(self, tmp_path, capsys):
        missing = tmp_path / "nope.txt"
        code = run_cli("run", "--topology", f"file:{missing}", "--out", str(tmp_path / "o"))
        assert code == 2
        assert str(missing) in capsys.readouterr().err

    def test_file_topology_is_used(self, tmp_path):
        g = random_strongly_connected(6, 0.3, seed=5)
        topo = tmp_path / "topo.txt"
        save_edge_list(g, topo)
        out = tmp_path / "out"
        assert run_cli(
            "run", "--topology", f"file:{topo}", "--dim", "2", "--epsilon", "0.1",
            "--tau-bar", "1", "--kmax", "10", "--seed", "3", "--out", str(out),
        ) == 0
        assert (out / "topology.txt").read_text() == topo.read_text()

    def test_invalid_config_nonzero_exit(self, tmp_path, capsys):
        code = run_cli("run", "--nodes", "0", "--out", str(tmp_path / "o"))
        assert code == 1
        assert "error" in capsys.readouterr().err

    def test_trace_output(self, tmp_path):
        out = tmp_path / "out"
        run_cli("run", *FAST, "--trace", "--out", str(out))
        lines = (out / "trace.txt").read_text().splitlines()
        assert lines
        k, sender, receiver, kind = lines[0].split(",")
        assert kind in ("RATIO_PAIR", "MIN_MAX_PAIR")
        int(k), int(sender), int(receiver)

    def test_sync_baseline_matches_vanishing_eps_gap_column(self, tmp_path):
        shared = [
            "--nodes", "8", "--edge-prob", "0.3", "--dim", "2", "--kmax", "25",
            "--seed", "6", "--eps-abs", "0", "--eps-rel", "0",
        ]
        out_sync = tmp_path / "sync"
        out_tiny = tmp_path / "tiny"
        run_cli("run", *shared, "--mode", "sync_baseline", "--epsilon", "0.1", "--out", str(out_sync))
        run_cli(
            "run", *shared, "--mode", "asyadmm", "--epsilon", "1e-12", "--tau-bar", "0",
            "--step-cap", "5000", "--out", str(out_tiny),
        )
        gaps_sync = [float(l.split(",")[5]) for l in (out_sync / "run.csv").read_text().splitlines()[1:]]
        gaps_tiny = [float(l.split(",")[5]) for l in (out_tiny / "run.csv").read_text().splitlines()[1:]]
        assert len(gaps_sync) == len(gaps_tiny)
        assert max(abs(a - b) for a, b in zip(gaps_sync, gaps_tiny)) <= 1e-9


class TestSweep:
    def test_grid_rows_and_trend(self, tmp_path):
        out = tmp_path / "sweep"
        code = run_cli(
            "sweep", "--nodes", "10", "--edge-prob", "0.3", "--dim", "2", "--kmax", "12",
            "--seed", "4", "--epsilons", "0.1,0.01", "--tau-bars", "3,5,10",
            "--out", str(out),
        )
        assert code == 0
        lines = (out / "sweep.csv").read_text().splitlines()
        assert lines[0] == "epsilon,tau_bar,status,final_rel_error,mean_consensus_steps,capped_iterations"
        assert len(lines) == 7
        rows = [line.split(",") for line in lines[1:]]
        assert all(r[2] == "ok" for r in rows)
        for eps in ("0.1", "0.01"):
            steps = [float(r[4]) for r in rows if r[0] == eps]
            assert steps == sorted(steps)

    def test_singleton_matches_run_once_summary(self, tmp_path):
        args = ["--nodes", "8", "--edge-prob", "0.3", "--dim", "2", "--kmax", "10", "--seed", "9"]
        out_run = tmp_path / "run"
        run_cli("run", *args, "--epsilon", "0.1", "--tau-bar", "2", "--out", str(out_run))
        out_sweep = tmp_path / "sweep"
        run_cli("sweep", *args, "--epsilons", "0.1", "--tau-bars", "2", "--out", str(out_sweep))
        summary = (out_run / "summary.csv").read_text().splitlines()[1].split(",")
        row = (out_sweep / "sweep.csv").read_text().splitlines()[1].split(",")
        assert float(row[3]) == float(summary[2])  # relative error
        assert float(row[4]) == float(summary[4])  # mean consensus steps

    def test_reference_annotation_printed(self, tmp_path, capsys):
        run_cli(
            "sweep", "--nodes", "6", "--edge-prob", "0.4", "--dim", "2", "--kmax", "5",
            "--seed", "1", "--epsilons", "0.1", "--tau-bars", "1", "--out", str(tmp_path / "s"),
        )
        assert "9/13/23" in capsys.readouterr().out

    def test_sweep_output_deterministic_despite_threads(self, tmp_path):
        args = [
            "sweep", "--nodes", "8", "--edge-prob", "0.3", "--dim", "2", "--kmax", "8",
            "--seed", "3", "--epsilons", "0.1,0.05", "--tau-bars", "1,2",
        ]
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        assert run_cli(*args, "--out", str(out_a)) == 0
        assert run_cli(*args, "--out", str(out_b)) == 0
        assert (out_a / "sweep.csv").read_bytes() == (out_b / "sweep.csv").read_bytes()

    def test_cell_failure_recorded_not_fatal(self, tmp_path):
        out = tmp_path / "sweep"
        code = run_cli(
            "sweep", "--nodes", "8", "--edge-prob", "0.3", "--dim", "2", "--kmax", "5",
            "--seed", "2", "--epsilons=-1,0.1", "--tau-bars", "1", "--out", str(out),
        )
        assert code == 0
        rows = [l.split(",") for l in (out / "sweep.csv").read_text().splitlines()[1:]]
        assert rows[0][2].startswith("error")
        assert rows[1][2] == "ok"

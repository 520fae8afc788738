"""Experiment harness: single runs, parameter sweeps, CSV export."""

from __future__ import annotations

import argparse
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields, replace
from pathlib import Path

from . import admm, oracle
from .digraph import Digraph, load_edge_list, random_strongly_connected, save_edge_list
from .problems import generate_ls

__all__ = ["ExperimentConfig", "run_once", "sweep", "main"]

MODES = ("asyadmm", "sync_baseline")

_GRAPH_STREAM = 2
_INSTANCE_STREAM = 3

SUMMARY_COLUMNS = (
    "final_objective",
    "oracle_objective",
    "relative_error",
    "total_consensus_steps",
    "mean_consensus_steps",
)
SWEEP_COLUMNS = (
    "epsilon",
    "tau_bar",
    "status",
    "final_rel_error",
    "mean_consensus_steps",
    "capped_iterations",
)

REFERENCE_TREND = (
    "# reference trend (600-node digraph): eps=0.1 -> mean steps 9/13/23 "
    "for tau_bar=3/5/10; eps=0.01 -> capped at 1000"
)


class TopologyFileError(FileNotFoundError):
    """A file: topology was requested but could not be read."""


@dataclass
class ExperimentConfig:
    """Flat run configuration; every field maps to one CLI flag / config key."""

    topology: str = "random"
    nodes: int = 20
    edge_prob: float = 0.2
    dim: int = 3
    epsilon: float = 0.1
    tau_bar: int = 3
    rho: float = 1.0
    kmax: int = 200
    eps_abs: float = 1e-4
    eps_rel: float = 1e-2
    step_cap: int = 1000
    seed: int = 0
    mode: str = "asyadmm"
    trace: bool = False

    def validate(self) -> None:
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.topology != "random" and not self.topology.startswith("file:"):
            raise ValueError(f"topology must be 'random' or 'file:<path>', got {self.topology!r}")
        if self.nodes < 1:
            raise ValueError(f"nodes must be >= 1, got {self.nodes}")
        if self.dim < 1:
            raise ValueError(f"dim must be >= 1, got {self.dim}")
        self.solver_config()  # delegates numeric range checks

    def solver_config(self) -> admm.SolverConfig:
        return admm.SolverConfig(
            rho=self.rho,
            eps=self.epsilon,
            tau_bar=0 if self.mode == "sync_baseline" else self.tau_bar,
            k_max=self.kmax,
            eps_abs=self.eps_abs,
            eps_rel=self.eps_rel,
            step_cap=self.step_cap,
            seed=self.seed,
        )

    def to_file(self, path) -> None:
        lines = [f"{f.name}={getattr(self, f.name)}" for f in fields(self)]
        Path(path).write_text("\n".join(lines) + "\n")

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        values: dict[str, str] = {}
        for raw in Path(path).read_text().splitlines():
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"malformed config line in {path}: {line!r}")
            key, _, val = line.partition("=")
            values[key.strip()] = val.strip()
        kwargs = {}
        for f in fields(cls):
            if f.name not in values:
                continue
            raw_val = values.pop(f.name)
            if f.type in ("int", int):
                kwargs[f.name] = int(raw_val)
            elif f.type in ("float", float):
                kwargs[f.name] = float(raw_val)
            elif f.type in ("bool", bool):
                kwargs[f.name] = raw_val.lower() in ("1", "true", "yes")
            else:
                kwargs[f.name] = raw_val
        if values:
            raise ValueError(f"unknown config keys in {path}: {sorted(values)}")
        return cls(**kwargs)


def build_graph(cfg: ExperimentConfig) -> Digraph:
    if cfg.topology.startswith("file:"):
        path = cfg.topology[len("file:"):]
        if not Path(path).is_file():
            raise TopologyFileError(f"topology file not found: {path}")
        return load_edge_list(path)
    return random_strongly_connected(cfg.nodes, cfg.edge_prob, seed=(cfg.seed, _GRAPH_STREAM))


def _execute(cfg: ExperimentConfig):
    """Build graph + instance, run the solver, return (record, truth, graph)."""
    cfg.validate()
    g = build_graph(cfg)
    instance = generate_ls(g.n, cfg.dim, cfg.dim, seed=(cfg.seed, _INSTANCE_STREAM))
    truth = oracle.centralized_solution(instance)
    trace: list[str] | None = [] if cfg.trace else None
    record = admm.run(
        instance,
        g,
        cfg.solver_config(),
        exact_averaging=(cfg.mode == "sync_baseline"),
        truth=truth,
        trace=trace,
    )
    return record, truth, g, trace


def _write_summary(record: admm.RunRecord, truth: oracle.GroundTruth, path) -> None:
    total_steps = sum(record.consensus_steps)
    mean_steps = total_steps / record.iterations
    rel_err = abs(record.final_objective - truth.f_star) / abs(truth.f_star)
    row = [
        repr(float(record.final_objective)),
        repr(float(truth.f_star)),
        repr(float(rel_err)),
        str(total_steps),
        repr(float(mean_steps)),
    ]
    Path(path).write_text(",".join(SUMMARY_COLUMNS) + "\n" + ",".join(row) + "\n")


def run_once(cfg: ExperimentConfig, out_dir) -> int:
    """One solver run; writes run.csv, summary.csv, config.txt (and trace.txt)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    started = time.perf_counter()
    record, truth, g, trace = _execute(cfg)
    elapsed = time.perf_counter() - started
    record.to_csv(out / "run.csv")
    _write_summary(record, truth, out / "summary.csv")
    cfg.to_file(out / "config.txt")
    save_edge_list(g, out / "topology.txt")
    if trace is not None:
        (out / "trace.txt").write_text("\n".join(trace) + ("\n" if trace else ""))
    print(
        f"iterations={record.iterations} final_objective={record.final_objective!r} "
        f"oracle_objective={truth.f_star!r} capped_iterations={record.capped_iterations}"
    )
    print(f"runtime_seconds={elapsed:.3f}")  # informational only; never in the CSVs
    return 0


def _sweep_cell(cfg: ExperimentConfig, eps: float, tau: float):
    cell = replace(cfg, epsilon=eps, tau_bar=int(tau))
    try:
        record, truth, _, _ = _execute(cell)
    except Exception as exc:  # per-cell failure must not kill the sweep
        return ("error: " + str(exc).replace(",", ";"), "", "", "")
    rel_err = abs(record.final_objective - truth.f_star) / abs(truth.f_star)
    mean_steps = sum(record.consensus_steps) / record.iterations
    return ("ok", repr(float(rel_err)), repr(float(mean_steps)), str(record.capped_iterations))


def sweep(cfg: ExperimentConfig, eps_list, tau_list, out_dir) -> int:
    """Grid of runs over (epsilon, tau_bar); one CSV row per cell, in key order."""
    if not eps_list or not tau_list:
        raise ValueError("sweep needs nonempty epsilon and tau_bar lists")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cells = [(eps, tau) for eps in eps_list for tau in tau_list]
    with ThreadPoolExecutor(max_workers=min(8, len(cells))) as pool:
        results = list(pool.map(lambda c: _sweep_cell(cfg, *c), cells))
    lines = [",".join(SWEEP_COLUMNS)]
    for (eps, tau), (status, rel, mean_steps, capped) in zip(cells, results):
        lines.append(f"{eps!r},{int(tau)},{status},{rel},{mean_steps},{capped}")
    (out / "sweep.csv").write_text("\n".join(lines) + "\n")
    cfg.to_file(out / "config.txt")
    print(REFERENCE_TREND)
    return 0


def _add_common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="flat key=value config file; flags override it")
    parser.add_argument("--topology", help="'random' or 'file:<path>'")
    parser.add_argument("--nodes", type=int, help="node count for random topologies")
    parser.add_argument("--edge-prob", type=float, dest="edge_prob", help="extra edge probability")
    parser.add_argument("--dim", type=int, help="decision dimension p (= q)")
    parser.add_argument("--epsilon", type=float, help="consensus tolerance")
    parser.add_argument("--tau-bar", type=int, dest="tau_bar", help="max message delay")
    parser.add_argument("--rho", type=float, help="penalty parameter")
    parser.add_argument("--kmax", type=int, help="max ADMM iterations")
    parser.add_argument("--eps-abs", type=float, dest="eps_abs", help="absolute stop tolerance")
    parser.add_argument("--eps-rel", type=float, dest="eps_rel", help="relative stop tolerance")
    parser.add_argument("--step-cap", type=int, dest="step_cap", help="consensus step cap")
    parser.add_argument("--seed", type=int, help="run seed")
    parser.add_argument("--mode", choices=MODES, help="solver mode")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--trace", action="store_true", default=None, help="dump delivery trace")


def _config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    cfg = ExperimentConfig.from_file(args.config) if args.config else ExperimentConfig()
    for f in fields(ExperimentConfig):
        val = getattr(args, f.name, None)
        if val is not None:
            cfg = replace(cfg, **{f.name: val})
    return cfg


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="asyncadmm", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="single run: run.csv + summary.csv")
    _add_common_flags(run_p)

    sweep_p = sub.add_parser("sweep", help="grid over epsilon x tau_bar: sweep.csv")
    _add_common_flags(sweep_p)
    sweep_p.add_argument("--epsilons", required=True, help="comma-separated epsilon list")
    sweep_p.add_argument("--tau-bars", required=True, dest="tau_bars", help="comma-separated tau_bar list")

    args = parser.parse_args(argv)
    try:
        cfg = _config_from_args(args)
        if args.command == "run":
            return run_once(cfg, args.out)
        eps_list = [float(v) for v in args.epsilons.split(",") if v.strip()]
        tau_list = [int(v) for v in args.tau_bars.split(",") if v.strip()]
        return sweep(cfg, eps_list, tau_list, args.out)
    except TopologyFileError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, oracle.SingularProblemError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())

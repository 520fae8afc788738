import numpy as np
import pytest

from asyncadmm.admm import (
    SolverConfig,
    lambda_update,
    run,
    stopping_criterion,
    rate_diagnostics,
    x_update,
    z_update,
)
from asyncadmm.digraph import Digraph, build_weights, diameter, random_strongly_connected
from asyncadmm.netsim import DelayModel
from asyncadmm.oracle import centralized_solution, exact_average
from asyncadmm.problems import LeastSquaresCost, generate_ls


def seeded_problem(n=10, p=3, graph_seed=1, inst_seed=2, edge_prob=0.3):
    g = random_strongly_connected(n, edge_prob, seed=graph_seed)
    inst = generate_ls(n, p, p, seed=inst_seed)
    return g, inst


class TestConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            SolverConfig(rho=0.0)
        with pytest.raises(ValueError):
            SolverConfig(eps=-0.1)
        with pytest.raises(ValueError):
            SolverConfig(k_max=0)
        with pytest.raises(ValueError):
            SolverConfig(tau_bar=-1)

    def test_delay_model_is_zero_for_tau_zero(self):
        assert SolverConfig(tau_bar=0).delay_model().kind == "zero"
        assert SolverConfig(tau_bar=4).delay_model().kind == "uniform"


class TestXUpdate:
    def test_identity_zero_data(self):
        cost = LeastSquaresCost(np.eye(3), np.zeros(3))
        x = x_update(cost, np.zeros(3), np.zeros(3), rho=1.0)
        assert np.allclose(x, 0.0)

    def test_identity_solves_two_x_equals_b(self):
        cost = LeastSquaresCost(np.eye(3), np.array([2.0, 2.0, 2.0]))
        x = x_update(cost, np.zeros(3), np.zeros(3), rho=1.0)
        assert np.allclose(x, 1.0)

    def test_pure_penalty_completing_the_square(self):
        # zero quadratic: minimizer of lam^T x + rho/2 ||x - z||^2 is z - lam/rho
        cost = LeastSquaresCost(np.zeros((3, 3)), np.zeros(3))
        z = np.array([1.0, -2.0, 0.5])
        rho = 2.0
        lam = rho * z
        x = x_update(cost, lam, z, rho)
        assert np.allclose(x, 0.0, atol=1e-14)


class TestLambdaUpdate:
    def test_fixed_point_when_feasible(self):
        lam = np.array([1.0, -1.0])
        x = np.array([2.0, 3.0])
        assert np.array_equal(lambda_update(lam, x, x, rho=5.0), lam)

    def test_direct_formula(self):
        new = lambda_update(np.zeros(3), np.array([1.0, 0.0, -1.0]), np.zeros(3), rho=2.0)
        assert np.array_equal(new, [2.0, 0.0, -2.0])

    def test_linearity_over_nodes(self):
        rng = np.random.default_rng(0)
        lam = rng.standard_normal((5, 2))
        x = rng.standard_normal((5, 2))
        z = rng.standard_normal((5, 2))
        updated = lambda_update(lam, x, z, rho=1.5)
        assert np.allclose(updated.sum(axis=0), lam.sum(axis=0) + 1.5 * (x.sum(axis=0) - z.sum(axis=0)))


class TestZUpdate:
    def test_identical_inputs_terminate_at_second_boundary(self):
        g, _ = seeded_problem(n=6)
        w = build_weights(g)
        dm = DelayModel.uniform(2, seed=3)
        y0 = np.tile([1.0, 2.0, 3.0], (6, 1))
        z, steps, ok = z_update(g, w, dm, y0, eps=1e-9, step_cap=100_000)
        assert ok and steps == 2 * (1 + 2) * diameter(g)
        assert np.allclose(z, y0, rtol=1e-12)

    def test_estimates_within_eps_of_exact_average(self):
        g, _ = seeded_problem(n=12)
        w = build_weights(g)
        dm = DelayModel.uniform(3, seed=4)
        y0 = np.random.default_rng(5).standard_normal((12, 3))
        eps = 0.05
        z, _, ok = z_update(g, w, dm, y0, eps=eps, step_cap=100_000)
        assert ok
        assert np.max(np.linalg.norm(z - exact_average(y0), axis=1)) <= eps

    def test_cap_exhaustion_reports_false(self):
        g, _ = seeded_problem(n=10)
        w = build_weights(g)
        dm = DelayModel.uniform(3, seed=6)
        y0 = np.random.default_rng(7).standard_normal((10, 3))
        _, steps, ok = z_update(g, w, dm, y0, eps=1e-13, step_cap=30)
        assert not ok and steps == 30


class TestStoppingCriterion:
    def test_feasible_and_stationary(self):
        x = np.ones((3, 2))
        lam = np.ones((3, 2))
        assert stopping_criterion(x, x, x, lam, eps_abs=1e-4, eps_rel=1e-2, rho=1.0)

    def test_large_primal_residual_fails(self):
        x = np.ones((3, 2)) * 100
        z = np.zeros((3, 2))
        assert not stopping_criterion(x, z, z, z, eps_abs=1e-4, eps_rel=1e-2, rho=1.0)

    def test_boundary_is_inclusive(self):
        # ||x - z|| exactly equals sqrt(total) * eps_abs with eps_rel = 0
        x = np.zeros((2, 2))
        z = np.zeros((2, 2))
        x[0, 0] = 0.5  # norm = 0.5 = sqrt(4) * 0.25
        assert stopping_criterion(x, z, z, np.zeros((2, 2)), eps_abs=0.25, eps_rel=0.0, rho=1.0)
        x[0, 0] = np.nextafter(0.5, 1.0)
        assert not stopping_criterion(x, z, z, np.zeros((2, 2)), eps_abs=0.25, eps_rel=0.0, rho=1.0)


class TestRun:
    def test_single_node_reduces_to_centralized(self):
        g = Digraph(1, frozenset())
        inst = generate_ls(1, 2, 4, seed=8)
        truth = centralized_solution(inst)
        cfg = SolverConfig(rho=1.0, eps=1e-8, tau_bar=0, k_max=300, seed=9, stop_on_residuals=False)
        rec = run(inst, g, cfg)
        assert np.linalg.norm(rec.x_hist[-1][0] - truth.x_star) <= 1e-6

    def test_synchronous_tight_eps_reaches_oracle_optimum(self):
        g, inst = seeded_problem(n=10, graph_seed=10, inst_seed=11)
        truth = centralized_solution(inst)
        cfg = SolverConfig(
            rho=1.0, eps=1e-10, tau_bar=0, k_max=250, seed=12, stop_on_residuals=False
        )
        rec = run(inst, g, cfg, truth=truth)
        assert abs(rec.final_objective - truth.f_star) <= 1e-6

    def test_desk_scale_accuracy(self):
        g, inst = seeded_problem(n=20, p=3, graph_seed=13, inst_seed=14, edge_prob=0.2)
        truth = centralized_solution(inst)
        cfg = SolverConfig(rho=1.0, eps=0.01, tau_bar=3, k_max=200, seed=15)
        rec = run(inst, g, cfg, truth=truth)
        rel = abs(rec.final_objective - truth.f_star) / truth.f_star
        assert rel <= 1e-2

    def test_dual_update_identity_bitwise(self):
        g, inst = seeded_problem(n=8, graph_seed=16, inst_seed=17)
        cfg = SolverConfig(rho=1.3, eps=0.05, tau_bar=2, k_max=25, seed=18)
        rec = run(inst, g, cfg)
        for k in range(1, rec.iterations + 1):
            expected = rec.lam_hist[k - 1] + cfg.rho * (rec.x_hist[k] - rec.z_hist[k])
            assert np.array_equal(rec.lam_hist[k], expected)

    def test_z_feasibility_each_iteration(self):
        g, inst = seeded_problem(n=10, graph_seed=19, inst_seed=20)
        cfg = SolverConfig(rho=1.0, eps=0.02, tau_bar=3, k_max=40, seed=21)
        rec = run(inst, g, cfg)
        for k in range(1, rec.iterations + 1):
            if rec.capped[k - 1]:
                continue
            z = rec.z_hist[k]
            spread = max(
                float(np.linalg.norm(z[i] - z[j]))
                for i in range(g.n)
                for j in range(i + 1, g.n)
            )
            assert spread <= cfg.eps

    def test_deterministic_records(self):
        g, inst = seeded_problem(n=8, graph_seed=22, inst_seed=23)
        cfg = SolverConfig(rho=1.0, eps=0.05, tau_bar=2, k_max=30, seed=24)
        a = run(inst, g, cfg)
        b = run(inst, g, cfg)
        assert a.objective == b.objective
        assert a.consensus_steps == b.consensus_steps
        assert np.array_equal(a.x_hist[-1], b.x_hist[-1])

    def test_cap_events_recorded_but_run_continues(self):
        g, inst = seeded_problem(n=10, graph_seed=25, inst_seed=26)
        cfg = SolverConfig(rho=1.0, eps=1e-12, tau_bar=3, k_max=8, seed=27, step_cap=20)
        rec = run(inst, g, cfg)
        assert rec.iterations == 8
        assert rec.capped_iterations == 8
        assert all(np.isfinite(v) for v in rec.objective)

    def test_exact_averaging_matches_tiny_eps_synchronous(self):
        g, inst = seeded_problem(n=8, graph_seed=28, inst_seed=29)
        truth = centralized_solution(inst)
        base = SolverConfig(rho=1.0, eps=1e-12, tau_bar=0, k_max=40, seed=30, stop_on_residuals=False)
        approx = run(inst, g, base, truth=truth)
        ideal = run(inst, g, base, exact_averaging=True, truth=truth)
        assert ideal.consensus_steps == [0] * ideal.iterations
        gaps = np.abs(np.array(approx.gap) - np.array(ideal.gap))
        assert gaps.max() <= 1e-9

    def test_rejects_mismatched_problem(self):
        g, _ = seeded_problem(n=8)
        inst = generate_ls(9, 3, 3, seed=31)
        with pytest.raises(ValueError):
            run(inst, g, SolverConfig())

    def test_csv_round_trip_format(self, tmp_path):
        g, inst = seeded_problem(n=6, graph_seed=32, inst_seed=33)
        cfg = SolverConfig(rho=1.0, eps=0.05, tau_bar=1, k_max=10, seed=34)
        rec = run(inst, g, cfg)
        path = tmp_path / "run.csv"
        rec.to_csv(path)
        lines = path.read_text().splitlines()
        assert lines[0] == "k,objective,primal_res,dual_res,consensus_steps,gap,max_node_err"
        assert len(lines) == rec.iterations + 1
        first = lines[1].split(",")
        assert int(first[0]) == 1
        assert float(first[1]) == rec.objective[0]


class TestRateDiagnostics:
    def setup_method(self):
        self.g, self.inst = seeded_problem(n=10, graph_seed=35, inst_seed=36)
        self.truth = centralized_solution(self.inst)
        self.cfg = SolverConfig(
            rho=1.0, eps=1e-6, tau_bar=0, k_max=120, seed=37, stop_on_residuals=False
        )
        self.rec = run(self.inst, self.g, self.cfg, truth=self.truth)

    def diagnostics(self):
        return rate_diagnostics(
            self.inst,
            self.rec.x_hist,
            self.rec.z_hist,
            self.truth,
            self.cfg.rho,
            self.cfg.eps,
            self.rec.lam0,
            self.rec.z0,
        )

    def test_first_gap_uses_first_iterate(self):
        diag = self.diagnostics()
        x1, z1 = self.rec.x_hist[1], self.rec.z_hist[1]
        manual = (
            self.inst.objective(x1)
            + float(np.sum(self.truth.lam_star * (x1 - z1)))
            - self.truth.f_star
        )
        assert np.isclose(diag.gaps[0], manual, rtol=1e-12)

    def test_gap_matches_online_record(self):
        diag = self.diagnostics()
        assert np.allclose(diag.gaps, np.array(self.rec.gap), rtol=1e-10)

    def test_gap_nonnegative(self):
        assert self.diagnostics().gaps.min() >= -1e-8

    def test_k_times_gap_bounded_by_theta(self):
        diag = self.diagnostics()
        ks = np.arange(1, len(diag.gaps) + 1)
        assert np.all((ks * diag.gaps)[9:] <= 1.05 * diag.theta)

    def test_bound_curve_dominates_gaps(self):
        diag = self.diagnostics()
        assert np.all(diag.gaps <= diag.bound + 1e-12)

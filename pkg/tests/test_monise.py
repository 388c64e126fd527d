import numpy as np
import pytest

from factories import random_selection_model
from oracles import milp_by_fixing, mu_by_vertices, quadratic_closed_form
from pareto_nise import mip
from pareto_nise.core import ContractError, WeightedSolution, individual_minima
from pareto_nise.monise import (
    MoniseRun,
    SelectionError,
    WeightSelectionModel,
    build_weight_milp,
    next_weight,
    normalize_archive,
    relaxation_upper_bound,
    run_monise,
    weight_gap,
)
from pareto_nise.nise2d import NiseRun
from pareto_nise.problems import QuadraticSimplexProblem, knapsack_generate


def _two_point_model():
    archive = [WeightedSolution([1.0, 0.0], [0.0, 1.0]), WeightedSolution([0.0, 1.0], [1.0, 0.0])]
    return WeightSelectionModel.from_archive(archive, [0.0, 0.0])


class TestNormalize:
    def test_unit_range(self):
        pts, z, scale = normalize_archive([(0, 1), (1, 0)], (0, 0))
        np.testing.assert_allclose(pts, [[0, 1], [1, 0]])
        np.testing.assert_allclose(scale, [1, 1])

    def test_affine(self):
        pts, z, scale = normalize_archive([(2, 4), (4, 2)], (2, 2))
        np.testing.assert_allclose(pts, [[0, 1], [1, 0]])
        np.testing.assert_allclose(z + scale * pts, [[2, 4], [4, 2]])

    def test_single_point_floor(self):
        pts, _, scale = normalize_archive([(3.0, 3.0)], (3.0, 3.0))
        assert np.all(scale == 1e-12) and np.all(np.isfinite(pts))

    def test_below_utopian(self):
        with pytest.raises(ContractError):
            normalize_archive([(0.0, -0.1)], (0.0, 0.0))
        # tiny violations are clipped, not rejected
        pts, _, _ = normalize_archive([(0.0, -1e-10), (1.0, 1.0)], (0.0, 0.0))
        assert pts.min() == 0.0


class TestBuild:
    def test_counts_without_cut(self):
        archive = [WeightedSolution([0.5, 0.5], [0.25, 0.25])]
        model = WeightSelectionModel.from_archive(archive, [0.0, 0.0])
        milp = build_weight_milp(model, duality_cut=False)
        n_bin = len(milp.binary_indices)
        assert milp.lp.n - n_bin == 9 and n_bin == 3

    def test_cut_adds_one_row(self):
        model = _two_point_model()
        a, b = build_weight_milp(model, False), build_weight_milp(model, True)
        assert b.lp.A.shape[0] == a.lp.A.shape[0] + 1 and b.lp.n == a.lp.n

    def test_three_point_archive_relaxation_rows(self):
        p = QuadraticSimplexProblem(3)
        ws = [(0.10, 0.10, 0.80), (0.08, 0.85, 0.07), (0.32, 0.28, 0.40)]
        archive = [p.solve_weighted(w) for w in ws]
        model = WeightSelectionModel.from_archive(archive, [0.0, 0.0, 0.0])
        milp = build_weight_milp(model)
        relax = [k for k, s in enumerate(milp.lp.senses) if s == mip.GE]
        assert len(relax) == 3

    def test_rows_reference_declared_variables(self):
        milp = build_weight_milp(random_selection_model(np.random.default_rng(0)))
        assert milp.lp.A.shape[1] == len(milp.lp.names) == milp.lp.n
        assert all(0 <= j < milp.lp.n for j in milp.binary_indices)

    def test_empty_archive(self):
        with pytest.raises(ContractError):
            WeightSelectionModel.from_archive([], [0.0, 0.0])

    def test_upper_bound_covers_minimal_points(self):
        # the minimal point (0, 50) needs r_low_1 far above the unit box
        W = np.array([[1.0, 0.0], [0.0, 1.0], [0.98, 0.02]])
        R = np.array([[0.0, 1.0], [1.0, 0.0], [1.0, 1.0]])
        ub = relaxation_upper_bound(W, R)
        assert ub[1] == pytest.approx(50.0)


class TestNextWeight:
    def test_two_point_example(self):
        sel = next_weight(_two_point_model())
        np.testing.assert_allclose(sel.weight, [0.5, 0.5], atol=1e-9)
        assert sel.mu == pytest.approx(0.5)
        np.testing.assert_allclose(sel.r_low, [0.0, 0.0], atol=1e-9)

    def test_random_models_against_oracles(self):
        rng = np.random.default_rng(11)
        for _ in range(25):
            model = random_selection_model(rng, max_binaries=8)
            milp = build_weight_milp(model)
            res = mip.branch_and_bound(milp)
            assert res.objective_value == pytest.approx(
                milp_by_fixing(milp, mip.simplex_solve), abs=1e-6)
            sel = next_weight(model)
            assert max(sel.kkt_residuals().values()) < 1e-6
            assert sel.mu == pytest.approx(
                mu_by_vertices(model.points, model.relax_weights, model.relax_points), abs=1e-6)
            assert weight_gap(model, sel.weight) == pytest.approx(sel.mu, abs=1e-6)

    def test_cut_does_not_change_optimum(self):
        rng = np.random.default_rng(12)
        for _ in range(15):
            model = random_selection_model(rng, max_binaries=8)
            a = mip.branch_and_bound(build_weight_milp(model, False))
            b = mip.branch_and_bound(build_weight_milp(model, True))
            assert a.objective_value == pytest.approx(b.objective_value, abs=1e-7)

    def test_single_seed_archive(self):
        p = QuadraticSimplexProblem(3)
        seed = p.solve_weighted(np.full(3, 1 / 3))
        sel = next_weight(WeightSelectionModel.from_archive([seed], [0.0, 0.0, 0.0]))
        assert sel.mu > 0

    def test_node_budget_raises(self):
        model = random_selection_model(np.random.default_rng(2))
        solver = lambda milp: mip.branch_and_bound(milp, max_nodes=1)
        with pytest.raises(SelectionError) as info:
            next_weight(model, solver)
        assert info.value.incumbent is not None


class TestRun:
    def test_large_mu_stop(self):
        p = QuadraticSimplexProblem(3)
        fr = run_monise(p, mu_stop=1e6)
        assert fr.status == "converged" and len(fr) == 4
        np.testing.assert_allclose(fr.solutions[-1].weight, np.full(3, 1 / 3))

    def test_bad_arguments(self):
        with pytest.raises(ContractError):
            MoniseRun(QuadraticSimplexProblem(3), mu_stop=0.0)

    def test_mu_history_monotone_knapsack(self):
        fr = run_monise(knapsack_generate(12, 3, 0.5, 7), mu_stop=1e-6, max_iter=12)
        assert np.all(np.diff(fr.mu_history) <= 1e-8)

    def test_solutions_are_weighted_optima(self):
        p = QuadraticSimplexProblem(3)
        fr = run_monise(p, mu_stop=1e-6, max_iter=10)
        for s in fr.solutions:
            if np.all(s.weight > 0):
                np.testing.assert_allclose(s.objectives, quadratic_closed_form(s.weight), atol=1e-12)

    def test_counterexample_points_when_issued(self):
        p = QuadraticSimplexProblem(3)
        run = MoniseRun(p, mu_stop=1e-9, max_iter=30)
        run.run()
        targets = {(0.10, 0.10, 0.80): (0.22, 0.22, 0.003),
                   (0.08, 0.85, 0.07): (0.20, 0.001, 0.26),
                   (0.32, 0.28, 0.40): (0.11, 0.15, 0.07)}
        archive = run.frontier.objective_matrix()
        for w, r in targets.items():
            if any(np.allclose(w, issued, atol=5e-3) for issued in run.weights):
                assert np.min(np.abs(archive - r).max(axis=1)) < 0.01
        # the archive always holds weighted optima, so each point is reproducible
        for w, r in targets.items():
            np.testing.assert_allclose(p.solve_weighted(w).objectives, r, atol=0.01)

    def test_nise_lock_step(self):
        """On two objectives each selected weight is NISE's, or ties with it."""
        p = QuadraticSimplexProblem(2)
        nise = NiseRun(p, 1e-9, 10)
        nise.run()
        run = MoniseRun(p, 1e-9)
        run.initialize()
        np.testing.assert_allclose(run.weights[0], nise.weights[0], atol=1e-6)
        for w in nise.weights[1:10]:
            sel = run.select()
            same = np.abs(sel.weight - w).max() < 1e-6
            assert same or abs(weight_gap(sel.model, w) - sel.mu) < 1e-6
            run.issue(w)

    def test_partial_frontier_on_selection_failure(self):
        solver = lambda milp: mip.branch_and_bound(milp, max_nodes=1)
        run = MoniseRun(knapsack_generate(15, 4, 0.5, 3), 1e-6, 10, mip_solver=solver)
        with pytest.raises(SelectionError) as info:
            run.run()
        assert info.value.partial is run.frontier and run.frontier.status == "timeout"
        assert len(run.frontier) >= 2


def test_non_recursivity_sign():
    p = QuadraticSimplexProblem(3)
    ws = [(0.24, 0.68, 0.08), (0.23, 0.5, 0.27), (0.17, 0.38, 0.45)]
    R = np.array([quadratic_closed_form(w) for w in ws])
    normal = np.linalg.solve(R, np.ones(3))
    normal /= normal.sum()
    assert normal[0] < 0
    np.testing.assert_allclose(R, [p.solve_weighted(w).objectives for w in ws], atol=1e-12)


def test_minima_feed_utopian():
    p = knapsack_generate(10, 3, 0.5, 5)
    run = MoniseRun(p, 1e-3, 2)
    run.initialize()
    np.testing.assert_array_equal(
        run.frontier.utopian, [s.objectives[k] for k, s in enumerate(individual_minima(p))])

import json

import numpy as np
import pytest

from oracles import central_gradient, knapsack_enumerate, quadratic_closed_form
from pareto_nise.core import ContractError, OracleError
from pareto_nise.problems import (
    KnapsackInstance,
    MultilabelInstance,
    QuadraticSimplexProblem,
    knapsack_generate,
    knapsack_weighted_solve,
    load_problem,
    logistic_weighted_solve,
    problem_from_dict,
    save_problem,
    synthetic_multilabel_generate,
)


class TestKnapsack:
    def test_capacity_rule(self):
        assert knapsack_generate(100, 2, 0.5, 0).capacity == 25000
        assert knapsack_generate(100, 2, 0.0, 0).capacity == 0

    def test_zero_capacity(self):
        inst = KnapsackInstance([1, 2, 3], [[1, 1], [2, 2], [3, 3]], 0)
        assert inst.solve_weighted([0.5, 0.5]).decision.sum() == 0

    def test_deterministic(self):
        a, b = knapsack_generate(15, 3, 0.4, 9), knapsack_generate(15, 3, 0.4, 9)
        assert a.to_dict() == b.to_dict()

    def test_generated_range(self):
        inst = knapsack_generate(200, 3, 0.5, 1)
        assert inst.sizes.min() >= 0 and inst.sizes.max() <= 1000
        assert inst.values.min() >= 0 and inst.values.max() <= 1000

    def test_small_example(self):
        inst = KnapsackInstance([2, 3, 4], [[3], [4], [5]], 5)
        sol = knapsack_weighted_solve(inst, [1.0])
        assert sol.decision.tolist() == [1, 1, 0]
        assert sol.objectives.tolist() == [-7.0]

    def test_uncapacitated(self):
        inst = knapsack_generate(10, 2, 1.0, 2)
        inst.capacity = int(inst.sizes.sum())
        sol = inst.solve_weighted([0.3, 0.7])
        scores = inst.values @ np.array([0.3, 0.7])
        assert np.all(sol.decision[scores > 0] == 1)

    def test_matches_enumeration(self):
        rng = np.random.default_rng(21)
        for trial in range(50):
            q = int(rng.integers(1, 16))
            m = int(rng.choice([2, 3, 5]))
            inst = knapsack_generate(q, m, float(rng.uniform(0.1, 0.9)), trial)
            w = rng.dirichlet(np.ones(m))
            sol = inst.solve_weighted(w)
            best, _ = knapsack_enumerate(inst.sizes, inst.values, inst.capacity, w)
            assert -sol.oracle_value == pytest.approx(best, abs=1e-9)
            assert inst.feasible(sol.decision)

    def test_non_integer_rejected(self):
        with pytest.raises(ContractError):
            KnapsackInstance([1.5, 2], [[1, 1], [1, 1]], 3)
        with pytest.raises(ContractError):
            KnapsackInstance([1, 2], [[1, 1], [1, 1]], 2.5)


class TestQuadratic:
    def test_closed_form(self):
        rng = np.random.default_rng(1)
        for m in (2, 3, 5, 8):
            p = QuadraticSimplexProblem(m)
            for _ in range(20):
                w = rng.dirichlet(np.ones(m))
                np.testing.assert_allclose(p.solve_weighted(w).objectives,
                                           quadratic_closed_form(w), atol=1e-12)

    def test_kkt_residual(self):
        rng = np.random.default_rng(2)
        p = QuadraticSimplexProblem(4)
        for _ in range(50):
            w = rng.dirichlet(np.ones(4))
            x = p.solve_weighted(w).decision
            lam = 2 * w * x
            assert np.ptp(lam) < 1e-10
            assert abs(x.sum() - 1) < 1e-12

    def test_counterexample_rough_points(self):
        p = QuadraticSimplexProblem(3)
        np.testing.assert_allclose(p.solve_weighted([0.08, 0.85, 0.07]).objectives,
                                   [0.20, 0.001, 0.26], atol=0.005)

    def test_uniform(self):
        np.testing.assert_allclose(QuadraticSimplexProblem(3).decision([1 / 3] * 3), [1 / 3] * 3)

    def test_zero_weight_limit(self):
        p = QuadraticSimplexProblem(3)
        np.testing.assert_allclose(p.decision([0.0, 0.0, 1.0]), [0.5, 0.5, 0.0])
        np.testing.assert_allclose(p.decision([1.0, 0.0, 0.0]), [0.0, 0.5, 0.5])
        # the limit rule agrees with the closed form for tiny weights
        eps = 1e-9
        w = np.array([eps, 2 * eps, 1.0]); w /= w.sum()
        x = p.decision(w)
        assert x[2] < 1e-8

    def test_m_check(self):
        with pytest.raises(ContractError):
            QuadraticSimplexProblem(1)


class TestMultilabel:
    def test_generator(self):
        a = synthetic_multilabel_generate(50, 3, 2, 7)
        b = synthetic_multilabel_generate(50, 3, 2, 7)
        np.testing.assert_array_equal(a.X, b.X)
        np.testing.assert_array_equal(a.Y, b.Y)
        assert a.Y.shape == (50, 2) and set(np.unique(a.Y)) <= {0.0, 1.0}
        assert a.m == 3

    def test_beats_zero_baseline(self):
        inst = synthetic_multilabel_generate(50, 3, 2, 7)
        w = np.array([0.45, 0.45, 0.1])
        sol = inst.solve_weighted(w)
        assert sol.oracle_value < inst.weighted_value(np.zeros(4), w)

    def test_regularizer_only(self):
        inst = synthetic_multilabel_generate(30, 2, 2, 1)
        sol = inst.solve_weighted([0.0, 0.0, 1.0])
        assert np.all(sol.decision == 0) and sol.objectives[-1] == 0.0

    def test_gradient_finite_differences(self):
        rng = np.random.default_rng(9)
        for seed in range(20):
            inst = synthetic_multilabel_generate(8, 3, 2, seed)
            theta = rng.normal(size=4)
            G = inst.loss_gradients(theta)
            for l in range(inst.L):
                fd = central_gradient(lambda t: inst.losses(t)[l], theta)
                rel = np.abs(G[l] - fd) / np.maximum(np.abs(fd), 1e-8)
                assert rel.max() < 1e-4

    def test_grid_search(self):
        inst = synthetic_multilabel_generate(4, 1, 2, 3)
        g = np.linspace(-5, 5, 1001)
        T0, T1 = np.meshgrid(g, g, indexing="ij")
        thetas = np.stack([T0.ravel(), T1.ravel()], axis=1)
        z = thetas @ inst._phi.T  # (grid, n)
        soft = np.logaddexp(0.0, z).sum(axis=1)
        losses = soft[:, None] - z @ inst.Y
        norms = np.linalg.norm(thetas, axis=1)
        for w in ([0.3, 0.5, 0.2], [0.6, 0.1, 0.3]):
            w = np.array(w)
            grid = (losses @ w[:-1] + w[-1] * norms).min()
            sol = inst.solve_weighted(w)
            assert abs(sol.oracle_value - grid) < 1e-3
            assert sol.oracle_value <= grid + 1e-9

    def test_convexity_midpoint(self):
        rng = np.random.default_rng(12)
        inst = synthetic_multilabel_generate(20, 3, 3, 5)
        for _ in range(100):
            w = rng.dirichlet(np.ones(4))
            a, b = rng.normal(size=4) * 3, rng.normal(size=4) * 3
            mid = inst.weighted_value((a + b) / 2, w)
            assert mid <= 0.5 * (inst.weighted_value(a, w) + inst.weighted_value(b, w)) + 1e-9

    def test_stationarity(self):
        inst = synthetic_multilabel_generate(40, 3, 2, 2)
        sol = inst.solve_weighted([0.4, 0.4, 0.2])
        assert np.linalg.norm(inst.weighted_gradient(sol.decision, sol.weight)) < 1e-6

    def test_non_convergence(self):
        inst = synthetic_multilabel_generate(40, 3, 2, 2)
        with pytest.raises(OracleError) as info:
            logistic_weighted_solve(inst, [0.4, 0.4, 0.2], tol=1e-12, max_iter=3)
        assert info.value.partial is not None

    def test_bad_labels(self):
        with pytest.raises(ContractError):
            MultilabelInstance(np.zeros((2, 1)), np.array([[0, 2], [1, 0]]))


class TestSerialization:
    @pytest.mark.parametrize("prob", [
        knapsack_generate(6, 3, 0.5, 1),
        synthetic_multilabel_generate(5, 2, 2, 1),
        QuadraticSimplexProblem(4),
    ])
    def test_round_trip(self, prob, tmp_path):
        path = tmp_path / "inst.json"
        save_problem(prob, path)
        again = load_problem(path)
        assert again.to_dict() == prob.to_dict()
        assert json.loads(path.read_text())["type"] == prob.to_dict()["type"]

    def test_knapsack_fields(self):
        d = knapsack_generate(6, 3, 0.5, 1).to_dict()
        assert set(d) == {"type", "m", "q", "sizes", "values", "capacity", "seed"}

    def test_unknown(self):
        with pytest.raises(ContractError):
            problem_from_dict({"type": "tsp"})


def test_oracle_value_contract():
    rng = np.random.default_rng(0)
    probs = [knapsack_generate(10, 3, 0.5, 0), QuadraticSimplexProblem(3),
             synthetic_multilabel_generate(20, 2, 2, 0)]
    for p in probs:
        for _ in range(5):
            w = rng.dirichlet(np.ones(p.m))
            s = p.solve_weighted(w)
            assert abs(s.oracle_value - s.weight @ s.objectives) <= 1e-8

import numpy as np
import pytest

import diffsearch as ds
from diffsearch.hybrid import build_population, greedy_search, nelder_mead


def sphere(n=3):
    return ds.Problem(
        "sphere",
        np.tile([-4.0, 4.0], (n, 1)),
        lambda x: float(np.sum(np.asarray(x) ** 2)),
        known_optimum=(np.zeros(n), 0.0),
    )


def start_simplex(ndim, scale=1.0, offset=2.0):
    verts = np.full((ndim + 1, ndim), offset)
    verts[1:] += scale * np.eye(ndim)
    return verts


class TestNelderMead:
    def test_sphere_converges(self):
        prob = sphere(3)
        x, fx, evals = nelder_mead(prob, start_simplex(3), ds.SimplexConfig(ftol=1e-12))
        assert fx < 1e-6
        assert np.all(np.abs(x) < 1e-2)
        assert evals <= 50_000

    def test_booth_minimum(self):
        prob = ds.make_benchmark("booth")
        x, fx, _ = nelder_mead(prob, start_simplex(2, offset=0.0), ds.SimplexConfig(ftol=1e-14))
        assert x == pytest.approx([1.0, 3.0], abs=1e-3)
        assert fx < 1e-6

    def test_eval_budget_respected(self):
        prob, counter = ds.counted(sphere(4))
        budget = 4 + 2
        _, _, evals = nelder_mead(prob, start_simplex(4), ds.SimplexConfig(ftol=1e-16, max_evals=budget))
        assert counter.count == evals
        assert evals <= budget + 1

    def test_budget_below_simplex_size_rejected(self):
        prob = sphere(4)
        with pytest.raises(ValueError):
            nelder_mead(prob, start_simplex(4), ds.SimplexConfig(max_evals=4))

    def test_result_inside_box(self):
        prob = ds.Problem(
            "edge", np.tile([0.0, 1.0], (2, 1)), lambda x: float(-x[0] - 2.0 * x[1])
        )
        x, fx, _ = nelder_mead(prob, np.array([[0.1, 0.1], [0.9, 0.2], [0.3, 0.8]]),
                               ds.SimplexConfig(ftol=1e-12))
        assert np.all(x >= 0.0) and np.all(x <= 1.0)
        # minimum of the linear cost sits at the (1,1) corner
        assert x == pytest.approx([1.0, 1.0], abs=1e-6)

    def test_degenerate_simplex_recovers(self):
        prob = sphere(2)
        flat = np.array([[2.0, 2.0], [2.0, 2.0], [2.0, 2.0]])
        x, fx, _ = nelder_mead(prob, flat, ds.SimplexConfig(ftol=1e-12))
        assert fx < 8.0  # must escape the single point

    def test_shape_validation(self):
        prob = sphere(3)
        with pytest.raises(ValueError):
            nelder_mead(prob, np.zeros((3, 3)), ds.SimplexConfig())

    def test_config_validation(self):
        with pytest.raises(ValueError):
            ds.SimplexConfig(ftol=0.0)
        with pytest.raises(ValueError):
            ds.SimplexConfig(max_evals=0)


class TestBuildPopulation:
    def test_sample_construction_layout(self):
        bounds = np.tile([-4.0, 4.0], (3, 1))
        best = np.array([1.0, -1.0, 0.5])
        mode = np.array([0.2, 0.3, -0.1])
        sig = np.array([0.5, 1.0, 0.2])
        pop = build_population(best, mode, sig, ds.RngStream(1, 0), bounds)
        assert pop.shape == (4, 3)
        assert np.array_equal(pop[0], best)
        assert np.array_equal(pop[1], mode)
        for v in pop[2:]:
            assert np.all(v >= best - sig / 2 - 1e-12)
            assert np.all(v <= best + sig / 2 + 1e-12)

    def test_zero_sigma_collapses_to_best(self):
        bounds = np.tile([-4.0, 4.0], (2, 1))
        best = np.array([1.0, 2.0])
        pop = build_population(best, best, np.zeros(2), ds.RngStream(1, 1), bounds)
        assert np.allclose(pop, best)

    def test_draws_clipped_to_box(self):
        bounds = np.tile([0.0, 1.0], (2, 1))
        best = np.array([0.99, 0.01])
        pop = build_population(best, best, np.array([1.0, 1.0]), ds.RngStream(1, 2), bounds)
        assert np.all(pop >= 0.0) and np.all(pop <= 1.0)

    def test_axes_construction(self):
        bounds = np.tile([-4.0, 4.0], (3, 1))
        best = np.array([0.0, 1.0, -1.0])
        sig = np.array([0.1, 0.2, 0.3])
        pop = build_population(best, best, sig, ds.RngStream(1, 3), bounds, construction="axes")
        assert np.array_equal(pop[0], best)
        for i in range(3):
            expected = best.copy()
            expected[i] += sig[i]
            assert np.array_equal(pop[i + 1], expected)

    def test_unknown_construction(self):
        bounds = np.tile([0.0, 1.0], (2, 1))
        with pytest.raises(ValueError):
            build_population(np.zeros(2), np.zeros(2), np.ones(2), ds.RngStream(0, 0), bounds,
                             construction="grid")

    def test_determinism(self):
        bounds = np.tile([-4.0, 4.0], (5, 1))
        args = (np.zeros(5), np.ones(5), np.full(5, 0.4))
        a = build_population(*args, ds.RngStream(9, 9), bounds)
        b = build_population(*args, ds.RngStream(9, 9), bounds)
        assert np.array_equal(a, b)


class TestGreedySearch:
    def test_sphere_guided(self):
        prob = sphere(3)
        rep = greedy_search(
            prob,
            ds.EstimatorConfig(L=30, D=10.0, M=1),
            ds.SimplexConfig(ftol=1e-10),
            iterations=10,
            rng=ds.RngStream(5, 0),
        )
        assert rep.success is True
        assert rep.best_value < 1e-6
        assert prob.contains(rep.best_point)

    def test_booth_guided(self):
        prob = ds.make_benchmark("booth")
        rep = greedy_search(
            prob,
            ds.EstimatorConfig(L=60, D=5.0, M=1),
            ds.SimplexConfig(ftol=1e-10),
            iterations=15,
            rng=ds.RngStream(6, 0),
        )
        assert rep.success is True
        assert rep.best_point == pytest.approx([1.0, 3.0], abs=1e-2)

    def test_trace_non_increasing(self):
        prob = ds.make_benchmark("booth")
        rep = greedy_search(
            prob,
            ds.EstimatorConfig(L=40, D=5.0, M=1),
            ds.SimplexConfig(ftol=1e-6),
            iterations=8,
            rng=ds.RngStream(7, 1),
            stop_on_success=False,
        )
        values = [v for _, v, _ in rep.trace]
        assert all(b <= a for a, b in zip(values, values[1:]))
        evals = [e for _, _, e in rep.trace]
        assert all(b >= a for a, b in zip(evals, evals[1:]))
        assert len(rep.trace) == rep.iterations_run + 1

    def test_early_stop_on_success(self):
        prob = sphere(2)
        rep = greedy_search(
            prob,
            ds.EstimatorConfig(L=30, D=10.0, M=1),
            ds.SimplexConfig(ftol=1e-10),
            iterations=50,
            rng=ds.RngStream(8, 0),
        )
        assert rep.success is True
        assert rep.iterations_run < 50

    def test_eval_accounting(self):
        prob, outer = ds.counted(sphere(2))
        L, iters = 25, 3
        rep = greedy_search(
            prob,
            ds.EstimatorConfig(L=L, D=10.0, M=1),
            ds.SimplexConfig(ftol=1e-3, max_evals=200),
            iterations=iters,
            rng=ds.RngStream(11, 0),
            stop_on_success=False,
        )
        assert rep.evals_total == outer.count
        sweeps = 1 + iters  # initial sweep plus one per completed iteration
        overhead = sweeps * 2 * (L - 1) * prob.dimension + 1
        assert rep.evals_total <= overhead + iters * (200 + prob.dimension + 2)

    def test_ablation_uses_no_sweeps(self):
        prob, counter = ds.counted(sphere(2))
        rep = greedy_search(
            prob,
            ds.EstimatorConfig(L=50, D=10.0, M=1),
            ds.SimplexConfig(ftol=1e-8, max_evals=300),
            iterations=2,
            rng=ds.RngStream(12, 0),
            ablation=True,
            stop_on_success=False,
        )
        # no estimation sweeps: all evals belong to the simplex and the
        # initial best-point evaluation
        assert rep.evals_total <= 2 * (300 + 3) + 1
        assert rep.evals_total == counter.count

    def test_ablation_still_finds_sphere(self):
        prob = sphere(2)
        rep = greedy_search(
            prob,
            ds.EstimatorConfig(L=30, D=10.0, M=1),
            ds.SimplexConfig(ftol=1e-10),
            iterations=30,
            rng=ds.RngStream(13, 0),
            ablation=True,
        )
        assert rep.best_value < 1e-3

    def test_no_known_optimum_success_none(self):
        prob = ds.Problem("anon", np.tile([-1.0, 1.0], (2, 1)),
                          lambda x: float(np.sum(np.asarray(x) ** 2)))
        rep = greedy_search(
            prob,
            ds.EstimatorConfig(L=20, D=10.0, M=1),
            ds.SimplexConfig(ftol=1e-6),
            iterations=2,
            rng=ds.RngStream(14, 0),
        )
        assert rep.success is None

    def test_iterations_validation(self):
        with pytest.raises(ValueError):
            greedy_search(
                sphere(2),
                ds.EstimatorConfig(L=20, D=10.0, M=1),
                ds.SimplexConfig(),
                iterations=0,
                rng=ds.RngStream(0, 0),
            )

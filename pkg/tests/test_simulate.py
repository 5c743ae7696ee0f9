import numpy as np
import pytest

from cyclemr.model import compute_sufficient_stats, log_likelihood_summary, ModelParameters
from cyclemr.simulate import (
    CaseSpec,
    SimulationTruth,
    confounding_truth,
    gen_data,
    gen_graph,
    gen_truth,
)


class TestGenGraph:
    def test_p2_single_edge_forced_reciprocal(self):
        adj = gen_graph("I", 2, seed=0)
        np.testing.assert_array_equal(adj, [[0, 1], [1, 0]])

    def test_deterministic_and_within_edge_bounds(self):
        adj1 = gen_graph("I", 5, seed=11)
        adj2 = gen_graph("I", 5, seed=11)
        np.testing.assert_array_equal(adj1, adj2)
        skeleton = ((adj1 + adj1.T) > 0).astype(int)
        undirected = int(np.triu(skeleton, 1).sum())
        assert 4 <= undirected <= 8  # preferential-attachment bounds [p-1, 2(p-1)]

    def test_always_contains_two_cycle(self):
        for case in ("I", "II", "III"):
            for seed in range(25):
                adj = gen_graph(case, 5, seed=seed)
                off = 1 - np.eye(5, dtype=int)
                assert np.any(adj * adj.T * off), (case, seed)

    def test_no_self_loops(self):
        for seed in range(10):
            adj = gen_graph("II", 6, seed=seed)
            assert np.all(np.diag(adj) == 0)


class TestGenTruth:
    def test_case_i_instrument_count(self):
        truth = gen_truth(CaseSpec(case="I", p=5, n=100, seed=1))
        assert truth.b_support.shape == (5, 15)
        assert np.all(truth.b_support.sum(axis=1) == 3)

    def test_case_iii_shared_instruments(self):
        truth = gen_truth(CaseSpec(case="III", p=5, n=100, seed=1))
        assert truth.b_support.shape == (5, 19)
        shared = truth.b_support[:, 15:]
        for i in range(4):
            np.testing.assert_array_equal(np.flatnonzero(shared[:, i]), [i, i + 1])
        assert np.all(truth.b_support.sum(axis=0)[15:] == 2)

    def test_effect_magnitudes_bounded(self):
        for seed in range(5):
            truth = gen_truth(CaseSpec(case="II", p=6, n=100, seed=seed))
            assert np.all(np.abs(truth.a_true) <= 0.1)
            f = np.eye(6) - truth.a_true
            assert abs(np.linalg.det(f)) > 1e-6

    def test_graph_truth_equals_support(self):
        truth = gen_truth(CaseSpec(case="I", p=5, n=100, seed=3))
        np.testing.assert_array_equal(truth.graph_truth, (truth.a_true != 0).astype(int))

    def test_default_confounder_count(self):
        assert gen_truth(CaseSpec(case="I", p=5, n=10, seed=0)).t == 3
        assert gen_truth(CaseSpec(case="I", p=5, n=10, seed=0, t=2)).t == 2

    def test_loglik_finite_at_truth(self):
        truth = gen_truth(CaseSpec(case="III", p=4, n=200, seed=5))
        data = gen_data(truth, 200, seed=6)
        stats = compute_sufficient_stats(data)
        params = ModelParameters(
            a=truth.a_true,
            b=truth.b_true,
            c=np.zeros((4, 0)),
            sigma_star=truth.d @ truth.d.T + truth.sigma_noise,
        )
        assert np.isfinite(log_likelihood_summary(params, stats))


class TestGenData:
    def test_deterministic(self):
        truth = gen_truth(CaseSpec(case="I", p=3, n=50, seed=2))
        d1 = gen_data(truth, 50, seed=9)
        d2 = gen_data(truth, 50, seed=9)
        np.testing.assert_array_equal(d1.y, d2.y)
        np.testing.assert_array_equal(d1.x, d2.x)
        assert d1.u.shape == (50, 0)

    def test_seed_independence(self):
        truth = gen_truth(CaseSpec(case="I", p=3, n=2000, seed=2))
        y1 = gen_data(truth, 2000, seed=1).y
        y2 = gen_data(truth, 2000, seed=2).y
        corr = np.corrcoef(y1[:, 0], y2[:, 0])[0, 1]
        assert abs(corr) < 4.0 / np.sqrt(2000)

    def test_pure_noise_variance(self):
        truth = gen_truth(CaseSpec(case="I", p=3, n=10, seed=4))
        silent = SimulationTruth(
            a_true=np.zeros((3, 3)),
            b_support=truth.b_support,
            b_true=np.zeros_like(truth.b_true),
            d=np.zeros((3, truth.t)),
            sigma_noise=truth.sigma_noise,
            t=truth.t,
            graph_truth=np.zeros((3, 3), dtype=int),
            confounding_truth=np.zeros((3, 3), dtype=int),
            case="I",
        )
        data = gen_data(silent, 30_000, seed=8)
        assert np.allclose(data.y.var(axis=0), 9.0, rtol=0.05)

    def test_covariance_matches_reduced_form(self):
        truth = gen_truth(CaseSpec(case="II", p=4, n=10, seed=7))
        n = 30_000
        data = gen_data(truth, n, seed=3)
        f = np.eye(4) - truth.a_true
        inner = (
            truth.b_true @ truth.b_true.T
            + truth.d @ truth.d.T
            + truth.sigma_noise
        )
        expected = np.linalg.solve(f, np.linalg.solve(f, inner.T).T)
        emp = data.y.T @ data.y / n
        rel = np.linalg.norm(emp - expected) / np.linalg.norm(expected)
        assert rel <= 0.05


class TestConfoundingTruth:
    def test_no_confounders_no_edges(self):
        mask = confounding_truth(np.zeros((3, 2)), 9.0 * np.eye(3))
        assert np.all(mask == 0)

    def test_p2_single_pair_present(self):
        mask = confounding_truth(np.array([[1.0], [1.0]]), 9.0 * np.eye(2))
        np.testing.assert_array_equal(mask, [[0, 1], [1, 0]])

    def test_all_equal_tie_counts_as_edges(self):
        d = np.array([[1.0], [1.0], [-1.0]])
        mask = confounding_truth(d, 9.0 * np.eye(3))
        off = ~np.eye(3, dtype=bool)
        assert np.all(mask[off] == 1)

    def test_strictly_above_mean_rule(self):
        # |off-diagonals| 2, 1, 0 -> normalized 1, 0.5, 0 with mean 0.5:
        # only the strict maximum survives
        d = np.array([[1.0, 1.0], [1.0, -1.0], [0.0, 1.0]])
        sigma_true = d @ d.T  # off-diagonals: (0,1)=0, (0,2)=1, (1,2)=-1
        # use a custom D to hit distinct magnitudes instead:
        d2 = np.array([[1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
        st = d2 @ d2.T  # off: (0,1)=1, (0,2)=0, (1,2)=1
        mask = confounding_truth(d2, np.eye(3))
        vals = np.abs(st[np.triu_indices(3, 1)])
        norm = (vals - vals.min()) / (vals.max() - vals.min())
        expected = (norm > norm.mean()).astype(int)
        np.testing.assert_array_equal(mask[np.triu_indices(3, 1)], expected)

    def test_symmetry_zero_diagonal(self):
        rng = np.random.default_rng(6)
        d = rng.choice([-1.0, 1.0], size=(5, 3)) * rng.integers(0, 2, (5, 3))
        mask = confounding_truth(d, 9.0 * np.eye(5))
        np.testing.assert_array_equal(mask, mask.T)
        assert np.all(np.diag(mask) == 0)


class TestCaseSpec:
    def test_rejects_unknown_case(self):
        with pytest.raises(ValueError):
            CaseSpec(case="IV", p=5, n=10)

    def test_rejects_tiny_p(self):
        with pytest.raises(ValueError):
            CaseSpec(case="I", p=1, n=10)

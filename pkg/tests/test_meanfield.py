import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stagegame.game import EnergyTables, PayoffWeights, TabularGame
from stagegame.meanfield import (Marginal, MarginalSet, SolverConfig, best_response_profile, expected_energy,
                                 free_energy, init_marginals, kl_product, oracle_exact, random_game,
                                 solve_local_game, update_marginal)

LN2, LN3 = math.log(2), math.log(3)


def tables(unary, pairwise=None):
    return EnergyTables.from_blocks([np.asarray(u, dtype=float) for u in unary], pairwise or {})


def mset(*rows):
    return MarginalSet.from_marginals(Marginal(j, r) for j, r in enumerate(rows))


def symmetric_pair_game():
    # swapping both members and their actions leaves the payoff unchanged
    return tables([[0.2, 0.5, 0.1], [0.2, 0.5, 0.1]], {(0, 1): [[0.3, -0.4, 0.2], [-0.4, 0.6, 0.0], [0.2, 0.0, -0.1]]})


class TestInit:
    def test_constant_unary_uniform(self):
        q = init_marginals(tables([[1.5] * 4]))
        np.testing.assert_allclose(q[0].probs, 0.25)

    def test_softmax_closed_form(self):
        e = 0.7
        q = init_marginals(tables([[e, e + LN2]]))
        np.testing.assert_allclose(q[0].probs, [2 / 3, 1 / 3], rtol=1e-14)

    def test_single_action(self):
        assert init_marginals(tables([[3.0]]))[0].probs.tolist() == [1.0]

    def test_underflow_safe(self):
        q = init_marginals(tables([[1e4, 1e4 + 1.0, 2e4]]))
        assert np.all(np.isfinite(q[0].probs)) and q[0].probs.sum() == pytest.approx(1.0)


class TestExpectedEnergy:
    def test_point_masses(self):
        g = symmetric_pair_game()
        others = mset([1.0, 0, 0], [0, 0, 1.0])
        for x in range(3):
            assert expected_energy(g, 0, x, others) == pytest.approx(g.unary[0, x] + g.pairwise[0, 1, x, 2])

    def test_no_pairwise(self):
        g = TabularGame(unary=([0.3, 0.8], [0.5, 0.5]), pairwise={(0, 1): [[0.2, 0.9], [0.4, 0.1]]},
                        weights=PayoffWeights(1.0, 0.0))
        others = mset([0.5, 0.5], [0.1, 0.9])
        assert expected_energy(g, 0, 1, others) == pytest.approx(-0.8)

    def test_uniform_other(self):
        a, b = 0.4, -1.1
        g = tables([[0.25, 0.0], [0.0, 0.0]], {(0, 1): [[a, b], [0.0, 0.0]]})
        assert expected_energy(g, 0, 0, mset([0.5, 0.5], [0.5, 0.5])) == pytest.approx(0.25 + (a + b) / 2)

    def test_bad_action(self):
        with pytest.raises(IndexError):
            expected_energy(tables([[0.0, 1.0]]), 0, 2, mset([0.5, 0.5]))


class TestUpdate:
    def test_singleton_equals_init_and_exact(self):
        g = tables([[0.3, 1.2, -0.4]])
        q0 = init_marginals(g)
        q1 = update_marginal(g, 0, q0)
        np.testing.assert_allclose(q1.probs, q0[0].probs, rtol=1e-15)
        np.testing.assert_allclose(q1.probs, oracle_exact(g).marginals[0].probs, rtol=1e-12)

    def test_dominance_ratio(self):
        m = 0.8
        g = tables([[0.0, m, m + 0.3], [0.0, 0.0]], {(0, 1): [[0.1, 0.1], [0.1, 0.1], [0.1, 0.1]]})
        p = update_marginal(g, 0, init_marginals(g)).probs
        assert p[0] / p[1] == pytest.approx(math.exp(m), rel=1e-12)

    def test_symmetric_members(self):
        g = symmetric_pair_game()
        q = mset([0.2, 0.3, 0.5], [0.2, 0.3, 0.5])
        np.testing.assert_allclose(update_marginal(g, 0, q).probs, update_marginal(g, 1, q).probs, rtol=1e-14)

    def test_does_not_mutate(self):
        g = symmetric_pair_game()
        q = init_marginals(g)
        before = q.probs.copy()
        update_marginal(g, 1, q)
        assert np.array_equal(q.probs, before)


class TestKL:
    def test_examples(self):
        q = mset([0.3, 0.7])
        assert kl_product(q, q) == 0.0
        assert kl_product(mset([1.0, 0.0]), mset([0.5, 0.5])) == pytest.approx(0.693147, abs=1e-6)
        two = kl_product(mset([1.0, 0.0], [0.0, 1.0]), mset([0.5, 0.5], [0.5, 0.5]))
        assert two == pytest.approx(2 * LN2, rel=1e-14)

    def test_support_mismatch(self):
        assert kl_product(mset([0.5, 0.5]), mset([1.0, 0.0])) == math.inf

    @given(st.lists(st.floats(0.01, 1.0), min_size=2, max_size=6), st.lists(st.floats(0.01, 1.0), min_size=2, max_size=6))
    def test_non_negative(self, a, b):
        n = min(len(a), len(b))
        p, q = np.array(a[:n]), np.array(b[:n])
        assert kl_product(mset(p / p.sum()), mset(q / q.sum())) >= 0


class TestSolve:
    def test_singleton(self):
        g = tables([[0.0, LN3, 0.2]])
        r = solve_local_game(g)
        assert r.converged and r.sweeps_used == 1 and r.final_kl == 0.0
        np.testing.assert_allclose(r.marginals[0].probs, oracle_exact(g).marginals[0].probs, atol=1e-12)

    def test_dominant_strategy(self):
        # member 0 prefers action 1, member 1 prefers action 0 whatever the other does
        g = tables([[1.0, 0.0], [0.0, 2.0]], {(0, 1): [[0.1, -0.2], [0.3, 0.0]]})
        r = solve_local_game(g)
        assert best_response_profile(r.marginals) == oracle_exact(g).dominant_eq == (1, 0)

    def test_symmetric_game_symmetric_marginals(self):
        r = solve_local_game(symmetric_pair_game(), SolverConfig(delta=1e-12, max_sweeps=200))
        np.testing.assert_allclose(r.marginals[0].probs, r.marginals[1].probs, atol=1e-9)

    def test_trace_and_normalization(self, rng):
        for _ in range(40):
            g = random_game(rng, 4, 6)
            seen = []
            r = solve_local_game(g, SolverConfig(delta=1e-10), on_sweep=lambda s, q: seen.append(q))
            tr = r.free_energy_trace
            assert len(tr) == r.sweeps_used == len(seen)
            assert all(b <= a + 1e-9 for a, b in zip(tr, tr[1:]))
            assert tr[-1] == pytest.approx(free_energy(g, r.marginals), rel=1e-12, abs=1e-12)
            for q in seen:
                assert all(abs(m.probs.sum() - 1) <= 1e-9 for m in q)

    def test_shift_invariance(self, rng):
        g = random_game(rng, 3, 4, n_members=3)
        t = g.energy_tables
        shifted = EnergyTables.from_blocks([t.unary[j, :a] + 5.0 for j, a in enumerate(t.n_actions)],
                                           {(j, k): t.pairwise[j, k, :t.n_actions[j], :t.n_actions[k]] - 2.0
                                            for j, k in itertools.combinations(range(3), 2)})
        a, b = solve_local_game(t), solve_local_game(shifted)
        np.testing.assert_allclose(a.marginals.probs, b.marginals.probs, atol=1e-9)

    @pytest.mark.parametrize("order", ["round_robin", "seeded_random"])
    def test_deterministic(self, order):
        g = random_game(np.random.default_rng(5), 4, 5, n_members=4)
        cfg = SolverConfig(update_order=order, seed=3)
        a, b = solve_local_game(g, cfg), solve_local_game(g, cfg)
        assert a.marginals.probs.tobytes() == b.marginals.probs.tobytes()
        assert a.free_energy_trace == b.free_energy_trace and a.sweeps_used == b.sweeps_used

    def test_non_convergence_reported(self):
        g = tables([[0.0, 0.5], [0.0, 0.0]], {(0, 1): [[-8.0, 8.0], [8.0, -8.0]]})
        r = solve_local_game(g, SolverConfig(delta=1e-12, max_sweeps=1))
        assert r.sweeps_used == 1 and not r.converged

    @pytest.mark.parametrize("kw", [{"delta": 0.0}, {"delta": 1.0}, {"max_sweeps": 0}, {"update_order": "zigzag"}])
    def test_bad_config(self, kw):
        with pytest.raises(ValueError):
            SolverConfig(**kw)


class TestBestResponse:
    def test_examples(self):
        assert best_response_profile(mset([0, 1.0, 0], [1.0, 0])) == (1, 0)
        assert best_response_profile(mset([0.25] * 4)) == (0,)
        assert best_response_profile(mset([0.2, 0.5, 0.3])) == (1,)


class TestOracle:
    def test_two_action_singleton(self):
        res = oracle_exact(tables([[0.0, LN3]]))
        np.testing.assert_allclose(res.joint, [0.75, 0.25], rtol=1e-14)
        assert res.log_partition == pytest.approx(math.log(4 / 3), rel=1e-14)

    def test_constant_payoff(self):
        res = oracle_exact(tables([[0.5] * 3, [0.5] * 2], {(0, 1): np.full((3, 2), 0.1)}))
        np.testing.assert_allclose(res.joint, 1 / 6)
        assert len(res.pure_nash) == 6

    def test_coordination_game(self):
        res = oracle_exact(tables([[0.0, 0.0], [0.0, 0.0]], {(0, 1): [[-1.0, 0.0], [0.0, -1.0]]}))
        assert res.pure_nash == ((0, 0), (1, 1))
        assert res.dominant_eq is None

    def test_guard(self):
        with pytest.raises(ValueError):
            oracle_exact(tables([np.zeros(100)] * 4), max_profiles=10**6)

    def test_marginals_match_brute_force(self, rng):
        g = random_game(rng, 3, 4, n_members=3)
        t = g.energy_tables
        res = oracle_exact(g)
        sizes = [int(a) for a in t.n_actions]
        w = {p: math.exp(-t.energy(p)) for p in itertools.product(*map(range, sizes))}
        z = sum(w.values())
        for j in range(3):
            for x in range(sizes[j]):
                expect = sum(v for p, v in w.items() if p[j] == x) / z
                assert res.marginals[j].probs[x] == pytest.approx(expect, rel=1e-12)

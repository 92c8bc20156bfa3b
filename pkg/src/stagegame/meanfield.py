"""Mean-field variational inference for local games, plus an exact oracle.

The joint over a neighborhood's actions is the Gibbs distribution
``P(x) = exp(-E(x)) / Z`` with ``E = -payoff``. The solver approximates it by
a product of per-member marginals, updated one member at a time
(coordinate ascent on the free energy ``E_Q[E] - H(Q)``) until the KL
divergence between consecutive sweeps drops below ``delta``.

Any object with an ``energy_tables`` attribute (:class:`~stagegame.game.LocalGame`,
:class:`~stagegame.game.TabularGame`) or an :class:`~stagegame.game.EnergyTables`
itself can be passed as ``game``. Members are addressed by their position
in the game's member order.
"""
import itertools
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import kernels
from .game import EnergyTables, PayoffWeights, TabularGame

__all__ = [
    "Marginal",
    "MarginalSet",
    "SolverConfig",
    "SolveReport",
    "OracleResult",
    "init_marginals",
    "expected_energy",
    "update_marginal",
    "kl_product",
    "free_energy",
    "solve_local_game",
    "best_response_profile",
    "oracle_exact",
    "random_game",
]


def _tables(game) -> EnergyTables:
    if isinstance(game, EnergyTables):
        return game
    return game.energy_tables


def _softmax_neg(energies):
    e = np.asarray(energies, dtype=np.float64)
    w = np.exp(-(e - e.min()))
    return w / w.sum()


@dataclass(frozen=True, eq=False)
class Marginal:
    agent: int
    probs: np.ndarray

    def __post_init__(self):
        p = np.array(self.probs, dtype=np.float64).reshape(-1)
        if p.size == 0 or np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
            raise ValueError("marginal must be a non-empty probability vector")
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)


class MarginalSet:
    """Per-member marginals stored as a zero-padded (m, A_max) matrix."""

    __slots__ = ("agents", "probs", "n_actions")

    def __init__(self, agents, probs, n_actions):
        self.agents = tuple(int(a) for a in agents)
        self.probs = np.array(probs, dtype=np.float64)
        self.n_actions = np.asarray(n_actions, dtype=np.int64)
        self.probs.setflags(write=False)

    @classmethod
    def from_marginals(cls, marginals):
        marginals = list(marginals)
        n_actions = [len(m.probs) for m in marginals]
        probs = np.zeros((len(marginals), max(n_actions)))
        for j, m in enumerate(marginals):
            probs[j, :len(m.probs)] = m.probs
        return cls([m.agent for m in marginals], probs, n_actions)

    def __len__(self):
        return len(self.agents)

    def __getitem__(self, j) -> Marginal:
        return Marginal(self.agents[j], self.probs[j, :self.n_actions[j]])

    def __iter__(self):
        return (self[j] for j in range(len(self)))

    def replace(self, j, marginal: Marginal) -> "MarginalSet":
        probs = self.probs.copy()
        probs[j, :] = 0.0
        probs[j, :len(marginal.probs)] = marginal.probs
        return MarginalSet(self.agents, probs, self.n_actions)


@dataclass(frozen=True)
class SolverConfig:
    delta: float = 1e-4
    max_sweeps: int = 100
    update_order: str = "round_robin"
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.delta < 1:
            raise ValueError("delta must lie in (0, 1)")
        if self.max_sweeps < 1:
            raise ValueError("max_sweeps must be >= 1")
        if self.update_order not in ("round_robin", "seeded_random"):
            raise ValueError(f"unknown update_order {self.update_order!r}")


@dataclass(frozen=True, eq=False)
class SolveReport:
    marginals: MarginalSet
    sweeps_used: int
    final_kl: float
    free_energy_trace: tuple
    converged: bool


def _agents(game, m):
    return tuple(getattr(game, "members", range(m)))


def init_marginals(game) -> MarginalSet:
    """Marginals proportional to exp(-unary energy), one per member."""
    t = _tables(game)
    probs = np.zeros_like(t.unary)
    for j, a in enumerate(t.n_actions):
        probs[j, :a] = _softmax_neg(t.unary[j, :a])
    return MarginalSet(_agents(game, t.n_members), probs, t.n_actions)


def expected_energy(game, j: int, x: int, others: MarginalSet) -> float:
    """Energy terms of member ``j`` playing ``x``, averaged over the others' marginals."""
    t = _tables(game)
    if not 0 <= x < t.n_actions[j]:
        raise IndexError(f"action {x} out of range for member {j}")
    total = t.unary[j, x]
    for k in range(t.n_members):
        if k != j:
            b = t.n_actions[k]
            total += t.pairwise[j, k, x, :b] @ others.probs[k, :b]
    return float(total)


def update_marginal(game, j: int, current: MarginalSet) -> Marginal:
    t = _tables(game)
    a = t.n_actions[j]
    e = t.unary[j, :a].copy()
    for k in range(t.n_members):
        if k != j:
            b = t.n_actions[k]
            e += t.pairwise[j, k, :a, :b] @ current.probs[k, :b]
    return Marginal(current.agents[j], _softmax_neg(e))


def kl_product(old: MarginalSet, new: MarginalSet) -> float:
    """KL(old || new) between two fully factorized distributions."""
    if old.probs.shape != new.probs.shape:
        raise ValueError("marginal sets have different shapes")
    p, q = old.probs, new.probs
    support = p > 0
    if np.any(support & (q <= 0)):
        return math.inf
    kl = np.sum(p[support] * (np.log(p[support]) - np.log(q[support])))
    return max(float(kl), 0.0)


def free_energy(game, marginals: MarginalSet) -> float:
    """Variational free energy E_Q[E] - H(Q)."""
    t = _tables(game)
    return kernels.free_energy(t.unary, t.pairwise, t.n_actions, np.ascontiguousarray(marginals.probs))


def solve_local_game(game, config: SolverConfig = SolverConfig(),
                     on_sweep: Optional[Callable[[int, MarginalSet], None]] = None) -> SolveReport:
    """Run mean-field sweeps until the inter-sweep KL falls below ``config.delta``.

    ``on_sweep(sweep_index, marginals)`` is called after each sweep.
    """
    t = _tables(game)
    init = init_marginals(game)
    agents = init.agents
    q = np.array(init.probs)
    m = t.n_members
    rng = np.random.default_rng(config.seed) if config.update_order == "seeded_random" else None
    round_robin = np.arange(m, dtype=np.int64)

    trace = []
    kl = math.inf
    sweeps = 0
    converged = False
    while sweeps < config.max_sweeps:
        before = MarginalSet(agents, q, t.n_actions)
        order = round_robin if rng is None else rng.permutation(m).astype(np.int64)
        kernels.mf_sweep(t.unary, t.pairwise, t.n_actions, q, order)
        sweeps += 1
        after = MarginalSet(agents, q, t.n_actions)
        trace.append(kernels.free_energy(t.unary, t.pairwise, t.n_actions, q))
        kl = kl_product(before, after)
        if on_sweep is not None:
            on_sweep(sweeps, after)
        if kl < config.delta:
            converged = True
            break
    return SolveReport(
        marginals=MarginalSet(agents, q, t.n_actions),
        sweeps_used=sweeps,
        final_kl=kl,
        free_energy_trace=tuple(trace),
        converged=converged,
    )


def best_response_profile(marginals: MarginalSet) -> tuple:
    """Most probable action per member; ties go to the lowest index."""
    return tuple(int(np.argmax(m.probs)) for m in marginals)


@dataclass(frozen=True, eq=False)
class OracleResult:
    joint: np.ndarray  # probability tensor, one axis per member
    log_partition: float
    marginals: MarginalSet
    pure_nash: tuple
    dominant_eq: Optional[tuple]


def _energy_tensor(t: EnergyTables) -> np.ndarray:
    m = t.n_members
    shape = tuple(int(a) for a in t.n_actions)
    E = np.zeros(shape)
    for j in range(m):
        view = [1] * m
        view[j] = shape[j]
        E = E + t.unary[j, :shape[j]].reshape(view)
    for j, k in itertools.combinations(range(m), 2):
        view = [1] * m
        view[j], view[k] = shape[j], shape[k]
        E = E + t.pairwise[j, k, :shape[j], :shape[k]].reshape(view)
    return E


def oracle_exact(game, max_profiles: int = 10**6, tol: float = 1e-12) -> OracleResult:
    """Exact Gibbs joint, marginals and pure equilibria by full enumeration.

    Payoff is ``-energy``; a profile is a pure Nash equilibrium when no single
    member can lower the energy by more than ``tol`` by deviating.
    """
    t = _tables(game)
    shape = tuple(int(a) for a in t.n_actions)
    if math.prod(shape) > max_profiles:
        raise ValueError(f"{math.prod(shape)} joint profiles exceed the limit of {max_profiles}")
    m = len(shape)
    E = _energy_tensor(t)
    lo = E.min()
    w = np.exp(-(E - lo))
    z = w.sum()
    joint = w / z
    log_z = float(math.log(z) - lo)

    probs = np.zeros((m, max(shape)))
    for j in range(m):
        axes = tuple(k for k in range(m) if k != j)
        probs[j, :shape[j]] = joint.sum(axis=axes)
    marginals = MarginalSet(_agents(game, m), probs, shape)

    best = [E <= E.min(axis=j, keepdims=True) + tol for j in range(m)]
    nash_mask = np.logical_and.reduce(best) if m else np.ones((), bool)
    pure_nash = tuple(tuple(int(v) for v in idx) for idx in np.argwhere(nash_mask))

    dominant = []
    for j in range(m):
        axes = tuple(k for k in range(m) if k != j)
        always_best = best[j].all(axis=axes) if axes else best[j]
        hits = np.flatnonzero(always_best)
        if hits.size == 0:
            dominant = None
            break
        dominant.append(int(hits[0]))
    return OracleResult(
        joint=joint,
        log_partition=log_z,
        marginals=marginals,
        pure_nash=pure_nash,
        dominant_eq=tuple(dominant) if dominant is not None else None,
    )


def random_game(rng: np.random.Generator, max_members: int = 3, max_actions: int = 5,
                n_members: Optional[int] = None) -> TabularGame:
    """Random tabular game with potentials drawn uniformly from (0, 1].

    The pairwise weight is drawn uniformly from [0, 1) so that the sample mixes
    nearly independent and strongly coupled games.
    """
    m = int(rng.integers(1, max_members + 1)) if n_members is None else n_members
    sizes = rng.integers(1, max_actions + 1, size=m)
    unary = tuple(1.0 - rng.random(a) for a in sizes)
    pairwise = {
        (j, k): 1.0 - rng.random((sizes[j], sizes[k]))
        for j, k in itertools.combinations(range(m), 2)
    }
    weights = PayoffWeights(alpha_a=1.0, alpha_b=float(rng.random()))
    return TabularGame(unary=unary, pairwise=pairwise, weights=weights)

"""Stage graphical game: states, discrete actions, factorized payoff and local games.

The payoff of a neighborhood is

    M = alpha_a * sum_j unary(s_j + a_j, context_j)
      + alpha_b * sum_{j<k} pairwise(s_j + a_j, s_k + a_k)

with strictly positive potentials. Solvers work on the energy ``E = -M``,
which for a fixed local game is compiled once into dense tables
(:class:`EnergyTables`).
"""
import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Optional, Sequence

import numpy as np

from .topology import Neighborhood, TopologyGraph, as_positions, neighborhood

__all__ = [
    "RobotState",
    "ActionSet",
    "PotentialPair",
    "PayoffWeights",
    "EnergyTables",
    "LocalGame",
    "TabularGame",
    "joint_payoff",
    "virtual_mean_state",
    "build_local_game",
    "states_from_positions",
]


@dataclass(frozen=True, eq=False)
class RobotState:
    id: int
    position: np.ndarray

    def __post_init__(self):
        pos = np.asarray(self.position, dtype=np.float64).reshape(3)
        if not np.all(np.isfinite(pos)):
            raise ValueError(f"state of agent {self.id} has non-finite position")
        pos.setflags(write=False)
        object.__setattr__(self, "position", pos)


def states_from_positions(positions) -> tuple:
    return tuple(RobotState(i, p) for i, p in enumerate(as_positions(positions)))


@dataclass(frozen=True, eq=False)
class ActionSet:
    """Ordered displacement vectors, one per discrete action."""

    displacements: np.ndarray

    def __post_init__(self):
        disp = np.array(self.displacements, dtype=np.float64, ndmin=2)
        if disp.size == 0:
            raise ValueError("action set must not be empty")
        if disp.ndim != 2 or disp.shape[1] != 3:
            raise ValueError(f"displacements must have shape (A, 3), got {disp.shape}")
        if not np.all(np.isfinite(disp)):
            raise ValueError("displacements must be finite")
        if not np.any(np.all(disp == 0.0, axis=1)):
            raise ValueError("action set must contain the zero displacement")
        if len({tuple(row) for row in disp}) != len(disp):
            raise ValueError("action set contains duplicate displacements")
        disp.setflags(write=False)
        object.__setattr__(self, "displacements", disp)

    def __len__(self):
        return self.displacements.shape[0]

    @classmethod
    def lattice(cls, step: float, dims: int = 2) -> "ActionSet":
        """{-step, 0, +step}^dims displacements (z held at 0 when dims=2).

        The zero displacement comes first so that ties resolve to staying put.
        """
        if dims not in (2, 3):
            raise ValueError("dims must be 2 or 3")
        if not step > 0:
            raise ValueError("step must be positive")
        offsets = (0.0, -step, step)
        rows = [p + (0.0,) * (3 - dims) for p in itertools.product(offsets, repeat=dims)]
        return cls(np.array(rows))


@dataclass(frozen=True)
class PotentialPair:
    """Unary and pairwise potentials with values in (0, 1].

    ``unary(candidate, context)`` takes a candidate position (3,) and the
    positions (k, 3) of the other neighborhood members; ``pairwise(a, b)``
    must be symmetric. The optional batch forms evaluate many candidates at
    once: ``unary_batch(candidates (K, 3), context) -> (K,)`` and
    ``pairwise_batch(a (K, 3), b (L, 3)) -> (K, L)``.
    """

    unary: Callable
    pairwise: Callable
    unary_batch: Optional[Callable] = None
    pairwise_batch: Optional[Callable] = None

    def unary_many(self, candidates, context):
        if self.unary_batch is not None:
            return np.asarray(self.unary_batch(candidates, context), dtype=np.float64)
        return np.array([self.unary(c, context) for c in candidates], dtype=np.float64)

    def pairwise_many(self, a, b):
        if self.pairwise_batch is not None:
            return np.asarray(self.pairwise_batch(a, b), dtype=np.float64)
        return np.array([[self.pairwise(x, y) for y in b] for x in a], dtype=np.float64)


@dataclass(frozen=True)
class PayoffWeights:
    alpha_a: float = 1.0
    alpha_b: float = 0.001

    def __post_init__(self):
        if not (math.isfinite(self.alpha_a) and math.isfinite(self.alpha_b)):
            raise ValueError("weights must be finite")
        if self.alpha_a < 0 or self.alpha_b < 0:
            raise ValueError("weights must be non-negative")
        if self.alpha_a == 0 and self.alpha_b == 0:
            raise ValueError("alpha_a and alpha_b must not both be zero")


def _check_potential(values, what):
    if not np.all(np.isfinite(values)) or np.any(values <= 0):
        raise ValueError(f"{what} potential must be strictly positive and finite")


@dataclass(frozen=True, eq=False)
class EnergyTables:
    """Dense energy tables of a local game, padded to a common action count.

    ``unary[j, x]`` is the unary energy of member j taking action x and
    ``pairwise[j, k, x, y]`` the pairwise energy of (j: x, k: y); the
    diagonal blocks are zero and ``pairwise[k, j] == pairwise[j, k].T``.
    Entries past ``n_actions[j]`` are zero padding.
    """

    unary: np.ndarray
    pairwise: np.ndarray
    n_actions: np.ndarray

    @property
    def n_members(self) -> int:
        return self.unary.shape[0]

    def energy(self, profile: Sequence[int]) -> float:
        profile = _check_profile(profile, self.n_actions)
        m = self.n_members
        total = sum(self.unary[j, profile[j]] for j in range(m))
        for j in range(m):
            for k in range(j + 1, m):
                total += self.pairwise[j, k, profile[j], profile[k]]
        return float(total)

    @classmethod
    def from_blocks(cls, unary: Sequence[np.ndarray], pairwise: dict) -> "EnergyTables":
        """Assemble padded tables from per-member unary vectors and a
        ``{(j, k): matrix}`` mapping for j < k (missing pairs are zero)."""
        n_actions = np.array([len(u) for u in unary], dtype=np.int64)
        m, width = len(unary), int(n_actions.max())
        U = np.zeros((m, width))
        P = np.zeros((m, m, width, width))
        for j, u in enumerate(unary):
            U[j, :len(u)] = u
        for (j, k), block in pairwise.items():
            if not j < k:
                raise ValueError("pairwise blocks must be keyed with j < k")
            block = np.asarray(block, dtype=np.float64)
            if block.shape != (n_actions[j], n_actions[k]):
                raise ValueError(f"pairwise block {(j, k)} has shape {block.shape}")
            P[j, k, :n_actions[j], :n_actions[k]] = block
            P[k, j, :n_actions[k], :n_actions[j]] = block.T
        for arr in (U, P, n_actions):
            arr.setflags(write=False)
        return cls(U, P, n_actions)


def _check_profile(profile, n_actions):
    profile = tuple(int(x) for x in profile)
    if len(profile) != len(n_actions):
        raise ValueError(f"expected {len(n_actions)} actions, got {len(profile)}")
    for j, x in enumerate(profile):
        if not 0 <= x < n_actions[j]:
            raise IndexError(f"action {x} out of range for member {j} ({n_actions[j]} actions)")
    return profile


@dataclass(frozen=True, eq=False)
class LocalGame:
    """The game of one neighborhood, as seen by its owner.

    ``effective_states`` holds, per member, either its true position or the
    position of its virtual mean neighbor.
    """

    owner: int
    members: tuple
    states: tuple
    effective_states: np.ndarray
    actions: tuple
    potentials: PotentialPair
    weights: PayoffWeights
    approximated: tuple = field(default=())

    def __post_init__(self):
        m = len(self.members)
        if self.owner not in self.members:
            raise ValueError("owner must be a member of its local game")
        if not (len(self.states) == len(self.actions) == self.effective_states.shape[0] == m):
            raise ValueError("states, effective_states and actions must match members")
        own = self.members.index(self.owner)
        if not np.array_equal(self.effective_states[own], self.states[own].position):
            raise ValueError("the owner's effective state must be its true state")

    @property
    def n_members(self) -> int:
        return len(self.members)

    def member_index(self, agent_id: int) -> int:
        return self.members.index(agent_id)

    def candidates(self, j: int) -> np.ndarray:
        return self.effective_states[j] + self.actions[j].displacements

    def context(self, j: int) -> np.ndarray:
        return np.delete(self.effective_states, j, axis=0)

    @cached_property
    def energy_tables(self) -> EnergyTables:
        m = self.n_members
        w = self.weights
        unary, pairwise = [], {}
        cands = [self.candidates(j) for j in range(m)]
        for j in range(m):
            u = self.potentials.unary_many(cands[j], self.context(j))
            _check_potential(u, "unary")
            unary.append(-w.alpha_a * u)
        for j in range(m):
            for k in range(j + 1, m):
                if w.alpha_b == 0:
                    continue
                p = self.potentials.pairwise_many(cands[j], cands[k])
                _check_potential(p, "pairwise")
                pairwise[(j, k)] = -w.alpha_b * p
        return EnergyTables.from_blocks(unary, pairwise)


@dataclass(frozen=True, eq=False)
class TabularGame:
    """A local game given directly by potential tables instead of positions.

    ``unary[j][x]`` and ``pairwise[(j, k)][x, y]`` (j < k) are potential
    values in (0, 1]; the payoff combines them exactly as for
    :class:`LocalGame`.
    """

    unary: tuple
    pairwise: dict
    weights: PayoffWeights = PayoffWeights()

    @property
    def n_members(self) -> int:
        return len(self.unary)

    @cached_property
    def energy_tables(self) -> EnergyTables:
        w = self.weights
        for u in self.unary:
            _check_potential(np.asarray(u), "unary")
        for p in self.pairwise.values():
            _check_potential(np.asarray(p), "pairwise")
        return EnergyTables.from_blocks(
            [-w.alpha_a * np.asarray(u, dtype=np.float64) for u in self.unary],
            {jk: -w.alpha_b * np.asarray(p, dtype=np.float64) for jk, p in self.pairwise.items()},
        )


def joint_payoff(game, joint_action: Sequence[int]) -> float:
    """Payoff of a joint action profile (one action index per member)."""
    if isinstance(game, TabularGame):
        return -game.energy_tables.energy(joint_action)
    n_actions = [len(a) for a in game.actions]
    profile = _check_profile(joint_action, n_actions)
    moved = [game.effective_states[j] + game.actions[j].displacements[x] for j, x in enumerate(profile)]
    pot, w = game.potentials, game.weights
    unary = sum(pot.unary(moved[j], game.context(j)) for j in range(len(moved)))
    pair = 0.0
    if w.alpha_b != 0:
        for j, k in itertools.combinations(range(len(moved)), 2):
            pair += pot.pairwise(moved[j], moved[k])
    return float(w.alpha_a * unary + w.alpha_b * pair)


def virtual_mean_state(j: int, neighborhood_j: Neighborhood, states: Sequence[RobotState]) -> np.ndarray:
    """Mean position over ``neighborhood_j`` (which contains ``j`` itself)."""
    if len(neighborhood_j) == 0:
        raise ValueError("neighborhood must not be empty")
    if j not in neighborhood_j:
        raise ValueError(f"agent {j} must belong to its own neighborhood")
    return np.mean([states[k].position for k in neighborhood_j.members], axis=0)


def _per_agent(actions, n_agents):
    if isinstance(actions, ActionSet):
        return [actions] * n_agents
    actions = list(actions)
    if len(actions) != n_agents:
        raise ValueError("one ActionSet per agent is required")
    return actions


def build_local_game(
    owner: int,
    h: int,
    graph: TopologyGraph,
    states: Sequence[RobotState],
    actions,
    potentials: PotentialPair,
    weights: PayoffWeights,
    virtual_neighbors: bool = True,
) -> LocalGame:
    """Local game of ``owner`` over its h-hop neighborhood.

    A member j whose own neighborhood reaches outside the owner's is replaced
    by its virtual mean neighbor (unless ``virtual_neighbors`` is off).
    """
    if len(states) != graph.n_agents:
        raise ValueError("states and graph disagree on the number of agents")
    for idx, s in enumerate(states):
        if s.id != idx:
            raise ValueError("state ids must be 0..N-1 in order")
    per_agent = _per_agent(actions, graph.n_agents)
    nb = neighborhood(graph, owner, h)
    own_set = set(nb.members)
    effective = np.array([states[j].position for j in nb.members], dtype=np.float64)
    approximated = []
    if virtual_neighbors:
        for row, j in enumerate(nb.members):
            if j == owner:
                continue
            nb_j = neighborhood(graph, j, h)
            if set(nb_j.members) - own_set:
                effective[row] = virtual_mean_state(j, nb_j, states)
                approximated.append(j)
    effective.setflags(write=False)
    return LocalGame(
        owner=owner,
        members=nb.members,
        states=tuple(states[j] for j in nb.members),
        effective_states=effective,
        actions=tuple(per_agent[j] for j in nb.members),
        potentials=potentials,
        weights=weights,
        approximated=tuple(approximated),
    )

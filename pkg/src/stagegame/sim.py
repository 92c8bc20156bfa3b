"""Synchronous discrete-time swarm simulation.

Each step: rebuild the link graph from current positions, build and solve
every agent's local game against the same snapshot, let each agent execute
only its own component of its solution, then move everyone at once.
"""
import logging
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .coverage import RoiGaussian, make_coverage_potentials
from .game import ActionSet, PayoffWeights, build_local_game, states_from_positions
from .meanfield import SolverConfig, best_response_profile, solve_local_game
from .topology import LinkModelParams, as_positions, build_link_graph

log = logging.getLogger(__name__)

__all__ = ["ScenarioConfig", "AgentStep", "StepRecord", "run", "consensus_metric", "default_scenario"]


@dataclass(frozen=True, eq=False)
class ScenarioConfig:
    positions: np.ndarray
    link: LinkModelParams = LinkModelParams()
    h: int = 2
    weights: PayoffWeights = PayoffWeights()
    action_step_m: float = 20.0
    action_dims: int = 2
    roi: RoiGaussian = field(default_factory=RoiGaussian)
    resolution: int = 40
    solver: SolverConfig = SolverConfig()
    steps: int = 20
    seed: int = 0
    virtual_neighbors: bool = True

    def __post_init__(self):
        pos = as_positions(self.positions)
        if pos.shape[0] < 1:
            raise ValueError("at least one agent is required")
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        if self.h < 1:
            raise ValueError("h must be >= 1")
        pos.setflags(write=False)
        object.__setattr__(self, "positions", pos)

    @property
    def n_agents(self) -> int:
        return self.positions.shape[0]

    def action_set(self) -> ActionSet:
        return ActionSet.lattice(self.action_step_m, self.action_dims)


@dataclass(frozen=True, eq=False)
class AgentStep:
    agent_id: int
    position: np.ndarray  # after executing the action
    action: int
    payoff: float
    sweeps: int
    solve_time_s: float
    payoff_time_s: float
    inferred: dict  # neighbor id -> action index inferred by this agent


@dataclass(frozen=True, eq=False)
class StepRecord:
    step: int
    agents: tuple
    swarm_mean_payoff: float


def _solver_seed(base, step, agent):
    return int(np.random.SeedSequence([base, step, agent]).generate_state(1)[0])


def run(config: ScenarioConfig) -> list[StepRecord]:
    potentials = make_coverage_potentials(config.roi, config.resolution, config.link)
    actions = config.action_set()
    disp = actions.displacements
    positions = np.array(config.positions)
    records = []
    for step in range(config.steps):
        graph = build_link_graph(positions, config.link)
        states = states_from_positions(positions)
        games, chosen, sols = [], [], []
        for i in range(config.n_agents):
            t0 = time.perf_counter()
            game = build_local_game(i, config.h, graph, states, actions, potentials,
                                    config.weights, config.virtual_neighbors)
            tables = game.energy_tables
            t1 = time.perf_counter()
            solver = config.solver
            if solver.update_order == "seeded_random":
                solver = replace(solver, seed=_solver_seed(config.seed, step, i))
            report = solve_local_game(tables, solver)
            t2 = time.perf_counter()
            profile = best_response_profile(report.marginals)
            games.append(game)
            chosen.append(profile[game.member_index(i)])
            sols.append((profile, report.sweeps_used, t2 - t1, t1 - t0))

        positions = positions + disp[np.array(chosen)]
        agents = []
        for i, game in enumerate(games):
            profile, sweeps, t_solve, t_payoff = sols[i]
            executed = [chosen[j] for j in game.members]
            payoff = -game.energy_tables.energy(executed)
            inferred = {j: profile[r] for r, j in enumerate(game.members) if j != i}
            agents.append(AgentStep(
                agent_id=i,
                position=positions[i].copy(),
                action=chosen[i],
                payoff=payoff,
                sweeps=sweeps,
                solve_time_s=t_solve,
                payoff_time_s=t_payoff,
                inferred=inferred,
            ))
        mean_payoff = float(np.mean([a.payoff for a in agents]))
        records.append(StepRecord(step=step, agents=tuple(agents), swarm_mean_payoff=mean_payoff))
        log.debug("step %d: mean payoff %.6f", step, mean_payoff)
    return records


def consensus_metric(records) -> list[float]:
    """Fraction of (agent, neighbor) pairs where the agent's inferred action
    for the neighbor matches what the neighbor executed; 1 when there are
    no pairs."""
    out = []
    for rec in records:
        executed = {a.agent_id: a.action for a in rec.agents}
        hits = total = 0
        for a in rec.agents:
            for j, x in a.inferred.items():
                total += 1
                hits += x == executed[j]
        out.append(hits / total if total else 1.0)
    return out


def default_scenario(n_agents: int = 3, seed: int = 0, center=(-300.0, -300.0),
                     spread_m: float = 100.0, altitude_m: float = 30.0, **overrides) -> ScenarioConfig:
    """Agents dropped uniformly in a ``spread_m`` square around ``center``,
    away from the ROI at the origin."""
    rng = np.random.default_rng(seed)
    xy = np.asarray(center, dtype=np.float64) + (rng.random((n_agents, 2)) - 0.5) * spread_m
    positions = np.column_stack([xy, np.full(n_agents, altitude_m)])
    return ScenarioConfig(positions=positions, seed=seed, **overrides)

"""Decentralized stage graphical games for networked swarms."""
from .kernels import BACKEND
from .topology import (UNREACHABLE, LinkModelParams, Neighborhood, Position, TopologyGraph,
                       build_link_graph, connectivity_sweep, neighborhood, received_power)
from .game import (ActionSet, EnergyTables, LocalGame, PayoffWeights, PotentialPair, RobotState,
                   TabularGame, build_local_game, joint_payoff, virtual_mean_state)
from .meanfield import (MarginalSet, SolverConfig, SolveReport, best_response_profile, oracle_exact,
                        solve_local_game)
from .coverage import RoiGaussian, build_grid, make_coverage_potentials
from .sim import ScenarioConfig, consensus_metric, default_scenario, run

__version__ = "0.1.0"

"""Communication topology: link model, hop counts and h-hop neighborhoods.

Links are formed by thresholding a log-distance (Friis) received-power model.
Hop counts stand in for a proactive routing table (shortest paths on the
link graph, which is what such tables converge to).
"""
import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from . import kernels
from .kernels import UNREACHABLE

__all__ = [
    "UNREACHABLE",
    "Position",
    "LinkModelParams",
    "TopologyGraph",
    "Neighborhood",
    "SweepRecord",
    "received_power",
    "build_link_graph",
    "neighborhood",
    "connectivity_sweep",
    "as_positions",
]


class Position(NamedTuple):
    x: float
    y: float
    z: float


def as_positions(positions) -> np.ndarray:
    """Coerce a sequence of 3-vectors to a finite (N, 3) float array."""
    arr = np.array(positions, dtype=np.float64, ndmin=2)
    if arr.size == 0:
        return arr.reshape(0, 3)
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise ValueError(f"positions must have shape (N, 3), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("positions must be finite")
    return np.ascontiguousarray(arr)


@dataclass(frozen=True)
class LinkModelParams:
    """Log-distance path loss with a receiver-sensitivity link threshold.

    Defaults: 16.02 dBm transmitters, 46.67 dB free-space loss at 1 m
    (5 GHz carrier), exponent 2, -85 dBm sensitivity.
    """

    tx_power_dbm: float = 16.02
    ref_loss_db: float = 46.67
    path_loss_exponent: float = 2.0
    rx_sensitivity_dbm: float = -85.0
    ref_distance_m: float = 1.0

    def __post_init__(self):
        for name in ("tx_power_dbm", "ref_loss_db", "path_loss_exponent",
                     "rx_sensitivity_dbm", "ref_distance_m"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if self.path_loss_exponent < 1:
            raise ValueError("path_loss_exponent must be >= 1")
        if self.ref_distance_m <= 0:
            raise ValueError("ref_distance_m must be > 0")
        if self.rx_sensitivity_dbm >= self.tx_power_dbm:
            raise ValueError("rx_sensitivity_dbm must be below tx_power_dbm")

    @property
    def peak_power_dbm(self) -> float:
        """Received power at (or inside) the reference distance."""
        return self.tx_power_dbm - self.ref_loss_db

    def link_range_m(self) -> float:
        """Distance at which received power falls to the sensitivity threshold."""
        margin = self.peak_power_dbm - self.rx_sensitivity_dbm
        return self.ref_distance_m * 10.0 ** (margin / (10.0 * self.path_loss_exponent))


def received_power(params: LinkModelParams, d: float) -> float:
    """Received power in dBm at distance ``d`` meters.

    Distances below the reference distance are clamped to it.
    """
    d = float(d)
    if not math.isfinite(d):
        raise ValueError(f"distance must be finite, got {d}")
    if d < 0:
        raise ValueError(f"distance must be non-negative, got {d}")
    d_eff = max(d, params.ref_distance_m) / params.ref_distance_m
    return params.tx_power_dbm - params.ref_loss_db - 10.0 * params.path_loss_exponent * math.log10(d_eff)


@dataclass(frozen=True, eq=False)
class TopologyGraph:
    adjacency: np.ndarray
    hops: np.ndarray

    @property
    def n_agents(self) -> int:
        return self.adjacency.shape[0]

    def degree(self) -> np.ndarray:
        return self.adjacency.sum(axis=1)

    def reachable(self, i: int, j: int) -> bool:
        return self.hops[i, j] != UNREACHABLE


def _pairwise_distances(pos: np.ndarray) -> np.ndarray:
    diff = pos[:, None, :] - pos[None, :, :]
    return np.sqrt(np.sum(diff * diff, axis=-1))


def _adjacency(pos: np.ndarray, params: LinkModelParams) -> np.ndarray:
    d = np.maximum(_pairwise_distances(pos), params.ref_distance_m)
    power = params.peak_power_dbm - 10.0 * params.path_loss_exponent * np.log10(d / params.ref_distance_m)
    adj = power >= params.rx_sensitivity_dbm
    np.fill_diagonal(adj, False)
    return adj


def build_link_graph(positions, params: LinkModelParams) -> TopologyGraph:
    pos = as_positions(positions)
    if pos.shape[0] == 0:
        raise ValueError("at least one position is required")
    adj = _adjacency(pos, params)
    hops = kernels.bfs_hops(np.ascontiguousarray(adj, dtype=np.uint8))
    adj.setflags(write=False)
    hops.setflags(write=False)
    return TopologyGraph(adjacency=adj, hops=hops)


@dataclass(frozen=True)
class Neighborhood:
    owner: int
    h: int
    members: tuple

    def __contains__(self, j) -> bool:
        return j in self.members

    def __len__(self) -> int:
        return len(self.members)

    def index(self, j: int) -> int:
        return self.members.index(j)


def neighborhood(graph: TopologyGraph, i: int, h: int) -> Neighborhood:
    """Agent ``i`` together with every agent within ``h`` hops, ordered by id."""
    if h < 1:
        raise ValueError(f"h must be >= 1, got {h}")
    if not 0 <= i < graph.n_agents:
        raise IndexError(f"agent {i} out of range for {graph.n_agents} agents")
    row = graph.hops[i]
    members = np.flatnonzero((row <= h) | (np.arange(graph.n_agents) == i))
    return Neighborhood(owner=int(i), h=int(h), members=tuple(int(j) for j in members))


@dataclass(frozen=True)
class SweepRecord:
    spacing_m: float
    avg_direct_neighbors: float
    avg_hop_count: float  # NaN when no pair is reachable
    reachable_pair_fraction: float


def connectivity_sweep(
    n_agents: int,
    params: LinkModelParams,
    spacings: Sequence[float],
    trials: int = 100,
    seed: int = 0,
    altitude_m: float = 0.0,
) -> list[SweepRecord]:
    """Average degree and hop count of random placements against region size.

    For each trial, agents are drawn uniformly in the unit square once and
    scaled to every spacing, so all spacings see the same layouts.
    """
    if n_agents < 2:
        raise ValueError("n_agents must be >= 2")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    spacings = [float(s) for s in spacings]
    if not spacings:
        raise ValueError("spacings must not be empty")
    if any(not math.isfinite(s) or s < 0 for s in spacings):
        raise ValueError("spacings must be finite and non-negative")

    rng = np.random.default_rng(seed)
    layouts = rng.random((trials, n_agents, 2))
    n_pairs = n_agents * (n_agents - 1)
    off_diag = ~np.eye(n_agents, dtype=bool)

    records = []
    for spacing in spacings:
        degree_sum = 0.0
        hop_sum = 0
        reachable = 0
        for t in range(trials):
            pos = np.empty((n_agents, 3))
            pos[:, :2] = layouts[t] * spacing
            pos[:, 2] = altitude_m
            graph = build_link_graph(pos, params)
            degree_sum += graph.adjacency.sum() / n_agents
            h = graph.hops[off_diag]
            ok = h != UNREACHABLE
            hop_sum += int(h[ok].sum())
            reachable += int(ok.sum())
        records.append(SweepRecord(
            spacing_m=spacing,
            avg_direct_neighbors=degree_sum / trials,
            avg_hop_count=hop_sum / reachable if reachable else math.nan,
            reachable_pair_fraction=reachable / (n_pairs * trials),
        ))
    return records

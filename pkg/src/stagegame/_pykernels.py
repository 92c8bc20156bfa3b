"""Pure numpy implementations of the hot kernels.

Every function here has a twin of the same signature in ``_ckernels.pyx``.
Array arguments are expected to be C-contiguous float64 / int64 / uint8.
"""
import numpy as np

UNREACHABLE = np.iinfo(np.int32).max


def bfs_hops(adjacency):
    n = adjacency.shape[0]
    hops = np.full((n, n), UNREACHABLE, dtype=np.int64)
    neighbors = [np.flatnonzero(adjacency[i]) for i in range(n)]
    for source in range(n):
        row = hops[source]
        row[source] = 0
        frontier = [source]
        depth = 0
        while frontier:
            depth += 1
            nxt = []
            for u in frontier:
                for v in neighbors[u]:
                    if row[v] == UNREACHABLE:
                        row[v] = depth
                        nxt.append(v)
            frontier = nxt
    return hops


def received_power_field(points, grid_xy, tx_power, ref_loss, exponent, ref_distance):
    """Received power (dBm) from each 3-D point to each ground grid point, shape (K, G)."""
    dx = points[:, 0:1] - grid_xy[None, :, 0]
    dy = points[:, 1:2] - grid_xy[None, :, 1]
    dz = points[:, 2:3]
    d = np.sqrt(dx * dx + dy * dy + dz * dz)
    d = np.maximum(d, ref_distance)
    return tx_power - ref_loss - 10.0 * exponent * np.log10(d / ref_distance)


def max_power_field(points, grid_xy, tx_power, ref_loss, exponent, ref_distance):
    if points.shape[0] == 0:
        return np.full(grid_xy.shape[0], -np.inf)
    field = received_power_field(points, grid_xy, tx_power, ref_loss, exponent, ref_distance)
    return field.max(axis=0)


def coverage_sums(candidates, grid_xy, weights, floor_field, tx_power, ref_loss, exponent, ref_distance):
    field = received_power_field(candidates, grid_xy, tx_power, ref_loss, exponent, ref_distance)
    return np.maximum(field, floor_field[None, :]) @ weights


def _member_energy(unary, pairwise, n_actions, q, j):
    a = n_actions[j]
    e = unary[j, :a].copy()
    for k in range(unary.shape[0]):
        if k != j:
            b = n_actions[k]
            e += pairwise[j, k, :a, :b] @ q[k, :b]
    return e


def mf_sweep(unary, pairwise, n_actions, q, order):
    """One Gauss-Seidel pass of mean-field updates, overwriting rows of ``q``."""
    for j in order:
        a = n_actions[j]
        e = _member_energy(unary, pairwise, n_actions, q, j)
        w = np.exp(-(e - e.min()))
        q[j, :a] = w / w.sum()


def free_energy(unary, pairwise, n_actions, q):
    m = unary.shape[0]
    total = 0.0
    for j in range(m):
        a = n_actions[j]
        qj = q[j, :a]
        total += qj @ unary[j, :a]
        nz = qj > 0
        total += np.sum(qj[nz] * np.log(qj[nz]))
        for k in range(j + 1, m):
            b = n_actions[k]
            total += qj @ pairwise[j, k, :a, :b] @ q[k, :b]
    return float(total)

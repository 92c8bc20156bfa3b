# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled twins of the kernels in ``_pykernels``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, log10, exp, log, INFINITY

cnp.import_array()

UNREACHABLE = np.iinfo(np.int32).max


def bfs_hops(const unsigned char[:, ::1] adjacency):
    cdef Py_ssize_t n = adjacency.shape[0]
    cdef cnp.int64_t unreachable = UNREACHABLE
    hops_arr = np.full((n, n), unreachable, dtype=np.int64)
    cdef cnp.int64_t[:, ::1] hops = hops_arr
    cdef cnp.int64_t[::1] queue = np.empty(max(n, 1), dtype=np.int64)
    cdef Py_ssize_t source, head, tail, u, v
    for source in range(n):
        hops[source, source] = 0
        queue[0] = source
        head = 0
        tail = 1
        while head < tail:
            u = queue[head]
            head += 1
            for v in range(n):
                if adjacency[u, v] and hops[source, v] == unreachable:
                    hops[source, v] = hops[source, u] + 1
                    queue[tail] = v
                    tail += 1
    return hops_arr


cdef inline double _power(double px, double py, double pz, double gx, double gy,
                          double tx_power, double ref_loss, double exponent,
                          double ref_distance) nogil:
    cdef double dx = px - gx
    cdef double dy = py - gy
    cdef double d = sqrt(dx * dx + dy * dy + pz * pz)
    if d < ref_distance:
        d = ref_distance
    return tx_power - ref_loss - 10.0 * exponent * log10(d / ref_distance)


def received_power_field(const double[:, ::1] points, const double[:, ::1] grid_xy,
                         double tx_power, double ref_loss, double exponent, double ref_distance):
    cdef Py_ssize_t k, g, n_pts = points.shape[0], n_grid = grid_xy.shape[0]
    out_arr = np.empty((n_pts, n_grid), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    with nogil:
        for k in range(n_pts):
            for g in range(n_grid):
                out[k, g] = _power(points[k, 0], points[k, 1], points[k, 2],
                                   grid_xy[g, 0], grid_xy[g, 1],
                                   tx_power, ref_loss, exponent, ref_distance)
    return out_arr


def max_power_field(const double[:, ::1] points, const double[:, ::1] grid_xy,
                    double tx_power, double ref_loss, double exponent, double ref_distance):
    cdef Py_ssize_t k, g, n_pts = points.shape[0], n_grid = grid_xy.shape[0]
    cdef double v
    out_arr = np.full(n_grid, -np.inf, dtype=np.float64)
    cdef double[::1] out = out_arr
    with nogil:
        for k in range(n_pts):
            for g in range(n_grid):
                v = _power(points[k, 0], points[k, 1], points[k, 2],
                           grid_xy[g, 0], grid_xy[g, 1],
                           tx_power, ref_loss, exponent, ref_distance)
                if v > out[g]:
                    out[g] = v
    return out_arr


def coverage_sums(const double[:, ::1] candidates, const double[:, ::1] grid_xy,
                  const double[::1] weights, const double[::1] floor_field,
                  double tx_power, double ref_loss, double exponent, double ref_distance):
    cdef Py_ssize_t k, g, n_pts = candidates.shape[0], n_grid = grid_xy.shape[0]
    cdef double v, acc
    out_arr = np.empty(n_pts, dtype=np.float64)
    cdef double[::1] out = out_arr
    with nogil:
        for k in range(n_pts):
            acc = 0.0
            for g in range(n_grid):
                v = _power(candidates[k, 0], candidates[k, 1], candidates[k, 2],
                           grid_xy[g, 0], grid_xy[g, 1],
                           tx_power, ref_loss, exponent, ref_distance)
                if floor_field[g] > v:
                    v = floor_field[g]
                acc += weights[g] * v
            out[k] = acc
    return out_arr


def mf_sweep(const double[:, ::1] unary, const double[:, :, :, ::1] pairwise,
             const cnp.int64_t[::1] n_actions, double[:, ::1] q, const cnp.int64_t[::1] order):
    cdef Py_ssize_t m = unary.shape[0], width = unary.shape[1]
    cdef Py_ssize_t t, j, k, x, y, a, b
    cdef double acc, lo, z
    cdef double[::1] e = np.empty(max(width, 1), dtype=np.float64)
    with nogil:
        for t in range(order.shape[0]):
            j = order[t]
            a = n_actions[j]
            for x in range(a):
                e[x] = unary[j, x]
            for k in range(m):
                if k == j:
                    continue
                b = n_actions[k]
                for x in range(a):
                    acc = 0.0
                    for y in range(b):
                        acc += pairwise[j, k, x, y] * q[k, y]
                    e[x] += acc
            lo = INFINITY
            for x in range(a):
                if e[x] < lo:
                    lo = e[x]
            z = 0.0
            for x in range(a):
                e[x] = exp(-(e[x] - lo))
                z += e[x]
            for x in range(a):
                q[j, x] = e[x] / z


def free_energy(const double[:, ::1] unary, const double[:, :, :, ::1] pairwise,
                const cnp.int64_t[::1] n_actions, const double[:, ::1] q):
    cdef Py_ssize_t m = unary.shape[0]
    cdef Py_ssize_t j, k, x, y, a, b
    cdef double total = 0.0, acc
    with nogil:
        for j in range(m):
            a = n_actions[j]
            for x in range(a):
                total += q[j, x] * unary[j, x]
                if q[j, x] > 0.0:
                    total += q[j, x] * log(q[j, x])
            for k in range(j + 1, m):
                b = n_actions[k]
                for x in range(a):
                    acc = 0.0
                    for y in range(b):
                        acc += pairwise[j, k, x, y] * q[k, y]
                    total += q[j, x] * acc
    return total

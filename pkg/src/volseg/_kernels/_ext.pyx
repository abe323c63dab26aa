# Compiled kernels for the per-case metric hot loops: surface voxel
# extraction, confusion counting, and exact nearest-surface distances.
# Must stay numerically interchangeable with _pure.py.

import numpy as np

cimport numpy as cnp
from libc.math cimport sqrt

cnp.import_array()

name = "ext"


def surface_mask(vox):
    """Boolean volume marking 6-connected surface voxels (OOB = background)."""
    cdef const cnp.uint8_t[:, :, ::1] v = np.ascontiguousarray(vox, dtype=np.uint8)
    cdef Py_ssize_t nx = v.shape[0], ny = v.shape[1], nz = v.shape[2]
    out_arr = np.zeros((nx, ny, nz), dtype=bool)
    cdef cnp.uint8_t[:, :, ::1] out = out_arr.view(np.uint8)
    cdef Py_ssize_t x, y, z
    cdef bint edge
    for x in range(nx):
        for y in range(ny):
            for z in range(nz):
                if v[x, y, z] == 0:
                    continue
                edge = (
                    x == 0 or v[x - 1, y, z] == 0 or
                    x == nx - 1 or v[x + 1, y, z] == 0 or
                    y == 0 or v[x, y - 1, z] == 0 or
                    y == ny - 1 or v[x, y + 1, z] == 0 or
                    z == 0 or v[x, y, z - 1] == 0 or
                    z == nz - 1 or v[x, y, z + 1] == 0
                )
                if edge:
                    out[x, y, z] = 1
    return out_arr


def confusion_counts(pred, ref):
    """(tp, fp, fn, tn) voxel counts over the whole grid."""
    cdef const cnp.uint8_t[::1] p = np.ascontiguousarray(pred, dtype=np.uint8).ravel()
    cdef const cnp.uint8_t[::1] r = np.ascontiguousarray(ref, dtype=np.uint8).ravel()
    if p.shape[0] != r.shape[0]:
        raise ValueError("pred and ref must have the same size")
    cdef Py_ssize_t i, n = p.shape[0]
    cdef long long tp = 0, fp = 0, fn = 0
    for i in range(n):
        if p[i]:
            if r[i]:
                tp += 1
            else:
                fp += 1
        elif r[i]:
            fn += 1
    return int(tp), int(fp), int(fn), int(n - tp - fp - fn)


def min_dists(query, target):
    """Exact nearest-target Euclidean distance for each query point.

    Targets are pre-sorted along the widest-spread axis; each query
    binary-searches its position on that axis and expands outward,
    pruning once the axis gap alone exceeds the best distance found.
    Exact for any input.
    """
    q_arr = np.ascontiguousarray(query, dtype=np.float64)
    t_arr = np.ascontiguousarray(target, dtype=np.float64)
    if t_arr.shape[0] == 0:
        raise ValueError("target point set is empty")
    axis = int(np.argmax(t_arr.max(axis=0) - t_arr.min(axis=0))) if t_arr.shape[0] > 1 else 0
    if axis != 0:
        perm = [axis] + [a for a in range(3) if a != axis]
        q_arr = np.ascontiguousarray(q_arr[:, perm])
        t_arr = np.ascontiguousarray(t_arr[:, perm])
    order = np.argsort(t_arr[:, 0], kind="stable")
    t_sorted = np.ascontiguousarray(t_arr[order])

    cdef const double[:, ::1] q = q_arr
    cdef const double[:, ::1] t = t_sorted
    cdef Py_ssize_t n = q.shape[0], m = t.shape[0]
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_arr

    cdef Py_ssize_t i, j, lo, hi, mid
    cdef double qx, qy, qz, dx, dy, dz, d2, best
    for i in range(n):
        qx = q[i, 0]; qy = q[i, 1]; qz = q[i, 2]
        # first sorted target with x >= qx
        lo = 0; hi = m
        while lo < hi:
            mid = (lo + hi) // 2
            if t[mid, 0] < qx:
                lo = mid + 1
            else:
                hi = mid
        best = -1.0
        # sweep right
        j = lo
        while j < m:
            dx = t[j, 0] - qx
            if best >= 0.0 and dx * dx > best:
                break
            dy = t[j, 1] - qy; dz = t[j, 2] - qz
            d2 = dx * dx + dy * dy + dz * dz
            if best < 0.0 or d2 < best:
                best = d2
            j += 1
        # sweep left
        j = lo - 1
        while j >= 0:
            dx = qx - t[j, 0]
            if best >= 0.0 and dx * dx > best:
                break
            dy = t[j, 1] - qy; dz = t[j, 2] - qz
            d2 = dx * dx + dy * dy + dz * dz
            if best < 0.0 or d2 < best:
                best = d2
            j -= 1
        out[i] = sqrt(best)
    return out_arr

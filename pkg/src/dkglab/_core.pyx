# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: multistart Newton for the three-equation system and the
brute-force nonexistence scans.

Same grids, return values and conventions as ``dkglab._pycore``.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, isfinite

cnp.import_array()


cdef inline void cleared(double x, double y, double z, double* f) noexcept nogil:
    cdef double p = x * y * z
    cdef double ax = (1 - x * x) * (1 - x * x)
    cdef double ay = (1 - y * y) * (1 - y * y)
    cdef double az = (1 - z * z) * (1 - z * z)
    cdef double yz = y * z, xz = x * z, xy = x * y
    f[0] = 7.0 * p - (x + y + z) * p - (yz + xz + xy)
    f[1] = ax * yz * yz * yz + ay * xz * xz * xz + az * xy * xy * xy
    f[2] = third(x, y, z)


cdef inline double third(double x, double y, double z) noexcept nogil:
    cdef double b = (1 - x * x) * (1 - x * x) * (1 - x * x)
    cdef double y2 = y * y, z2 = z * z
    cdef double y5 = y2 * y2 * y, z5 = z2 * z2 * z
    cdef double x5 = x * x * x * x * x
    cdef double dd = z2 - y2
    return b * y5 * z5 * (7.0 - 2.0 * (x + y + z)) + x5 * (1 - y2) * (1 - z2) * dd * dd


cdef inline void cleared_jac(double x, double y, double z, double* j) noexcept nogil:
    cdef double p = x * y * z
    cdef double s = x + y + z
    j[0] = 7 * y * z - p - s * y * z - y - z
    j[1] = 7 * x * z - p - s * x * z - x - z
    j[2] = 7 * x * y - p - s * x * y - x - y
    cdef double ax = (1 - x * x) * (1 - x * x)
    cdef double ay = (1 - y * y) * (1 - y * y)
    cdef double az = (1 - z * z) * (1 - z * z)
    cdef double dax = -4 * x * (1 - x * x)
    cdef double day = -4 * y * (1 - y * y)
    cdef double daz = -4 * z * (1 - z * z)
    cdef double x3 = x * x * x, y3 = y * y * y, z3 = z * z * z
    j[3] = dax * y3 * z3 + 3 * x * x * (ay * z3 + az * y3)
    j[4] = day * x3 * z3 + 3 * y * y * (ax * z3 + az * x3)
    j[5] = daz * x3 * y3 + 3 * z * z * (ax * y3 + ay * x3)
    cdef double b = (1 - x * x) * (1 - x * x) * (1 - x * x)
    cdef double db = -6.0 * x * (1 - x * x) * (1 - x * x)
    cdef double lin = 7.0 - 2.0 * s
    cdef double cy = 1 - y * y, cz = 1 - z * z
    cdef double dd = z * z - y * y
    cdef double y4 = y * y * y * y, z4 = z * z * z * z
    cdef double y5z5 = y4 * y * z4 * z
    cdef double x4 = x * x * x * x
    cdef double x5 = x4 * x
    j[6] = db * y5z5 * lin - 2.0 * b * y5z5 + 5.0 * x4 * cy * cz * dd * dd
    j[7] = (5.0 * b * y4 * z4 * z * lin - 2.0 * b * y5z5
            - 2.0 * y * x5 * cz * dd * dd - 4.0 * y * x5 * cy * cz * dd)
    j[8] = (5.0 * b * y4 * y * z4 * lin - 2.0 * b * y5z5
            - 2.0 * z * x5 * cy * dd * dd + 4.0 * z * x5 * cy * cz * dd)


cdef inline double rownorm(double* j, int r) noexcept nogil:
    return (j[3 * r] * j[3 * r] + j[3 * r + 1] * j[3 * r + 1] + j[3 * r + 2] * j[3 * r + 2]) ** 0.5


cdef inline bint solve3(double* j, double* f, double* out) noexcept nogil:
    # Cramer's rule; refuse near-singular systems like the numpy path
    cdef double det = (j[0] * (j[4] * j[8] - j[5] * j[7])
                       - j[1] * (j[3] * j[8] - j[5] * j[6])
                       + j[2] * (j[3] * j[7] - j[4] * j[6]))
    cdef double scale = rownorm(j, 0) * rownorm(j, 1) * rownorm(j, 2)
    if not (fabs(det) > 1e-14 * scale):
        return False
    out[0] = (f[0] * (j[4] * j[8] - j[5] * j[7])
              - j[1] * (f[1] * j[8] - j[5] * f[2])
              + j[2] * (f[1] * j[7] - j[4] * f[2])) / det
    out[1] = (j[0] * (f[1] * j[8] - j[5] * f[2])
              - f[0] * (j[3] * j[8] - j[5] * j[6])
              + j[2] * (j[3] * f[2] - f[1] * j[6])) / det
    out[2] = (j[0] * (j[4] * f[2] - f[1] * j[7])
              - j[1] * (j[3] * f[2] - f[1] * j[6])
              + f[0] * (j[3] * j[7] - j[4] * j[6])) / det
    return True


def newton_appendix(starts, int maxit=200, double tol=1e-13):
    cdef double[:, ::1] x = np.array(starts, dtype=np.float64, order="C", copy=True)
    cdef Py_ssize_t n = x.shape[0]
    conv_arr = np.zeros(n, dtype=np.uint8)
    cdef unsigned char[::1] conv = conv_arr
    cdef double f[3]
    cdef double fc[3]
    cdef double jac[9]
    cdef double step[3]
    cdef double px, py, pz, cx, cy, cz, merit, alpha, moved, big
    cdef Py_ssize_t i
    cdef int it, h
    cdef bint accepted
    with nogil:
        for i in range(n):
            px = x[i, 0]; py = x[i, 1]; pz = x[i, 2]
            for it in range(maxit):
                cleared(px, py, pz, f)
                cleared_jac(px, py, pz, jac)
                if not solve3(jac, f, step):
                    break
                if not (isfinite(step[0]) and isfinite(step[1]) and isfinite(step[2])):
                    break
                merit = f[0] * f[0] + f[1] * f[1] + f[2] * f[2]
                alpha = 1.0
                accepted = False
                for h in range(31):
                    cx = px - alpha * step[0]
                    cy = py - alpha * step[1]
                    cz = pz - alpha * step[2]
                    cleared(cx, cy, cz, fc)
                    if fc[0] * fc[0] + fc[1] * fc[1] + fc[2] * fc[2] < merit:
                        accepted = True
                        break
                    alpha *= 0.5
                if not accepted:
                    cx = px - alpha * step[0]
                    cy = py - alpha * step[1]
                    cz = pz - alpha * step[2]
                moved = max(fabs(cx - px), max(fabs(cy - py), fabs(cz - pz)))
                big = max(fabs(cx), max(fabs(cy), fabs(cz)))
                px = cx; py = cy; pz = cz
                if moved <= tol * (1.0 + big):
                    conv[i] = 1
                    break
                if not (isfinite(big)) or big > 1e8:
                    break
            x[i, 0] = px; x[i, 1] = py; x[i, 2] = pz
    return np.asarray(x), conv_arr.astype(bool)


cdef inline void d2_eqs(double c1, double c2, double* e) noexcept nogil:
    e[0] = c1 * c2 * (5.0 - c1 - c2) - (c1 + c2)
    e[1] = (1 - c1 * c1) * (1 - c1 * c1) * c2 * c2 * c2 + (1 - c2 * c2) * (1 - c2 * c2) * c1 * c1 * c1


def d2_scan(int grid_n):
    cdef Py_ssize_t n = grid_n
    e2_arr = np.empty((n, n))
    e3_arr = np.empty((n, n))
    cdef double[:, ::1] e2 = e2_arr
    cdef double[:, ::1] e3 = e3_arr
    cdef double e[2]
    cdef double best = 1e300, r, c1, c2
    cdef Py_ssize_t i, j, bi = 0, bj = 0
    with nogil:
        for i in range(n):
            c1 = (i + 0.5) / n
            for j in range(n):
                c2 = -(j + 0.5) / n
                d2_eqs(c1, c2, e)
                e2[i, j] = e[0]
                e3[i, j] = e[1]
                r = fabs(e[0]) + fabs(e[1])
                if r < best:
                    best = r
                    bi = i
                    bj = j
    cells = []
    cdef double lo2, hi2, lo3, hi3, v
    cdef int a, b
    for i in range(n - 1):
        for j in range(n - 1):
            lo2 = hi2 = e2[i, j]
            lo3 = hi3 = e3[i, j]
            for a in range(2):
                for b in range(2):
                    v = e2[i + a, j + b]
                    lo2 = min(lo2, v); hi2 = max(hi2, v)
                    v = e3[i + a, j + b]
                    lo3 = min(lo3, v); hi3 = max(hi3, v)
            if lo2 <= 0 <= hi2 and lo3 <= 0 <= hi3:
                cells.append((i, j))
    cells_arr = np.array(cells, dtype=np.int64).reshape(-1, 2)
    return float(best), ((bi + 0.5) / n, -(bj + 0.5) / n), cells_arr


def d3_scan(int grid_n):
    cdef Py_ssize_t n = grid_n
    nodes_arr = -1.0 + (2.0 * np.arange(n) + 1.0) / n
    cdef double[::1] nodes = nodes_arr
    prev_arr = np.empty((n, n, 3))
    cur_arr = np.empty((n, n, 3))
    cdef double[:, :, ::1] prev = prev_arr
    cdef double[:, :, ::1] cur = cur_arr
    cdef double[:, :, ::1] tmp
    cdef double f[3]
    cdef double best = 1e300, r, lo, hi, v
    cdef Py_ssize_t i, j, l, bi = 0, bj = 0, bl = 0
    cdef int e, a, b, c
    cdef bint flag
    cells = []
    for i in range(n):
        with nogil:
            for j in range(n):
                for l in range(n):
                    cleared(nodes[i], nodes[j], nodes[l], f)
                    cur[j, l, 0] = f[0]
                    cur[j, l, 1] = f[1]
                    cur[j, l, 2] = f[2]
                    r = fabs(f[0]) + fabs(f[1]) + fabs(f[2])
                    if r < best:
                        best = r
                        bi = i; bj = j; bl = l
        if i > 0 and (nodes[i - 1] > 0) == (nodes[i] > 0):
            for j in range(n - 1):
                if (nodes[j] > 0) != (nodes[j + 1] > 0):
                    continue
                for l in range(n - 1):
                    if (nodes[l] > 0) != (nodes[l + 1] > 0):
                        continue
                    flag = True
                    for e in range(3):
                        lo = 1e300
                        hi = -1e300
                        for a in range(2):
                            for b in range(2):
                                v = prev[j + a, l + b, e]
                                lo = min(lo, v); hi = max(hi, v)
                                v = cur[j + a, l + b, e]
                                lo = min(lo, v); hi = max(hi, v)
                        if not (lo <= 0 <= hi):
                            flag = False
                            break
                    if flag:
                        cells.append((i - 1, j, l))
        tmp = prev
        prev = cur
        cur = tmp
    cells_arr = np.array(cells, dtype=np.int64).reshape(-1, 3)
    point = (float(nodes[bi]), float(nodes[bj]), float(nodes[bl]))
    return float(best), point, cells_arr

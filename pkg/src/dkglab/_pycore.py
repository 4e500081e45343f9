"""Pure numpy kernels: the fallback for the compiled ``_core`` extension.

Both modules expose the same three entry points (``newton_appendix``,
``d2_scan``, ``d3_scan``) with identical grids and return conventions; the
equation helpers below are shared with the rest of the package.
"""
from __future__ import annotations

import numpy as np

# ---------------------------------------------------------------------------
# the three-equation system in (x, y, z) = (c1, c2, c3)
# ---------------------------------------------------------------------------


def appendix_cleared(x, y, z):
    """Denominator-cleared system (first equation times xyz, second times x^3 y^3 z^3)."""
    x, y, z = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (x, y, z)))
    p = x * y * z
    f1 = 7.0 * p - (x + y + z) * p - (y * z + x * z + x * y)
    ax, ay, az = (1 - x * x) ** 2, (1 - y * y) ** 2, (1 - z * z) ** 2
    f2 = ax * (y * z) ** 3 + ay * (x * z) ** 3 + az * (x * y) ** 3
    f3 = _third(x, y, z)
    return np.stack([f1, f2, f3], axis=-1)


def appendix_raw(x, y, z):
    """The system as written, with the reciprocal terms left in place."""
    x, y, z = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (x, y, z)))
    g1 = 7.0 - (x + y + z) - 1.0 / x - 1.0 / y - 1.0 / z
    g2 = (1 - x * x) ** 2 / x**3 + (1 - y * y) ** 2 / y**3 + (1 - z * z) ** 2 / z**3
    return np.stack([g1, g2, _third(x, y, z)], axis=-1)


def _third(x, y, z):
    return (1 - x * x) ** 3 * y**5 * z**5 * (7.0 - 2.0 * (x + y + z)) + x**5 * (1 - y * y) * (
        1 - z * z
    ) * (z * z - y * y) ** 2


def appendix_raw_scale(x, y, z):
    """Sum of absolute values of the terms in each raw equation.

    Dividing a residual by this gives a rounding-level number at a root, which
    makes residuals comparable across roots of very different magnitude.
    """
    x, y, z = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (x, y, z)))
    ax, ay, az = np.abs(x), np.abs(y), np.abs(z)
    s1 = 7.0 + ax + ay + az + 1 / ax + 1 / ay + 1 / az
    s2 = (1 - x * x) ** 2 / ax**3 + (1 - y * y) ** 2 / ay**3 + (1 - z * z) ** 2 / az**3
    s3 = np.abs((1 - x * x) ** 3 * y**5 * z**5) * (7.0 + 2.0 * (ax + ay + az)) + np.abs(
        x**5 * (1 - y * y) * (1 - z * z) * (z * z - y * y) ** 2
    )
    return np.stack([s1, s2, s3], axis=-1)


def _third_jac(x, y, z):
    b = (1 - x * x) ** 3
    db = -6.0 * x * (1 - x * x) ** 2
    lin = 7.0 - 2.0 * (x + y + z)
    cy, cz = 1 - y * y, 1 - z * z
    dd = z * z - y * y
    y5z5 = y**5 * z**5
    x5 = x**5
    j1 = db * y5z5 * lin - 2.0 * b * y5z5 + 5.0 * x**4 * cy * cz * dd**2
    j2 = (
        5.0 * b * y**4 * z**5 * lin
        - 2.0 * b * y5z5
        - 2.0 * y * x5 * cz * dd**2
        - 4.0 * y * x5 * cy * cz * dd
    )
    j3 = (
        5.0 * b * y**5 * z**4 * lin
        - 2.0 * b * y5z5
        - 2.0 * z * x5 * cy * dd**2
        + 4.0 * z * x5 * cy * cz * dd
    )
    return j1, j2, j3


def appendix_cleared_jac(x, y, z):
    x, y, z = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (x, y, z)))
    p = x * y * z
    s = x + y + z
    row1 = [
        7 * y * z - p - s * y * z - y - z,
        7 * x * z - p - s * x * z - x - z,
        7 * x * y - p - s * x * y - x - y,
    ]
    ax, ay, az = (1 - x * x) ** 2, (1 - y * y) ** 2, (1 - z * z) ** 2
    dax, day, daz = -4 * x * (1 - x * x), -4 * y * (1 - y * y), -4 * z * (1 - z * z)
    row2 = [
        dax * (y * z) ** 3 + 3 * x * x * (ay * z**3 + az * y**3),
        day * (x * z) ** 3 + 3 * y * y * (ax * z**3 + az * x**3),
        daz * (x * y) ** 3 + 3 * z * z * (ax * y**3 + ay * x**3),
    ]
    row3 = list(_third_jac(x, y, z))
    return np.stack([np.stack(r, axis=-1) for r in (row1, row2, row3)], axis=-2)


def appendix_raw_jac(x, y, z):
    x, y, z = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (x, y, z)))
    row1 = [-1 + 1 / x**2, -1 + 1 / y**2, -1 + 1 / z**2]

    def dg2(u):
        return -4 * (1 - u * u) / u**2 - 3 * (1 - u * u) ** 2 / u**4

    row2 = [dg2(x), dg2(y), dg2(z)]
    row3 = list(_third_jac(x, y, z))
    return np.stack([np.stack(r, axis=-1) for r in (row1, row2, row3)], axis=-2)


def _solve3(jac, rhs):
    """Batched 3x3 solve; rows that are numerically singular come back as nan."""
    det = np.linalg.det(jac)
    scale = np.prod(np.linalg.norm(jac, axis=-1), axis=-1)
    ok = np.abs(det) > 1e-14 * scale
    out = np.full(rhs.shape, np.nan)
    if np.any(ok):
        out[ok] = np.linalg.solve(jac[ok], rhs[ok][..., None])[..., 0]
    return out


def newton_appendix(starts, maxit=200, tol=1e-13):
    """Damped Newton on the cleared system from every row of ``starts``.

    Step halving (up to 30 halvings) enforces a decrease of the 2-norm of the
    cleared residual. Returns ``(points, converged)``; a start converges when
    the Newton step falls below ``tol * (1 + |x|_inf)``.
    """
    x = np.array(starts, dtype=float, copy=True)
    n = x.shape[0]
    active = np.ones(n, dtype=bool)
    converged = np.zeros(n, dtype=bool)
    for _ in range(maxit):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        pts = x[idx]
        f = appendix_cleared(pts[:, 0], pts[:, 1], pts[:, 2])
        jac = appendix_cleared_jac(pts[:, 0], pts[:, 1], pts[:, 2])
        step = _solve3(jac, f)
        bad = ~np.all(np.isfinite(step), axis=-1)
        active[idx[bad]] = False
        keep = ~bad
        idx, pts, f, step = idx[keep], pts[keep], f[keep], step[keep]
        merit = np.sum(f * f, axis=-1)
        alpha = np.ones(idx.size)
        pending = np.ones(idx.size, dtype=bool)
        trial = pts.copy()
        for _h in range(31):
            if not np.any(pending):
                break
            cand = pts[pending] - alpha[pending, None] * step[pending]
            fc = appendix_cleared(cand[:, 0], cand[:, 1], cand[:, 2])
            better = np.sum(fc * fc, axis=-1) < merit[pending]
            sel = np.flatnonzero(pending)
            trial[sel[better]] = cand[better]
            pending[sel[better]] = False
            alpha[pending] *= 0.5
        # no decrease after all halvings: take the tiny step anyway, Newton
        # is stuck and the convergence test below will decide
        trial[pending] = pts[pending] - alpha[pending, None] * step[pending]
        moved = np.max(np.abs(trial - pts), axis=-1)
        x[idx] = trial
        done = moved <= tol * (1.0 + np.max(np.abs(trial), axis=-1))
        converged[idx[done]] = True
        active[idx[done]] = False
        diverged = ~np.all(np.isfinite(trial), axis=-1) | (np.max(np.abs(trial), axis=-1) > 1e8)
        active[idx[diverged]] = False
    return x, converged


# ---------------------------------------------------------------------------
# brute-force scans
# ---------------------------------------------------------------------------


def d2_nodes(grid_n):
    """Cell-centred nodes: c1 in (0, 1), c2 in (-1, 0)."""
    pos = (np.arange(grid_n) + 0.5) / grid_n
    return pos, -pos


def d2_equations(c1, c2):
    """Second equation times c1 c2, and the third equation as written."""
    e2 = c1 * c2 * (5.0 - c1 - c2) - (c1 + c2)
    # same operation order as the compiled core, so exact zeros on c1 = -c2 agree
    a1 = 1 - c1 * c1
    a2 = 1 - c2 * c2
    e3 = a1 * a1 * c2 * c2 * c2 + a2 * a2 * c1 * c1 * c1
    return e2, e3


def _changes_sign(vals, axes):
    return (np.max(vals, axis=axes) >= 0) & (np.min(vals, axis=axes) <= 0)


def _corner_stack_2d(a):
    return np.stack([a[:-1, :-1], a[1:, :-1], a[:-1, 1:], a[1:, 1:]], axis=0)


def d2_scan(grid_n):
    """Minimum of ``|e2| + |e3|`` on the quadrant grid and the sign-change cells.

    A cell is reported when both equations change sign across its four
    corners; cells are returned as the index of their lower corner.
    """
    c1, c2 = d2_nodes(grid_n)
    e2, e3 = d2_equations(c1[:, None], c2[None, :])
    res = np.abs(e2) + np.abs(e3)
    k = int(np.argmin(res))
    i, j = np.unravel_index(k, res.shape)
    both = _changes_sign(_corner_stack_2d(e2), 0) & _changes_sign(_corner_stack_2d(e3), 0)
    cells = np.argwhere(both).astype(np.int64)
    return float(res[i, j]), (float(c1[i]), float(c2[j])), cells


def d3_nodes(grid_n):
    """Cell-centred nodes on (-1, 1); zero is never a node when grid_n is even."""
    return -1.0 + (2.0 * np.arange(grid_n) + 1.0) / grid_n


def _slab(nodes, i):
    x = nodes[i]
    f = appendix_cleared(x, nodes[:, None], nodes[None, :])
    return f


def d3_scan(grid_n):
    """Minimum of ``|F1| + |F2| + |F3|`` (cleared) over the cube grid.

    Also returns the cells (lower-corner indices) on which all three
    equations change sign. Cells straddling a coordinate plane are skipped:
    the cleared system vanishes identically on the coordinate axes, which
    are outside the domain ``c_j != 0``.
    """
    nodes = d3_nodes(grid_n)
    # a cell [nodes[i], nodes[i+1]] is admissible if it does not contain 0
    ok_axis = np.sign(nodes[:-1]) == np.sign(nodes[1:])
    ok2 = ok_axis[:, None] & ok_axis[None, :]
    best = np.inf
    where = (0, 0, 0)
    cells = []
    prev = None
    for i in range(grid_n):
        cur = _slab(nodes, i)
        res = np.sum(np.abs(cur), axis=-1)
        k = int(np.argmin(res))
        if res.flat[k] < best:
            best = float(res.flat[k])
            j, l = np.unravel_index(k, res.shape)
            where = (i, j, l)
        if prev is not None and ok_axis[i - 1]:
            flag = ok2.copy()
            for e in range(3):
                corners = np.concatenate(
                    [_corner_stack_2d(prev[..., e]), _corner_stack_2d(cur[..., e])], axis=0
                )
                flag &= _changes_sign(corners, 0)
            for j, l in np.argwhere(flag):
                cells.append((i - 1, j, l))
        prev = cur
    point = tuple(float(nodes[q]) for q in where)
    return best, point, np.array(cells, dtype=np.int64).reshape(-1, 3)

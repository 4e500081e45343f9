"""Real roots of the three-equation degeneracy system by multistart Newton.

The system in ``(x, y, z) = (c1, c2, c3)`` is

    7 - (x + y + z) - 1/x - 1/y - 1/z = 0
    sum (1 - u^2)^2 / u^3 = 0
    (1 - x^2)^3 y^5 z^5 (7 - 2(x + y + z)) + x^5 (1 - y^2)(1 - z^2)(z^2 - y^2)^2 = 0

It is symmetric under ``y <-> z``. Newton runs on the denominator-cleared
form (smooth everywhere); residuals are reported on the raw form.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from . import _pycore
from .backend import core

KNOWN_ROOTS = np.array(
    [
        [-0.14393882, 0.14491166, 6.90075579],
        [-0.14393882, 6.90075579, 0.14491166],
        [12.69774364, -2.48599556, -0.40225333],
        [12.69774364, -0.40225333, -2.48599556],
    ]
)


@dataclass(frozen=True)
class RootTriple:
    x: float
    y: float
    z: float
    residual: float
    # true when the root is not one of the four tabulated ones
    extra: bool = False

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])

    def swapped(self) -> "RootTriple":
        return RootTriple(self.x, self.z, self.y, self.residual, self.extra)


def appendix_system(x, y, z, cleared: bool = True) -> np.ndarray:
    """Residuals of the three equations; the raw form needs nonzero inputs."""
    if cleared:
        return _pycore.appendix_cleared(x, y, z)
    with np.errstate(divide="ignore", invalid="ignore"):
        return _pycore.appendix_raw(x, y, z)


def scaled_residual(p) -> np.ndarray:
    """Max over equations of ``|raw residual| / sum |terms|``."""
    p = np.atleast_2d(p)
    f = _pycore.appendix_raw(p[:, 0], p[:, 1], p[:, 2])
    s = _pycore.appendix_raw_scale(p[:, 0], p[:, 1], p[:, 2])
    return np.max(np.abs(f) / s, axis=-1)


def polish(p, steps: int = 3) -> np.ndarray:
    """A few full Newton steps on the raw system."""
    p = np.array(p, dtype=float, copy=True)
    for _ in range(steps):
        f = _pycore.appendix_raw(p[:, 0], p[:, 1], p[:, 2])
        j = _pycore.appendix_raw_jac(p[:, 0], p[:, 1], p[:, 2])
        step = _pycore._solve3(j, f)
        ok = np.all(np.isfinite(step), axis=-1)
        p[ok] -= step[ok]
    return p


def _dedupe(p, radius):
    keep = []
    for row in p:
        if all(np.max(np.abs(row - k)) > radius for k in keep):
            keep.append(row)
    return np.array(keep).reshape(-1, 3)


def solve_appendix(
    n_starts: int = 10_000,
    box: float = 15.0,
    seed: int = 0,
    floor: float = 1e-3,
    dedupe_radius: float = 1e-6,
) -> list[RootTriple]:
    """Deduplicated real roots reachable from random starts in ``[-box, box]^3``.

    Starts with any coordinate inside ``(-floor, floor)`` are redrawn, and so
    are converged points there: the cleared system vanishes identically on
    the coordinate axes. Roots are sorted lexicographically; any beyond the
    four tabulated ones carry ``extra=True``.
    """
    if n_starts < 10_000:
        raise ValueError("n_starts must be >= 10^4")
    if box < 15:
        raise ValueError("box must be >= 15")
    rng = np.random.default_rng(seed)
    starts = rng.uniform(-box, box, size=(n_starts, 3))
    small = np.abs(starts) < floor
    while np.any(small):
        starts[small] = rng.uniform(-box, box, size=int(small.sum()))
        small = np.abs(starts) < floor
    x, conv = core.newton_appendix(starts)
    x = x[conv]
    x = x[np.all(np.abs(x) >= floor, axis=-1)]
    if x.shape[0] == 0:
        return []
    x = polish(x)
    x = x[scaled_residual(x) <= 1e-10]
    # round before sorting so nearly equal roots end up adjacent
    x = x[np.lexsort(np.round(x, 6).T[::-1])]
    x = _dedupe(x, dedupe_radius)
    res = scaled_residual(x)
    out = []
    for row, r in zip(x, res):
        extra = not np.any(np.max(np.abs(KNOWN_ROOTS - row), axis=-1) < 1e-4)
        out.append(RootTriple(float(row[0]), float(row[1]), float(row[2]), float(r), extra))
    return out


def swap_pairs(roots: list[RootTriple], tol: float = 1e-6) -> list[tuple[int, int]]:
    """Index pairs ``(i, j)`` with root ``j`` the ``y <-> z`` image of root ``i``."""
    arr = np.array([r.as_array() for r in roots]).reshape(-1, 3)
    pairs = []
    for i, r in enumerate(arr):
        img = r[[0, 2, 1]]
        hit = np.flatnonzero(np.max(np.abs(arr - img), axis=-1) < tol)
        for j in hit:
            if i < j:
                pairs.append((i, int(j)))
    return pairs


def roots_csv(roots: list[RootTriple]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["x", "y", "z", "residual"])
    for r in roots:
        w.writerow([f"{v:.12g}" for v in (r.x, r.y, r.z, r.residual)])
    return buf.getvalue()

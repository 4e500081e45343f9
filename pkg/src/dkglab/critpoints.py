"""Critical points of the kernel phase, their singularity classes, and the two
brute-force nonexistence checks behind the classification.

A frequency ``xi0`` is critical for the ray ``x = v t`` when
``grad omega(xi0) = v``. The class of the phase at ``xi0`` fixes the local
decay rate of the kernel along that ray: ``t^{-(d/2 - index)}``.
"""
from __future__ import annotations

import enum
import json
import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, NamedTuple

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from . import _pycore
from .backend import core
from .dispersion import (
    TWO_PI,
    TrigData,
    det_hessian,
    grad_omega,
    hessian_omega,
    hessian_phi,
    max_group_speed,
    reduce_frequency,
)
from .errors import (
    AmbiguousClassification,
    InvalidCriticalPoint,
    NearLightCone,
    RankDisagreement,
)

TAU_C = 1e-9
TAU_D = 1e-8


class SingularityClass(str, enum.Enum):
    A1 = "A1"
    A2 = "A2"
    A3 = "A3"
    A5 = "A5"
    D4minus = "D4minus"
    T444 = "T444"
    # d=4 with two or no vanishing cosines: only rank >= 3 is established
    CorankOneResidual = "CorankOneResidual"


def _a(k):
    return Fraction(k - 1, 2 * k + 2)


def _d(k):
    return Fraction(k - 2, 2 * k - 2)


SINGULAR_INDEX = {
    SingularityClass.A1: Fraction(0),
    SingularityClass.A2: _a(2),
    SingularityClass.A3: _a(3),
    SingularityClass.A5: _a(5),
    SingularityClass.D4minus: _d(4),
    SingularityClass.T444: Fraction(1, 2),
    SingularityClass.CorankOneResidual: Fraction(1, 2),
}


@dataclass
class CriticalPointReport:
    xi0: np.ndarray
    v: np.ndarray
    trig: TrigData
    hessian_det: float
    hessian_rank: int
    zero_cosine_count: int
    cls: SingularityClass
    singular_index: Fraction
    decay_exponent: Fraction
    log_correction: bool
    degeneracy_margin: float
    ambiguous: bool = False
    notes: list = field(default_factory=list)

    @property
    def d(self) -> int:
        return int(self.xi0.shape[0])

    def to_dict(self) -> dict:
        margin = self.degeneracy_margin
        return {
            "xi0": [float(a) for a in self.xi0],
            "v": [float(a) for a in self.v],
            "c": [float(a) for a in self.trig.c],
            "s": [float(a) for a in self.trig.s],
            "det": float(self.hessian_det),
            "rank": int(self.hessian_rank),
            "zero_cosines": int(self.zero_cosine_count),
            "class": self.cls.value,
            "singular_index": f"{self.singular_index.numerator}/{self.singular_index.denominator}",
            "decay_exponent": f"{self.decay_exponent.numerator}/{self.decay_exponent.denominator}",
            "log_correction": bool(self.log_correction),
            "margin": None if not math.isfinite(margin) else float(margin),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


# ---------------------------------------------------------------------------
# solving grad omega = v
# ---------------------------------------------------------------------------


def _newton_batch(xi, v, maxit=60):
    """Damped Newton for ``grad omega(xi) = v`` on a batch of seeds."""
    xi = xi.copy()
    for _ in range(maxit):
        f = grad_omega(xi) - v
        norm = np.linalg.norm(f, axis=-1)
        if np.all(norm < 1e-15):
            break
        jac = hessian_omega(xi)
        step = np.einsum("nij,nj->ni", np.linalg.pinv(jac, rcond=1e-14), f)
        alpha = np.ones(xi.shape[0])
        pending = np.ones(xi.shape[0], dtype=bool)
        for _h in range(12):
            trial = xi[pending] - alpha[pending, None] * step[pending]
            better = np.linalg.norm(grad_omega(trial) - v, axis=-1) < norm[pending]
            sel = np.flatnonzero(pending)
            xi[sel[better]] = trial[better]
            pending[sel[better]] = False
            if not np.any(pending):
                break
            alpha[pending] *= 0.5
    return xi


def _dedupe_periodic(xi, radius):
    if xi.shape[0] == 0:
        return xi
    # cKDTree needs data strictly inside [0, boxsize)
    pts = reduce_frequency(xi)
    tree = cKDTree(pts, boxsize=TWO_PI)
    pairs = tree.query_pairs(radius, output_type="ndarray")
    n = pts.shape[0]
    graph = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(n, n))
    _, labels = connected_components(graph, directed=False)
    _, first = np.unique(labels, return_index=True)
    return pts[np.sort(first)]


def solve_critical(v, d: int | None = None, seeds_per_axis: int = 8, *, residual_tol=1e-11):
    """All frequencies with ``grad omega(xi) = v`` found from a uniform seed grid.

    Parameters
    ----------
    v : array_like
        Ray velocity.
    d : int, optional
        Dimension; defaults to ``len(v)``.
    seeds_per_axis : int
        Seeds per axis, ``>= 8``; ``seeds_per_axis**d`` Newton runs.

    Returns
    -------
    list of ndarray
        Frequencies in ``[0, 2 pi)^d``, sorted lexicographically. Seeds that do
        not reach ``residual_tol`` are dropped silently.
    """
    v = np.atleast_1d(np.asarray(v, dtype=float))
    d = v.shape[0] if d is None else d
    if v.shape != (d,):
        raise ValueError("velocity must have d components")
    if seeds_per_axis < 8:
        raise ValueError("seeds_per_axis must be >= 8")
    vmax = max_group_speed(d)
    speed = float(np.linalg.norm(v))
    if speed > vmax:
        return []
    if vmax - speed < 1e-3:
        warnings.warn(f"|v| = {speed:.6g} within 1e-3 of the light cone", NearLightCone, stacklevel=2)
    axis = TWO_PI * np.arange(seeds_per_axis) / seeds_per_axis
    grids = np.meshgrid(*([axis] * d), indexing="ij")
    seeds = np.stack([g.ravel() for g in grids], axis=-1)
    # break the exact grid symmetry a little so pinv steps are not stuck on
    # saddles of the residual
    seeds = np.concatenate([seeds, seeds + 0.5 * TWO_PI / seeds_per_axis])
    xi = _newton_batch(seeds, v)
    res = np.linalg.norm(grad_omega(xi) - v, axis=-1)
    good = xi[res <= residual_tol]
    if good.shape[0] == 0:
        return []
    # degenerate roots are only pinned down to about sqrt(residual), so merge
    # them on a wider radius
    smin = np.linalg.svd(hessian_omega(good), compute_uv=False)[:, -1]
    sharp = good[smin >= 1e-3]
    blunt = good[smin < 1e-3]
    out = _dedupe_periodic(sharp, 1e-8)
    if blunt.shape[0]:
        out = np.concatenate([out, _dedupe_periodic(blunt, 1e-4)])
        out = _dedupe_periodic(out, 1e-8)
    order = np.lexsort(out.T[::-1])
    return [out[i] for i in order]


# ---------------------------------------------------------------------------
# classification
# ---------------------------------------------------------------------------


class _Branch:
    """Tracks tested quantities along one path through the decision tree."""

    def __init__(self, tau_d):
        self.tau_d = tau_d
        self.margin = math.inf
        self.ambiguous = False

    def nonzero(self, q, tau) -> bool:
        q = abs(float(q))
        if tau == self.tau_d and self.tau_d / 10 < q < self.tau_d:
            self.ambiguous = True
        self.margin = min(self.margin, q)
        return q > tau


def _numerical_rank(h):
    sv = np.linalg.svd(h, compute_uv=False)
    return int(np.sum(sv > 1e-8 * max(1.0, sv[0])))


def classify(xi0, tau_c: float = TAU_C, tau_d: float = TAU_D, v=None) -> CriticalPointReport:
    """Singularity class of the phase at ``xi0`` and the implied decay exponent.

    Parameters
    ----------
    xi0 : array_like
        Critical frequency, ``d in {2, 3, 4}``.
    tau_c : float
        ``|c_j| <= tau_c`` counts as a vanishing cosine (same test for sines).
    tau_d : float
        Threshold for determinant and higher-order degeneracy tests.
    v : array_like, optional
        Velocity the point is claimed to be critical for; checked to 1e-9.

    Raises
    ------
    InvalidCriticalPoint
        ``grad omega(xi0)`` differs from ``v`` by more than 1e-9.
    """
    xi0 = reduce_frequency(np.atleast_1d(np.asarray(xi0, dtype=float)))
    d = xi0.shape[0]
    if d not in (2, 3, 4):
        raise ValueError("classification is implemented for d = 2, 3, 4")
    if not (0 < tau_c <= 1e-3 and 0 < tau_d <= 1e-3):
        raise ValueError("tolerances must lie in (0, 1e-3]")
    vel = grad_omega(xi0)
    if v is not None:
        v = np.asarray(v, dtype=float)
        if np.linalg.norm(vel - v) > 1e-9:
            raise InvalidCriticalPoint(f"|grad omega - v| = {np.linalg.norm(vel - v):.3g} > 1e-9")
    trig = TrigData.at(xi0)
    c, s = trig.c, trig.s
    det = float(det_hessian(xi0))
    rank = _numerical_rank(hessian_phi(xi0))
    zero = np.abs(c) <= tau_c
    count = int(zero.sum())
    br = _Branch(tau_d)
    for cj in c[~zero]:
        br.nonzero(cj, tau_c)
    C = SingularityClass
    notes = []

    if d == 2:
        if count == 2:
            cls = C.A3
        elif count == 1:
            cls = C.A1
        elif br.nonzero(det, tau_d):
            cls = C.A1
        else:
            # fold whether or not a sine vanishes; cusps are excluded by the
            # the d2-lemma scan, which finds no common zero on this branch
            cls = C.A2
    elif d == 3:
        if count == 3:
            cls = C.D4minus
        elif count == 1:
            cls = C.A1
        elif count == 2:
            c3 = float(c[~zero][0])
            cls = C.A3 if br.nonzero(1 + c3 * c3 - 7 * c3, tau_d) else C.A5
        elif br.nonzero(det, tau_d):
            cls = C.A1
        elif np.any(np.abs(s) <= tau_c):
            cls = C.A2
        elif br.nonzero(np.sum(s**4 / c**3), tau_d):
            cls = C.A2
        else:
            cls = C.A3
    else:
        if count == 4:
            cls = C.T444
        elif count == 1:
            cls = C.A1
        elif count == 3:
            cls = C.D4minus
        elif count == 0 and br.nonzero(det, tau_d):
            cls = C.A1
        else:
            cls = C.CorankOneResidual
            if rank < 3:
                notes.append(f"numerical rank {rank} < 3")
                warnings.warn(f"Hessian rank {rank} below 3 at {xi0}", RankDisagreement, stacklevel=2)
    if br.ambiguous:
        warnings.warn(
            f"decision quantity within (tau_d/10, tau_d) at {xi0}", AmbiguousClassification, stacklevel=2
        )
    index = SINGULAR_INDEX[cls]
    return CriticalPointReport(
        xi0=xi0,
        v=vel,
        trig=trig,
        hessian_det=det,
        hessian_rank=rank,
        zero_cosine_count=count,
        cls=cls,
        singular_index=index,
        decay_exponent=Fraction(d, 2) - index,
        log_correction=cls is C.T444,
        degeneracy_margin=br.margin,
        ambiguous=br.ambiguous,
        notes=notes,
    )


# ---------------------------------------------------------------------------
# caustics
# ---------------------------------------------------------------------------


class CausticPoint(NamedTuple):
    xi: np.ndarray
    v: np.ndarray
    det: float


def _bisect_edges(lo, hi, f_lo, axis, tol=1e-10, maxit=80):
    """Bisect ``det_hessian`` along coordinate ``axis`` between lo and hi."""
    a = lo.copy()
    b = hi.copy()
    fa = f_lo.copy()
    for _ in range(maxit):
        mid = a.copy()
        mid[:, axis] = 0.5 * (a[:, axis] + b[:, axis])
        fm = det_hessian(mid)
        if np.all(np.abs(fm) <= tol):
            a = mid
            break
        left = np.sign(fm) == np.sign(fa)
        a[left] = mid[left]
        fa[left] = fm[left]
        b[~left] = mid[~left]
    mid = a.copy()
    mid[:, axis] = 0.5 * (a[:, axis] + b[:, axis])
    return mid


def caustic_scan(d: int, grid_n: int = 32, tol: float = 1e-10) -> list[CausticPoint]:
    """Points of the frequency torus where ``det hessian_phi`` vanishes.

    Every grid edge along which the determinant changes sign is bisected to
    ``|det| <= tol``; grid nodes that already satisfy this are included too.
    Output is sorted lexicographically in ``xi``.
    """
    if grid_n < 32:
        raise ValueError("grid_n must be >= 32")
    axis = TWO_PI * np.arange(grid_n) / grid_n
    grids = np.meshgrid(*([axis] * d), indexing="ij")
    nodes = np.stack([g.ravel() for g in grids], axis=-1)
    det = det_hessian(nodes).reshape((grid_n,) * d)
    found = [nodes[np.abs(det.ravel()) <= tol]]
    for k in range(d):
        nxt = np.roll(det, -1, axis=k)
        cross = (det * nxt < 0).ravel()
        if not np.any(cross):
            continue
        lo = nodes[cross]
        hi = lo.copy()
        hi[:, k] += TWO_PI / grid_n
        root = _bisect_edges(lo, hi, det.ravel()[cross], k, tol=tol)
        found.append(root)
    pts = reduce_frequency(np.concatenate(found))
    dets = det_hessian(pts)
    keep = np.abs(dets) <= tol
    pts, dets = pts[keep], dets[keep]
    order = np.lexsort(pts.T[::-1])
    vel = grad_omega(pts)
    return [CausticPoint(pts[i], vel[i], float(dets[i])) for i in order]


# ---------------------------------------------------------------------------
# nonexistence checks
# ---------------------------------------------------------------------------


@dataclass
class ScanVerdict:
    """Outcome of a brute-force nonexistence scan.

    Unpacks as ``(min_residual, witness)``.
    """

    min_residual: float
    witness: tuple
    grid_n: int
    n_candidate_cells: int
    n_unresolved_cells: int
    common_zeros: list

    def __iter__(self):
        yield self.min_residual
        yield self.witness

    @property
    def supports_claim(self) -> bool:
        return self.min_residual > 0 and not self.common_zeros


def _refine(func: Callable, boxes: np.ndarray, depth: int, cap: int = 200_000):
    """Split boxes in two along every axis, keeping those where all equations
    change sign over the corners. ``boxes`` has shape ``(k, dim, 2)``."""
    dim = boxes.shape[1]
    corners = np.array(np.meshgrid(*([[0, 1]] * dim), indexing="ij")).reshape(dim, -1).T
    for _ in range(depth):
        if boxes.shape[0] == 0 or boxes.shape[0] * 2**dim > cap:
            break
        mid = 0.5 * (boxes[..., 0] + boxes[..., 1])
        kids = []
        for pick in corners:
            lo = np.where(pick, mid, boxes[..., 0])
            hi = np.where(pick, boxes[..., 1], mid)
            kids.append(np.stack([lo, hi], axis=-1))
        boxes = np.concatenate(kids)
        pts = boxes[:, None, :, 0] + corners[None, :, :] * (boxes[:, None, :, 1] - boxes[:, None, :, 0])
        vals = func(pts)  # (k, corners, eqs)
        keep = np.all((vals.max(axis=1) >= 0) & (vals.min(axis=1) <= 0), axis=-1)
        boxes = boxes[keep]
    return boxes


def _newton_confirm(func, jac, scale, starts, boxes, floor, maxit=60):
    """Run Newton from box centres and keep genuine in-domain zeros.

    A point counts when its residual relative to the size of the terms in
    each equation is at rounding level, it stays near its box, and every
    coordinate lies in ``floor < |c| < 1``. The relative test matters: close
    to the coordinate planes the raw terms are tiny, and an absolute
    threshold accepts points that high-precision Newton drives onto a plane.
    """
    x = starts.copy()
    with np.errstate(all="ignore"):
        for _ in range(maxit):
            f = func(x)
            j = jac(x)
            j[~np.isfinite(j)] = 0.0
            f[~np.isfinite(f)] = 0.0
            x = x - np.einsum("nij,nj->ni", np.linalg.pinv(j), f)
        rel = np.max(np.abs(func(x)) / scale(x), axis=-1)
        width = boxes[..., 1] - boxes[..., 0]
        inside = np.all((x >= boxes[..., 0] - width) & (x <= boxes[..., 1] + width), axis=-1)
        ok = (rel < 1e-10) & inside & np.all((np.abs(x) > floor) & (np.abs(x) < 1), axis=-1)
    return [tuple(float(a) for a in p) for p in x[ok]]


def _d2_func(p):
    e2, e3 = _pycore.d2_equations(p[..., 0], p[..., 1])
    return np.stack([e2, e3], axis=-1)


def _d2_raw(p):
    c1, c2 = p[..., 0], p[..., 1]
    g2 = 5.0 - (c1 + c2) - 1.0 / c1 - 1.0 / c2
    _, e3 = _pycore.d2_equations(c1, c2)
    return np.stack([g2, e3], axis=-1)


def _d2_raw_scale(p):
    c1, c2 = np.abs(p[..., 0]), np.abs(p[..., 1])
    s2 = 5.0 + c1 + c2 + 1.0 / c1 + 1.0 / c2
    s3 = (1 - c1 * c1) ** 2 * c2**3 + (1 - c2 * c2) ** 2 * c1**3
    return np.stack([s2, s3], axis=-1)


def _d2_raw_jac(p):
    c1, c2 = p[:, 0], p[:, 1]
    r1 = np.stack([-1 + 1 / c1**2, -1 + 1 / c2**2], axis=-1)
    d1 = -4 * c1 * (1 - c1 * c1) * c2**3 + 3 * c1 * c1 * (1 - c2 * c2) ** 2
    d2 = 3 * c2 * c2 * (1 - c1 * c1) ** 2 - 4 * c2 * (1 - c2 * c2) * c1**3
    r2 = np.stack([d1, d2], axis=-1)
    return np.stack([r1, r2], axis=-2)


def d2_factored(c1, c2):
    """``(c1 + c2)(c1^2 - c1 c2 + c2^2 - 2 c1^2 c2^2 + c1^3 c2^3)``, the factored
    form of the second two-dimensional equation."""
    return (c1 + c2) * (c1 * c1 - c1 * c2 + c2 * c2 - 2 * c1 * c1 * c2 * c2 + c1**3 * c2**3)


def verify_d2_lemma(grid_n: int = 2000, refine_depth: int = 24, floor: float = 1e-12) -> ScanVerdict:
    """Scan for common zeros of the two d=2 degeneracy equations with
    ``c1 > 0 > c2``.

    Returns the minimum of ``|e2_cleared| + |e3|`` over a ``grid_n^2`` grid, its
    location, and the outcome of refining every cell on which both equations
    change sign: surviving boxes are handed to Newton on the uncleared system
    and only genuine in-domain zeros are reported in ``common_zeros``.
    """
    if grid_n < 500:
        raise ValueError("grid_n must be >= 500")
    best, witness, cells = core.d2_scan(grid_n)
    h = 1.0 / grid_n
    lo1 = (cells[:, 0] + 0.5) * h
    lo2 = -(cells[:, 1] + 0.5) * h
    boxes = np.stack(
        [np.stack([lo1, lo1 + h], axis=-1), np.stack([lo2 - h, lo2], axis=-1)], axis=1
    )
    survivors = _refine(_d2_func, boxes, refine_depth)
    zeros = []
    if survivors.shape[0]:
        centres = survivors.mean(axis=-1)
        zeros = _newton_confirm(_d2_raw, _d2_raw_jac, _d2_raw_scale, centres, survivors, floor)
    return ScanVerdict(best, witness, grid_n, int(cells.shape[0]), int(survivors.shape[0]), zeros)


def _d3_func(p):
    return _pycore.appendix_cleared(p[..., 0], p[..., 1], p[..., 2])


def _d3_raw(p):
    return _pycore.appendix_raw(p[..., 0], p[..., 1], p[..., 2])


def _d3_raw_scale(p):
    return _pycore.appendix_raw_scale(p[..., 0], p[..., 1], p[..., 2])


def _d3_raw_jac(p):
    return _pycore.appendix_raw_jac(p[..., 0], p[..., 1], p[..., 2])


def verify_d3_condition(grid_n: int = 400, refine_depth: int = 4, floor: float = 1e-6) -> ScanVerdict:
    """Scan ``(-1, 1)^3`` for common zeros of the three-equation system.

    The equations are the determinant condition, the vanishing cubic
    coefficient and the vanishing quartic coefficient, all with denominators
    cleared. The cleared system vanishes on the coordinate axes, so cells
    straddling a coordinate plane are skipped and Newton candidates that
    collapse onto a plane (``|c_j| <= floor``) are discarded.
    """
    if grid_n < 200:
        raise ValueError("grid_n must be >= 200")
    best, witness, cells = core.d3_scan(grid_n)
    nodes = _pycore.d3_nodes(grid_n)
    lo = nodes[cells]
    boxes = np.stack([lo, lo + 2.0 / grid_n], axis=-1)
    survivors = _refine(_d3_func, boxes, refine_depth)
    zeros = []
    if survivors.shape[0]:
        centres = survivors.mean(axis=-1)
        zeros = _newton_confirm(_d3_raw, _d3_raw_jac, _d3_raw_scale, centres, survivors, floor)
    return ScanVerdict(best, witness, grid_n, int(cells.shape[0]), int(survivors.shape[0]), zeros)

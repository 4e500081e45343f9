"""Dispersion relation of the discrete Klein-Gordon equation and its derivatives.

All functions take frequencies as arrays of shape ``(..., d)`` and broadcast
over the leading axes, so a single point and a whole grid of points go through
the same code path.

The dispersion relation is

    omega(xi)^2 = 1 + sum_j 2 (1 - cos xi_j),

i.e. the symbol of ``1 - Delta`` for the nearest-neighbour lattice Laplacian.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import optimize

TWO_PI = 2.0 * np.pi


def reduce_frequency(xi) -> np.ndarray:
    """Reduce frequencies modulo 2*pi into ``[0, 2*pi)``."""
    xi = np.asarray(xi, dtype=float)
    out = np.mod(xi, TWO_PI)
    # np.mod can round up to exactly 2*pi for tiny negative inputs
    out[out >= TWO_PI] = 0.0
    return out


@dataclass(frozen=True)
class TrigData:
    """Cosines, sines and omega^2 at a point, computed once.

    Caching ``omega_sq`` here keeps the Hessian, its determinant and the
    auxiliary phase consistent with each other.
    """

    c: np.ndarray
    s: np.ndarray
    omega_sq: float

    @classmethod
    def at(cls, xi) -> "TrigData":
        xi = np.asarray(xi, dtype=float)
        c = np.cos(xi)
        s = np.sin(xi)
        return cls(c=c, s=s, omega_sq=float(omega_squared(xi)))

    @property
    def d(self) -> int:
        return int(self.c.shape[-1])


def omega_squared(xi) -> np.ndarray:
    """``1 + sum 2(1 - cos xi_j)``, written as ``1 + 4 sum sin^2(xi_j/2)``."""
    xi = np.asarray(xi, dtype=float)
    return 1.0 + 4.0 * np.sum(np.sin(0.5 * xi) ** 2, axis=-1)


def omega(xi) -> np.ndarray:
    """Dispersion relation; always >= 1."""
    return np.sqrt(omega_squared(xi))


def grad_omega(xi) -> np.ndarray:
    """Group velocity ``sin(xi_j) / omega(xi)``."""
    xi = np.asarray(xi, dtype=float)
    return np.sin(xi) / omega(xi)[..., None]


def hessian_omega(xi) -> np.ndarray:
    """Hessian of omega itself (the Jacobian of the group velocity map)."""
    xi = np.asarray(xi, dtype=float)
    return hessian_phi(xi) / (2.0 * omega(xi)[..., None, None])


def hessian_phi(xi) -> np.ndarray:
    """Hessian at eta = 0 of the auxiliary phase centred at ``xi``.

    Entry ``(k, j)`` is ``2 (c_j delta_kj - s_k s_j / omega^2)``: a diagonal
    matrix minus a rank-one term.
    """
    xi = np.asarray(xi, dtype=float)
    c = np.cos(xi)
    s = np.sin(xi)
    w2 = omega_squared(xi)[..., None, None]
    diag = c[..., :, None] * np.eye(xi.shape[-1])
    return 2.0 * (diag - s[..., :, None] * s[..., None, :] / w2)


def _products_except_one(c: np.ndarray) -> np.ndarray:
    """``prod_{m != j} c_m`` for each j, without dividing by c_j."""
    ones = np.ones(c.shape[:-1] + (1,))
    prefix = np.cumprod(np.concatenate([ones, c[..., :-1]], axis=-1), axis=-1)
    rev = c[..., ::-1]
    suffix = np.cumprod(np.concatenate([ones, rev[..., :-1]], axis=-1), axis=-1)[..., ::-1]
    return prefix * suffix


def det_hessian(xi) -> np.ndarray:
    """Closed-form determinant of :func:`hessian_phi`.

    ``2^d (prod c_k - sum_j s_j^2 prod_{m != j} c_m / omega^2)``; valid when
    some cosines vanish.
    """
    xi = np.asarray(xi, dtype=float)
    c = np.cos(xi)
    s = np.sin(xi)
    d = xi.shape[-1]
    w2 = omega_squared(xi)
    others = _products_except_one(c)
    return 2.0**d * (np.prod(c, axis=-1) - np.sum(s**2 * others, axis=-1) / w2)


def phi_aux(eta, xi0) -> np.ndarray:
    """Radical-free phase ``omega(xi0+eta)^2 - (s.eta + omega0^2)^2 / omega0^2``.

    Expanded as ``2 sum_j [2 c_j sin^2(eta_j/2) + s_j (sin eta_j - eta_j)]
    - (s.eta)^2 / omega0^2`` so that the large constant terms cancel
    analytically; this keeps finite differences of ``phi_aux`` accurate
    at small ``eta``.
    """
    eta = np.asarray(eta, dtype=float)
    xi0 = np.asarray(xi0, dtype=float)
    c = np.cos(xi0)
    s = np.sin(xi0)
    w2 = omega_squared(xi0)
    local = 2.0 * c * np.sin(0.5 * eta) ** 2 + s * (np.sin(eta) - eta)
    lin = np.sum(s * eta, axis=-1)
    return 2.0 * np.sum(local, axis=-1) - lin**2 / w2


def group_speed_sq(xi) -> np.ndarray:
    xi = np.asarray(xi, dtype=float)
    return np.sum(np.sin(xi) ** 2, axis=-1) / omega_squared(xi)


@lru_cache(maxsize=None)
def max_group_speed(d: int, grid_n: int = 64) -> float:
    """Largest group speed ``max |grad omega|`` over the torus.

    Brute-force search on a ``grid_n``-per-axis grid, then local ascent from the
    best few grid points. ``|grad omega|^2`` depends on each ``xi_j`` only
    through ``cos xi_j``, so ``[0, pi]^d`` covers every value.
    """
    if grid_n < 64:
        raise ValueError("grid_n must be >= 64")
    if d < 1:
        raise ValueError("dimension must be >= 1")
    half = grid_n // 2 + 1
    axis = np.linspace(0.0, np.pi, half)
    sin2 = np.sin(axis) ** 2
    cos_part = 4.0 * np.sin(0.5 * axis) ** 2
    num = sin2
    den = 1.0 + cos_part
    for _ in range(d - 1):
        num = np.add.outer(num, sin2)
        den = np.add.outer(den, cos_part)
    speed2 = np.atleast_1d(num / den)
    flat = np.argsort(speed2, axis=None)[-8:]
    best = 0.0
    for f in flat:
        start = axis[np.array(np.unravel_index(f, speed2.shape))]
        res = optimize.minimize(
            lambda x: -group_speed_sq(x),
            start,
            method="L-BFGS-B",
            bounds=[(0.0, np.pi)] * d,
            options={"ftol": 1e-15, "gtol": 1e-12},
        )
        best = max(best, -float(res.fun), float(speed2.flat[f]))
    return math.sqrt(best)

"""Kernel oscillatory integrals over the torus.

    I(t, x) = int_{[0, 2 pi]^d} exp(i (x . xi - t omega(xi))) a(xi) dxi

The integrand is smooth and periodic, so the equispaced trapezoidal rule
converges spectrally; on an ``n^d`` grid it is exactly an inverse DFT. Two
independent oracles check it: tensor Gauss-Legendre quadrature and direct
time integration of the lattice equation.
"""
from __future__ import annotations

import csv
import enum
import io
import math
import struct
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import fft as sfft
from scipy.special import roots_legendre

from .dispersion import TWO_PI, max_group_speed
from .errors import AliasingRisk, BoundaryContamination


class Amplitude(enum.Enum):
    One = 0
    InverseOmega = 1

    @classmethod
    def parse(cls, value) -> "Amplitude":
        if isinstance(value, cls):
            return value
        key = str(value).lower().replace("-", "").replace("_", "")
        table = {"one": cls.One, "1": cls.One, "inverseomega": cls.InverseOmega, "invomega": cls.InverseOmega}
        if key not in table:
            raise ValueError(f"unknown amplitude {value!r}")
        return table[key]


@dataclass
class KernelGrid:
    """Kernel values on the centred box ``{-n/2, ..., n/2 - 1}^d``.

    ``values`` follows the unnormalized convention (no ``(2 pi)^{-d}``)
    unless ``normalized`` is set, as for the propagators.
    """

    d: int
    n: int
    t: float
    amp: Amplitude
    values: np.ndarray
    normalized: bool = False

    def at(self, x) -> complex:
        idx = tuple(int(a) + self.n // 2 for a in x)
        return self.values[idx]

    def coords(self) -> np.ndarray:
        return np.arange(self.n) - self.n // 2

    def sup(self) -> tuple[float, tuple]:
        mag = np.abs(self.values)
        k = int(np.argmax(mag))
        site = tuple(int(i) - self.n // 2 for i in np.unravel_index(k, mag.shape))
        return float(mag.flat[k]), site


def aliasing_threshold(t: float, d: int, margin: int = 8) -> int:
    return 2 * math.ceil(abs(t) * max_group_speed(d)) + margin


def check_aliasing(t, d, n):
    need = aliasing_threshold(t, d)
    if n < need:
        warnings.warn(f"n={n} < {need} for t={t}, d={d}", AliasingRisk, stacklevel=3)


def omega_grid(d: int, n: int, real_last: bool = False) -> np.ndarray:
    """``omega`` at the DFT frequencies ``2 pi k / n``, built by broadcasting
    per-axis terms; with ``real_last`` the last axis holds ``n//2 + 1``
    frequencies as for ``rfftn``."""
    k = np.arange(n)
    term = 4.0 * np.sin(np.pi * k / n) ** 2
    w2 = np.ones((1,) * d)
    for ax in range(d):
        t_ax = term[: n // 2 + 1] if (real_last and ax == d - 1) else term
        shape = [1] * d
        shape[ax] = t_ax.shape[0]
        w2 = w2 + t_ax.reshape(shape)
    return np.sqrt(w2)


def _spectrum(t, d, n, amp):
    w = omega_grid(d, n)
    spec = np.exp(-1j * t * w)
    if amp is Amplitude.InverseOmega:
        spec /= w
    return spec


def kernel_raw(t: float, d: int, n: int, amp=Amplitude.One, workers: int | None = None) -> np.ndarray:
    """Unshifted DFT output: index ``k`` holds site ``k`` for ``k < n/2`` and
    ``k - n`` otherwise. Avoids the copy made by centring."""
    if n % 2:
        raise ValueError("n must be even")
    amp = Amplitude.parse(amp)
    check_aliasing(t, d, n)
    spec = _spectrum(t, d, n, amp)
    out = sfft.ifftn(spec, overwrite_x=True, workers=workers)
    out *= TWO_PI**d
    return out


def kernel_fft(t: float, d: int, n: int, amp=Amplitude.One, workers: int | None = None) -> KernelGrid:
    """Trapezoidal evaluation of ``I(t, x)`` on every site of the centred box.

    Parameters
    ----------
    t : float
        Time.
    d : int
        Dimension.
    n : int
        Even number of grid points per axis. ``n >= 2 ceil(t v_max) + 32``
        keeps the periodic images of the kernel negligible; below
        ``2 ceil(t v_max) + 8`` an ``AliasingRisk`` warning is issued.
    amp : Amplitude
        ``One`` or ``InverseOmega``.
    """
    amp = Amplitude.parse(amp)
    raw = kernel_raw(t, d, n, amp, workers)
    return KernelGrid(d, n, float(t), amp, sfft.fftshift(raw))


def site_index(k, n):
    k = np.asarray(k)
    return np.where(k < n // 2, k, k - n)


def kernel_sup(t, d, n, amp=Amplitude.One, workers=None):
    """``max_x |I(t, x)|`` and a site where it is attained."""
    raw = kernel_raw(t, d, n, amp, workers)
    mag = np.abs(raw)
    del raw
    k = int(np.argmax(mag))
    site = tuple(int(a) for a in site_index(np.array(np.unravel_index(k, mag.shape)), n))
    return float(mag.flat[k]), site


def kernel_at(t: float, x, n: int, amp=Amplitude.One, chunk: int = 8) -> complex:
    """Trapezoidal sum for a single site, chunked over the first axis so memory
    stays at ``chunk * n^(d-1)``. Needs ``n`` larger than ``|x|_inf`` plus the
    light-cone radius to keep periodic images out."""
    amp = Amplitude.parse(amp)
    x = np.asarray(x, dtype=float)
    d = x.shape[0]
    xi = TWO_PI * np.arange(n) / n
    term = 4.0 * np.sin(0.5 * xi) ** 2
    rest = np.ones((1,) * (d - 1))
    phase_rest = np.zeros((1,) * (d - 1))
    for ax in range(1, d):
        shape = [1] * (d - 1)
        shape[ax - 1] = n
        rest = rest + term.reshape(shape)
        phase_rest = phase_rest + x[ax] * xi.reshape(shape)
    total = 0.0j
    for lo in range(0, n, chunk):
        sl = slice(lo, min(lo + chunk, n))
        w = np.sqrt(term[sl].reshape((-1,) + (1,) * (d - 1)) + rest)
        ph = x[0] * xi[sl].reshape((-1,) + (1,) * (d - 1)) + phase_rest - t * w
        val = np.exp(1j * ph)
        if amp is Amplitude.InverseOmega:
            val /= w
        total += val.sum()
    return complex(total * (TWO_PI / n) ** d)


def kernel_direct(t: float, x, d: int | None = None, nodes: int = 400, amp=Amplitude.One) -> complex:
    """Tensor Gauss-Legendre quadrature of ``I(t, x)`` over ``[0, 2 pi]^d``.

    Independent of the equispaced grid; meant as an oracle for moderate
    ``t`` (cost grows as ``nodes^d``).
    """
    if nodes < 64:
        raise ValueError("nodes must be >= 64")
    amp = Amplitude.parse(amp)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    d = x.shape[0] if d is None else d
    g, wts = roots_legendre(nodes)
    xi = np.pi * (g + 1.0)
    wts = np.pi * wts
    term = 4.0 * np.sin(0.5 * xi) ** 2
    total = 0.0j
    # sum over the first axis explicitly, vectorize the rest
    rest_w2 = np.ones((1,) * (d - 1))
    rest_ph = np.zeros((1,) * (d - 1))
    rest_wt = np.ones((1,) * (d - 1))
    for ax in range(1, d):
        shape = [1] * (d - 1)
        shape[ax - 1] = nodes
        rest_w2 = rest_w2 + term.reshape(shape)
        rest_ph = rest_ph + x[ax] * xi.reshape(shape)
        rest_wt = rest_wt * wts.reshape(shape)
    for i in range(nodes):
        w = np.sqrt(term[i] + rest_w2)
        val = np.exp(1j * (x[0] * xi[i] + rest_ph - t * w)) * rest_wt
        if amp is Amplitude.InverseOmega:
            val /= w
        total += wts[i] * val.sum()
    return complex(total)


# ---------------------------------------------------------------------------
# time-domain oracle
# ---------------------------------------------------------------------------


def _laplacian_dirichlet(u):
    out = -2.0 * u.ndim * u
    for ax in range(u.ndim):
        lo = [slice(None)] * u.ndim
        hi = [slice(None)] * u.ndim
        lo[ax] = slice(1, None)
        hi[ax] = slice(None, -1)
        out[tuple(hi)] += u[tuple(lo)]
        out[tuple(lo)] += u[tuple(hi)]
    return out


def dirichlet_energy(u, p) -> float:
    """``1/2 sum (p^2 + |forward differences of u|^2 + u^2)`` with zeros
    outside the box."""
    e = np.sum(p * p) + np.sum(u * u)
    for ax in range(u.ndim):
        pad = [(0, 0)] * u.ndim
        pad[ax] = (1, 1)
        e += np.sum(np.diff(np.pad(u, pad), axis=ax) ** 2)
    return 0.5 * float(e)


def kernel_ode(t: float, d: int, box_radius: int, dt: float = 1e-3, return_state: bool = False):
    """Integrate ``u_tt = Delta u - u`` from ``u = delta_0``, ``u_t = 0`` with RK4.

    The lattice is truncated to ``[-box_radius, box_radius]^d`` with zero
    boundary values. The result approximates the cosine propagator
    ``(2 pi)^{-d} int cos(t omega) exp(i x . xi) dxi``.

    Returns
    -------
    ndarray, or (u, p) when ``return_state``
        Arrays of shape ``(2 box_radius + 1,) * d`` centred at the origin.
    """
    if box_radius < math.ceil(abs(t)) + 10:
        raise ValueError("box_radius must be >= ceil(t) + 10")
    if not 0 < dt <= 0.01:
        raise ValueError("dt must lie in (0, 0.01]")
    if box_radius - abs(t) * max_group_speed(d) < 5:
        warnings.warn("box edge within 5 sites of the light cone", BoundaryContamination, stacklevel=2)
    shape = (2 * box_radius + 1,) * d
    u = np.zeros(shape)
    u[(box_radius,) * d] = 1.0
    p = np.zeros(shape)
    if t == 0:
        return (u, p) if return_state else u
    steps = max(1, math.ceil(abs(t) / dt - 1e-9))
    h = t / steps

    def acc(w):
        return _laplacian_dirichlet(w) - w

    for _ in range(steps):
        k1u, k1p = p, acc(u)
        k2u, k2p = p + 0.5 * h * k1p, acc(u + 0.5 * h * k1u)
        k3u, k3p = p + 0.5 * h * k2p, acc(u + 0.5 * h * k2u)
        k4u, k4p = p + h * k3p, acc(u + h * k3u)
        u = u + (h / 6.0) * (k1u + 2 * k2u + 2 * k3u + k4u)
        p = p + (h / 6.0) * (k1p + 2 * k2p + 2 * k3p + k4p)
    return (u, p) if return_state else u


# ---------------------------------------------------------------------------
# propagators
# ---------------------------------------------------------------------------


def propagator_pair(t: float, d: int, n: int, workers: int | None = None) -> tuple[KernelGrid, KernelGrid]:
    """Cosine and sine propagators of the linear equation, unit normalized.

    ``U0 = (2 pi)^{-d} int cos(t omega) e^{i x xi}`` and
    ``U1 = (2 pi)^{-d} int sin(t omega)/omega e^{i x xi}``, so that
    ``u(t) = U0 * u(0) + U1 * u_t(0)``. Both are real: the spectra are even.
    """
    if n % 2:
        raise ValueError("n must be even")
    check_aliasing(t, d, n)
    w = omega_grid(d, n)
    u0 = sfft.ifftn(np.cos(t * w), workers=workers).real
    u1 = sfft.ifftn(np.sin(t * w) / w, workers=workers).real
    g0 = KernelGrid(d, n, float(t), Amplitude.One, sfft.fftshift(u0), normalized=True)
    g1 = KernelGrid(d, n, float(t), Amplitude.InverseOmega, sfft.fftshift(u1), normalized=True)
    return g0, g1


# ---------------------------------------------------------------------------
# export
# ---------------------------------------------------------------------------

_HEADER = struct.Struct("<4sIIdB")
MAGIC = b"DKGK"


def dump_kernel(grid: KernelGrid, fh) -> None:
    """Binary dump: magic, u32 d, u32 n, f64 t, u8 amp, then row-major
    little-endian complex doubles."""
    fh.write(_HEADER.pack(MAGIC, grid.d, grid.n, grid.t, grid.amp.value))
    fh.write(np.ascontiguousarray(grid.values, dtype="<c16").tobytes())


def load_kernel(fh) -> KernelGrid:
    head = fh.read(_HEADER.size)
    magic, d, n, t, amp = _HEADER.unpack(head)
    if magic != MAGIC:
        raise ValueError("not a kernel dump")
    data = np.frombuffer(fh.read(16 * n**d), dtype="<c16").reshape((n,) * d)
    return KernelGrid(d, n, t, Amplitude(amp), data.astype(np.complex128))


def slice_csv(grid: KernelGrid, radius: int | None = None) -> str:
    """CSV of ``x_1, ..., x_d, re, im`` over the sub-box ``|x|_inf <= radius``
    (whole box by default)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([f"x{i + 1}" for i in range(grid.d)] + ["re", "im"])
    coords = grid.coords()
    keep = np.ones(grid.n, dtype=bool) if radius is None else np.abs(coords) <= radius
    sub = grid.values[np.ix_(*([keep] * grid.d))]
    cs = coords[keep]
    for idx in np.ndindex(sub.shape):
        v = complex(sub[idx])
        w.writerow([int(cs[i]) for i in idx] + [f"{v.real:.12g}", f"{v.imag:.12g}"])
    return buf.getvalue()

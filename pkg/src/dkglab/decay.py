"""Decay-rate measurement for the kernels: sup-norm scans, ray scans, power-law
fits and the exterior of the light cone."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .dispersion import max_group_speed
from .errors import InsufficientSpan
from .oscint import Amplitude, kernel_at, kernel_raw, kernel_sup, site_index


@dataclass
class DecayFit:
    """Least-squares fit of ``M(t) ~ C t^{-exponent}`` (times ``log t`` when
    ``log_correction``)."""

    exponent: float
    log_correction: bool
    constant: float
    r_squared: float
    t_window: tuple
    samples: list = field(default_factory=list)
    rapid_decay: bool = False

    def to_dict(self) -> dict:
        out = asdict(self)
        out["samples"] = [[float(t), float(m), list(s) if s is not None else None] for t, m, s in self.samples]
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        d = max((len(s) for _, _, s in self.samples if s is not None), default=0)
        w.writerow(["t", "M"] + [f"x{i + 1}" for i in range(d)] + ["exponent", "constant", "r_squared"])
        for t, m, s in self.samples:
            site = list(s) if s is not None else [""] * d
            w.writerow(
                [f"{t:.12g}", f"{m:.12g}"]
                + site
                + [f"{self.exponent:.12g}", f"{self.constant:.12g}", f"{self.r_squared:.12g}"]
            )
        return buf.getvalue()


def sup_scan(d: int, amp, t_list, n: int, workers: int | None = None) -> list[tuple]:
    """``(t, max_x |I(t, x)|, argmax site)`` for each time."""
    amp = Amplitude.parse(amp)
    out = []
    for t in t_list:
        m, site = kernel_sup(float(t), d, n, amp, workers)
        out.append((float(t), m, site))
    return out


def _normalize_samples(samples):
    rows = []
    for s in samples:
        if len(s) == 2:
            rows.append((float(s[0]), float(s[1]), None))
        else:
            rows.append((float(s[0]), float(s[1]), s[2]))
    return rows


def fit_decay(samples, log_correction: bool = False) -> DecayFit:
    """Fit a power law to ``(t, M)`` samples on log-log axes.

    Parameters
    ----------
    samples : sequence
        ``(t, M)`` or ``(t, M, site)`` rows with ``t > 1`` when
        ``log_correction`` (``log t`` must be positive).
    log_correction : bool
        Fit ``log(M / log t)`` instead of ``log M``.

    Raises
    ------
    InsufficientSpan
        Fewer than 6 samples, or ``t_max / t_min < 4``.
    """
    rows = _normalize_samples(samples)
    t = np.array([r[0] for r in rows])
    m = np.array([r[1] for r in rows])
    if t.size < 6 or t.min() <= 0 or t.max() / t.min() < 4:
        raise InsufficientSpan("need >= 6 samples spanning a factor >= 4 in t")
    if np.any(m <= 0):
        raise ValueError("all M(t) must be positive")
    y = np.log(m)
    if log_correction:
        if t.min() <= 1:
            raise ValueError("log correction needs t > 1")
        y = y - np.log(np.log(t))
    x = np.log(t)
    slope, icpt = np.polyfit(x, y, 1)
    pred = slope * x + icpt
    ss_res = float(np.sum((y - pred) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return DecayFit(
        exponent=float(-slope),
        log_correction=log_correction,
        constant=float(math.exp(icpt)),
        r_squared=float(min(max(r2, 0.0), 1.0)),
        t_window=(float(t.min()), float(t.max())),
        samples=rows,
    )


def ray_sites(v, t_list) -> list[tuple]:
    v = np.asarray(v, dtype=float)
    return [tuple(int(a) for a in np.rint(v * t)) for t in t_list]


def ray_samples(v, d, amp, t_list, n, method: str = "site"):
    """``|I(t, round(v t))|`` for each time.

    ``method="site"`` sums the single site directly (memory ``n^(d-1)``);
    ``"fft"`` computes the full grid.
    """
    amp = Amplitude.parse(amp)
    v = np.asarray(v, dtype=float)
    if v.shape != (d,):
        raise ValueError("velocity must have d components")
    out = []
    for t, x in zip(t_list, ray_sites(v, t_list)):
        if method == "site":
            val = kernel_at(float(t), x, n, amp)
        else:
            raw = kernel_raw(float(t), d, n, amp)
            val = raw[tuple(int(a) % n for a in x)]
        out.append((float(t), abs(val), x))
    return out


def ray_decay(v, d: int, amp, t_list, n: int, log_correction: bool = False, method: str = "site") -> DecayFit:
    """Decay fit along the ray ``x = round(v t)``.

    If every sample is below ``1e-10`` the ray is outside the light cone; the
    fit then has ``rapid_decay=True`` and ``exponent=inf``.
    """
    samples = ray_samples(v, d, amp, t_list, n, method)
    mags = np.array([s[1] for s in samples])
    if np.all(mags < 1e-10):
        t = [s[0] for s in samples]
        return DecayFit(math.inf, log_correction, 0.0, 0.0, (min(t), max(t)), samples, rapid_decay=True)
    return fit_decay(samples, log_correction)


def lightcone_tail(t: float, d: int, n: int, delta: float, amp=Amplitude.One) -> float:
    """``max |I(t, x)|`` over sites with ``|x|_inf > (1 + delta) t v_max``."""
    if n < 2 * math.ceil((1 + delta) * abs(t)) + 32:
        raise ValueError("n must be >= 2 ceil((1 + delta) t) + 32")
    raw = kernel_raw(t, d, n, amp)
    idx = np.abs(site_index(np.arange(n), n))
    inf_norm = idx.reshape((n,) + (1,) * (d - 1))
    for ax in range(1, d):
        shape = [1] * d
        shape[ax] = n
        inf_norm = np.maximum(inf_norm, idx.reshape(shape))
    outside = inf_norm > (1 + delta) * abs(t) * max_group_speed(d)
    if not np.any(outside):
        return 0.0
    return float(np.max(np.abs(raw)[np.broadcast_to(outside, raw.shape)]))


def compensated_ratio(samples, sigma: float = 1.5, log_correction: bool = True) -> np.ndarray:
    """``M(t) t^sigma / log t`` (or without the log) for each sample."""
    rows = _normalize_samples(samples)
    t = np.array([r[0] for r in rows])
    m = np.array([r[1] for r in rows])
    out = m * t**sigma
    if log_correction:
        out = out / np.log(t)
    return out


def lattice_times(v, t_min, t_max, count):
    """Times at which ``v t`` lands exactly on the lattice, when ``v`` has equal
    components ``1/sqrt(k)`` for an integer ``k``; otherwise evenly spaced.

    Exact lattice hits remove the rounding jitter in ray fits. The lattice
    times run from the last one at or below ``t_min`` to the first one at or
    above ``t_max``, so the requested window is always covered.
    """
    v = np.asarray(v, dtype=float)
    k = 1.0 / v[0] ** 2 if v[0] != 0 else 0.0
    if np.allclose(v, v[0]) and k > 0 and abs(k - round(k)) < 1e-9:
        step = math.sqrt(round(k))
        mlo = max(1, math.floor(t_min / step + 1e-9))
        mhi = math.ceil(t_max / step - 1e-9)
        ms = np.unique(np.round(np.geomspace(mlo, mhi, count)).astype(int))
        return [float(m * step) for m in ms]
    return list(np.linspace(t_min, t_max, count))

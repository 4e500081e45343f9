"""Command-line entry point: ``dkglab <command> [options]``.

Exit codes: 0 ok, 2 usage or validation error, 3 memory budget exceeded,
4 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import warnings
from fractions import Fraction
from pathlib import Path

import numpy as np
from scipy import fft as sfft

log = logging.getLogger("dkglab")

EXIT_OK, EXIT_USAGE, EXIT_RESOURCE, EXIT_NUMERIC = 0, 2, 3, 4
FMT = "{:.12g}"


class NumericalFailure(RuntimeError):
    pass


def fmt(x) -> str:
    return FMT.format(x)


def parse_floats(text: str) -> list[float]:
    return [float(a) for a in text.replace(" ", "").split(",") if a]


def parse_times(text: str) -> list[float]:
    """``a:b:step`` (inclusive) or a comma list."""
    if ":" in text:
        a, b, step = (float(v) for v in text.split(":"))
        count = int(round((b - a) / step)) + 1
        return [a + k * step for k in range(count)]
    return parse_floats(text)


def parse_bytes(text: str) -> int:
    text = text.strip().upper()
    mult = {"K": 2**10, "M": 2**20, "G": 2**30}
    if text and text[-1] in mult:
        return int(float(text[:-1]) * mult[text[-1]])
    return int(float(text))


def check_memory(args, n: int, d: int, buffers: int = 3):
    need = 16 * n**d * (1 + buffers)
    if need > args.max_mem:
        from .errors import MemoryBudgetExceeded

        raise MemoryBudgetExceeded(f"estimated {need / 2**20:.0f} MiB exceeds --max-mem")


def out_path(args, name: str) -> Path:
    d = Path(args.out)
    d.mkdir(parents=True, exist_ok=True)
    return d / name


def write_text(args, name: str, text: str) -> Path:
    path = out_path(args, name)
    path.write_text(text)
    return path


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, tuple):
        return list(o)
    raise TypeError(type(o))


def dump_json(obj) -> str:
    return json.dumps(obj, indent=2, default=_json_default)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_kernel(args) -> int:
    from .oscint import Amplitude, dump_kernel, kernel_fft, slice_csv

    if args.n % 2:
        raise ValueError("--n must be even")
    check_memory(args, args.n, args.dim)
    grid = kernel_fft(args.t, args.dim, args.n, Amplitude.parse(args.amp))
    with open(out_path(args, "kernel.bin"), "wb") as fh:
        dump_kernel(grid, fh)
    write_text(args, "kernel.csv", slice_csv(grid, min(args.radius, args.n // 2)))
    m, site = grid.sup()
    print(f"kernel d={args.dim} n={args.n} t={fmt(args.t)} max|I|={fmt(m)} at {site}")
    return EXIT_OK


def cmd_decay(args) -> int:
    from .decay import compensated_ratio, fit_decay, sup_scan

    check_memory(args, args.n, args.dim)
    samples = sup_scan(args.dim, args.amp, parse_times(args.t_list), args.n)
    fit = fit_decay(samples, args.log)
    write_text(args, "decay.csv", fit.to_csv())
    summary = fit.to_dict()
    if args.log:
        ratio = compensated_ratio(samples, 1.5)
        summary["compensated_max_over_min"] = float(ratio.max() / ratio.min())
    write_text(args, "decay.json", dump_json(summary))
    print(f"decay d={args.dim} exponent={fmt(fit.exponent)} r2={fmt(fit.r_squared)}")
    return EXIT_OK


def cmd_ray(args) -> int:
    from .decay import lattice_times, ray_decay

    v = parse_floats(args.v)
    if len(v) != args.dim:
        raise ValueError("--v needs --dim components")
    if args.lattice_times:
        lo, hi, count = parse_floats(args.lattice_times)
        times = lattice_times(v, lo, hi, int(count))
    else:
        times = parse_times(args.t_list)
    fit = ray_decay(v, args.dim, args.amp, times, args.n, args.log)
    write_text(args, "ray.csv", fit.to_csv())
    write_text(args, "ray.json", fit.to_json())
    tag = " rapid-decay" if fit.rapid_decay else ""
    print(f"ray v={v} exponent={fmt(fit.exponent)}{tag}")
    return EXIT_OK


def cmd_classify(args) -> int:
    from .critpoints import classify

    xi = parse_floats(args.xi)
    if len(xi) != args.dim:
        raise ValueError("--xi needs --dim components")
    rep = classify(xi, args.tau_c, args.tau_d)
    text = dump_json(rep.to_dict())
    write_text(args, "classify.json", text)
    print(text)
    return EXIT_OK


def cmd_caustics(args) -> int:
    from .critpoints import caustic_scan

    pts = caustic_scan(args.dim, args.grid)
    d = args.dim
    rows = [",".join([f"xi{i + 1}" for i in range(d)] + [f"v{i + 1}" for i in range(d)] + ["det"])]
    for p in pts:
        rows.append(",".join(fmt(a) for a in list(p.xi) + list(p.v) + [p.det]))
    write_text(args, "caustics.csv", "\n".join(rows) + "\n")
    print(f"caustics d={d} grid={args.grid} points={len(pts)}")
    return EXIT_OK


def cmd_roots(args) -> int:
    from .appendix_roots import roots_csv, solve_appendix, swap_pairs

    roots = solve_appendix(args.starts, args.box, args.seed)
    write_text(args, "roots.csv", roots_csv(roots))
    data = [{"x": r.x, "y": r.y, "z": r.z, "residual": r.residual, "extra": r.extra} for r in roots]
    print(dump_json(data))
    known = sum(not r.extra for r in roots)
    if known < 4:
        raise NumericalFailure(f"only {known} of the 4 tabulated roots found")
    log.info("y<->z pairs: %s", swap_pairs(roots))
    return EXIT_OK


def cmd_verify(args) -> int:
    from .critpoints import verify_d2_lemma, verify_d3_condition

    if args.which == "d2-lemma":
        res = verify_d2_lemma(args.grid or 2000)
    else:
        res = verify_d3_condition(args.grid or 400)
    out = {
        "check": args.which,
        "grid_n": res.grid_n,
        "min_residual": res.min_residual,
        "witness": res.witness,
        "candidate_cells": res.n_candidate_cells,
        "refined_boxes": res.n_unresolved_cells,
        "common_zeros": res.common_zeros,
    }
    write_text(args, f"verify_{args.which}.json", dump_json(out))
    print(f"{args.which}: min residual {fmt(res.min_residual)} at {res.witness}, common zeros {len(res.common_zeros)}")
    if not res.supports_claim:
        raise NumericalFailure("scan found a common zero")
    return EXIT_OK


SIM_DEFAULTS = {
    "d": 2,
    "m": 64,
    "dt": 0.05,
    "t_max": 10.0,
    "s": 1.0,
    "sign": 1,
    "epsilon": 0.1,
    "data": "delta",
    "seed": 0,
    "outputs": ["energy", "l2", "linf"],
    "sample_every": 1.0,
}


def cmd_simulate(args) -> int:
    from .pde import delta_state, energy, lp_norm, nonlinear_step, random_state

    cfg = dict(SIM_DEFAULTS)
    cfg.update(args.sim or {})
    unknown = set(cfg) - set(SIM_DEFAULTS)
    if unknown:
        raise ValueError(f"unknown simulate keys: {sorted(unknown)}")
    seed = cfg["seed"] if args.seed is None else args.seed
    d, m = int(cfg["d"]), int(cfg["m"])
    check_memory(args, m, d, buffers=6)
    if cfg["data"] == "delta":
        st = delta_state(d, m, cfg["epsilon"], cfg["s"], cfg["sign"])
    else:
        st = random_state(d, m, cfg["epsilon"], seed, s=cfg["s"], sign=cfg["sign"])
    cols = ["time"] + list(cfg["outputs"])

    def row(state):
        vals = [state.time]
        for name in cfg["outputs"]:
            if name == "energy":
                vals.append(energy(state))
            elif name == "linf":
                vals.append(lp_norm(state, math.inf))
            elif name.startswith("l"):
                vals.append(lp_norm(state, float(name[1:])))
            else:
                raise ValueError(f"unknown output {name!r}")
        return ",".join(fmt(v) for v in vals)

    dt = float(cfg["dt"])
    steps = int(round(cfg["t_max"] / dt))
    every = max(1, int(round(cfg["sample_every"] / dt)))
    lines = [",".join(cols), row(st)]
    for k in range(1, steps + 1):
        st = nonlinear_step(st, dt)
        if k % every == 0 or k == steps:
            lines.append(row(st))
    write_text(args, "simulate.csv", "\n".join(lines) + "\n")
    write_text(args, "simulate.json", dump_json({**cfg, "seed": seed}))
    print(f"simulate d={d} m={m} t={fmt(st.time)} overflow={st.overflow}")
    if st.overflow:
        raise NumericalFailure("blow-up threshold exceeded")
    return EXIT_OK


def cmd_strichartz(args) -> int:
    from .pde import StrichartzPair, is_admissible, strichartz_ratio_study

    q, r = parse_exponent(args.q), parse_exponent(args.r)
    pair = StrichartzPair(q, r, args.dim)
    ok = is_admissible(q, r, args.dim)
    if not ok and not args.no_check:
        raise ValueError(f"({args.q}, {args.r}) is not admissible in d={args.dim}")
    ratio = strichartz_ratio_study(args.dim, pair, args.trials, args.t_max, seed=args.seed or 0, check=False)
    out = {"d": args.dim, "q": args.q, "r": args.r, "admissible": ok, "t_max": args.t_max, "ratio": ratio}
    write_text(args, "strichartz.json", dump_json(out))
    print(f"strichartz d={args.dim} ({args.q},{args.r}) admissible={ok} ratio={fmt(ratio)}")
    return EXIT_OK


def cmd_resolvent(args) -> int:
    from .pde import resolvent_ratio

    lam = complex(args.lam.replace(" ", ""))
    ratio = resolvent_ratio(args.dim, lam, args.trials, args.m, seed=args.seed or 0)
    out = {"d": args.dim, "lambda": [lam.real, lam.imag], "m": args.m, "ratio": ratio}
    write_text(args, "resolvent.json", dump_json(out))
    print(f"resolvent d={args.dim} lambda={lam} ratio={fmt(ratio)}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("global")
    g.add_argument("--threads", type=int, default=1, help="FFT worker threads")
    g.add_argument("--out", default=".", help="output directory")
    g.add_argument("--seed", type=int, default=None)
    g.add_argument("--config", default=None, help="JSON file of option defaults")
    g.add_argument("--max-mem", type=parse_bytes, default=parse_bytes("4G"), help="memory budget, e.g. 2G")
    g.add_argument("-v", "--verbose", action="store_true")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(
        prog="dkglab",
        description="Numerical checks of dispersive decay for the Klein-Gordon equation on Z^d.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_text, desc):
        sp = sub.add_parser(name, parents=[common], help=help_text, description=desc)
        sp.set_defaults(func=func)
        return sp

    sp = add(
        "kernel",
        cmd_kernel,
        "kernel values on a lattice box",
        "Evaluate the fundamental-solution integral I(t,x) on a centred box by FFT. "
        "At t=0 it is (2pi)^d times a delta; outside the light cone it is negligible.",
    )
    sp.add_argument("--dim", type=int, required=True)
    sp.add_argument("--t", type=float, required=True)
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--amp", choices=["one", "inv-omega"], default="one")
    sp.add_argument("--radius", type=int, default=16, help="half-width of the CSV slice")

    sp = add(
        "decay",
        cmd_decay,
        "fit the sup-norm decay rate",
        "Fit max_x |I(t,x)| ~ t^-sigma. Expected sigma: 3/4 in d=2, 7/6 in d=3, "
        "3/2 with a log factor in d=4 (use --log).",
    )
    sp.add_argument("--dim", type=int, required=True)
    sp.add_argument("--t-list", required=True, help="a:b:step or comma list")
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--amp", choices=["one", "inv-omega"], default="one")
    sp.add_argument("--log", action="store_true", help="fit t^-sigma log t")

    sp = add(
        "ray",
        cmd_ray,
        "fit the decay along a ray x = v t",
        "Fit |I(t, round(vt))| along one velocity. At a caustic velocity the rate "
        "drops below d/2 by the singular index of the critical point; outside the "
        "light cone the ray shows rapid decay.",
    )
    sp.add_argument("--dim", type=int, required=True)
    sp.add_argument("--v", required=True, help="comma-separated velocity")
    sp.add_argument("--t-list", default="20:100:10")
    sp.add_argument("--lattice-times", default=None, help="lo,hi,count: times with v t on the lattice")
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--amp", choices=["one", "inv-omega"], default="one")
    sp.add_argument("--log", action="store_true")

    sp = add(
        "classify",
        cmd_classify,
        "singularity class of a critical point",
        "Classify the phase at a frequency (A1, A2, A3, A5, D4minus, T444 or the d=4 "
        "rank>=3 residual class) and report the decay exponent d/2 minus the singular index.",
    )
    sp.add_argument("--dim", type=int, required=True)
    sp.add_argument("--xi", required=True, help="comma-separated frequency")
    sp.add_argument("--tau-c", type=float, default=1e-4, help="cosine-zero tolerance for typed-in points")
    sp.add_argument("--tau-d", type=float, default=1e-8)

    sp = add(
        "caustics",
        cmd_caustics,
        "points where the phase Hessian is singular",
        "Locate frequencies with det Hessian = 0 and their group velocities: the "
        "caustic set inside the light cone where decay is slower.",
    )
    sp.add_argument("--dim", type=int, required=True)
    sp.add_argument("--grid", type=int, default=64)

    sp = add(
        "roots",
        cmd_roots,
        "real roots of the three-equation degeneracy system",
        "Multistart Newton for the system whose solutions would allow a worse than A3 "
        "point in d=3. Four real roots are expected, in two y<->z pairs, none inside (-1,1)^3.",
    )
    sp.add_argument("--starts", type=int, default=10_000)
    sp.add_argument("--box", type=float, default=15.0)

    sp = add(
        "verify",
        cmd_verify,
        "brute-force nonexistence scans",
        "d2-lemma: no common zero of the two d=2 degeneracy equations with c1>0>c2, so no "
        "cusp beyond A3 in d=2. d3-condition: no common zero of the three-equation system "
        "in (-1,1)^3, so no A_k with k>3 in the generic d=3 case.",
    )
    sp.add_argument("which", choices=["d2-lemma", "d3-condition"])
    sp.add_argument("--grid", type=int, default=None)

    sp = add(
        "simulate",
        cmd_simulate,
        "nonlinear lattice evolution",
        "Strang-split evolution of u_tt - Delta u + u + sign |u|^{2s} u = 0 on a periodic "
        "box; writes energy and l^p norms over time. Small data should decay like the "
        "linear flow. Parameters come from --config JSON.",
    )

    sp = add(
        "strichartz",
        cmd_strichartz,
        "Strichartz constant study",
        "Measure ||U(t) f||_{L^q l^r} / ||f||_2 for delta and random data. Admissible "
        "pairs should give a bounded ratio as t_max grows; sharp endpoints are "
        "(8/3,inf) in d=2, (12/7,inf) in d=3, q>4/3 with r=inf in d=4.",
    )
    sp.add_argument("--dim", type=int, required=True)
    sp.add_argument("--q", required=True)
    sp.add_argument("--r", required=True)
    sp.add_argument("--trials", type=int, default=4)
    sp.add_argument("--t-max", type=float, default=20.0)
    sp.add_argument("--no-check", action="store_true", help="allow inadmissible pairs")

    sp = add(
        "resolvent",
        cmd_resolvent,
        "resolvent ratio sampling",
        "Sample ||psi||_a / ||(sqrt(1-Delta) - lambda) psi||_b with a = 2s/(s-1), "
        "b = 2s/(s+1) and s the decay rate; the ratio should stay bounded for all lambda (d=3,4).",
    )
    sp.add_argument("--dim", type=int, required=True, choices=[3, 4])
    sp.add_argument("--lam", required=True, help="complex number, e.g. 2+0.1j")
    sp.add_argument("--trials", type=int, default=8)
    sp.add_argument("--m", type=int, default=32)
    return parser


def _apply_config(parser, argv):
    """Parse, taking option defaults from ``--config`` JSON when given.

    Flags on the command line still win. Config keys may satisfy options that
    are otherwise required. For ``simulate`` the whole JSON is the run config.
    """
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    pre.add_argument("command", nargs="?")
    known, _ = pre.parse_known_args(argv)
    cfg = None
    if known.config:
        with open(known.config) as fh:
            cfg = json.load(fh)
    choices = parser._subparsers._group_actions[0].choices
    if cfg is not None and known.command in choices and known.command != "simulate":
        sub = choices[known.command]
        cfg = {k.replace("-", "_"): v for k, v in cfg.items()}
        dests = {a.dest: a for a in sub._actions}
        bad = set(cfg) - set(dests)
        if bad:
            sub.error(f"unknown config keys: {sorted(bad)}")
        for key in cfg:
            dests[key].required = False
        sub.set_defaults(**cfg)
    args = parser.parse_args(argv)
    args.sim = cfg if args.command == "simulate" else None
    return args


def parse_exponent(text: str) -> float:
    """``inf``, a decimal or a fraction such as ``8/3``."""
    if text.lower() in ("inf", "infty", "infinity"):
        return math.inf
    return float(Fraction(text))


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    from .errors import MemoryBudgetExceeded

    try:
        with warnings.catch_warnings(), sfft.set_workers(max(1, args.threads)):
            warnings.simplefilter("default")
            warnings.showwarning = _warn_to_stderr
            return args.func(args)
    except MemoryBudgetExceeded as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except NumericalFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def _warn_to_stderr(message, category, filename, lineno, file=None, line=None):
    print(f"warning: {category.__name__}: {message}", file=sys.stderr)


if __name__ == "__main__":
    sys.exit(main())

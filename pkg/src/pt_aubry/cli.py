"""Command-line front end: ``pt-aubry {spectrum,butterfly,gamma-pt,evolve}``.

Every output file starts with ``#`` comment lines echoing the full run
configuration (CSV) or carries it under a ``"config"`` key (JSON).  Floats are
written with ``repr``, the shortest string that round-trips bit-exactly.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import re
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from . import dynamics, spectral
from .lattice import GOLDEN, LatticeParams, build_hamiltonian

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4

COMMANDS = ("spectrum", "butterfly", "gamma-pt", "evolve")
DEFAULT_SAMPLE_EVERY = 100


class OutputError(OSError):
    pass


@dataclass
class RunConfig:
    command: str
    params: LatticeParams
    options: dict = field(default_factory=dict)
    fmt: str = "csv"
    out: Optional[str] = None
    full_state: bool = False

    def echo(self) -> dict:
        p = self.params
        beta = p.beta
        return {
            "command": self.command,
            "params": {
                "n_sites": p.n_sites,
                "hopping": p.hopping,
                "potential_amp": p.potential_amp,
                "gain_amp": p.gain_amp,
                "beta": f"{beta.numerator}/{beta.denominator}"
                if isinstance(beta, Fraction)
                else beta,
                "phi0": p.phi0,
                "drive_freq": p.drive_freq,
            },
            "options": self.options,
            "format": self.fmt,
        }


# ---------------------------------------------------------------- arg parsing


def parse_beta(text: str) -> Fraction | float:
    """``golden``, ``p/q`` (exact) or a decimal, restricted to [0, 1]."""
    s = text.strip().lower()
    if s == "golden":
        value: Fraction | float = GOLDEN
    elif "/" in s:
        try:
            value = Fraction(s)
        except (ValueError, ZeroDivisionError):
            raise argparse.ArgumentTypeError(f"invalid fraction {text!r}") from None
    else:
        value = _finite_float(text)
    if not 0 <= value <= 1:
        raise argparse.ArgumentTypeError(f"beta must lie in [0, 1], got {text}")
    return value


def parse_phi0(text: str) -> float:
    """Integer multiple of pi: ``0``, ``pi``, ``-2pi``, ``3*pi`` or a float."""
    s = text.strip().lower().replace(" ", "")
    m = re.fullmatch(r"([+-]?\d*)\*?pi", s)
    if m:
        k = m.group(1)
        mult = {"": 1, "+": 1, "-": -1}.get(k)
        return (mult if mult is not None else int(k)) * math.pi
    value = _finite_float(text)
    k = value / math.pi
    if abs(k - round(k)) > 1e-12:
        raise argparse.ArgumentTypeError(f"phi0 must be an integer multiple of pi, got {text}")
    return value


def _finite_float(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not math.isfinite(value):
        raise argparse.ArgumentTypeError(f"must be finite, got {text!r}")
    return value


def _ranged(lo: float, lo_open: bool = False):
    def check(text: str) -> float:
        value = _finite_float(text)
        if value < lo or (lo_open and value == lo):
            op = ">" if lo_open else ">="
            raise argparse.ArgumentTypeError(f"must be {op} {lo}, got {text}")
        return value

    return check


def _int_at_least(lo: int):
    def check(text: str) -> int:
        try:
            value = int(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
        if value < lo:
            raise argparse.ArgumentTypeError(f"must be >= {lo}, got {text}")
        return value

    return check


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False, allow_abbrev=False)
    g = common.add_argument_group("lattice")
    g.add_argument("--n", type=_int_at_least(2), default=50, help="number of sites N (default 50)")
    g.add_argument("--j", type=_ranged(0, lo_open=True), default=1.0, help="hopping J (default 1)")
    g.add_argument("--v", type=_ranged(0), default=0.0, help="potential amplitude V (default 0)")
    g.add_argument("--phi0", type=parse_phi0, default=0.0, help="phase phi_0, multiple of pi (default 0)")
    o = common.add_argument_group("output")
    o.add_argument("--format", choices=("csv", "json"), default="csv")
    o.add_argument("--out", metavar="PATH", help="output file (default stdout)")

    gamma = argparse.ArgumentParser(add_help=False, allow_abbrev=False)
    gamma.add_argument("--gamma0", type=_finite_float, default=1.0, help="gain/loss amplitude (default 1)")
    beta = argparse.ArgumentParser(add_help=False, allow_abbrev=False)
    beta.add_argument(
        "--beta", type=parse_beta, default=GOLDEN,
        help="modulation beta: 'golden' (default), 'p/q' or a decimal in [0,1]",
    )

    parser = argparse.ArgumentParser(
        prog="pt-aubry",
        allow_abbrev=False,
        description="Spectra, butterflies, PT thresholds and dynamics of the PT-symmetric Aubry-Andre chain.",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="{" + ",".join(COMMANDS) + "}")

    sp = sub.add_parser(
        "spectrum", parents=[common, gamma, beta], allow_abbrev=False,
        help="eigenvalues of the static Hamiltonian",
    )

    bf = sub.add_parser(
        "butterfly", parents=[common, gamma], allow_abbrev=False,
        help="spectra over a beta grid",
    )
    bf.add_argument("--beta-min", type=parse_beta, help="first beta (inclusive); default: open grid in (0,1)")
    bf.add_argument("--beta-max", type=parse_beta, help="last beta (inclusive)")
    bf.add_argument("--beta-steps", type=_int_at_least(1), default=400, help="grid points (default 400)")

    gp = sub.add_parser(
        "gamma-pt", parents=[common, beta], allow_abbrev=False,
        help="PT-breaking threshold by bisection",
    )
    gp.add_argument("--gamma-max", type=_ranged(0, lo_open=True), help="search ceiling (default 4J)")
    gp.add_argument("--tol", type=_ranged(0, lo_open=True), default=1e-6, help="bracket width (default 1e-6)")

    ev = sub.add_parser(
        "evolve", parents=[common, gamma, beta], allow_abbrev=False,
        help="propagate a single-site excitation",
    )
    ev.add_argument("--omega", type=_ranged(0), default=0.0, help="drive frequency (default 0, static)")
    ev.add_argument("--init-site", type=_int_at_least(1), help="initially excited site, 1-based (default centre)")
    ev.add_argument("--z-end", type=_ranged(0, lo_open=True), default=50.0, help="propagation length (default 50)")
    ev.add_argument("--dz", type=_ranged(0, lo_open=True), help="step (default 1e-3*min(1,1/omega))")
    ev.add_argument(
        "--sample-every", type=_int_at_least(1), default=DEFAULT_SAMPLE_EVERY,
        help=f"record every k-th step (default {DEFAULT_SAMPLE_EVERY})",
    )
    ev.add_argument("--full-state", action="store_true", help="append re/im of every amplitude")
    parser.set_defaults(_commands={"spectrum": sp, "butterfly": bf, "gamma-pt": gp, "evolve": ev})
    return parser


def parse_args(argv: Optional[Sequence[str]] = None) -> RunConfig:
    """Parse and validate; usage problems exit via ``parser.error`` (code 2)."""
    parser = build_parser()
    ns = parser.parse_args(argv)
    sub = ns._commands[ns.command]

    kw = dict(
        n_sites=ns.n,
        hopping=ns.j,
        potential_amp=ns.v,
        phi0=ns.phi0,
        gain_amp=getattr(ns, "gamma0", 0.0),
        beta=getattr(ns, "beta", GOLDEN),
        drive_freq=getattr(ns, "omega", 0.0),
    )
    try:
        params = LatticeParams(**kw)
    except ValueError as exc:
        sub.error(str(exc))

    options: dict = {}
    if ns.command == "butterfly":
        steps = ns.beta_steps
        if (ns.beta_min is None) != (ns.beta_max is None):
            sub.error("--beta-min and --beta-max must be given together")
        if ns.beta_min is not None:
            lo, hi = float(ns.beta_min), float(ns.beta_max)
            if lo > hi:
                sub.error(f"argument --beta-min: {lo} exceeds --beta-max {hi}")
            options.update(beta_min=lo, beta_max=hi)
        options["beta_steps"] = steps
    elif ns.command == "gamma-pt":
        options["gamma_max"] = ns.gamma_max if ns.gamma_max is not None else 4.0 * ns.j
        options["tol"] = ns.tol
    elif ns.command == "evolve":
        site = ns.init_site if ns.init_site is not None else (ns.n + 1) // 2
        if site > ns.n:
            sub.error(f"argument --init-site: must be <= N={ns.n}, got {site}")
        dz = ns.dz if ns.dz is not None else dynamics.default_step(params)
        limit = dynamics.max_step(params)
        if dz > limit * (1 + 1e-12):
            sub.error(f"argument --dz: must be <= 1/(100*max(omega,1)) = {limit:.6g}, got {dz}")
        options.update(init_site=site, z_end=ns.z_end, dz=dz, sample_every=ns.sample_every)

    return RunConfig(
        command=ns.command,
        params=params,
        options=options,
        fmt=ns.format,
        out=ns.out,
        full_state=bool(getattr(ns, "full_state", False)),
    )


# ---------------------------------------------------------------- emitters


def _num(x: float) -> str:
    # repr is the shortest exact round-trip form; + 0.0 folds -0.0 into 0.0
    return repr(float(x) + 0.0)


def _header(config: Optional[RunConfig]) -> list[str]:
    if config is None:
        return []
    return ["# pt-aubry " + json.dumps(config.echo(), sort_keys=True)]


def _json_bytes(obj: dict) -> bytes:
    return (json.dumps(obj, indent=1, allow_nan=True) + "\n").encode()


def _pairs(values: np.ndarray) -> list[list[float]]:
    return [[float(v.real) + 0.0, float(v.imag) + 0.0] for v in values]


def emit_spectrum(
    spec: spectral.ComplexSpectrum,
    analytics: spectral.SpectrumAnalytics,
    fmt: str = "csv",
    config: Optional[RunConfig] = None,
) -> bytes:
    if fmt == "json":
        obj = {
            "eigenvalues": _pairs(spec.eigenvalues),
            "analytics": analytics.as_dict(),
        }
        if config is not None:
            obj = {"config": config.echo(), **obj}
        return _json_bytes(obj)
    lines = _header(config) + ["index,re_e,im_e"]
    lines += [f"{k},{_num(e.real)},{_num(e.imag)}" for k, e in enumerate(spec.eigenvalues, start=1)]
    a = analytics
    lines += [
        "# analytics:",
        f"#   max_imag={_num(a.max_imag)}",
        f"#   real_width={_num(a.real_width)}",
        f"#   is_real={str(a.is_real).lower()}",
        f"#   n_bands={a.n_bands}",
        "#   band_gaps=" + ";".join(f"({_num(lo)},{_num(hi)})" for lo, hi in a.band_gaps),
    ]
    return ("\n".join(lines) + "\n").encode()


def emit_butterfly(ds: spectral.ButterflyDataset, fmt: str = "csv", config: Optional[RunConfig] = None) -> bytes:
    if fmt == "json":
        obj = {
            "grid": list(ds.grid_spec),
            "records": [{"beta": b, "eigenvalues": _pairs(ev)} for b, ev in ds.records],
        }
        if config is not None:
            obj = {"config": config.echo(), **obj}
        return _json_bytes(obj)
    lines = _header(config) + ["beta,re_e,im_e"]
    for b, ev in ds.records:
        sb = _num(b)
        lines += [f"{sb},{_num(e.real)},{_num(e.imag)}" for e in ev]
    return ("\n".join(lines) + "\n").encode()


def emit_threshold(result: spectral.ThresholdResult, fmt: str = "csv", config: Optional[RunConfig] = None) -> bytes:
    if fmt == "json":
        obj = result.as_dict()
        if config is not None:
            obj = {"config": config.echo(), **obj}
        return _json_bytes(obj)
    lines = _header(config) + ["gamma_pt,gamma_low,gamma_high,tolerance,evaluations,exhausted"]
    lo, hi = result.bracket
    lines.append(
        f"{_num(result.gamma_pt)},{_num(lo)},{_num(hi)},{_num(result.tolerance)},"
        f"{result.evaluations},{str(result.exhausted).lower()}"
    )
    lines += [f"# warning: {w}" for w in result.warnings]
    return ("\n".join(lines) + "\n").encode()


def emit_trajectory(
    traj: dynamics.Trajectory,
    fmt: str = "csv",
    full_state: bool = False,
    config: Optional[RunConfig] = None,
    note: Optional[str] = None,
) -> bytes:
    n = traj.params.n_sites
    if fmt == "json":
        samples = []
        for k in range(len(traj)):
            row = {
                "z": float(traj.z[k]),
                "intensity": float(traj.intensity[k]),
                "sigma": float(traj.sigma[k]),
                "nbar": float(traj.nbar[k]),
            }
            if full_state:
                row["state"] = _pairs(traj.states[k])
            samples.append(row)
        obj: dict = {"step_size": traj.step_size, "samples": samples}
        if note:
            obj["note"] = note
        if config is not None:
            obj = {"config": config.echo(), **obj}
        return _json_bytes(obj)

    cols = ["z", "intensity", "sigma", "nbar"]
    if full_state:
        for i in range(1, n + 1):
            cols += [f"re_c{i}", f"im_c{i}"]
    lines = _header(config)
    if note:
        lines.append(f"# note: {note}")
    lines.append(",".join(cols))
    for k in range(len(traj)):
        row = [traj.z[k], traj.intensity[k], traj.sigma[k], traj.nbar[k]]
        if full_state:
            row += [x for c in traj.states[k] for x in (c.real, c.imag)]
        lines.append(",".join(_num(x) for x in row))
    return ("\n".join(lines) + "\n").encode()


def write_output(data: bytes, path: Optional[str]) -> None:
    if path is None or path == "-":
        sys.stdout.buffer.write(data)
        sys.stdout.flush()
        return
    try:
        with open(path, "wb") as fh:
            fh.write(data)
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc.strerror or exc}") from exc


# ---------------------------------------------------------------- orchestration


def butterfly_grid(config: RunConfig) -> np.ndarray:
    opts = config.options
    if "beta_min" in opts:
        return np.linspace(opts["beta_min"], opts["beta_max"], opts["beta_steps"])
    return spectral.default_beta_grid(opts["beta_steps"])


def run(config: RunConfig) -> int:
    p = config.params
    status = EXIT_OK
    try:
        if config.command == "spectrum":
            spec = spectral.eig(build_hamiltonian(p))
            data = emit_spectrum(spec, spectral.analyze(spec), config.fmt, config)
        elif config.command == "butterfly":
            ds = spectral.butterfly_sweep(p, butterfly_grid(config))
            data = emit_butterfly(ds, config.fmt, config)
        elif config.command == "gamma-pt":
            res = spectral.find_gamma_pt(p, config.options["gamma_max"], config.options["tol"])
            data = emit_threshold(res, config.fmt, config)
        elif config.command == "evolve":
            o = config.options
            init = dynamics.StateVector.single_site(p.n_sites, o["init_site"])
            try:
                traj = dynamics.propagate(p, init, o["z_end"], o["dz"], o["sample_every"])
                note = None
            except dynamics.IntensityOverflowError as exc:
                # keep the trustworthy samples but report the abort
                traj, note = exc.trajectory, str(exc)
                print(f"pt-aubry: {exc}", file=sys.stderr)
                status = EXIT_NUMERICAL
            data = emit_trajectory(traj, config.fmt, config.full_state, config, note)
        else:  # pragma: no cover - argparse restricts the choices
            raise AssertionError(config.command)
    except (spectral.EigensolverError, spectral.SweepError, spectral.ThresholdSearchError) as exc:
        print(f"pt-aubry: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL

    try:
        write_output(data, config.out)
    except OutputError as exc:
        print(f"pt-aubry: {exc}", file=sys.stderr)
        return EXIT_IO
    return status


def main(argv: Optional[Sequence[str]] = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        config = parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else EXIT_USAGE
    return run(config)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())

"""Command-line front end: ``triprop <command> --config FILE ...``.

Exit status: 0 success, 1 invalid input, 2 caustic, 3 verification failure.
Set ``TRIPROP_LOG`` (e.g. ``INFO``, ``DEBUG``) for diagnostics on stderr.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import checks
from .model import ConfigError, parse_config, parse_td_config
from .oracle import BoundaryLeakError
from .propagator import Endpoints, three_body_kernel
from .spectrum import enumerate_levels
from .timedep import ConstraintError, build_td_system, td_three_body_kernel
from .transform import normal_modes, to_jacobi

log = logging.getLogger("triprop")

EXIT_INVALID = 1
EXIT_CAUSTIC = 2
EXIT_VERIFY = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


class InputError(Exception):
    pass


def _clean(x):
    if isinstance(x, dict):
        return {k: _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else None
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def dumps(doc) -> str:
    """Deterministic JSON: insertion-ordered keys, round-trip float repr, non-finite as null."""
    return json.dumps(_clean(doc), indent=2, allow_nan=False) + "\n"


def _emit(text: str, out):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _read_config(path):
    p = Path(path)
    if not p.is_file():
        raise InputError(f"config file not found: {path}")
    return p.read_text()


def _positions(text, flag):
    try:
        arr = np.asarray(json.loads(text), dtype=float)
    except (json.JSONDecodeError, TypeError, ValueError) as exc:
        raise InputError(f"{flag}: expected a JSON 3x3 array of positions ({exc})") from None
    if arr.shape != (3, 3):
        raise InputError(f"{flag}: expected shape 3x3 (three particles, xyz), got {arr.shape}")
    return arr


# ---------------------------------------------------------------------------
# commands


def cmd_decouple(args) -> int:
    sys_ = parse_config(_read_config(args.config))
    jac = to_jacobi(sys_)
    frame = normal_modes(jac)
    doc = {
        "M1": jac.M1,
        "M2": jac.M2,
        "M3": jac.M3,
        "omega1_sq": jac.omega1_sq,
        "omega2_sq": jac.omega2_sq,
        "lambda": jac.lam,
        "phi": frame.phi,
        "Omega1_sq": frame.Omega1_sq,
        "Omega2_sq": frame.Omega2_sq,
        "R": frame.R,
    }
    _emit(dumps(doc), args.out)
    return 0


def cmd_spectrum(args) -> int:
    sys_ = parse_config(_read_config(args.config))
    frame = normal_modes(to_jacobi(sys_))
    if not frame.bound:
        raise InputError(
            f"no discrete spectrum: inverted mode (Omega1^2={frame.Omega1_sq!r}, Omega2^2={frame.Omega2_sq!r})"
        )
    levels = enumerate_levels(frame, sys_.hbar, args.max_energy)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["n1x", "n1y", "n1z", "n2x", "n2y", "n2z", "energy", "degeneracy"])
    for lv in levels:
        w.writerow([*lv.index.n1, *lv.index.n2, repr(float(lv.energy)), lv.degeneracy])
    _emit(buf.getvalue(), args.out)
    return 0


def _kernel_doc(kv):
    if kv.caustic_flag:
        return {"re": None, "im": None, "caustic": True, "branch": kv.branch_index}
    amp = complex(kv.amplitude)
    return {"re": amp.real, "im": amp.imag, "caustic": False, "branch": kv.branch_index}


def _finish_kernel(kv, out) -> int:
    _emit(dumps(_kernel_doc(kv)), out)
    if kv.caustic_flag:
        print(f"caustic: {kv.detail}", file=sys.stderr)
        return EXIT_CAUSTIC
    return 0


def _endpoints(args):
    if args.tau is None or not args.tau > 0:
        raise InputError("--tau must be given and positive")
    return Endpoints(_positions(args.r_from, "--from"), _positions(args.r_to, "--to"), args.t0, args.t0 + args.tau)


def cmd_propagate(args) -> int:
    sys_ = parse_config(_read_config(args.config))
    return _finish_kernel(three_body_kernel(sys_, _endpoints(args)), args.out)


def cmd_td_propagate(args) -> int:
    cfg = parse_td_config(_read_config(args.config))
    ep = _endpoints(args)
    tds = build_td_system(cfg, (ep.t_a, ep.t_b))
    return _finish_kernel(td_three_body_kernel(tds, ep), args.out)


def cmd_verify(args) -> int:
    names = list(checks.SUITES) if args.suite == "all" else [args.suite]
    if args.grid_points < 64 or not args.domain > 0:
        raise InputError("--grid-points must be at least 64 and --domain positive")
    opts = checks.GridOptions(points=args.grid_points, domain=args.domain)
    results = checks.run_suites(names, opts)
    report = {
        "suites": {n: [r.to_dict() for r in results if r.suite == n] for n in names},
        "passed": all(r.passed for r in results),
    }
    _emit(dumps(report), args.out)
    for r in results:
        if not r.passed:
            print(f"FAIL {r.suite}: {r.name}: {r.value!r} (tolerance {r.tolerance!r})", file=sys.stderr)
    return 0 if report["passed"] else EXIT_VERIFY


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="triprop", description="Exact propagators for three coupled quantum oscillators.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, config=True):
        if config:
            sp.add_argument("--config", required=True, help="JSON system description")
        sp.add_argument("--out", help="write the result here instead of stdout")

    sp = sub.add_parser("decouple", help="Jacobi and normal-mode parameters (JSON)")
    common(sp)
    sp.set_defaults(func=cmd_decouple)

    sp = sub.add_parser("spectrum", help="bound levels up to an energy (CSV)")
    common(sp)
    sp.add_argument("--max-energy", type=float, required=True)
    sp.set_defaults(func=cmd_spectrum)

    for name, func, helptext in (
        ("propagate", cmd_propagate, "kernel between two configurations (JSON)"),
        ("td-propagate", cmd_td_propagate, "kernel for time-dependent couplings (JSON)"),
    ):
        sp = sub.add_parser(name, help=helptext)
        common(sp)
        sp.add_argument("--tau", type=float, required=True, help="elapsed time t_b - t_a")
        sp.add_argument("--t0", type=float, default=0.0, help="initial time t_a (default 0)")
        sp.add_argument("--from", dest="r_from", required=True, help="initial positions, JSON 3x3")
        sp.add_argument("--to", dest="r_to", required=True, help="final positions, JSON 3x3")
        sp.set_defaults(func=func)

    sp = sub.add_parser("verify", help="run the oracle suites (JSON report)")
    common(sp, config=False)
    sp.add_argument("--suite", default="all", choices=["all", *checks.SUITES])
    sp.add_argument("--grid-points", type=int, default=2048)
    sp.add_argument("--domain", type=float, default=12.0, help="grid half-width in oscillator lengths")
    sp.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    level = os.environ.get("TRIPROP_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ConstraintError, InputError, ValueError, OSError, BoundaryLeakError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())

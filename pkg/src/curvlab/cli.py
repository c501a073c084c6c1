"""Command-line front end.

Verbs: ``verify``, ``schwarzschild-potential``, ``gradcheck``, ``flow`` and
``identities``.  Settings resolve as command-line flag, then the verb's
section of the ``--config`` file, then built-in defaults.

Exit codes: 0 pass, 1 tolerance failure or grid guard, 2 configuration
error, 3 numerical-domain error.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import io
import sys
from pathlib import Path

import numpy as np

from . import exact_solutions as es
from . import expr as ex
from . import grid_torus as gt
from . import jets
from . import suites
from .functionals import SYSTEMS, PotentialSpec, PotentialError, fmt, residual
from .tensor_geometry import DomainViolation, MetricChart, NotPositiveDefinite

EXIT_PASS, EXIT_FAIL, EXIT_CONFIG, EXIT_DOMAIN = 0, 1, 2, 3

DOMAIN_ERRORS = (DomainViolation, NotPositiveDefinite, jets.JetDomainError, ex.ExprDomainError,
                 es.StepSizeUnderflow, es.QuadratureError, ZeroDivisionError, FloatingPointError)
GUARD_ERRORS = (gt.FlowGuard, gt.AliasingError)


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

class Config:
    """Sectioned key/value file (``[section]`` headers, ``key = value``)."""

    def __init__(self, path=None):
        self.path = path
        self.cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
        self.cp.optionxform = str
        if path is not None:
            try:
                with open(path, encoding="utf-8") as fh:
                    self.cp.read_file(fh, source=str(path))
            except OSError as err:
                raise ConfigError(f"cannot read config {path}: {err}") from err
            except configparser.Error as err:
                raise ConfigError(f"config syntax error: {err}") from err

    def section(self, name):
        return dict(self.cp[name]) if self.cp.has_section(name) else {}

    def where(self, section, key):
        return f"{self.path or '<config>'} [{section}] {key}"


def _number(value, where, kind=float):
    try:
        return kind(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{where}: expected {kind.__name__}, got {value!r}") from None


def _setting(args, cfg, section, key, default, kind=float):
    v = getattr(args, key.replace("-", "_"), None)
    if v is not None:
        return v
    sec = cfg.section(section)
    if key in sec:
        return _number(sec[key], cfg.where(section, key), kind)
    return default


def _tol(args, cfg, section, default):
    tol = _setting(args, cfg, section, "tol", default)
    if not tol > 0:
        raise ConfigError(f"tolerance must be positive, got {tol!r}")
    return tol


def _expr(src, cfg, section, key, names=()):
    try:
        return ex.parse(src, names)
    except ex.ExprError as err:
        raise ConfigError(f"{cfg.where(section, key)}: {err}") from err


def _points(text, where):
    pts = []
    for chunk in text.split(";"):
        if chunk.strip():
            try:
                pts.append([float(v) for v in chunk.replace(",", " ").split()])
            except ValueError:
                raise ConfigError(f"{where}: malformed point {chunk.strip()!r}") from None
    if not pts:
        raise ConfigError(f"{where}: no points given")
    return pts


DEFAULT_POINTS = {
    "schwarzschild": lambda p: [[k * float(p.get("m", 0.5)), 1.1, 0.4] for k in (3.0, 4.0, 10.0)],
    "kasner": lambda p: [[r, 0.3, -0.7] for r in (0.5, 1.0, 2.0)],
    "flat-torus": lambda p: [[0.5, 1.0, 2.0], [1.5, 2.5, 0.5]],
}


def build_campaign(cfg: Config):
    """Read ``[metric]``, ``[potential]`` and ``[check]`` into
    ``(named metric, potential spec or None, systems, points)``."""
    m = cfg.section("metric")
    family = m.get("family")
    if family is None:
        raise ConfigError(f"{cfg.where('metric', 'family')}: missing")
    params = {k: _number(v, cfg.where("metric", k)) for k, v in m.items()
              if k in ex.PARAMETERS}
    pot_sec = cfg.section("potential")
    if "alpha" in pot_sec:
        params["alpha"] = _number(pot_sec["alpha"], cfg.where("potential", "alpha"))
    try:
        if family == "components":
            comps = {}
            for i in range(3):
                for j in range(i, 3):
                    key = f"g{i+1}{j+1}"
                    if key in m:
                        comps[(i, j)] = _expr(m[key], cfg, "metric", key, tuple(params))
            named = es.NamedMetric(MetricChart.from_dict(comps, dim=3, params=params, name="inline"))
        elif family in ("warped",):
            named = es.build_named_metric(family, f1=_expr(m.get("f1", "1"), cfg, "metric", "f1"),
                                          f2=_expr(m.get("f2", "1"), cfg, "metric", "f2"))
        elif family == "diagonal":
            named = es.build_named_metric(family, exprs=[
                _expr(m.get(f"g{i}{i}", "1"), cfg, "metric", f"g{i}{i}", tuple(params))
                for i in (1, 2, 3)], params=params)
        else:
            named = es.build_named_metric(family, **params)
    except es.ParameterError as err:
        raise ConfigError(f"{cfg.where('metric', 'family')}: {err}") from err

    chk = cfg.section("check")
    systems = [s.strip() for s in chk.get("systems", "vacuum").split(",") if s.strip()]
    for s in systems:
        if s not in SYSTEMS:
            raise ConfigError(f"{cfg.where('check', 'systems')}: unknown system {s!r}")
    if "points" in chk:
        pts = _points(chk["points"], cfg.where("check", "points"))
    elif family in DEFAULT_POINTS:
        pts = DEFAULT_POINTS[family](params)
    else:
        raise ConfigError(f"{cfg.where('check', 'points')}: required for family {family!r}")
    for x in pts:
        if len(x) != named.chart.dim:
            raise ConfigError(f"{cfg.where('check', 'points')}: point {x} needs "
                              f"{named.chart.dim} coordinates")

    pot = None
    if pot_sec or any(s != "R2" for s in systems):
        fields = dict(named.fields)
        if "c" in pot_sec:
            fields["c"] = _number(pot_sec["c"], cfg.where("potential", "c"))
        alpha = params.get("alpha", 0.0)
        if "omega" in pot_sec:
            omega = _expr(pot_sec["omega"], cfg, "potential", "omega", tuple(fields) + tuple(params))
            try:
                pot = PotentialSpec(omega, alpha, {**params, **fields})
            except PotentialError as err:
                raise ConfigError(f"{cfg.where('potential', 'omega')}: {err}") from err
        else:
            canon = named.potentials.get("R2s" if "R2s" in systems else "vacuum")
            if canon is None:
                raise ConfigError(f"{cfg.where('potential', 'omega')}: required for family {family!r}")
            pot = canon
    return named, pot, systems, pts


# ---------------------------------------------------------------------------
# verbs
# ---------------------------------------------------------------------------

def _out_dir(args):
    d = Path(args.out_dir or ".")
    d.mkdir(parents=True, exist_ok=True)
    return d


def _write(path: Path, text):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def cmd_verify(args, cfg):
    named, pot, systems, pts = build_campaign(cfg)
    tol = _tol(args, cfg, "check", 1e-8)
    out = _out_dir(args)
    csv_parts, jsonl, ok = [], [], True
    for k, system in enumerate(systems):
        rep = residual(system, named.chart, None if system == "R2" else pot, pts, tol)
        text = rep.to_csv()
        csv_parts.append(text if k == 0 else text.split("\n", 1)[1])
        jsonl.append(rep.to_jsonl())
        for x, msg in rep.errors:
            print(f"{system} point {x}: {msg}", file=sys.stderr)
        status = "PASS" if rep.passed else "FAIL"
        print(f"{system}: {status} max residual {rep.max_residual:.3e} (tol {tol:g})")
        ok = ok and rep.passed
    _write(out / "verify.csv", "".join(csv_parts))
    _write(out / "verify.jsonl", "".join(jsonl))
    return EXIT_PASS if ok else EXIT_FAIL


def cmd_schwarzschild_potential(args, cfg):
    sec = "schwarzschild-potential"
    alpha = _setting(args, cfg, sec, "alpha", 1.0)
    m = _setting(args, cfg, sec, "m", 0.5)
    r_min = _setting(args, cfg, sec, "r-min", 2 * m * 1.01)
    r_max = _setting(args, cfg, sec, "r-max", 100 * m)
    samples = _setting(args, cfg, sec, "samples", 50, int)
    method = args.method or cfg.section(sec).get("method", "both")
    tol = _tol(args, cfg, sec, 1e-6)
    if method not in ("closed", "ode", "both"):
        raise ConfigError(f"unknown method {method!r}")
    if not (m > 0 and 2 * m < r_min < r_max) or samples < 2:
        raise ConfigError(f"invalid range: need 2m < r-min < r-max and samples >= 2 "
                          f"(m={m}, r-min={r_min}, r-max={r_max}, samples={samples})")
    rs = np.linspace(r_min, r_max, samples)
    closed = es.tau_closed_solution(alpha, m, rs) if method in ("closed", "both") else None
    ode = es.tau_ode(alpha, m, (r_min, r_max), samples) if method in ("ode", "both") else None
    primary = closed or ode
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["r", "tau_closed", "tau_ode", "abs_diff", "residual_first_order", "residual_second_order"])
    diff = np.abs(closed.tau - ode.tau) if method == "both" else None
    for k, r in enumerate(rs):
        w.writerow([fmt(r),
                    fmt(closed.tau[k]) if closed else "",
                    fmt(ode.tau[k]) if ode else "",
                    fmt(diff[k]) if diff is not None else "",
                    fmt(primary.residual_first_order[k]), fmt(primary.residual_second_order[k])])
    _write(_out_dir(args) / "schwarzschild_potential.csv", buf.getvalue())
    tau_h = es.tau_closed_form(alpha, m, 2 * m * (1 + 1e-12))
    tau_o, _ = es.tau_asymptote(alpha, m)
    line = f"tau(2m+) = {tau_h:.12g}  tau_o = {tau_o:.12g}"
    if diff is not None:
        rel = float(np.max(diff / np.abs(closed.tau)))
        line += f"  max rel |closed - ode| = {rel:.3e}"
    print(line)
    ok = bool(np.all(primary.tau < 0)) and tau_o < 0
    if diff is not None:
        ok = ok and rel <= tol
    return EXIT_PASS if ok else EXIT_FAIL


def cmd_gradcheck(args, cfg):
    sec = "gradcheck"
    F = args.functional or cfg.section(sec).get("functional", "R2")
    if F not in ("R2", "Z2"):
        raise ConfigError(f"unknown functional {F!r}")
    N = _setting(args, cfg, sec, "N", 24, int)
    seed = _setting(args, cfg, sec, "seed", 7, int)
    tol = _tol(args, cfg, sec, 1e-3)
    count = _setting(args, cfg, sec, "count", 5, int)
    field_ = gt.random_field(N, seed)
    chk = gt.gradient_check(F, field_, gt.perturbations(N, seed, count))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["perturbation", "fd_derivative", "pairing", "kappa"])
    for k, (a, b) in enumerate(zip(chk.fd, chk.pairing)):
        w.writerow([k, fmt(a), fmt(b), fmt(a / b)])
    _write(_out_dir(args) / f"gradcheck_{F}.csv", buf.getvalue())
    print(f"{F}: kappa mean {chk.kappa_mean:.10f}  std/mean {chk.kappa_spread:.3e}")
    ok = chk.kappa_spread <= tol and abs(chk.kappa_mean - 1.0) <= tol
    return EXIT_PASS if ok else EXIT_FAIL


def cmd_flow(args, cfg):
    sec = "flow"
    F = args.functional or cfg.section(sec).get("functional", "R2")
    N = _setting(args, cfg, sec, "N", 16, int)
    dt = _setting(args, cfg, sec, "dt", 1e-5)
    steps = _setting(args, cfg, sec, "steps", 10, int)
    seed = _setting(args, cfg, sec, "seed", 7, int)
    if dt <= 0 or steps < 1:
        raise ConfigError("flow needs dt > 0 and steps >= 1")
    out = _out_dir(args) / f"flow_{F}.csv"
    values, maxres, _ = gt.flow(gt.random_field(N, seed), F, dt, steps)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["step", "value", "max_residual"])
    for k, v in enumerate(values):
        w.writerow([k, fmt(v), fmt(maxres[k]) if k < len(maxres) else ""])
    _write(out, buf.getvalue())
    print(f"{F}: {values[0]:.12g} -> {values[-1]:.12g} over {steps} steps")
    return EXIT_PASS


def cmd_identities(args, cfg):
    sec = "identities"
    seed = _setting(args, cfg, sec, "seed", 7, int)
    n = _setting(args, cfg, sec, "metrics", 20, int)
    tol = _tol(args, cfg, sec, 1.0) if args.tol is not None or "tol" in cfg.section(sec) else None
    rows = suites.identity_battery(seed, n, tol=tol)
    _write(_out_dir(args) / "identities.csv", suites.rows_to_csv(rows))
    width = max(len(r.name) for r in rows)
    for r in rows:
        print(f"{r.name:<{width}}  {'PASS' if r.passed else 'FAIL'}  {r.max_error:.2e} <= {r.tol:g}")
    return EXIT_PASS if all(r.passed for r in rows) else EXIT_FAIL


VERBS = {
    "verify": cmd_verify,
    "schwarzschild-potential": cmd_schwarzschild_potential,
    "gradcheck": cmd_gradcheck,
    "flow": cmd_flow,
    "identities": cmd_identities,
}


def _common_flags(suppress):
    # subcommand copies must not reset flags already given before the verb
    kw = {"argument_default": argparse.SUPPRESS} if suppress else {}
    common = argparse.ArgumentParser(add_help=False, **kw)
    common.add_argument("--config", help="sectioned key = value settings file")
    common.add_argument("--out-dir", help="directory for CSV/JSONL output (default .)")
    common.add_argument("--tol", type=float, help="tolerance override")
    common.add_argument("--seed", type=int, help="random seed override")
    common.add_argument("--threads", type=int, **({} if suppress else {"default": 1}),
                        help="accepted for compatibility; execution is single-threaded")
    return common


def build_parser():
    p = argparse.ArgumentParser(prog="curvlab", description=__doc__.split("\n\n")[0],
                                parents=[_common_flags(False)])
    common = _common_flags(True)
    sub = p.add_subparsers(dest="verb", required=True)
    sub.add_parser("verify", parents=[common], help="check residual systems on a metric")
    sp = sub.add_parser("schwarzschild-potential", parents=[common],
                        help="tabulate the Schwarzschild R2_s potential")
    sp.add_argument("--alpha", type=float, help="coupling constant (default 1)")
    sp.add_argument("--m", type=float, help="mass parameter (default 0.5)")
    sp.add_argument("--r-min", type=float, help="first radius, must exceed 2m (default 2.02m)")
    sp.add_argument("--r-max", type=float, help="last radius (default 100m)")
    sp.add_argument("--samples", type=int, help="number of radii (default 50)")
    sp.add_argument("--method", choices=("closed", "ode", "both"), help="tau source (default both)")
    gp = sub.add_parser("gradcheck", parents=[common], help="first-variation gradient check")
    gp.add_argument("--functional", choices=("R2", "Z2"), help="functional (default R2)")
    gp.add_argument("--N", type=int, help="grid points per axis (default 24)")
    gp.add_argument("--count", type=int, help="number of perturbations (default 5)")
    fp = sub.add_parser("flow", parents=[common], help="explicit gradient flow demonstrator")
    fp.add_argument("--functional", choices=("R2", "Z2"), help="functional (default R2)")
    fp.add_argument("--N", type=int, help="grid points per axis (default 16)")
    fp.add_argument("--dt", type=float, help="step size (default 1e-5)")
    fp.add_argument("--steps", type=int, help="number of steps (default 10)")
    ip = sub.add_parser("identities", parents=[common], help="randomized identity battery")
    ip.add_argument("--metrics", type=int, help="number of random metrics (default 20)")
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as err:
        return EXIT_PASS if err.code == 0 else EXIT_CONFIG
    try:
        if args.threads is not None and args.threads < 1:
            raise ConfigError("--threads must be at least 1")
        cfg = Config(args.config)
        return VERBS[args.verb](args, cfg)
    except ConfigError as err:
        print(f"configuration error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except (PotentialError, es.ParameterError) as err:
        print(f"configuration error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except GUARD_ERRORS as err:
        print(f"guard: {err}", file=sys.stderr)
        return EXIT_FAIL
    except DOMAIN_ERRORS as err:
        print(f"numerical-domain error: {err}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())

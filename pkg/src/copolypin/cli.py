"""Command line front end.

Every command is a pure function of the merged configuration (explicit flags
over ``--config`` JSON over built-in defaults) and the seed. Grids go out as
CSV with a versioned schema comment, single results as JSON.
"""

from __future__ import annotations

import argparse
import io
import json
import math
import sys
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from . import annealed as ann
from . import bounds as bnd
from . import disorder as dis
from . import excursion as exc
from . import quenched as que
from . import variational as var
from ._errors import CopolypinError, InputError, NoBracket, NumericalFailure

SCHEMA_VERSION = 1

DEFAULTS = {
    "beta_hat": 1.0,
    "h_hat": 0.5,
    "beta_bar": 0.0,
    "h_bar": 0.0,
    "disorder": "pm1",
    "disorder_hat": None,
    "disorder_bar": None,
    "rho": "srw",
    "n": 1024,
    "replicas": 20,
    "seed": 0,
    "tol": 1e-12,
    "threads": None,
    "tr": 8,
    "max_len": 12,
    "g": None,
    "alpha": None,
    "h_bar_grid": None,
    "h_bar_min": -1.0,
    "h_bar_max": 2.0,
    "points": 13,
    "eps_abs": 1e-4,
    "width": 0.01,
    "h_max": 20.0,
    "quenched": True,
    "draws": 10,
    "output": None,
}

DOC = {
    "beta_hat": "monomer-solvent coupling (>= 0)",
    "h_hat": "solvent bias (>= 0)",
    "beta_bar": "pinning coupling (>= 0)",
    "h_bar": "pinning bias",
    "disorder": "law of both disorder fields: pm1, gaussian or a JSON object",
    "disorder_hat": "override for the monomer-type law",
    "disorder_bar": "override for the charge law",
    "rho": "excursion law: srw[:K], power:ALPHA[:K] or a JSON object",
    "n": "polymer length for quenched computations",
    "replicas": "number of disorder replicas",
    "seed": "base seed; replica r uses stream r",
    "tol": "root-finding tolerance",
    "threads": "worker threads (default: COPOLYPIN_THREADS or all cores)",
    "tr": "truncation level for the first-letter marginal",
    "max_len": "maximal word length for the variational check",
    "g": "excess free energy argument (default: the copolymer excess free energy)",
    "alpha": "tail exponent used by the certificate (default: that of rho)",
    "h_bar_grid": "explicit comma separated h_bar values",
    "h_bar_min": "lower end of the h_bar grid",
    "h_bar_max": "upper end of the h_bar grid",
    "points": "number of h_bar grid points",
    "eps_abs": "absolute floor of the localization decision",
    "width": "bracket width at which the pseudo-critical bisection stops",
    "h_max": "largest h_hat probed by the pseudo-critical search",
    "quenched": "include quenched estimates in grid outputs",
    "draws": "number of sampled paths",
    "output": "output file (default: stdout)",
}


@dataclass
class RunConfig:
    values: dict = field(default_factory=lambda: dict(DEFAULTS))

    def __getattr__(self, name):
        try:
            return self.__dict__["values"][name]
        except KeyError as exc_:
            raise AttributeError(name) from exc_

    def to_json(self) -> str:
        return json.dumps(self.values, sort_keys=True, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        data = json.loads(text)
        if not isinstance(data, dict):
            raise InputError("config must be a JSON object")
        unknown = set(data) - set(DEFAULTS)
        if unknown:
            raise InputError(f"unknown config keys: {sorted(unknown)}")
        vals = dict(DEFAULTS)
        vals.update(data)
        return cls(vals)


def fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".17g")


def jsonable(x):
    if isinstance(x, dict):
        return {k: jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        if math.isnan(x):
            return "nan"
        return x
    if isinstance(x, np.integer):
        return int(x)
    return x


def write_csv(out, command: str, columns, rows, notes=()):
    out.write(f"# copolypin {command} schema v{SCHEMA_VERSION}\n")
    for note in notes:
        out.write(f"# {note}\n")
    out.write(",".join(columns) + "\n")
    for row in rows:
        out.write(",".join(fmt(v) for v in row) + "\n")


def write_json(out, obj):
    out.write(json.dumps(jsonable(obj), indent=2) + "\n")


# -- building inputs from the config -----------------------------------------


def _parse_law(spec):
    if isinstance(spec, str) and spec.strip().startswith("{"):
        spec = json.loads(spec)
    return dis.from_config(spec)


def _parse_rho(spec):
    if isinstance(spec, str) and spec.strip().startswith("{"):
        spec = json.loads(spec)
    if isinstance(spec, dict) and "rho" in spec:
        spec = spec["rho"]
    return exc.from_config(spec)


def build_inputs(cfg: RunConfig):
    law_hat = _parse_law(cfg.disorder_hat or cfg.disorder)
    law_bar = _parse_law(cfg.disorder_bar or cfg.disorder)
    rho = _parse_rho(cfg.rho)
    return rho, (law_hat, law_bar)


def build_params(cfg: RunConfig) -> ann.ModelParams:
    return ann.ModelParams(float(cfg.beta_hat), float(cfg.h_hat), float(cfg.beta_bar), float(cfg.h_bar))


def h_bar_grid(cfg: RunConfig) -> list[float]:
    g = cfg.h_bar_grid
    if g is not None:
        if isinstance(g, str):
            return [float(v) for v in g.split(",") if v.strip()]
        return [float(v) for v in g]
    pts = int(cfg.points)
    if pts <= 0:
        return []
    if pts == 1:
        return [float(cfg.h_bar_min)]
    return np.linspace(float(cfg.h_bar_min), float(cfg.h_bar_max), pts).tolist()


# -- commands -------------------------------------------------------------


def cmd_annealed_solve(cfg, out):
    rho, laws = build_inputs(cfg)
    rep = ann.classify_ann(build_params(cfg), rho, laws, float(cfg.tol))
    write_json(out, {"g_ann": rep.g_ann, "h_bar_star": rep.h_bar_star, "label": rep.label})


def _hc_que_upper(beta_hat, beta_bar, hb, rho, law_hat, hc_ann):
    up = hc_ann
    if beta_bar == 0 and math.isfinite(rho.alpha):
        up = min(up, bnd.fractional_moment_hc_upper(beta_hat, hb, rho, law_hat).upper)
    return up


def cmd_annealed_curve(cfg, out):
    rho, laws = build_inputs(cfg)
    p = build_params(cfg)
    if not p.beta_hat > 0:
        raise InputError("argument --beta-hat: must be > 0 for critical curves")
    monthus = bnd.monthus_line(p.beta_hat, rho.alpha, laws[0]) if math.isfinite(rho.alpha) else math.nan
    rows = []
    for hb in h_bar_grid(cfg):
        hc = ann.hc_ann_combined(p.beta_hat, p.beta_bar, hb, rho, laws, float(cfg.tol))
        up = _hc_que_upper(p.beta_hat, p.beta_bar, hb, rho, laws[0], hc)
        g = ann.g_ann(p.replace(h_bar=hb), rho, laws, float(cfg.tol))
        rows.append((hb, hc, up, monthus, monthus, g))
    write_csv(out, "annealed curve", ["h_bar", "hc_ann", "hc_que_upper", "hc_que_lower", "monthus", "g_ann"], rows,
              [f"beta_hat={fmt(p.beta_hat)} beta_bar={fmt(p.beta_bar)} h_hat={fmt(p.h_hat)} rho={rho.name}"])


def cmd_quenched_estimate(cfg, out):
    rho, laws = build_inputs(cfg)
    q = que.estimate_g_que(build_params(cfg), rho, laws, int(cfg.n), int(cfg.replicas), int(cfg.seed),
                           threads=cfg.threads)
    rows = [(m, mean, err, q.replicas, q.seed) for m, mean, err in q.grid]
    write_csv(out, "quenched estimate", ["n", "g_hat", "stderr", "replicas", "seed"], rows,
              [f"extrapolated_linear_in_1/n={fmt(q.extrapolated)}"])


def _pseudo(cfg, hb, rho, laws):
    p = build_params(cfg)
    return que.pseudo_critical_hhat(p.beta_hat, p.beta_bar, hb, rho, laws, int(cfg.n), int(cfg.replicas),
                                    int(cfg.seed), eps_abs=float(cfg.eps_abs), width=float(cfg.width),
                                    h_max=float(cfg.h_max), threads=cfg.threads)


def _pseudo_row(cfg, hb, rho, laws):
    """(estimate, ci, lo, hi) for one grid row; nan when the search cannot bracket."""
    try:
        r = _pseudo(cfg, hb, rho, laws)
    except NoBracket as err:
        sys.stderr.write(f"copolypin: warning: h_bar={fmt(hb)}: {err}; row reported as nan\n")
        return math.nan, math.nan, math.nan, math.nan
    return r.estimate, r.ci, r.bracket[0], r.bracket[1]


def cmd_quenched_curve(cfg, out):
    rho, laws = build_inputs(cfg)
    rows = []
    for hb in h_bar_grid(cfg):
        rows.append((hb, *_pseudo_row(cfg, hb, rho, laws)))
    write_csv(out, "quenched curve", ["h_bar", "hc_que_estimate", "ci", "bracket_lo", "bracket_hi"], rows,
              [f"n={int(cfg.n)} replicas={int(cfg.replicas)} seed={int(cfg.seed)} finite-size estimator"])


def cmd_quenched_paths(cfg, out):
    rho, laws = build_inputs(cfg)
    smp = dis.sample(laws[0], laws[1], int(cfg.n), int(cfg.seed), 0)
    table = que.dp_log_partition(build_params(cfg), rho, smp)
    paths = que.sample_path(table, int(cfg.seed), draws=int(cfg.draws))
    write_json(out, {
        "n": int(cfg.n),
        "seed": int(cfg.seed),
        "return_times": [list(pth.return_times) for pth in paths],
        "excursion_signs": [list(pth.excursion_signs) for pth in paths],
    })


def cmd_bounds_curve(cfg, out):
    rho, laws = build_inputs(cfg)
    p = build_params(cfg)
    if not p.beta_hat > 0:
        raise InputError("argument --beta-hat: must be > 0 for critical curves")
    monthus = bnd.monthus_line(p.beta_hat, rho.alpha, laws[0])
    rows = []
    for hb in h_bar_grid(cfg):
        fm = bnd.fractional_moment_hc_upper(p.beta_hat, hb, rho, laws[0]).upper if p.beta_bar == 0 else math.nan
        hc = ann.hc_ann_combined(p.beta_hat, p.beta_bar, hb, rho, laws, float(cfg.tol))
        est = ci = None
        if cfg.quenched:
            est, ci = _pseudo_row(cfg, hb, rho, laws)[:2]
        rows.append((hb, monthus, fm, hc, est, ci))
    write_csv(out, "bounds curve", ["h_bar", "monthus", "frac_moment_upper", "annealed_curve", "quenched_estimate", "ci"],
              rows, [f"beta_hat={fmt(p.beta_hat)} beta_bar={fmt(p.beta_bar)} rho={rho.name}"])


def cmd_variational_check(cfg, out):
    rho, laws = build_inputs(cfg)
    p = build_params(cfg)
    g = ann.g_hat_ann(p.beta_hat, p.h_hat, laws[0]) if cfg.g is None else float(cfg.g)
    q = var.maximizer_q(p, g, rho, laws, int(cfg.max_len))
    f = var.annealed_functional(q, p, g, rho, laws)
    s = ann.s_ann(p, rho, laws, g)
    write_json(out, {"functional_value": f, "s_ann": s, "delta": s - f, "tr": int(cfg.tr),
                     "truncated_mass": q.truncated_mass})


def cmd_variational_gap(cfg, out):
    rho, laws = build_inputs(cfg)
    p = build_params(cfg)
    alpha = rho.alpha if cfg.alpha is None else float(cfg.alpha)
    rep = var.gap_certificate(p.beta_hat, p.beta_bar, p.h_bar, alpha, rho, laws, int(cfg.tr))
    d = rep.as_dict()
    d["h_hat_critical"] = rep.h_hat_critical
    write_json(out, d)


def scan_phase_diagram(config) -> str:
    """Phase-diagram sweep over h_bar as CSV text; ``config`` is a RunConfig or a plain dict."""
    if not isinstance(config, RunConfig):
        config = RunConfig.from_json(json.dumps(config))
    buf = io.StringIO()
    cmd_scan(config, buf)
    return buf.getvalue()


def cmd_scan(cfg, out):
    rho, laws = build_inputs(cfg)
    p = build_params(cfg)
    if not p.beta_hat > 0:
        raise InputError("argument --beta-hat: must be > 0 for critical curves")
    monthus = bnd.monthus_line(p.beta_hat, rho.alpha, laws[0])
    wet_ann = ann.hc_ann_pinning(p.beta_bar, laws[1]) - ann.LOG2
    grid = h_bar_grid(cfg)
    wet_que = None
    if cfg.quenched and grid:
        w = bnd.wetting_thresholds(p.beta_bar, rho, laws[1], int(cfg.n), int(cfg.replicas), int(cfg.seed),
                                   law_hat=laws[0], threads=cfg.threads)
        wet_que = w.quenched_estimate
    rows = []
    for hb in grid:
        hc = ann.hc_ann_combined(p.beta_hat, p.beta_bar, hb, rho, laws, float(cfg.tol))
        fm = bnd.fractional_moment_hc_upper(p.beta_hat, hb, rho, laws[0]).upper if p.beta_bar == 0 else math.nan
        est = ci = None
        if cfg.quenched:
            est, ci = _pseudo_row(cfg, hb, rho, laws)[:2]
        rows.append((hb, hc, monthus, fm, est, ci, wet_ann, wet_que))
    write_csv(out, "scan", ["h_bar", "hc_ann", "monthus", "frac_moment_upper", "quenched_estimate", "ci",
                            "wetting_annealed", "wetting_quenched"], rows,
              [f"beta_hat={fmt(p.beta_hat)} beta_bar={fmt(p.beta_bar)} rho={rho.name} n={int(cfg.n)} "
               f"replicas={int(cfg.replicas)} seed={int(cfg.seed)}"])


COMMANDS = {
    ("annealed", "solve"): cmd_annealed_solve,
    ("annealed", "curve"): cmd_annealed_curve,
    ("quenched", "estimate"): cmd_quenched_estimate,
    ("quenched", "curve"): cmd_quenched_curve,
    ("quenched", "paths"): cmd_quenched_paths,
    ("bounds", "curve"): cmd_bounds_curve,
    ("variational", "check"): cmd_variational_check,
    ("variational", "gap"): cmd_variational_gap,
    ("scan", None): cmd_scan,
}


# -- argument parsing --------------------------------------------------------


def _nonneg(name):
    def conv(text):
        try:
            v = float(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"invalid float value: {text!r}") from None
        if not v >= 0 or math.isinf(v):
            raise argparse.ArgumentTypeError(f"{name} must be a finite number >= 0, got {text!r}")
        return v
    return conv


def _finite(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid float value: {text!r}") from None
    if not math.isfinite(v):
        raise argparse.ArgumentTypeError(f"must be finite, got {text!r}")
    return v


def _positive_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid int value: {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {text!r}")
    return v


def _bool(text):
    t = text.lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"invalid boolean: {text!r}")


def _add_global(p: argparse.ArgumentParser, default=None):
    p.add_argument("--config", default=default, help="JSON file with defaults for any option (explicit flags win)")
    p.add_argument("--seed", type=int, default=default, help=DOC["seed"])
    p.add_argument("--threads", type=_positive_int, default=default, help=DOC["threads"])
    p.add_argument("--tol", type=_nonneg("tol"), default=default, help=DOC["tol"])
    p.add_argument("--print-config", action="store_true", default=default or False,
                   help="print the merged configuration and exit")


def _add_common(p: argparse.ArgumentParser):
    # global flags are accepted after the command too, without clobbering earlier ones
    _add_global(p.add_argument_group("global"), argparse.SUPPRESS)
    g = p.add_argument_group("model")
    g.add_argument("--beta-hat", type=_nonneg("beta_hat"), help=DOC["beta_hat"])
    g.add_argument("--h-hat", type=_nonneg("h_hat"), help=DOC["h_hat"])
    g.add_argument("--beta-bar", type=_nonneg("beta_bar"), help=DOC["beta_bar"])
    g.add_argument("--h-bar", type=_finite, help=DOC["h_bar"])
    g.add_argument("--disorder", help=DOC["disorder"])
    g.add_argument("--disorder-hat", help=DOC["disorder_hat"])
    g.add_argument("--disorder-bar", help=DOC["disorder_bar"])
    g.add_argument("--rho", help=DOC["rho"])
    r = p.add_argument_group("run")
    r.add_argument("--n", type=_positive_int, help=DOC["n"])
    r.add_argument("--replicas", type=_positive_int, help=DOC["replicas"])
    r.add_argument("--tr", type=_positive_int, help=DOC["tr"])
    r.add_argument("--max-len", type=_positive_int, help=DOC["max_len"])
    r.add_argument("--g", type=_nonneg("g"), help=DOC["g"])
    r.add_argument("--alpha", type=_finite, help=DOC["alpha"])
    r.add_argument("--h-bar-grid", help=DOC["h_bar_grid"])
    r.add_argument("--h-bar-min", type=_finite, help=DOC["h_bar_min"])
    r.add_argument("--h-bar-max", type=_finite, help=DOC["h_bar_max"])
    r.add_argument("--points", type=int, help=DOC["points"])
    r.add_argument("--eps-abs", type=_nonneg("eps_abs"), help=DOC["eps_abs"])
    r.add_argument("--width", type=_nonneg("width"), help=DOC["width"])
    r.add_argument("--h-max", type=_nonneg("h_max"), help=DOC["h_max"])
    r.add_argument("--quenched", type=_bool, help=DOC["quenched"])
    r.add_argument("--draws", type=_positive_int, help=DOC["draws"])
    r.add_argument("-o", "--output", help=DOC["output"])


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="copolypin",
        description="Annealed closed forms, quenched estimates and bounds for the copolymer model with pinning.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    _add_global(parser)
    sub = parser.add_subparsers(dest="group", metavar="COMMAND")
    sub.required = True
    for group, actions in (("annealed", ("solve", "curve")), ("quenched", ("estimate", "curve", "paths")),
                           ("bounds", ("curve",)), ("variational", ("check", "gap"))):
        gp = sub.add_parser(group, help=f"{group} computations")
        gsub = gp.add_subparsers(dest="action", metavar="ACTION")
        gsub.required = True
        for action in actions:
            ap = gsub.add_parser(action, help=COMMANDS[(group, action)].__name__.replace("cmd_", "").replace("_", " "))
            _add_common(ap)
    sp = sub.add_parser("scan", help="phase-diagram sweep over h_bar")
    _add_common(sp)
    return parser


def merge_config(args: argparse.Namespace) -> RunConfig:
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                cfg = RunConfig.from_json(fh.read())
        except (OSError, json.JSONDecodeError) as err:
            raise InputError(f"argument --config: {err}") from err
    else:
        cfg = RunConfig()
    for key in DEFAULTS:
        val = getattr(args, key, None)
        if val is not None:
            cfg.values[key] = val
    if cfg.threads is None:
        cfg.values["threads"] = None
    return cfg


def run(argv=None, stdout=None) -> int:
    stdout = stdout or sys.stdout
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        cfg = merge_config(args)
        if args.print_config:
            stdout.write(cfg.to_json() + "\n")
            return 0
        fn = COMMANDS[(args.group, getattr(args, "action", None))]
        buf = io.StringIO()
        fn(cfg, buf)
        if cfg.output:
            with open(cfg.output, "w", encoding="utf-8", newline="") as fh:
                fh.write(buf.getvalue())
        else:
            stdout.write(buf.getvalue())
        return 0
    except (InputError, ValueError, KeyError, TypeError) as err:
        sys.stderr.write(f"copolypin: error: {err}\n")
        return 2
    except (NumericalFailure, CopolypinError, ArithmeticError) as err:
        sys.stderr.write(f"copolypin: numerical failure: {type(err).__name__}: {err}\n")
        return 3


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()

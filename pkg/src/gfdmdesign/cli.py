"""Command-line front end.

Every subcommand reads one JSON config (validated against ``CONFIG_SCHEMA``),
writes CSV or JSON to ``--out`` (default stdout) and prefixes the output
with a provenance line carrying the tool version, the SHA-256 of the
canonicalized config, and the seed.

Exit codes: 0 success, 1 usage or configuration error, 2 numerical error
(no linear receiver exists), 3 optimizer did not converge or could not
meet a constraint.
"""
from __future__ import annotations

import argparse
import copy
import csv
import hashlib
import io
import json
import math
import os
import sys
from typing import Optional

import numpy as np

from . import __version__

EXIT_USAGE, EXIT_NUMERICAL, EXIT_NONCONVERGED = 1, 2, 3
TOOL = f"gfdmdesign {__version__}"

_num = {"type": "number"}
_posint = {"type": "integer", "minimum": 1}
_numlist = {"type": "array", "items": _num}

SYSTEM_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["K", "M"],
    "properties": {
        "K": _posint,
        "M": _posint,
        "Ncp": {"type": "integer", "minimum": 0},
        "Nw": {"type": "integer", "minimum": 0},
        "Ts": {"type": "number", "exclusiveMinimum": 0},
    },
}

FILTER_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["kind"],
    "properties": {
        "kind": {"enum": ["dirichlet", "rrc", "rc", "coefficients", "file"]},
        "alpha": {"type": "number", "minimum": 0, "maximum": 1},
        "gamma_re": _numlist,
        "gamma_im": _numlist,
        "path": {"type": "string"},
    },
}

CHANNEL_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["profile"],
    "properties": {
        "profile": {"enum": ["awgn", "pedestrian_b", "taps"]},
        "taps_re": _numlist,
        "taps_im": _numlist,
        "sample_rate": {"type": "number", "exclusiveMinimum": 0},
    },
}

CFO_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["half_width"],
    "properties": {
        "half_width": {"type": "number", "minimum": 0, "exclusiveMaximum": 0.5},
        "n_mc": _posint,
        "profile": {"enum": ["awgn", "pedestrian_b"]},
        "noise_model": {"enum": ["row_norm", "literal"]},
        "convention": {"enum": ["normalized", "literal"]},
    },
}

GRID_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {"f_min": _num, "f_max": _num, "points": {"type": "integer", "minimum": 2}},
}

OPTIONS_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "max_iters": _posint,
        "tol": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "step0": {"type": "number", "exclusiveMinimum": 0},
        "step_max": {"type": "number", "exclusiveMinimum": 0},
        "armijo": {"type": "number", "exclusiveMinimum": 0},
        "restarts": _posint,
        "p_schedule": {"type": "array", "items": {"type": "number", "minimum": 1}, "minItems": 1},
        "density": _posint,
        "span": {"type": "number", "exclusiveMinimum": 0},
        "penalty0": {"type": "number", "exclusiveMinimum": 0},
        "penalty_growth": {"type": "number", "exclusiveMinimum": 0},
        "penalty_rounds": _posint,
        "n_mc": _posint,
        "min_iters": {"type": "integer", "minimum": 0},
        "fd_step": {"type": "number", "exclusiveMinimum": 0},
    },
}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "gfdmdesign experiment config",
    "type": "object",
    "additionalProperties": False,
    "required": ["system"],
    "properties": {
        "system": SYSTEM_SCHEMA,
        "filter": FILTER_SCHEMA,
        "channel": CHANNEL_SCHEMA,
        "receivers": {"type": "array", "items": {"enum": ["MF", "MF_SIC", "ZF", "MMSE"]}, "minItems": 1},
        "snr_db": {"oneOf": [_num, {"type": "array", "items": _num, "minItems": 1}]},
        "Ps": {"type": "number", "exclusiveMinimum": 0},
        "grid": GRID_SCHEMA,
        "window": {
            "type": "object",
            "additionalProperties": False,
            "required": ["taper"],
            "properties": {"taper": _numlist},
        },
        "windowed": {"type": "boolean"},
        "problem": {"enum": ["rate_max", "oob_mfsic", "oob_zf", "rate_max_cfo"]},
        "receiver": {"enum": ["ZF", "MMSE"]},
        "eta": {"type": "number", "minimum": 0, "maximum": 1},
        "cfo": CFO_SCHEMA,
        "L_stop": {"type": "number", "minimum": 1},
        "mode": {"enum": ["unified", "literal"]},
        "options": OPTIONS_SCHEMA,
        "seed": {"type": "integer", "minimum": 0},
    },
}


class UsageError(Exception):
    pass


def _fmt(v) -> str:
    return format(float(v), ".10g")


def config_digest(cfg: dict) -> str:
    canon = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


def provenance(cfg: dict, seed: int) -> str:
    return f"# tool={TOOL} config_sha256={config_digest(cfg)} seed={seed}\n"


def load_config(path: str) -> dict:
    import jsonschema

    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"config is not valid JSON: {exc}") from exc
    validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    errors = sorted(validator.iter_errors(cfg), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        where = "/".join(str(p) for p in e.absolute_path) or "<root>"
        raise UsageError(f"config error at {where}: {e.message}")
    return cfg


def _require(cfg, *keys):
    for k in keys:
        if k not in cfg:
            raise UsageError(f"config error at <root>: '{k}' is required for this command")


def _system(cfg):
    from .model import GfdmConfig

    return GfdmConfig(**cfg["system"])


def _filter(cfg, config):
    from .model import FilterSpec, build_filter_dirichlet, build_filter_rrc

    spec = cfg.get("filter", {"kind": "dirichlet"})
    kind = spec["kind"]
    if kind == "dirichlet":
        return build_filter_dirichlet(config.M)
    if kind in ("rrc", "rc"):
        if "alpha" not in spec:
            raise UsageError("config error at filter: 'alpha' is required for rrc/rc filters")
        return build_filter_rrc(config.M, spec["alpha"], sqrt_flag=kind == "rrc")
    if kind == "coefficients":
        return FilterSpec.from_dict(spec)
    if "path" not in spec:
        raise UsageError("config error at filter: 'path' is required for file filters")
    try:
        with open(spec["path"]) as fh:
            # provenance lines from our own output are skipped
            data = json.loads("".join(ln for ln in fh if not ln.startswith("#")))
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read filter file: {exc}") from exc
    # accepts a bare filter or an optimizer result
    return FilterSpec.from_dict(data.get("filter", data))


def _channel(cfg, rng):
    from .channels import ChannelSpec, pedestrian_b

    spec = cfg.get("channel", {"profile": "awgn"})
    if spec["profile"] == "awgn":
        return None
    if spec["profile"] == "taps":
        re = np.asarray(spec.get("taps_re", []), float)
        im = np.asarray(spec.get("taps_im", np.zeros_like(re)), float)
        return ChannelSpec(re + 1j * im)
    kw = {"sample_rate": spec["sample_rate"]} if "sample_rate" in spec else {}
    return pedestrian_b(rng, **kw)


def _snr_list(cfg):
    v = cfg.get("snr_db", 0.0)
    return [float(x) for x in (v if isinstance(v, list) else [v])]


def _options(cfg, seed, **overrides):
    from .optimize import OptOptions

    d = dict(cfg.get("options", {}))
    d.update(overrides)
    d["seed"] = seed
    return OptOptions.from_dict(d)


# ---------------------------------------------------------------------------
# subcommands


def cmd_rate(cfg: dict, seed: int) -> tuple:
    from .rates import rate_sweep

    config = _system(cfg)
    filt = _filter(cfg, config)
    chan = _channel(cfg, np.random.default_rng(seed))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["snr_db", "receiver", "sum_rate_bits"])
    for snr_db, rep in rate_sweep(config, filt, _snr_list(cfg), cfg.get("receivers", ["ZF"]), chan):
        w.writerow([_fmt(snr_db), rep.receiver, _fmt(rep.sum_rate)])
    return buf.getvalue(), 0


def _default_grid(config):
    lo = -2.0 / config.Ts
    hi = (config.K + 2.0) / config.Ts
    step = 1.0 / (8 * config.Tb)
    return lo, hi, int(round((hi - lo) / step)) + 1


def cmd_psd(cfg: dict, seed: int) -> tuple:
    from .spectrum import WindowSpec, psd_total, psd_windowed

    config = _system(cfg)
    filt = _filter(cfg, config)
    lo, hi, n = _default_grid(config)
    g = cfg.get("grid", {})
    f = np.linspace(g.get("f_min", lo), g.get("f_max", hi), g.get("points", n))
    Ps = cfg.get("Ps", 1.0)
    windowed = cfg.get("windowed", "window" in cfg or config.Ncp > 0)
    if windowed:
        win = WindowSpec(cfg["window"]["taper"]) if "window" in cfg else WindowSpec.rectangular(config.Nw)
        grid = psd_windowed(config, filt, win, Ps, f)
    else:
        grid = psd_total(config, filt, Ps, f)
    return grid.to_csv(), 0


def cmd_optimize(cfg: dict, seed: int) -> tuple:
    from . import optimize as opt
    from .rates import SnrPoint

    _require(cfg, "problem")
    config = _system(cfg)
    problem = cfg["problem"]
    snr = SnrPoint.from_db(_snr_list(cfg)[0])
    if problem == "rate_max":
        res = opt.solve_rate_max_awgn(config, snr, cfg.get("receiver", "ZF"), _options(cfg, seed))
    elif problem == "oob_mfsic":
        res = opt.solve_oob_mfsic(config, cfg.get("Ps", 1.0), _options(cfg, seed))
    elif problem == "oob_zf":
        _require(cfg, "eta")
        res = opt.solve_oob_zf(config, snr, cfg["eta"], cfg.get("Ps"), _options(cfg, seed))
    else:
        _require(cfg, "cfo")
        c = cfg["cfo"]
        o = _options(cfg, seed, **({"n_mc": c["n_mc"]} if "n_mc" in c else {}))
        res = opt.solve_rate_max_cfo(config, snr, c["half_width"], c.get("profile", "awgn"), opts=o,
                                     noise_model=c.get("noise_model", "row_norm"))
    return _result_json(res), 0 if res.converged else EXIT_NONCONVERGED


def cmd_joint_design(cfg: dict, seed: int) -> tuple:
    from .optimize import joint_design_oob

    _require(cfg, "L_stop")
    config = _system(cfg)
    res = joint_design_oob(config, cfg["L_stop"], _options(cfg, seed), cfg.get("mode", "unified"),
                           cfg.get("Ps", 1.0))
    return _result_json(res), 0 if res.converged else EXIT_NONCONVERGED


def _result_json(res) -> str:
    return json.dumps(res.to_dict(), indent=2, sort_keys=True) + "\n"


def cmd_cfo_rate(cfg: dict, seed: int) -> tuple:
    """Mean and standard error of the known-CFO and nominal ZF rates."""
    from .cfo import (CfoProfile, UplinkChannelSet, build_uplink_matrices, draw_cfo_set,
                      zf_rate_cfo_known, zf_rate_cfo_nominal)

    _require(cfg, "cfo")
    config = _system(cfg)
    filt = _filter(cfg, config)
    c = cfg["cfo"]
    draws = draw_cfo_set(config.K, c["half_width"], c.get("n_mc", 200), seed, c.get("profile", "awgn"),
                         c.get("convention", "normalized"))
    noise_model = c.get("noise_model", "row_norm")
    known = np.zeros((len(_snr_list(cfg)), draws.n))
    nominal = np.zeros_like(known)
    for d in range(draws.n):
        chans = draws.channels[d] if draws.channels is not None else UplinkChannelSet.awgn(config.K)
        eff = build_uplink_matrices(config, filt, chans, CfoProfile(draws.eps[d], draws.convention))
        for i, snr_db in enumerate(_snr_list(cfg)):
            s = 10.0 ** (snr_db / 10.0)
            known[i, d] = zf_rate_cfo_known(eff, s).sum_rate
            nominal[i, d] = zf_rate_cfo_nominal(eff, s, noise_model).sum_rate
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["snr_db", "mean_rate_known", "se_known", "mean_rate_nominal", "se_nominal"])
    se = lambda x: x.std(ddof=1) / math.sqrt(x.size) if x.size > 1 else 0.0
    for i, snr_db in enumerate(_snr_list(cfg)):
        w.writerow([_fmt(snr_db), _fmt(known[i].mean()), _fmt(se(known[i])),
                    _fmt(nominal[i].mean()), _fmt(se(nominal[i]))])
    return buf.getvalue(), 0


COMMANDS = {
    "rate": cmd_rate,
    "psd": cmd_psd,
    "optimize": cmd_optimize,
    "cfo-rate": cmd_cfo_rate,
    "joint-design": cmd_joint_design,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="gfdmdesign", description="GFDM filter/window design and analysis")
    p.add_argument("--version", action="version", version=TOOL)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, fn in COMMANDS.items():
        sp = sub.add_parser(name, help=(fn.__doc__ or name).strip().splitlines()[0])
        sp.add_argument("--config", required=True, metavar="PATH")
        sp.add_argument("--out", metavar="PATH", help="output file (default: stdout)")
        sp.add_argument("--seed", type=int, metavar="U64", help="overrides the config seed")
        sp.add_argument("--threads", type=int, default=0, metavar="N", help="BLAS threads (0 = auto)")
    return p


def main(argv: Optional[list] = None) -> int:
    from .errors import (ConfigurationError, DegenerateInputError, DomainError, InfeasibleError,
                         InvalidDimensionError, NumericalError)

    args = build_parser().parse_args(argv)
    if args.seed is not None and not 0 <= args.seed < 2 ** 64:
        print("gfdmdesign: error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return EXIT_USAGE
    try:
        cfg = load_config(args.config)
        seed = args.seed if args.seed is not None else cfg.get("seed", 0)
        recorded = copy.deepcopy(cfg)
        recorded["seed"] = seed
        from threadpoolctl import threadpool_limits

        with threadpool_limits(limits=args.threads if args.threads > 0 else None):
            body, code = COMMANDS[args.command](cfg, seed)
    except UsageError as exc:
        print(f"gfdmdesign: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ConfigurationError, DegenerateInputError, DomainError, InvalidDimensionError) as exc:
        print(f"gfdmdesign: invalid input: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalError as exc:
        print(f"gfdmdesign: numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except InfeasibleError as exc:
        print(f"gfdmdesign: constraint not met (residual {exc.residual}): {exc}", file=sys.stderr)
        return EXIT_NONCONVERGED
    text = provenance(recorded, seed) + body
    if args.out:
        with open(args.out, "w", newline="") as fh:
            fh.write(text)
    else:
        try:
            sys.stdout.write(text)
            sys.stdout.flush()
        except BrokenPipeError:
            # reader went away (e.g. piped into head); silence the shutdown flush
            os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
    if code == EXIT_NONCONVERGED:
        print("gfdmdesign: optimizer stopped at max_iters before converging", file=sys.stderr)
    return code

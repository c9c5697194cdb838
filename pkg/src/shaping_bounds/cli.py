"""Command-line front end.

Every command writes ``<name>.csv`` (fixed header, 12 significant digits)
and ``<name>.meta.json`` (version, seed, resolved configuration, grid
resolutions, RNG identity) into the output directory.  Settings come from
built-in defaults, then an optional ``--config`` file (YAML or JSON; a
previous ``.meta.json`` also works), then command-line flags.

Exit status: 0 success, 2 invalid configuration, 3 numerical failure,
4 I/O failure.  Failures print one JSON object on stderr.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .channels import (
    OutputGrid,
    awgn_power_constraint,
    awgn_sweep,
    bnsc,
    bnsc_mjt_input,
    bsc,
    constrained_capacity_baa,
    gaussian_largecode_rate,
    pam_levels,
    PamAwgnConfig,
    quantized_awgn,
)
from .errors import (
    CapExceededError,
    ConvergenceError,
    InfeasibleConstraintError,
    InvalidDistributionError,
    NotApplicableError,
)
from .info import Pmf, mutual_information
from .montecarlo import RNG_NAME, McConfig, NoAcceptanceError, decode_experiment, estimate_ps
from .projection import ConstraintSet, exact_available, log_exact_pNE, project, success_probability
from .rates import rate_report

OUTPUT_ENV = "SHAPING_OUTPUT_DIR"
FLOAT_FORMAT = "%.12g"

REPORT_COLUMNS = ["r_matched_bits", "r_gallager_bits", "r_mjt_bits", "r_naive_bits",
                  "codeword_cap_bits", "rs_min_bits"]
COLUMNS = {
    "project": ["symbol", "p", "q_star"],
    "bounds": REPORT_COLUMNS,
    "sweep-bsc": ["gamma", "beta0"] + REPORT_COLUMNS,
    "sweep-bnsc": ["gamma0", "gamma1", "p0", "beta0"] + REPORT_COLUMNS,
    "sweep-awgn": ["snr_db", "capacity_bits", "r_uniform_bits", "r_matched_bits",
                   "r_gallager_bits", "r_mjt_bits", "r_naive_bits", "alpha_matched",
                   "alpha_gallager", "alpha_mjt"],
    "gaussian": ["beta0", "B0", "noise_variance", "exact_bits", "approx_bits"],
    "mc-ps": ["n", "rs_bits", "set_size", "trials", "ps_hat", "ps_lower", "ps_upper",
              "ps_exact", "marginal_l1", "pooled_symbols"],
    "mc-decode": ["n", "rs_bits", "rq_bits", "trials", "transmissions",
                  "err_matched", "err_matched_lower", "err_matched_upper",
                  "err_codeword", "err_codeword_lower", "err_codeword_upper",
                  "err_message", "err_message_lower", "err_message_upper",
                  "sets_without_word"],
    "baa": ["symbol", "q_hat", "q_star", "capacity_bits", "i_qstar_bits"],
}

DEFAULTS = {
    "channel": None,
    "constraint": None,
    "gamma": None,
    "input": None,
    "levels": None,
    "beta0": "0.3",
    "snr_db": "0:30:0.5",
    "noise_variance": 1.0,
    "half_width": OutputGrid.half_width_sigmas,
    "points_per_sigma": OutputGrid.points_per_sigma,
    "b0": "1e2,1e4,1e6",
    "n": "20",
    "rs": 0.3,
    "rq": 0.3,
    "trials": 10000,
    "seed": 0,
    "selection": "first",
    "tol": 1e-9,
    "threads": 1,
    "name": None,
    "output_dir": None,
}

COMMAND_DEFAULTS = {
    "sweep-bsc": {"beta0": "0.05:0.5:0.05"},
    "sweep-bnsc": {"beta0": "0.05:0.5:0.05"},
    "gaussian": {"beta0": "1"},
}


class ConfigError(ValueError):
    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError("argv", message)


def _floats(text, field):
    try:
        return [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise ConfigError(field, f"expected comma-separated numbers, got {text!r}") from None


def parse_grid(text, field="grid"):
    """``start:stop:step`` (stop included) or a comma-separated list."""
    if isinstance(text, (int, float)):
        return [float(text)]
    if isinstance(text, list):
        return [float(v) for v in text]
    text = str(text)
    if ":" not in text:
        return _floats(text, field)
    parts = _floats(text.replace(":", ","), field)
    if len(parts) != 3 or parts[2] <= 0 or parts[1] < parts[0]:
        raise ConfigError(field, f"grid must be start:stop:step with step > 0, got {text!r}")
    start, stop, step = parts
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    return [round(start + i * step, 12) for i in range(count)]


def parse_levels(text):
    if text is None:
        return None
    text = str(text)
    if text.startswith("pam:"):
        try:
            return pam_levels(int(text[4:]))
        except ValueError as exc:
            raise ConfigError("levels", str(exc)) from None
    return np.array(_floats(text, "levels"))


def parse_channel(text):
    if text is None:
        raise ConfigError("channel", "required")
    kind, _, arg = str(text).partition(":")
    vals = _floats(arg, "channel")
    try:
        if kind == "bsc" and len(vals) == 1:
            return bsc(vals[0])
        if kind == "bnsc" and len(vals) == 2:
            return bnsc(*vals)
    except ValueError as exc:
        raise ConfigError("channel", str(exc)) from None
    raise ConfigError("channel", f"expected bsc:<g> or bnsc:<g0>,<g1>, got {text!r}")


def parse_constraint(text, levels=None):
    if text is None:
        raise ConfigError("constraint", "required")
    kind, _, arg = str(text).partition(":")
    vals = _floats(arg, "constraint")
    if len(vals) != 1:
        raise ConfigError("constraint", f"expected one bound, got {text!r}")
    try:
        if kind == "hamming":
            return ConstraintSet.hamming(vals[0])
        if kind == "power":
            if levels is None:
                raise ConfigError("levels", "power constraints need --levels")
            return ConstraintSet.power(levels, vals[0])
    except InfeasibleConstraintError as exc:
        raise ConfigError("constraint", str(exc)) from None
    raise ConfigError("constraint", f"expected hamming:<b> or power:<b>, got {text!r}")


def parse_input(text, size):
    if text is None or text == "uniform":
        return Pmf.uniform(size)
    kind, _, arg = str(text).partition(":")
    if kind == "uniform":
        k = int(arg)
        if k != size:
            raise ConfigError("input", f"uniform:{k} does not match alphabet size {size}")
        return Pmf.uniform(k)
    if kind == "pmf":
        vals = _floats(arg, "input")
        if len(vals) != size:
            raise ConfigError("input", f"pmf has {len(vals)} entries, alphabet has {size}")
        try:
            return Pmf(vals)
        except InvalidDistributionError as exc:
            raise ConfigError("input", str(exc)) from None
    raise ConfigError("input", f"expected uniform:<k> or pmf:<p0>,<p1>,..., got {text!r}")


def _report_row(rep):
    return [rep.r_matched_bits, rep.r_gallager_bits, rep.r_mjt_bits, rep.r_naive_bits,
            rep.codeword_cap_bits, rep.rs_min_bits]


def _single(cfg, key, cast=float):
    vals = parse_grid(cfg[key], key)
    if len(vals) != 1:
        raise ConfigError(key, "expected a single value")
    return cast(vals[0])


def cmd_project(cfg):
    levels = parse_levels(cfg.get("levels"))
    e = parse_constraint(cfg.get("constraint"), levels)
    p = parse_input(cfg.get("input"), e.alphabet_size)
    res = project(p, e)
    rows = [[i, p.probs[i], res.q_star.probs[i]] for i in range(p.support_size)]
    return rows, {"divergence_bits": res.divergence_bits,
                  "multipliers": res.multipliers.tolist(), "iterations": res.iterations}


def cmd_bounds(cfg):
    ch = parse_channel(cfg.get("channel"))
    e = parse_constraint(cfg.get("constraint"))
    p = parse_input(cfg.get("input"), ch.input_size)
    return [_report_row(rate_report(p, e, ch))], {}


def cmd_sweep_bsc(cfg):
    gamma = _single(cfg, "gamma") if cfg.get("gamma") is not None else None
    if gamma is None:
        ch = parse_channel(cfg.get("channel"))
        gamma = float(ch.rows[0, 1])
    ch = bsc(gamma)
    p = parse_input(cfg.get("input"), 2)
    rows = []
    for b in parse_grid(cfg["beta0"], "beta0"):
        rows.append([gamma, b] + _report_row(rate_report(p, ConstraintSet.hamming(b), ch)))
    return rows, {}


def cmd_sweep_bnsc(cfg):
    ch = parse_channel(cfg.get("channel") or "bnsc:0.025,0.05")
    g0, g1 = float(ch.rows[0, 1]), float(ch.rows[1, 0])
    p = bnsc_mjt_input(g0, g1) if cfg.get("input") == "mjt" else parse_input(cfg.get("input"), 2)
    rows = []
    for b in parse_grid(cfg["beta0"], "beta0"):
        rep = rate_report(p, ConstraintSet.hamming(b), ch)
        rows.append([g0, g1, p.probs[0], b] + _report_row(rep))
    return rows, {}


def _output_grid(cfg):
    return OutputGrid(float(cfg["half_width"]), int(cfg["points_per_sigma"]))


def cmd_sweep_awgn(cfg):
    levels = parse_levels(cfg.get("levels") or "pam:16")
    grid = _output_grid(cfg)
    snrs = parse_grid(cfg["snr_db"], "snr_db")
    sweep = awgn_sweep(levels, snrs, float(cfg["noise_variance"]), grid,
                       workers=int(cfg["threads"]))
    rows = [[r.snr_db, r.capacity_bits, r.r_uniform_bits, r.r_matched_bits, r.r_gallager_bits,
             r.r_mjt_bits, r.r_naive_bits, r.alpha_matched, r.alpha_gallager, r.alpha_mjt]
            for r in sweep]
    return rows, {"grid": {"half_width_sigmas": grid.half_width_sigmas,
                           "points_per_sigma": grid.points_per_sigma}}


def cmd_gaussian(cfg):
    nv = float(cfg["noise_variance"])
    rows = []
    for b in parse_grid(cfg["beta0"], "beta0"):
        for big in parse_grid(cfg["b0"], "b0"):
            rows.append([b, big, nv, *gaussian_largecode_rate(b, big, nv)])
    return rows, {}


def _mc_problem(cfg):
    levels = parse_levels(cfg.get("levels"))
    if cfg.get("constraint") is not None:
        e = parse_constraint(cfg["constraint"], levels)
    else:
        e = ConstraintSet.hamming(_single(cfg, "beta0"))
    return e, parse_input(cfg.get("input"), e.alphabet_size)


def cmd_mc_ps(cfg):
    e, p = _mc_problem(cfg)
    rows = []
    for n in parse_grid(cfg["n"], "n"):
        mc = McConfig(int(n), float(cfg["rs"]), 0.0, p, e, trials=int(cfg["trials"]),
                      seed=int(cfg["seed"]), selection=cfg["selection"])
        res = estimate_ps(mc, workers=int(cfg["threads"]))
        exact = None
        if exact_available(p, e, mc.n):
            exact = success_probability(log_exact_pNE(p, e, mc.n), math.log2(mc.words_per_set))
        ps = res.ps_hat
        rows.append([mc.n, mc.rs_bits, mc.words_per_set, mc.trials, ps.value, ps.lower,
                     ps.upper, exact, res.marginal_l1, res.pooled_symbols])
    return rows, {"rng": RNG_NAME}


def cmd_mc_decode(cfg):
    e, p = _mc_problem(cfg)
    ch = parse_channel(cfg.get("channel"))
    rows = []
    for n in parse_grid(cfg["n"], "n"):
        mc = McConfig(int(n), float(cfg["rs"]), float(cfg["rq"]), p, e, ch,
                      trials=int(cfg["trials"]), seed=int(cfg["seed"]),
                      selection=cfg["selection"])
        res = decode_experiment(mc, workers=int(cfg["threads"]))
        row = [mc.n, mc.rs_bits, mc.rq_bits, mc.trials, res.err_matched.total]
        for est in (res.err_matched, res.err_mismatched_codeword, res.err_mismatched_message):
            row += [est.value, est.lower, est.upper]
        rows.append(row + [res.sets_without_word])
    return rows, {"rng": RNG_NAME}


def cmd_baa(cfg):
    meta = {}
    if cfg.get("channel") is not None:
        ch = parse_channel(cfg["channel"])
        e = parse_constraint(cfg.get("constraint"), parse_levels(cfg.get("levels")))
    else:
        levels = parse_levels(cfg.get("levels") or "pam:16")
        snr = _single(cfg, "snr_db")
        nv = float(cfg["noise_variance"])
        grid = _output_grid(cfg)
        pac = PamAwgnConfig(levels, 1.0, nv, nv * 10 ** (snr / 10), grid)
        ch = quantized_awgn(pac)
        e = awgn_power_constraint(pac)
        meta["grid"] = {"half_width_sigmas": grid.half_width_sigmas,
                        "points_per_sigma": grid.points_per_sigma}
    q_hat, cap = constrained_capacity_baa(ch, e, float(cfg["tol"]))
    q_star = project(parse_input(cfg.get("input"), ch.input_size), e).q_star
    i_star = mutual_information(q_star, ch)
    rows = [[i, q_hat.probs[i], q_star.probs[i], cap, i_star] for i in range(ch.input_size)]
    return rows, meta


COMMANDS = {
    "project": cmd_project,
    "bounds": cmd_bounds,
    "sweep-awgn": cmd_sweep_awgn,
    "sweep-bsc": cmd_sweep_bsc,
    "sweep-bnsc": cmd_sweep_bnsc,
    "gaussian": cmd_gaussian,
    "mc-ps": cmd_mc_ps,
    "mc-decode": cmd_mc_decode,
    "baa": cmd_baa,
}


def build_parser():
    ap = _Parser(prog="shaping-bounds", description=__doc__.split("\n\n")[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", parser_class=_Parser)
    S = argparse.SUPPRESS
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", default=S, help="YAML/JSON file; flags override it")
        sp.add_argument("--name", default=S, help="output file stem (default: command)")
        sp.add_argument("--output-dir", default=S, help=f"default: ${OUTPUT_ENV} or .")
        sp.add_argument("--threads", type=int, default=S)
        sp.add_argument("--channel", default=S, help="bsc:<g> or bnsc:<g0>,<g1>")
        sp.add_argument("--constraint", default=S, help="hamming:<b0> or power:<b0>")
        sp.add_argument("--input", default=S, help="uniform:<k>, pmf:<p0>,<p1>,... (or mjt)")
        sp.add_argument("--levels", default=S, help="pam:<M> or comma-separated levels")
        sp.add_argument("--gamma", default=S)
        sp.add_argument("--beta0", default=S, help="value or start:stop:step")
        sp.add_argument("--b0", "--B0", dest="b0", default=S)
        sp.add_argument("--snr-db", default=S, help="value or start:stop:step")
        sp.add_argument("--noise-variance", type=float, default=S)
        sp.add_argument("--half-width", type=float, default=S)
        sp.add_argument("--points-per-sigma", type=int, default=S)
        sp.add_argument("--n", default=S, help="block length(s)")
        sp.add_argument("--rs", type=float, default=S)
        sp.add_argument("--rq", type=float, default=S)
        sp.add_argument("--trials", type=int, default=S)
        sp.add_argument("--seed", type=int, default=S)
        sp.add_argument("--selection", choices=["first", "min"], default=S)
        sp.add_argument("--tol", type=float, default=S)
    return ap


def load_config_file(path):
    text = Path(path).read_text()
    try:
        doc = json.loads(text) if str(path).endswith(".json") else yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise ConfigError("config", f"cannot parse {path}: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError("config", "top level must be a mapping")
    if isinstance(doc.get("config"), dict):
        doc = doc["config"]
    return {k.replace("-", "_"): v for k, v in doc.items()}


def resolve_config(argv):
    ns = vars(build_parser().parse_args(argv))
    command = ns.pop("command", None)
    file_cfg = load_config_file(ns.pop("config")) if "config" in ns else {}
    command = command or file_cfg.get("command")
    if command not in COMMANDS:
        raise ConfigError("command", f"expected one of {sorted(COMMANDS)}")
    cfg = dict(DEFAULTS)
    cfg.update(COMMAND_DEFAULTS.get(command, {}))
    cfg.update(file_cfg)
    cfg.update(ns)
    cfg["command"] = command
    unknown = set(cfg) - set(DEFAULTS) - {"command"}
    if unknown:
        raise ConfigError(sorted(unknown)[0], "unknown setting")
    for key in ("threads", "trials"):
        if int(cfg[key]) < 1:
            raise ConfigError(key, "must be positive")
    return cfg


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    return FLOAT_FORMAT % float(v)


def write_outputs(cfg, rows, extra):
    out_dir = Path(cfg.get("output_dir") or os.environ.get(OUTPUT_ENV) or ".")
    name = cfg.get("name") or cfg["command"]
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / f"{name}.csv"
    with open(csv_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(COLUMNS[cfg["command"]])
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    echo = {k: v for k, v in cfg.items() if k not in ("output_dir", "name")}
    meta = {
        "version": __version__,
        "command": cfg["command"],
        "seed": cfg["seed"],
        "rng": RNG_NAME,
        "grid": {"half_width_sigmas": cfg["half_width"],
                 "points_per_sigma": cfg["points_per_sigma"]},
        "config": echo,
        "columns": COLUMNS[cfg["command"]],
    }
    meta.update(extra)
    with open(out_dir / f"{name}.meta.json", "w") as fh:
        json.dump(meta, fh, indent=2, default=float)
        fh.write("\n")
    return csv_path


def _fail(kind, code, exc, field=None):
    msg = {"error": kind, "message": str(exc)}
    if field:
        msg["field"] = field
    print(json.dumps(msg), file=sys.stderr)
    return code


def main(argv=None) -> int:
    try:
        cfg = resolve_config(sys.argv[1:] if argv is None else argv)
        rows, extra = COMMANDS[cfg["command"]](cfg)
        path = write_outputs(cfg, rows, extra)
    except ConfigError as exc:
        return _fail("validation", 2, exc, exc.field)
    except (ConvergenceError, NoAcceptanceError, FloatingPointError) as exc:
        return _fail("numerical", 3, exc)
    except (InvalidDistributionError, InfeasibleConstraintError, NotApplicableError,
            CapExceededError, ValueError, TypeError) as exc:
        return _fail("validation", 2, exc)
    except OSError as exc:
        return _fail("io", 4, exc)
    print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())

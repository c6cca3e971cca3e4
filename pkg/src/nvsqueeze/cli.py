"""Command-line front end.

    nvsqueeze SUBCOMMAND [options] [--config FILE] [--output-dir DIR]

Options come from three layers: built-in defaults, a JSON config file (or
the preamble of a CSV written by an earlier run) and command-line flags,
with flags winning. The merged config is validated against
``config.schema.json`` before anything is computed and echoed into the
preamble of every CSV, so that file can be passed back as ``--config``.

Exit codes: 0 success, 1 computation error or failed validation, 2 bad
configuration or usage.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from importlib import resources
from pathlib import Path

import jsonschema

from . import __version__, experiments
from .device import DeviceParams, to_model_params
from .exceptions import ConfigError, NVSqueezeError
from .tables import ResultTable, read_preamble, write_table

OUTPUT_ENV = "NVSQUEEZE_OUTPUT_DIR"
DEFAULT_OUTPUT = "nvsqueeze-output"

# option tables: key -> (kind, default, help); kinds map to flags and schema types
_COMMON = {
    "Q_m": ("float", experiments.DEFAULT_Q, "mechanical quality factor"),
}
OPTIONS = {
    "params": {
        "d": ("float", 9.2e-9, "nanowire diameter (m)"),
        "L": ("float", 1.45e-6, "nanowire length (m)"),
        "E": ("float", 300e9, "Young's modulus (Pa)"),
        "rho": ("float", 3000.0, "mass density (kg/m^3)"),
        "T": ("float", 0.01, "bath temperature (K)"),
        "B_z": ("float", 0.1, "bias field (T)"),
        "mass": ("float?", None, "explicit resonator mass (kg)"),
        "G_B": ("float?", None, "field gradient (T/m); exclusive with theta"),
        "theta": ("float?", math.pi / 2, "target twisting phase (rad)"),
        "N": ("int", 10, "number of spins"),
        "m": ("int", 3000, "number of mechanical periods"),
        **_COMMON,
    },
    "sweep-theta": {
        "N": ("int", 50, "number of spins"),
        "noise_levels": ("floats", list(experiments.DEFAULT_NOISE_LEVELS), "n_bar / Q_m values"),
        "theta_grid": ("floats?", None, "twisting phases (rad); default 40 log-spaced points"),
        **_COMMON,
    },
    "sweep-n": {
        "N_list": ("ints", list(experiments.DEFAULT_N_GRID), "spin numbers"),
        "noise_levels": ("floats", [0.0, 0.01, 0.1], "n_bar / Q_m values"),
        "prefactor": ("float?", experiments.POWER_LAW_PREFACTOR, "fixed power-law prefactor; null frees it"),
        **_COMMON,
    },
    "sweep-m": {
        "N": ("int", 10, "number of spins"),
        "n_bar": ("float", 10.0, "bath occupation"),
        "m_list": ("ints", list(experiments.DEFAULT_M_GRID), "numbers of periods"),
        "target": ("choice:squeezing,ghz", "squeezing", "observable"),
        "theta": ("float?", None, "twisting phase; default theta_opt or pi/2"),
        "time_budget": ("float?", None, "stop after this many seconds"),
        **_COMMON,
    },
    "ghz-noise": {
        "N_list": ("ints", [10, 20], "even spin numbers"),
        "noise_grid": ("floats", list(experiments.DEFAULT_GHZ_NOISE_GRID), "n_bar / Q_m values"),
        **_COMMON,
    },
    "ghz-threshold": {
        "N_list": ("ints", [10, 20], "even spin numbers"),
        "F_targets": ("floats", [0.5, 0.9], "fidelity targets"),
        "bracket": ("floats", [1e-5, 1.0], "noise search interval"),
        "rtol": ("float", 1e-3, "relative tolerance on the threshold"),
        **_COMMON,
    },
    "optimal-phase": {
        "N_list": ("ints", [10, 20, 40, 80], "spin numbers"),
        "tol": ("float", 1e-5, "absolute tolerance on the phase"),
    },
    "validate": {
        "suite": ("choice:" + ",".join(("magnus", "bruteforce", "split_invariance", "truncation")), "magnus",
                  "oracle suite"),
    },
}
RUN_KEYS = {
    "output_dir": ("str?", None, "output directory"),
    "workers": ("int", 1, "worker processes"),
    "plot": ("bool", False, "also write an SVG plot"),
    "engine": ("choice:exact,lindblad", "exact", "propagation engine"),
}


def _schema_type(kind):
    nullable = kind.endswith("?")
    kind = kind.rstrip("?")
    if kind.startswith("choice:"):
        node = {"enum": kind.split(":", 1)[1].split(",")}
    else:
        node = {
            "int": {"type": "integer"},
            "float": {"type": "number"},
            "str": {"type": "string"},
            "bool": {"type": "boolean"},
            "ints": {"type": "array", "items": {"type": "integer"}, "minItems": 1},
            "floats": {"type": "array", "items": {"type": "number"}, "minItems": 1},
        }[kind]
    if nullable:
        return {"anyOf": [node, {"type": "null"}]}
    return node


def build_schema() -> dict:
    """JSON schema of the run configuration (also shipped as ``config.schema.json``)."""
    props = {k: _schema_type(v[0]) for k, v in RUN_KEYS.items()}
    props["subcommand"] = {"enum": list(OPTIONS)}
    props["options"] = {"type": "object"}
    branches = []
    for name, table in OPTIONS.items():
        branches.append({
            "if": {"properties": {"subcommand": {"const": name}}},
            "then": {"properties": {"options": {
                "type": "object",
                "additionalProperties": False,
                "properties": {k: _schema_type(v[0]) for k, v in table.items()},
            }}},
        })
    return {
        "$schema": "https://json-schema.org/draft/2020-12/schema",
        "title": "nvsqueeze run configuration",
        "type": "object",
        "required": ["subcommand"],
        "additionalProperties": False,
        "properties": props,
        "allOf": branches,
    }


def load_schema() -> dict:
    return json.loads(resources.files("nvsqueeze").joinpath("config.schema.json").read_text(encoding="utf-8"))


# -- argument parsing -------------------------------------------------------

def _parse_list(cast):
    def parse(text):
        try:
            return [cast(v) for v in text.split(",") if v.strip()]
        except ValueError as exc:
            raise argparse.ArgumentTypeError(f"bad list {text!r}: {exc}") from exc
    return parse


def _parse_optional(cast):
    def parse(text):
        return None if text.lower() in ("none", "null") else cast(text)
    return parse


def _add_option(parser, key, kind, help_text):
    flag = "--" + key.replace("_", "-")
    nullable = kind.endswith("?")
    kind = kind.rstrip("?")
    if kind == "bool":
        parser.add_argument(flag, dest=key, action="store_const", const=True, default=None, help=help_text)
        return
    if kind.startswith("choice:"):
        parser.add_argument(flag, dest=key, choices=kind.split(":", 1)[1].split(","), default=None, help=help_text)
        return
    cast = {"int": int, "float": float, "str": str, "ints": _parse_list(int), "floats": _parse_list(float)}[kind]
    if nullable:
        cast = _parse_optional(cast)
    parser.add_argument(flag, dest=key, type=cast, default=None, help=help_text)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="JSON config or a CSV written by a previous run")
    for key, (kind, _, help_text) in RUN_KEYS.items():
        _add_option(common, key, kind, help_text)
    parser = _Parser(prog="nvsqueeze", description="NV-ensemble squeezing and GHZ simulations")
    parser.add_argument("--version", action="version", version=f"nvsqueeze {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)
    for name, table in OPTIONS.items():
        p = sub.add_parser(name, parents=[common])
        for key, (kind, _, help_text) in table.items():
            _add_option(p, key, kind, help_text)
    return parser


def load_config_file(path) -> dict:
    path = Path(path)
    try:
        if path.suffix.lower() == ".csv":
            meta = read_preamble(path)
            if "config" not in meta:
                raise ConfigError(f"{path} has no config entry in its preamble")
            return meta["config"]
        return json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc


def resolve_config(args: argparse.Namespace) -> dict:
    """Merge defaults, config file and flags, then validate."""
    name = args.subcommand
    file_cfg = load_config_file(args.config) if args.config else {}
    if not isinstance(file_cfg, dict):
        raise ConfigError("config must be a JSON object")
    if file_cfg.get("subcommand", name) != name:
        raise ConfigError(f"config is for {file_cfg['subcommand']!r}, not {name!r}")
    try:
        jsonschema.validate(dict(file_cfg, subcommand=name), load_schema())
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"invalid config: {exc.message}") from exc

    cfg = {"subcommand": name}
    for key, (_, default, _) in RUN_KEYS.items():
        cfg[key] = default
    cfg.update({k: v for k, v in file_cfg.items() if k in RUN_KEYS})
    options = {k: v[1] for k, v in OPTIONS[name].items()}
    options.update(file_cfg.get("options", {}))
    for key in RUN_KEYS:
        if getattr(args, key, None) is not None:
            cfg[key] = getattr(args, key)
    for key in OPTIONS[name]:
        if getattr(args, key, None) is not None:
            options[key] = getattr(args, key)
    cfg["options"] = options
    try:
        jsonschema.validate(cfg, load_schema())
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"invalid config: {exc.message}") from exc
    if cfg["workers"] < 1:
        raise ConfigError("workers must be >= 1")
    return cfg


# -- subcommands ------------------------------------------------------------

def _output_dir(cfg) -> Path:
    return Path(cfg["output_dir"] or os.environ.get(OUTPUT_ENV) or DEFAULT_OUTPUT)


def _run_params(cfg, o):
    device = DeviceParams(d=o["d"], L=o["L"], E=o["E"], rho_m=o["rho"], T=o["T"], B_z=o["B_z"], mass=o["mass"],
                          Q_m=o["Q_m"])
    theta = None if o["G_B"] is not None else o["theta"]
    params, report = to_model_params(device, N=o["N"], m_periods=o["m"], theta=theta, G_B=o["G_B"])
    table = ResultTable(columns=["quantity", "value"])
    for key, value in report.items():
        if key != "device":
            table.append(dict(quantity=key, value=float(value)))
    table.metadata["model_params"] = params.to_dict()
    lines = [
        f"omega_m = 2pi x {report['f_m_Hz'] / 1e6:.4g} MHz",
        f"n_bar = {report['n_bar']:.4g}",
        f"x_zp = {report['x_zp_m'] * 1e12:.4g} pm",
        f"G_B = {report['G_B']:.4g} T/m",
        f"g_x / omega_m = {report['g_over_wm']:.4g}",
    ]
    return table, lines, {}


def _fit_lines(fits):
    lines = []
    for key, fit in fits.items():
        if fit is None:
            lines.append(f"fit {key}: failed")
            continue
        params = ", ".join(f"{k}={v:.4g}" for k, v in fit.params.items())
        lines.append(f"fit {key}: {params} (residual {fit.residual_norm:.3g})")
    return lines


def _run_sweep_theta(cfg, o):
    t = experiments.sweep_theta(N=o["N"], noise_levels=o["noise_levels"], theta_grid=o["theta_grid"],
                                Q_m=o["Q_m"], engine=cfg["engine"], workers=cfg["workers"])
    return t, [], dict(x="theta_rad", y="xi_R_sq", group="noise_nbar_over_Q")


def _run_sweep_n(cfg, o):
    t, fits = experiments.sweep_N(N_list=o["N_list"], noise_levels=o["noise_levels"], Q_m=o["Q_m"],
                                  prefactor=o["prefactor"], engine=cfg["engine"], workers=cfg["workers"])
    return t, _fit_lines(fits), dict(x="N", y="xi_R_sq", group="noise_nbar_over_Q")


def _run_sweep_m(cfg, o):
    t = experiments.sweep_m(N=o["N"], Q_m=o["Q_m"], n_bar=o["n_bar"], m_list=o["m_list"], target=o["target"],
                            theta=o["theta"], engine=cfg["engine"], workers=cfg["workers"],
                            time_budget=o["time_budget"])
    y = "xi_R_sq" if o["target"] == "squeezing" else "F"
    return t, [], dict(x="m", y=y)


def _run_ghz_noise(cfg, o):
    t, fits = experiments.sweep_ghz_noise(N_list=o["N_list"], noise_grid=o["noise_grid"], Q_m=o["Q_m"],
                                          engine=cfg["engine"], workers=cfg["workers"])
    return t, _fit_lines(fits), dict(x="noise_nbar_over_Q", y="F", group="N")


def _run_ghz_threshold(cfg, o):
    if len(o["bracket"]) != 2:
        raise ConfigError("bracket needs exactly two values")
    t = experiments.ghz_threshold(N_list=o["N_list"], F_targets=o["F_targets"], bracket=tuple(o["bracket"]),
                                  rtol=o["rtol"], Q_m=o["Q_m"], engine=cfg["engine"], workers=cfg["workers"])
    lines = [f"N={r['N']} F={r['F_target']}: n_bar/Q = {r['threshold_nbar_over_Q']:.4g}" for r in t.records()]
    return t, lines, dict(x="N", y="threshold_nbar_over_Q", group="F_target")


def _run_optimal_phase(cfg, o):
    t, fits = experiments.optimal_phase_search(N_list=o["N_list"], tol=o["tol"], workers=cfg["workers"])
    return t, _fit_lines(fits), dict(x="N", y="min_xi_s_sq")


def _run_validate(cfg, o):
    report = experiments.validate(o["suite"])
    t = ResultTable(columns=["name", "value", "threshold", "passed", "params"])
    for c in report["checks"]:
        extra = {k: v for k, v in c.items() if k not in ("name", "value", "threshold", "passed")}
        thr = c["threshold"] if c["threshold"] is not None else math.nan
        t.append(dict(name=c["name"], value=c["value"], threshold=thr, passed=c["passed"],
                      params=json.dumps(extra, sort_keys=True, default=str)))
    t.metadata["passed"] = report["passed"]
    failed = [c for c in report["checks"] if not c["passed"]]
    lines = [f"suite {o['suite']}: {'PASS' if report['passed'] else 'FAIL'} "
             f"({len(report['checks']) - len(failed)}/{len(report['checks'])} checks)"]
    lines += [f"  failed: {c['name']} = {c['value']:.3g} (threshold {c['threshold']})" for c in failed]
    return t, lines, {}


RUNNERS = {
    "params": _run_params,
    "sweep-theta": _run_sweep_theta,
    "sweep-n": _run_sweep_n,
    "sweep-m": _run_sweep_m,
    "ghz-noise": _run_ghz_noise,
    "ghz-threshold": _run_ghz_threshold,
    "optimal-phase": _run_optimal_phase,
    "validate": _run_validate,
}


def output_path(cfg: dict) -> Path:
    name = cfg["subcommand"]
    if name == "validate":
        filename = f"validate_{cfg['options']['suite']}.csv"
    else:
        filename = name.replace("-", "_") + ".csv"
    return _output_dir(cfg) / filename


def run(cfg: dict) -> tuple[int, Path]:
    name = cfg["subcommand"]
    table, lines, plot = RUNNERS[name](cfg, cfg["options"])
    # the echoed config reproduces this run when fed back in
    table.metadata["config"] = {k: v for k, v in cfg.items() if k != "output_dir"}
    path = write_table(table, output_path(cfg), plot=cfg["plot"] and bool(plot), **plot)
    for line in lines:
        print(line)
    print(f"wrote {path}")
    failed = name == "validate" and not table.metadata["passed"]
    return (1 if failed else 0), path


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = build_parser().parse_args(argv)
        cfg = resolve_config(args)
        if args.config and Path(args.config).resolve() == output_path(cfg).resolve():
            raise ConfigError("output would overwrite the config file; choose another --output-dir")
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    try:
        code, _ = run(cfg)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (NVSqueezeError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return code


if __name__ == "__main__":
    sys.exit(main())

"""Command line front end.

    fioresidue heat --config job.json --out heat.csv
    fioresidue residue --config job.json --out report.json
    fioresidue fit --config job.json --samples heat.csv
    fioresidue verify [--only 1 6 11]

Exit codes: 0 success, 1 verification failure, 2 bad config, 3 numerical
failure (ill-conditioned fit, lambda on the spectrum, trace-class check).
"""

from __future__ import annotations

import argparse
import datetime as _dt
import hashlib
import json
import sys
from pathlib import Path

import jsonschema
import numpy as np

from .group_ops import AlgebraElement, GroupElement, Summand
from .residue import residue_closed_form, residue_report
from .symbol_calculus import ClassicalSymbol, HomogeneousTerm
from .trace_engine import (
    FitError,
    Oscillator,
    SpectrumError,
    TraceSamples,
    convert_coefficients,
    fit_expansion,
    geometric_grid,
    heat_trace,
    ladder_for,
    numeric_residue_at_zero,
    resolvent_trace,
    zeta_trace,
)
from .verification import run_all

EXIT_VERIFY = 1
EXIT_SCHEMA = 2
EXIT_NUMERIC = 3

_number_list = {"type": "array", "items": {"type": "number"}}

CONFIG_SCHEMA = {
    "type": "object",
    "required": ["modes", "D"],
    "additionalProperties": False,
    "properties": {
        "modes": {"type": "integer", "minimum": 1, "maximum": 4},
        "cutoff": {"type": "integer", "minimum": 4},
        "task": {"enum": ["heat", "resolvent", "zeta", "residue", "fit", "verify"]},
        "D": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["terms"],
                "additionalProperties": False,
                "properties": {
                    "scale_re": {"type": "number"},
                    "scale_im": {"type": "number"},
                    "angles": _number_list,
                    "w_re": _number_list,
                    "w_im": _number_list,
                    "osc_power": {"type": "integer", "minimum": 0},
                    "quantization": {"enum": ["weyl", "standard", "right"]},
                    "terms": {
                        "type": "array",
                        "minItems": 1,
                        "items": {
                            "type": "object",
                            "required": ["xpow", "ppow"],
                            "additionalProperties": False,
                            "properties": {
                                "coeff_re": {"type": "number"},
                                "coeff_im": {"type": "number"},
                                "xpow": {"type": "array", "items": {"type": "integer", "minimum": 0}},
                                "ppow": {"type": "array", "items": {"type": "integer", "minimum": 0}},
                                "radpow": {"type": "integer", "minimum": 0},
                            },
                        },
                    },
                },
            },
        },
        "H": {
            "type": "object",
            "required": ["kind"],
            "additionalProperties": False,
            "properties": {
                "kind": {"enum": ["harmonic-oscillator", "harmonic-oscillator-power"]},
                "power": {"type": "integer", "minimum": 1},
            },
        },
        "grid": {"type": "string", "pattern": r"^[^:]+:[^:]+:\d+$"},
        "z_re": _number_list,
        "z_im": _number_list,
        "K": {"type": "integer", "minimum": 1},
        "fit": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "count": {"type": "integer", "minimum": 1},
                "j_max": {"type": "integer", "minimum": 0},
                "detect": {"type": "boolean"},
                "compare": {"type": "boolean"},
            },
        },
    },
}


class ConfigError(ValueError):
    pass


# config ----------------------------------------------------------------------
def load_config(path):
    try:
        text = Path(path).read_text()
        cfg = json.loads(text)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    try:
        jsonschema.validate(cfg, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"schema: {exc.message} at {list(exc.absolute_path)}") from exc
    return cfg, hashlib.sha256(text.encode()).hexdigest()


def parse_grid(text):
    """'start:stop:count' as a geometric grid."""
    try:
        start, stop, count = text.split(":")
        return geometric_grid(float(start), float(stop), int(count))
    except ValueError as exc:
        raise ConfigError(f"bad grid {text!r}: {exc}") from exc


def build_element(cfg):
    try:
        return _build_element(cfg)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"operator: {exc}") from exc


def _build_element(cfg):
    n = cfg["modes"]
    summands = []
    for i, spec in enumerate(cfg["D"]):
        angles = spec.get("angles", [0.0] * n)
        w_re = spec.get("w_re", [0.0] * n)
        w_im = spec.get("w_im", [0.0] * n)
        if not (len(angles) == len(w_re) == len(w_im) == n):
            raise ConfigError(f"D[{i}]: angles, w_re and w_im need {n} entries")
        terms = []
        for t in spec["terms"]:
            if len(t["xpow"]) != n or len(t["ppow"]) != n:
                raise ConfigError(f"D[{i}]: xpow and ppow need {n} entries")
            c = complex(t.get("coeff_re", 1.0), t.get("coeff_im", 0.0))
            terms.append(HomogeneousTerm(c, tuple(t["xpow"]), tuple(t["ppow"]), t.get("radpow", 0)))
        sym = ClassicalSymbol.from_terms(n, terms, spec.get("quantization", "weyl"))
        scale = complex(spec.get("scale_re", 1.0), spec.get("scale_im", 0.0))
        elem = GroupElement.from_config(angles, w_re, w_im)
        summands.append(Summand(scale, elem, sym, spec.get("osc_power", 0)))
    return AlgebraElement(tuple(summands))


def build_H(cfg):
    spec = cfg.get("H", {"kind": "harmonic-oscillator"})
    if spec["kind"] == "harmonic-oscillator":
        return Oscillator(1)
    if "power" not in spec:
        raise ConfigError("harmonic-oscillator-power needs 'power'")
    return Oscillator(spec["power"])


def _metadata(cfg_hash, extra=None):
    meta = {
        "config_sha256": cfg_hash,
        "created": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
    }
    meta.update(extra or {})
    return meta


def _write_json(obj, out):
    text = json.dumps(obj, indent=2, sort_keys=True, default=_jsonable) + "\n"
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _jsonable(v):
    if isinstance(v, complex):
        return {"re": v.real, "im": v.imag}
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    return str(v)


def _emit_samples(samples: TraceSamples, out, cfg_hash):
    if out:
        samples.to_csv(out)
        meta = {
            "data": {
                "kind": samples.kind,
                "rows": len(samples),
                "tail_bound": float(np.max(samples.uncertainty)),
                "params": {k: v for k, v in samples.meta.items()},
            },
            "metadata": _metadata(cfg_hash),
        }
        _write_json(meta, str(out) + ".json")
    else:
        sys.stdout.write("param_re,param_im,trace_re,trace_im,uncertainty\n")
        for row in samples.rows():
            sys.stdout.write(",".join(row) + "\n")


# commands --------------------------------------------------------------------
def cmd_heat(args, cfg, cfg_hash):
    grid = parse_grid(cfg.get("grid", "0.05:2:40"))
    samples = heat_trace(build_element(cfg), build_H(cfg), grid, _cutoff(args, cfg), args.threads)
    _emit_samples(samples, args.out, cfg_hash)


def cmd_resolvent(args, cfg, cfg_hash):
    s = parse_grid(cfg.get("grid", "10:10000:40"))
    samples = resolvent_trace(build_element(cfg), build_H(cfg), -s, cfg.get("K", 1), _cutoff(args, cfg), args.threads)
    _emit_samples(samples, args.out, cfg_hash)


def cmd_zeta(args, cfg, cfg_hash):
    if "z_re" in cfg:
        z = np.asarray(cfg["z_re"], float) + 1j * np.asarray(cfg.get("z_im", [0.0] * len(cfg["z_re"])), float)
    else:
        z = parse_grid(cfg.get("grid", "2:6:9")).astype(complex)
    samples = zeta_trace(build_element(cfg), build_H(cfg), z, _cutoff(args, cfg), args.threads)
    _emit_samples(samples, args.out, cfg_hash)


def cmd_residue(args, cfg, cfg_hash):
    D = build_element(cfg)
    value = residue_closed_form(D)
    report = {
        "value_re": value.real,
        "value_im": value.imag,
        "quadrature_error": 0.0,
        "summands": residue_report(D),
    }
    fit_cfg = cfg.get("fit", {})
    if fit_cfg.get("compare", False):
        H = build_H(cfg)
        numeric, fit = numeric_residue_at_zero(
            D, H, N=_cutoff(args, cfg), j_max=fit_cfg.get("j_max", 8), detect=fit_cfg.get("detect", True), return_fit=True
        )
        numeric *= H.order
        report["numeric"] = {
            "value_re": numeric.real,
            "value_im": numeric.imag,
            "difference": abs(numeric - value),
            "fit": fit.report(),
        }
    _write_json({"data": report, "metadata": _metadata(cfg_hash)}, args.out)


def cmd_fit(args, cfg, cfg_hash):
    if not args.samples:
        raise ConfigError("fit needs --samples")
    kind = args.kind
    try:
        samples = TraceSamples.from_csv(args.samples, kind)
    except (OSError, KeyError, ValueError) as exc:
        raise ConfigError(f"cannot read samples: {exc}") from exc
    H = build_H(cfg)
    D = build_element(cfg)
    fit_cfg = cfg.get("fit", {})
    j_max = fit_cfg.get("j_max", 8)
    K = cfg.get("K", 1) if kind == "resolvent" else None
    fit = fit_expansion(samples, ladder_for(D, H.order, j_max, K), fit_cfg.get("count"))
    report = {"expansion": fit.report()}
    if kind == "resolvent":
        report["heat_from_resolvent"] = convert_coefficients(fit, K, H.order).report()
    _write_json({"data": report, "metadata": _metadata(cfg_hash)}, args.out)


def cmd_verify(args):
    results = run_all(args.only)
    lines = [r.line() for r in results]
    payload = {
        "data": [
            {"criterion": r.number, "name": r.name, "passed": r.passed, "measured": r.measured} for r in results
        ],
        "metadata": _metadata(None),
    }
    if args.out:
        _write_json(payload, args.out)
    for line in lines:
        print(line)
    return 0 if all(r.passed for r in results) else EXIT_VERIFY


def _cutoff(args, cfg):
    return args.cutoff if args.cutoff is not None else cfg.get("cutoff")


COMMANDS = {
    "heat": cmd_heat,
    "resolvent": cmd_resolvent,
    "zeta": cmd_zeta,
    "residue": cmd_residue,
    "fit": cmd_fit,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="fioresidue", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in (*COMMANDS, "verify"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=name != "verify")
        p.add_argument("--out")
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--cutoff", type=int)
        if name == "fit":
            p.add_argument("--samples")
            p.add_argument("--kind", choices=["heat", "resolvent"], default="heat")
        if name == "verify":
            p.add_argument("--only", type=int, nargs="+")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "verify":
            return cmd_verify(args)
        cfg, cfg_hash = load_config(args.config)
        task = cfg.get("task")
        if task is not None and task != args.command:
            raise ConfigError(f"config task {task!r} does not match command {args.command!r}")
        COMMANDS[args.command](args, cfg, cfg_hash)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except (FitError, SpectrumError, np.linalg.LinAlgError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        # trace-class and degree checks raise ValueError from the numerical layers
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return 0


if __name__ == "__main__":
    sys.exit(main())

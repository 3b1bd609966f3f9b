"""Command-line entry point: ``wwcascade <command> [options]``.

Exit codes: 0 success, 2 invalid input or failed certification, 3 numerical abort.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import math
import sys
import time
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from . import __version__
from .cascade import (ExperimentConfig, Knobs, NumericalAbort, build_datum, check_B, evolve,
                      first_exceedance, lambda_amplitudes, summarize)
from .dispersion import Vorticity
from .exact import fraction_str
from .nfcoeffs import (SmallDivisorError, abc_residual, transport_bundle, v2_coeff,
                       vint_closed, vres_closed)
from .paradiff import assemble_mourre, default_delta0, mourre_gap_check
from .resonance import (CertificationError, GoodSet, ResonanceError, certify_good_set, construct_family,
                        four_wave_classify, three_wave_min)

log = logging.getLogger("wwcascade")

EXIT_OK, EXIT_INVALID, EXIT_NUMERIC = 0, 2, 3


class InvalidInput(ValueError):
    pass


@dataclass
class RunManifest:
    command: str
    config: dict
    version: str = __version__
    input_hashes: dict = field(default_factory=dict)
    outputs: list = field(default_factory=list)
    wall_time: float = 0.0

    def to_json(self) -> dict:
        return {
            "command": self.command,
            "config": self.config,
            "version": self.version,
            "input_hashes": self.input_hashes,
            "outputs": self.outputs,
            "wall_time": self.wall_time,
        }


def _clean(obj):
    """Replace non-finite floats by None so the output is strict JSON."""
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj


def load_schema(name: str) -> dict:
    from importlib.resources import files

    return json.loads(files("wwcascade").joinpath("schemas", f"{name}.schema.json").read_text())


def dumps(obj) -> str:
    return json.dumps(_clean(obj), indent=2, sort_keys=False) + "\n"


def parse_int_list(text: str) -> list[int]:
    """``"1,3,5"`` or ``"1:9"`` (odd values of the inclusive range) or empty."""
    text = (text or "").strip()
    if not text:
        return []
    if ":" in text:
        lo, hi = (int(x) for x in text.split(":"))
        return [a for a in range(lo, hi + 1) if a % 2]
    return [int(x) for x in text.split(",") if x.strip()]


def parse_lambda(text: str) -> tuple[int, int]:
    parts = [int(x) for x in text.split(",")]
    if len(parts) != 2:
        raise InvalidInput("--lambda expects m,n")
    return parts[0], parts[1]


def load_config(path: str) -> dict:
    raw = Path(path).read_bytes()
    if path.endswith(".json"):
        return json.loads(raw)
    try:
        import tomllib
    except ModuleNotFoundError:  # Python < 3.11
        import tomli as tomllib
    return tomllib.loads(raw.decode())


def _good_set(args) -> GoodSet:
    m, n = parse_lambda(args.lam)
    try:
        return GoodSet.certified(m, n)
    except CertificationError as exc:
        raise InvalidInput(str(exc)) from exc


# ---------------------------------------------------------------- commands

def cmd_good_sets(args, manifest):
    a_list = parse_int_list(args.a)
    report = construct_family(args.p, args.q, a_list)
    status = EXIT_OK if not report.skipped else EXIT_INVALID
    return report.to_json(), status


def cmd_certify(args, manifest):
    v = Vorticity(Fraction(args.gamma_sq)) if args.gamma_sq else None
    cert = certify_good_set(args.m, args.n, v)
    return cert.to_json(), EXIT_OK if cert.ok else EXIT_INVALID


def cmd_resonances(args, manifest):
    lam = _good_set(args)
    report = four_wave_classify(lam, args.layer, args.J)
    return report.to_json(), EXIT_OK if report.ok else EXIT_INVALID


def cmd_three_wave(args, manifest):
    v = Vorticity(Fraction(args.gamma_sq))
    report = three_wave_min(v, args.J, jobs=args.jobs)
    return report.to_json(), EXIT_OK if report.ok else EXIT_INVALID


def cmd_coeffs(args, manifest):
    lam = _good_set(args)
    _, _, zm, zn = lambda_amplitudes(lam, Fraction(str(args.eps)))
    bundle = transport_bundle(lam, zm, zn)
    abc_res = abc_residual(lam)
    v = lam.vorticity
    vint_res = max(
        abs(float(v2_coeff(j, j, 1, -1, v) + v2_coeff(j, j, -1, 1, v)) - float(vint_closed(j, lam)))
        / max(1.0, abs(float(vint_closed(j, lam))))
        for j in [j for j in range(-args.vint_range, args.vint_range + 1) if j]
    )
    vres_v2 = float(v2_coeff(lam.n, lam.m, 1, -1, v) + v2_coeff(lam.m, lam.n, -1, 1, v))
    vres = float(vres_closed(lam))
    out = bundle.to_json()
    out["z_m0"], out["z_n0"] = zm, zn
    out["checks"] = {
        "abc_oracle": {"pass": abc_res < 1e-20, "residual": abc_res},
        "vint_v2": {"pass": vint_res < 1e-12, "residual": vint_res},
        "vres_v2": {"pass": abs(vres_v2 - vres) < 1e-12 * abs(vres), "residual": abs(vres_v2 - vres)},
        "vtilde_identity": {"pass": bundle.vtilde_m == bundle.vtilde_m_identity
                            and bundle.vtilde_n == bundle.vtilde_n_identity, "residual": 0.0},
        "signs": {"pass": bundle.vtilde_m > 0 and bundle.vtilde_n < 0 and vres < 0, "residual": 0.0},
    }
    ok = all(c["pass"] for c in out["checks"].values())
    return out, EXIT_OK if ok else EXIT_INVALID


def _config_from_args(args, manifest) -> ExperimentConfig:
    data = {}
    if getattr(args, "config", None):
        data = load_config(args.config)
        manifest.input_hashes[args.config] = hashlib.sha256(Path(args.config).read_bytes()).hexdigest()
    knobs = dict(data.pop("knobs", {}) or {})
    overrides = {
        "eps": args.eps, "theta": args.theta, "s": args.s, "K": args.K, "R": args.R, "rho": args.rho,
        "T_end": args.T_end, "dt_record": args.dt_record, "seed": args.seed,
    }
    if getattr(args, "lam", None):
        data["m"], data["n"] = parse_lambda(args.lam)
    data.update({k: v for k, v in overrides.items() if v is not None})
    for name in Knobs.__dataclass_fields__:
        val = getattr(args, name, None)
        if val is not None:
            knobs[name] = val
    data["knobs"] = knobs
    try:
        cfg = ExperimentConfig.from_dict(data)
    except (TypeError, ValueError) as exc:
        raise InvalidInput(f"invalid configuration: {exc}") from exc
    manifest.config = cfg.to_dict()
    return cfg


def cmd_build_data(args, manifest):
    cfg = _config_from_args(args, manifest)
    datum = build_datum(cfg)
    conds = check_B(cfg, datum)
    out = {
        "lambda": [datum.lam.m, datum.lam.n],
        "eps": cfg.eps,
        "rho": datum.rho,
        "high_modes": list(datum.high),
        "abs_sq_m": fraction_str(datum.abs_sq_m),
        "abs_sq_n": fraction_str(datum.abs_sq_n),
        "balance": fraction_str(datum.balance),
        "kappa": datum.bundle.kappa,
        "nu0": datum.bundle.nu0,
        "conditions": {k: c.to_json() for k, c in conds.items()},
        "advisories": cfg.advisories(),
    }
    out["pass"] = all(c.passed for c in conds.values())
    return out, EXIT_OK


def cmd_mourre_check(args, manifest):
    cfg = _config_from_args(args, manifest)
    datum = build_datum(cfg)
    report = mourre_gap_check(datum.bundle, cfg.s, cfg.R, cfg.K, cfg.delta0)
    return report.to_json(), EXIT_OK if report.passed else EXIT_INVALID


def cmd_simulate(args, manifest):
    cfg = _config_from_args(args, manifest)
    out_dir = Path(args.out_dir or "simulate-out")
    out_dir.mkdir(parents=True, exist_ok=True)
    delta0 = cfg.delta0 if cfg.delta0 is not None else default_delta0(cfg.n)
    datum = build_datum(cfg)
    A = assemble_mourre(datum.bundle, cfg.s, cfg.R, cfg.K, delta0)
    ts = evolve(cfg, datum, A=A)
    summary = summarize(ts, datum.bundle)
    csv_path = out_dir / "timeseries.csv"
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(ts.columns)
        for row in ts.rows():
            writer.writerow([repr(float(x)) for x in row])
    manifest.outputs.append(str(csv_path))
    if args.svg:
        svg_path = out_dir / "growth.svg"
        svg_path.write_text(render_svg(ts))
        manifest.outputs.append(str(svg_path))
    out = summary.to_json()
    out["time_to_e"] = first_exceedance(ts, math.e)
    out["pass"] = summary.band_pass
    return out, EXIT_OK


def render_svg(ts, width: int = 640, height: int = 360) -> str:
    """Static line plot of log A (where positive) and log ||z||_s against t."""
    pad = 48
    t = list(ts.times)
    series = {
        "log A": [math.log(a) if a > 0 else None for a in ts.virial],
        "log norm_s": [math.log(v) if v > 0 else None for v in ts.norm_s],
    }
    vals = [y for ys in series.values() for y in ys if y is not None]
    lo, hi = (min(vals), max(vals)) if vals else (0.0, 1.0)
    if hi - lo < 1e-12:
        lo, hi = lo - 1, hi + 1
    t0, t1 = t[0], t[-1] if t[-1] > t[0] else t[0] + 1

    def xy(ti, yi):
        x = pad + (ti - t0) / (t1 - t0) * (width - 2 * pad)
        y = height - pad - (yi - lo) / (hi - lo) * (height - 2 * pad)
        return f"{x:.2f},{y:.2f}"

    colors = {"log A": "#1f77b4", "log norm_s": "#d62728"}
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" y2="{height - pad}" stroke="black"/>',
        f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height - pad}" stroke="black"/>',
        f'<text x="{width / 2:.0f}" y="{height - 12}" font-size="12" text-anchor="middle">t (0 to {t1:.4g})</text>',
        f'<text x="8" y="{pad - 12}" font-size="12">[{lo:.4g}, {hi:.4g}]</text>',
    ]
    for i, (name, ys) in enumerate(series.items()):
        runs, cur = [], []
        for ti, yi in zip(t, ys):
            if yi is None:
                if cur:
                    runs.append(cur)
                cur = []
            else:
                cur.append(xy(ti, yi))
        if cur:
            runs.append(cur)
        for run in runs:
            parts.append(f'<polyline fill="none" stroke="{colors[name]}" stroke-width="1.5" points="{" ".join(run)}"/>')
        parts.append(f'<text x="{width - pad - 110}" y="{pad + 16 * i}" font-size="12" fill="{colors[name]}">{name}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


# ---------------------------------------------------------------- parser

def _add_experiment_flags(p):
    p.add_argument("--config", help="TOML or JSON experiment configuration")
    p.add_argument("--lambda", dest="lam", help="good set as m,n (default -2,3)")
    p.add_argument("--eps", type=float)
    p.add_argument("--theta", type=float)
    p.add_argument("--s", type=float)
    p.add_argument("--K", type=int)
    p.add_argument("--R", type=float)
    p.add_argument("--rho", type=float)
    p.add_argument("--T-end", dest="T_end", type=float)
    p.add_argument("--dt-record", dest="dt_record", type=float)
    p.add_argument("--seed", type=int)
    for name in Knobs.__dataclass_fields__:
        p.add_argument("--" + name.replace("_", "-"), dest=name, type=float)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wwcascade", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("--out-dir", help="write reports and the run manifest here")
    parser.add_argument("--jobs", type=int, default=1, help="parallel workers for scans")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("good-sets", help="construct and certify a family of good sets")
    p.add_argument("--p", type=int, required=True)
    p.add_argument("--q", type=int, required=True)
    p.add_argument("--a", default="", help="odd values, e.g. 1,3,5 or 1:9")
    p.set_defaults(func=cmd_good_sets)

    p = sub.add_parser("certify", help="check a pair against (G1)-(G4)")
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--gamma-sq", dest="gamma_sq", help="p/q; inferred when omitted")
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("resonances", help="classify four-wave tuples of one layer")
    p.add_argument("--lambda", dest="lam", required=True)
    p.add_argument("--layer", type=int, choices=(0, 1, 2), required=True)
    p.add_argument("--J", type=int, default=500)
    p.set_defaults(func=cmd_resonances)

    p = sub.add_parser("three-wave", help="scan three-wave combinations")
    p.add_argument("--gamma-sq", dest="gamma_sq", required=True)
    p.add_argument("--J", type=int, default=200)
    p.set_defaults(func=cmd_three_wave)

    p = sub.add_parser("coeffs", help="normal-form and transport coefficients with cross-checks")
    p.add_argument("--lambda", dest="lam", required=True)
    p.add_argument("--eps", type=float, default=0.05)
    p.add_argument("--vint-range", dest="vint_range", type=int, default=100)
    p.set_defaults(func=cmd_coeffs)

    for name, func, helptext in (
        ("build-data", cmd_build_data, "build the well-prepared datum and check (B1)-(B4)"),
        ("mourre-check", cmd_mourre_check, "discrete positive-commutator check"),
        ("simulate", cmd_simulate, "evolve the effective equation and fit the growth rate"),
    ):
        p = sub.add_parser(name, help=helptext)
        _add_experiment_flags(p)
        if name == "simulate":
            p.add_argument("--svg", action="store_true", help="also write a static SVG plot")
        p.set_defaults(func=func)
    return parser


_VALUE_FLAGS = ("--lambda", "--m", "--n", "--a")


def _attach_values(argv):
    # argparse reads "-2,3" as an option; glue such values onto their flag
    out, it = [], iter(argv)
    for tok in it:
        if tok in _VALUE_FLAGS:
            nxt = next(it, None)
            out.append(tok if nxt is None else f"{tok}={nxt}")
        else:
            out.append(tok)
    return out


def main(argv=None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    args = parser.parse_args(_attach_values(argv))
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    manifest = RunManifest(args.command, {k: v for k, v in vars(args).items() if k != "func"})
    start = time.perf_counter()
    try:
        report, status = args.func(args, manifest)
    except (InvalidInput, ValueError, TypeError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (ResonanceError, SmallDivisorError, NumericalAbort, ArithmeticError) as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    manifest.wall_time = time.perf_counter() - start
    text = dumps(report)
    target = args.out_dir or ("simulate-out" if args.command == "simulate" else None)
    if target:
        out_dir = Path(target)
        out_dir.mkdir(parents=True, exist_ok=True)
        report_path = out_dir / f"{args.command}.json"
        report_path.write_text(text)
        manifest.outputs.insert(0, str(report_path))
        (out_dir / "manifest.json").write_text(dumps(manifest.to_json()))
    sys.stdout.write(text)
    return status


if __name__ == "__main__":
    sys.exit(main())

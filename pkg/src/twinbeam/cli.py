"""Command-line interface for twinbeam.

Log output goes to stderr; stdout carries only reports, CSV and JSON.
Exit codes: 0 success, 1 I/O error, 2 usage or input error, 3 oracle
regression threshold exceeded, 4 internal model check failed.
"""
import argparse
import json
import math
import os
import sys
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from . import __version__
from .analytic import breakdown_general, closed_form_for, nf_general, optimum_table, sweep_forward
from .analytic import forward_reverse_table
from .chain import convergence_table, error_ratios
from .config import Settings, load_settings, with_overrides
from .diagnostic import invert_batch, read_measurements, synthesize_records, write_inversions, write_measurements
from .errors import DomainError, TwinBeamError
from .models import DetectionParams, InversionResult, MediumParams, squeezing_from_gain
from .utils import rows_to_csv, safe_write_file, set_package_level, setup_logging


logger = setup_logging(__name__)

EXIT_OK = 0
EXIT_IO = 1
EXIT_USAGE = 2
EXIT_THRESHOLD = 3
EXIT_MODEL_CHECK = 4

COMPARE_SLACK_DB = 1e-9
SYNTH_DIGITS = 17


class ModelCheckFailed(TwinBeamError):
    """A property the model guarantees did not hold."""


@dataclass(frozen=True)
class SweepSpec:
    """Grid of probe transmissions and intrinsic gains for the forward sweep."""

    ta_range: tuple
    gain_range: tuple
    eta: float

    def __post_init__(self):
        for name, (lo, hi, count), low_ok in (
            ("ta_range", self.ta_range, lambda v: 0.0 < v <= 1.0),
            ("gain_range", self.gain_range, lambda v: v >= 1.0),
        ):
            if int(count) < 2:
                raise DomainError(f"{name} count must be >= 2, got {count}")
            if hi < lo or not (low_ok(lo) and low_ok(hi)):
                raise DomainError(f"{name} ({lo}, {hi}) lies outside its domain")
        DetectionParams.balanced(self.eta)

    @property
    def ta_values(self) -> np.ndarray:
        lo, hi, count = self.ta_range
        return np.linspace(lo, hi, int(count))

    @property
    def gain_values(self) -> np.ndarray:
        lo, hi, count = self.gain_range
        return np.linspace(lo, hi, int(count))


def _linspace(rng: Sequence[float]) -> List[float]:
    lo, hi, count = rng
    return [float(v) for v in np.linspace(lo, hi, int(count))]


def _medium_from_args(args: argparse.Namespace, settings: Settings) -> MediumParams:
    S = args.s if args.s is not None else squeezing_from_gain(args.gain)
    tb = args.tb if args.tb is not None else settings.tb
    return MediumParams(S=S, ta=args.ta, tb=tb)


def _detection_from_args(args: argparse.Namespace, settings: Settings) -> DetectionParams:
    eta = settings.eta
    return DetectionParams(
        eta_a=args.eta_a if args.eta_a is not None else eta,
        eta_b=args.eta_b if args.eta_b is not None else eta,
    )


def _json_value(value):
    """JSON-safe table cell: non-finite floats become null."""
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def _emit_table(header: Sequence[str], rows: Sequence[Sequence], out: Optional[str],
                args: argparse.Namespace, settings: Settings) -> int:
    """Write a table to `out`, or print it as CSV (or JSON with --json)."""
    if out:
        if not safe_write_file(out, rows_to_csv(header, rows, settings.float_digits), logger):
            return EXIT_IO
        if args.json:
            print(json.dumps({"path": out, "rows": len(rows)}, indent=2))
        return EXIT_OK
    if args.json:
        records = [{k: _json_value(v) for k, v in zip(header, row)} for row in rows]
        print(json.dumps(records, indent=2, allow_nan=False))
    else:
        sys.stdout.write(rows_to_csv(header, rows, settings.float_digits))
    return EXIT_OK


def cmd_nf(args: argparse.Namespace, settings: Settings) -> int:
    """Noise figure of one medium, with the matching closed form when one applies."""
    m = _medium_from_args(args, settings)
    d = _detection_from_args(args, settings)
    result = nf_general(m, d)
    breakdown = breakdown_general(m, d)
    report = {
        "medium": m.to_dict(),
        "detection": d.to_dict(),
        "general": result.to_dict(),
        "breakdown": breakdown.to_dict(),
    }
    closed = closed_form_for(m, d)
    if closed is not None:
        kind, closed_result, closed_breakdown = closed
        report["closed_form"] = {
            "configuration": kind,
            "result": closed_result.to_dict(),
            "breakdown": closed_breakdown.to_dict(),
            "difference": abs(closed_result.nf_linear - result.nf_linear),
        }

    if args.json:
        print(json.dumps(report, indent=2))
        return EXIT_OK

    digits = settings.float_digits
    print(f"S={m.S:.{digits}g} G={m.gain:.{digits}g} Ta={m.ta:.{digits}g} Tb={m.tb:.{digits}g} "
          f"eta_a={d.eta_a:.{digits}g} eta_b={d.eta_b:.{digits}g}")
    print(f"nf_linear: {result.nf_linear:.{digits}g}")
    print(f"nf_db: {result.nf_db:.{digits}g}")
    print(f"gains: probe={result.gain_probe:.{digits}g} conjugate={result.gain_conjugate:.{digits}g}")
    print(f"breakdown: snl={breakdown.snl_term:.{digits}g} mixing={breakdown.mixing_term:.{digits}g} "
          f"vacuum={breakdown.vacuum_term:.{digits}g}")
    if closed is not None:
        cf = report["closed_form"]
        print(f"closed_form ({cf['configuration']}): nf_linear={cf['result']['nf_linear']:.{digits}g} "
              f"difference={cf['difference']:.3e}")
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace, settings: Settings) -> int:
    """Forward noise figure over (Ta, G) plus the per-gain optimal transmission."""
    spec = SweepSpec(
        ta_range=tuple(args.ta_range or settings.sweep_ta_range),
        gain_range=tuple(args.gain_range or settings.sweep_gain_range),
        eta=settings.eta,
    )
    grid = sweep_forward(spec.ta_values, spec.gain_values, spec.eta)
    status = _emit_table(["ta", "gain", "nf_db"], grid, args.out, args, settings)
    if status != EXIT_OK:
        return status

    ta_star_out = args.ta_star_out
    if ta_star_out is None and args.out:
        root, ext = os.path.splitext(args.out)
        ta_star_out = f"{root}_ta_star{ext or '.csv'}"
    if ta_star_out is None:
        return EXIT_OK

    gains = [g for g in spec.gain_values if g > 1.0]
    if len(gains) < len(spec.gain_values):
        logger.info("Skipping G = 1 in the optimum table: no mixing, no optimum")
    optimum = optimum_table(gains, spec.eta)
    return _emit_table(["gain", "ta_star", "nf_star_db", "nf_unity_db"], optimum, ta_star_out, args, settings)


def cmd_compare(args: argparse.Namespace, settings: Settings) -> int:
    """Forward against reverse configuration at equal gain and transmission."""
    gain = args.gain if args.gain is not None else settings.compare_gain
    t_range = args.t_range or settings.compare_t_range
    rows = forward_reverse_table(gain, settings.eta, _linspace(t_range))
    for t, fwd, rev in rows:
        if rev < fwd - COMPARE_SLACK_DB:
            raise ModelCheckFailed(
                f"reverse configuration beats forward at t={t:.9g}: {rev:.9g} dB < {fwd:.9g} dB"
            )
    return _emit_table(["t", "nf_forward_db", "nf_reverse_db"], rows, args.out, args, settings)


def cmd_oracle(args: argparse.Namespace, settings: Settings) -> int:
    """Discrete-chain convergence report against the continuum model."""
    m = _medium_from_args(args, settings)
    d = _detection_from_args(args, settings)
    stages = args.stages or list(settings.oracle_stages)
    rows = convergence_table(m, d, stages, max_stages=settings.max_stages)
    ratios = [float("nan")] + error_ratios(rows)
    table = [(r.stages, r.nf, r.error, ratio) for r, ratio in zip(rows, ratios)]
    status = _emit_table(["stages", "nf", "error", "ratio"], table, args.out, args, settings)
    if status != EXIT_OK:
        return status

    final = rows[-1].error
    if final > settings.oracle_threshold:
        logger.error(f"Final-row error {final:.3e} exceeds threshold {settings.oracle_threshold:.1e}")
        return EXIT_THRESHOLD
    logger.info(f"Final-row error {final:.3e} within threshold {settings.oracle_threshold:.1e}")
    return EXIT_OK


def cmd_invert(args: argparse.Namespace, settings: Settings) -> int:
    """Invert a measurement CSV into intrinsic medium parameters."""
    records = read_measurements(args.input)
    if not records:
        logger.warning(f"No measurement rows in {args.input}")
    tb = args.tb if args.tb is not None else settings.tb
    results = invert_batch(
        records,
        settings.eta,
        tb_assumed=tb,
        tolerance=settings.inversion_tolerance,
        max_iterations=settings.inversion_max_iterations,
        unseeded_ratio=settings.unseeded_ratio,
    )
    failures = write_inversions(args.out, records, results, settings.eta,
                                background_db=args.background_db, digits=settings.float_digits,
                                with_powers=args.with_powers)
    summary = {
        "rows": len(records),
        "inverted": sum(isinstance(r, InversionResult) for r in results),
        "warnings": failures,
        "output": args.out,
    }
    if args.json:
        print(json.dumps(summary, indent=2))
    else:
        print(f"inverted {summary['inverted']}/{summary['rows']} rows, {failures} warnings -> {args.out}")
    return EXIT_OK


def cmd_optimum(args: argparse.Namespace, settings: Settings) -> int:
    """Optimal probe transmission for each requested intrinsic gain."""
    rows = optimum_table(args.gains, settings.eta)
    return _emit_table(["gain", "ta_star", "nf_star_db", "nf_unity_db"], rows, args.out, args, settings)


def cmd_synth(args: argparse.Namespace, settings: Settings) -> int:
    """Write a synthetic measurement CSV from a (G, Ta) grid."""
    points = []
    for gain in _linspace(args.gain_range):
        for ta in _linspace(args.ta_range):
            detuning = args.detuning_start + len(points) * args.detuning_step
            points.append((detuning, squeezing_from_gain(gain), ta))
    tb = args.tb if args.tb is not None else settings.tb
    records = synthesize_records(points, settings.eta, tb=tb, technical_excess_db=args.excess_db)
    # full precision so rows on the Ta = 1 boundary stay invertible
    write_measurements(args.out, records, digits=SYNTH_DIGITS)
    if args.json:
        print(json.dumps({"path": args.out, "rows": len(records)}, indent=2))
    return EXIT_OK


def _add_medium_flags(p: argparse.ArgumentParser) -> None:
    strength = p.add_mutually_exclusive_group(required=True)
    strength.add_argument("--s", type=float, help="Squeezing parameter S >= 0")
    strength.add_argument("--gain", type=float, help="Intrinsic gain G = cosh^2 S >= 1")
    p.add_argument("--ta", type=float, default=1.0, help="Probe transmission in (0, 1]")
    p.add_argument("--tb", type=float, default=None, help="Conjugate transmission in (0, 1]")
    p.add_argument("--eta-a", type=float, default=None, help="Probe detection transmission")
    p.add_argument("--eta-b", type=float, default=None, help="Conjugate detection transmission")


def _range_flag(p: argparse.ArgumentParser, name: str, help_text: str, default=None) -> None:
    p.add_argument(name, type=float, nargs=3, metavar=("MIN", "MAX", "COUNT"), default=default, help=help_text)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="twinbeam",
        description="Relative-intensity noise of four-wave-mixing twin beams with internal loss",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--config", help="Path to config.yaml (default: $TWINBEAM_CONFIG_PATH or ./config.yaml)")
    parser.add_argument("--log-level", help="Logging level (default: $LOG_LEVEL or config)")
    parser.add_argument("--json", action="store_true", help="Machine-readable JSON output")
    eta_parent = argparse.ArgumentParser(add_help=False)
    eta_parent.add_argument("--eta", type=float, default=None,
                            help="Balanced detection transmission (default: $TWINBEAM_ETA or config, 0.85)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("nf", parents=[eta_parent], help="Noise figure of one parameter set")
    _add_medium_flags(p)
    p.set_defaults(func=cmd_nf)

    p = sub.add_parser("sweep", parents=[eta_parent], help="Forward noise figure over a (Ta, G) grid")
    _range_flag(p, "--ta-range", "Probe transmission grid")
    _range_flag(p, "--gain-range", "Intrinsic gain grid")
    p.add_argument("--out", help="Grid CSV path (default: stdout)")
    p.add_argument("--ta-star-out", help="Optimal-transmission CSV path (default: <out>_ta_star.csv)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("compare", parents=[eta_parent], help="Forward against reverse configuration")
    p.add_argument("--gain", type=float, default=None, help="Intrinsic gain (default from config)")
    _range_flag(p, "--t-range", "Transmission grid")
    p.add_argument("--out", help="CSV path (default: stdout)")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("oracle", parents=[eta_parent], help="Discrete-chain convergence report")
    _add_medium_flags(p)
    p.add_argument("--stages", type=int, nargs="+", help="Ascending stage counts")
    p.add_argument("--threshold", type=float, default=None, help="Largest accepted final-row error")
    p.add_argument("--max-stages", type=int, default=None, help="Refuse stage counts above this")
    p.add_argument("--out", help="CSV path (default: stdout)")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("invert", parents=[eta_parent], help="Infer medium parameters from measured gains")
    p.add_argument("--in", dest="input", required=True, help="Measurement CSV")
    p.add_argument("--out", required=True, help="Output CSV")
    p.add_argument("--tb", type=float, default=None, help="Assumed conjugate transmission")
    p.add_argument("--background-db", type=float, default=None,
                   help="Background noise level in dB; adds a background-subtracted column")
    p.add_argument("--with-powers", action="store_true",
                   help="Append predicted noise variance and shot-noise level (var_pred, snl_pred)")
    p.set_defaults(func=cmd_invert)

    p = sub.add_parser("optimum", parents=[eta_parent], help="Optimal probe transmission per gain")
    p.add_argument("--gains", type=float, nargs="+", default=[2.0, 3.0, 5.0], help="Intrinsic gains > 1")
    p.add_argument("--out", help="CSV path (default: stdout)")
    p.set_defaults(func=cmd_optimum)

    p = sub.add_parser("synth", parents=[eta_parent], help="Write a synthetic measurement CSV")
    _range_flag(p, "--gain-range", "Intrinsic gain grid", default=[2.0, 5.0, 4])
    _range_flag(p, "--ta-range", "Probe transmission grid", default=[0.5, 1.0, 3])
    p.add_argument("--tb", type=float, default=None, help="Conjugate transmission")
    p.add_argument("--excess-db", type=float, default=None, help="Technical noise above the prediction")
    p.add_argument("--detuning-start", type=float, default=800.0, help="First detuning in MHz")
    p.add_argument("--detuning-step", type=float, default=10.0, help="Detuning step in MHz")
    p.add_argument("--out", required=True, help="Output CSV")
    p.set_defaults(func=cmd_synth)

    return parser


def _settings_from_args(args: argparse.Namespace) -> Settings:
    settings = load_settings(args.config)
    overrides = {"eta": args.eta}
    if args.command == "oracle":
        overrides.update(oracle_threshold=args.threshold, max_stages=args.max_stages)
    return with_overrides(settings, **overrides)


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    for name in ("ta_range", "gain_range", "t_range"):
        rng = getattr(args, name, None)
        if rng is not None:
            if not float(rng[2]).is_integer():
                parser.error(f"--{name.replace('_', '-')} COUNT must be an integer, got {rng[2]:g}")
            setattr(args, name, (rng[0], rng[1], int(rng[2])))

    try:
        settings = _settings_from_args(args)
        set_package_level(args.log_level or os.getenv("LOG_LEVEL") or settings.log_level)
        return args.func(args, settings)
    except ModelCheckFailed as e:
        logger.error(f"Model check failed: {e}")
        return EXIT_MODEL_CHECK
    except TwinBeamError as e:
        logger.error(str(e))
        return EXIT_USAGE
    except OSError as e:
        logger.error(f"I/O error: {e}")
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())

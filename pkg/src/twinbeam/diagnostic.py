"""Experimental diagnostic: invert measured beam gains to medium parameters.

Measured probe and conjugate gains (G_a, G_b) at one pump detuning fix the
first column of exp(A0). With the conjugate transmission assumed (1 by
default, far-detuned conjugate) the two gain equations determine the
squeezing parameter S and probe transmission Ta, from which the achievable
squeezing follows.
"""
import csv
import io
import math
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.optimize import brentq, least_squares

from .analytic import effective_gains, nf_forward_closed, nf_general
from .core import sinhc, sinhc_slope
from .errors import DomainError, InputFormatError, NoSolution, NotConverged, TwinBeamError
from .models import DetectionParams, InversionResult, MeasurementRecord, MediumParams, NoiseResult
from .utils import from_db, rows_to_csv, safe_write_file, setup_logging, to_db


logger = setup_logging(__name__)

DEFAULT_TOLERANCE = 1e-10
DEFAULT_MAX_ITERATIONS = 200
DEFAULT_UNSEEDED_RATIO = 1e-6
TRANSMISSION_SLACK = 1e-12
# Corrected powers below -30 dB are below what dB-rounded inputs resolve.
CORRECTED_POWER_FLOOR = 1e-3
LOG_TA_SCAN = (0.0, -0.125, -0.25, -0.5, -1.0, -2.0, -4.0, -8.0, -16.0, -32.0)

MEASUREMENT_COLUMNS = ("detuning_mhz", "gain_probe", "gain_conjugate")
OPTIONAL_MEASUREMENT_COLUMN = "nf_db"


def _amplitudes(S: float, log_ta: float, log_tb: float) -> Tuple[float, float]:
    """(alpha_1, alpha_2), the first column of exp(A0)."""
    mean = 0.25 * (log_ta + log_tb)
    half_diff = 0.25 * (log_ta - log_tb)
    xi = math.hypot(S, half_diff)
    scale = math.exp(mean)
    k = sinhc(xi)
    return scale * (math.cosh(xi) + k * half_diff), scale * k * S


def _amplitude_jacobian(S: float, log_ta: float, log_tb: float) -> np.ndarray:
    """d(alpha_1, alpha_2)/d(S, log Ta), smooth through xi = 0."""
    mean = 0.25 * (log_ta + log_tb)
    d = 0.25 * (log_ta - log_tb)
    xi = math.hypot(S, d)
    scale = math.exp(mean)
    k = sinhc(xi)
    g = sinhc_slope(xi)
    a1 = scale * (math.cosh(xi) + k * d)
    a2 = scale * k * S
    # xi * dxi/dS = S and xi * dxi/dlogTa = d/4
    return np.array([
        [scale * (k * S + g * S * d), 0.25 * a1 + scale * (0.25 * k * d + 0.25 * g * d * d + 0.25 * k)],
        [scale * (g * S * S + k), 0.25 * a2 + scale * 0.25 * g * d * S],
    ])


def _gain_residual(S: float, log_ta: float, log_tb: float, eta: float, rec: MeasurementRecord) -> float:
    a1, a2 = _amplitudes(S, log_ta, log_tb)
    return max(abs(eta * a1 * a1 - rec.gain_probe_meas), abs(eta * a2 * a2 - rec.gain_conjugate_meas))


def _result(S: float, ta: float, tb: float, residual: float, method: str, iterations: int) -> InversionResult:
    return InversionResult(
        S=S,
        g_intrinsic=math.cosh(S) ** 2,
        ta_inferred=ta,
        residual=residual,
        converged=True,
        tb_assumed=tb,
        method=method,
        iterations=iterations,
    )


def invert_gains(
    rec: MeasurementRecord,
    eta: float,
    tb_assumed: float = 1.0,
    tolerance: float = DEFAULT_TOLERANCE,
    max_iterations: int = DEFAULT_MAX_ITERATIONS,
    unseeded_ratio: float = DEFAULT_UNSEEDED_RATIO,
) -> InversionResult:
    """Solve the two effective-gain equations for (S, Ta).

    Args:
        rec: Measured gains at one detuning
        eta: Balanced detection transmission
        tb_assumed: Conjugate transmission held fixed during the solve
        tolerance: Largest accepted mismatch of either gain equation
        max_iterations: Iteration budget of each solver stage
        unseeded_ratio: G_b below this fraction of G_a is treated as no conjugate

    Returns:
        InversionResult with G = cosh^2 S

    Raises:
        DomainError: eta, tb_assumed or the probe gain are out of range
        NoSolution: no admissible (S >= 0, 0 < Ta <= 1) reproduces the gains
        NotConverged: the fallback search ran out of iterations
    """
    DetectionParams.balanced(eta)
    MediumParams(S=0.0, ta=1.0, tb=tb_assumed)
    if not rec.gain_probe_meas > 0.0:
        raise DomainError(f"probe gain must be > 0, got {rec.gain_probe_meas!r}")
    log_tb = math.log(tb_assumed)

    if rec.gain_conjugate_meas < unseeded_ratio * rec.gain_probe_meas:
        # No mixing: alpha_1^2 = Ta whatever Tb is.
        ta = rec.gain_probe_meas / eta
        if ta > 1.0 + TRANSMISSION_SLACK:
            raise NoSolution(
                f"probe gain {rec.gain_probe_meas:.6g} exceeds eta={eta:.3g} with no conjugate present"
            )
        ta = min(ta, 1.0)
        return _result(0.0, ta, tb_assumed, abs(eta * ta - rec.gain_probe_meas), "unseeded", 0)

    targets = np.array([math.sqrt(rec.gain_probe_meas / eta), math.sqrt(rec.gain_conjugate_meas / eta)])

    def residuals(x: np.ndarray) -> np.ndarray:
        return np.array(_amplitudes(x[0], x[1], log_tb)) - targets

    def jacobian(x: np.ndarray) -> np.ndarray:
        return _amplitude_jacobian(x[0], x[1], log_tb)

    s0 = math.acosh(math.sqrt(max(rec.gain_probe_meas / eta, 1.0)))
    fit = least_squares(
        residuals,
        np.array([s0, 0.0]),
        jac=jacobian,
        method="lm",
        xtol=1e-15,
        ftol=1e-15,
        gtol=1e-15,
        max_nfev=max_iterations,
    )
    S, log_ta = abs(float(fit.x[0])), float(fit.x[1])
    if log_ta <= TRANSMISSION_SLACK:
        log_ta = min(log_ta, 0.0)
        residual = _gain_residual(S, log_ta, log_tb, eta, rec)
        if residual <= tolerance:
            logger.debug(f"Levenberg-Marquardt inversion at {rec.detuning_mhz} MHz converged "
                         f"in {fit.nfev} evaluations")
            return _result(S, math.exp(log_ta), tb_assumed, residual, "levenberg-marquardt", int(fit.nfev))

    logger.warning(
        f"Levenberg-Marquardt inversion at {rec.detuning_mhz} MHz did not reach tolerance "
        f"(status {fit.status}); falling back to nested bisection"
    )
    S, log_ta, iterations = _invert_by_bisection(targets, log_tb, max_iterations)
    residual = _gain_residual(S, log_ta, log_tb, eta, rec)
    if residual > tolerance:
        raise NoSolution(f"gains ({rec.gain_probe_meas:.6g}, {rec.gain_conjugate_meas:.6g}) "
                         f"leave residual {residual:.3e} > {tolerance:.1e}")
    return _result(S, math.exp(log_ta), tb_assumed, residual, "bisection", iterations)


def _invert_by_bisection(targets: np.ndarray, log_tb: float, max_iterations: int) -> Tuple[float, float, int]:
    """Outer root in log Ta of alpha_1 - target, inner root in S of alpha_2 - target."""
    t1, t2 = float(targets[0]), float(targets[1])
    calls = 0

    def solve_s(log_ta: float) -> float:
        nonlocal calls
        hi = 1.0
        while _amplitudes(hi, log_ta, log_tb)[1] < t2:
            hi *= 2.0
            if hi > 64.0:
                raise NoSolution(f"conjugate amplitude {t2:.6g} unreachable at log Ta = {log_ta:.3g}")
        s, info = brentq(lambda s: _amplitudes(s, log_ta, log_tb)[1] - t2, 0.0, hi,
                         xtol=1e-15, maxiter=max_iterations, full_output=True, disp=False)
        calls += info.iterations
        if not info.converged:
            raise NotConverged(f"inner bisection stalled at log Ta = {log_ta:.6g}")
        return s

    def mismatch(log_ta: float) -> float:
        return _amplitudes(solve_s(log_ta), log_ta, log_tb)[0] - t1

    previous = LOG_TA_SCAN[0]
    f_previous = mismatch(previous)
    # Ta = 1 is the scan edge; rounding may leave its mismatch on either side.
    if abs(f_previous) <= TRANSMISSION_SLACK * max(1.0, t1):
        return solve_s(previous), previous, calls
    for point in LOG_TA_SCAN[1:]:
        f_point = mismatch(point)
        if f_point == 0.0 or (f_point < 0.0) != (f_previous < 0.0):
            log_ta, info = brentq(mismatch, point, previous, xtol=1e-15,
                                  maxiter=max_iterations, full_output=True, disp=False)
            if not info.converged:
                raise NotConverged("outer bisection over log Ta did not converge")
            return solve_s(log_ta), log_ta, calls + info.iterations
        previous, f_previous = point, f_point
    raise NoSolution(f"no probe transmission in (0, 1] reproduces amplitudes ({t1:.6g}, {t2:.6g})")


def invert_batch(
    records: Sequence[MeasurementRecord],
    eta: float,
    tb_assumed: float = 1.0,
    **solver_options,
) -> List[Union[InversionResult, TwinBeamError]]:
    """Invert each record independently; failures are returned in place, in input order."""
    results: List[Union[InversionResult, TwinBeamError]] = []
    for rec in records:
        try:
            results.append(invert_gains(rec, eta, tb_assumed=tb_assumed, **solver_options))
        except TwinBeamError as e:
            logger.warning(f"Inversion failed at {rec.detuning_mhz} MHz: {e}")
            results.append(e)
    logger.info(f"Inverted {sum(isinstance(r, InversionResult) for r in results)}/{len(records)} records")
    return results


def predict_squeezing(inv: InversionResult, eta: float) -> NoiseResult:
    """Squeezing the inferred medium should deliver with detection transmission eta."""
    if not inv.converged:
        raise DomainError("cannot predict squeezing from an unconverged inversion")
    if inv.tb_assumed == 1.0:
        result, _ = nf_forward_closed(inv.S, inv.ta_inferred, eta)
        return result
    return nf_general(inv.medium, DetectionParams.balanced(eta))


def excess_noise_db(nf_db_meas: float, nf_db_background: float) -> float:
    """Measured noise with the background's excess above shot noise removed.

    Both inputs are noise powers in dB relative to the shot-noise level. The
    background's excess (P_bg - 1) is subtracted from the measured linear
    power; uncorrelated noise powers add linearly.

    Raises:
        DomainError: the background accounts for all of the measured power, i.e.
            the corrected power is below CORRECTED_POWER_FLOOR
    """
    if not (math.isfinite(nf_db_meas) and math.isfinite(nf_db_background)):
        raise DomainError("noise levels must be finite")
    corrected = from_db(nf_db_meas) - (from_db(nf_db_background) - 1.0)
    if corrected < CORRECTED_POWER_FLOOR:
        raise DomainError(
            f"background {nf_db_background:.4g} dB leaves no power in measurement {nf_db_meas:.4g} dB"
        )
    return to_db(corrected)


def synthesize_records(
    points: Sequence[Tuple[float, float, float]],
    eta: float,
    tb: float = 1.0,
    technical_excess_db: Optional[float] = None,
) -> List[MeasurementRecord]:
    """Synthetic measurement rows from (detuning_mhz, S, Ta) generators.

    When technical_excess_db is given, nf_db_meas is the predicted squeezing
    plus that offset.
    """
    d = DetectionParams.balanced(eta)
    records = []
    for detuning, S, ta in points:
        m = MediumParams(S=S, ta=ta, tb=tb)
        ga, gb = effective_gains(m, d)
        nf_db = None
        if technical_excess_db is not None:
            nf_db = nf_general(m, d).nf_db + technical_excess_db
        records.append(MeasurementRecord(detuning, ga, gb, nf_db))
    return records


def read_measurements(path: str) -> List[MeasurementRecord]:
    """Load a measurement CSV.

    The header row must be `detuning_mhz,gain_probe,gain_conjugate` with an
    optional trailing `nf_db`; lines starting with `#` are ignored.

    Raises:
        InputFormatError: malformed header or row (with its line number)
    """
    with open(path, 'rb') as f:
        raw = f.read()
    try:
        text = raw.decode('utf-8')
    except UnicodeDecodeError as e:
        raise InputFormatError(f"not valid UTF-8: {e.reason}", line=raw.count(b"\n", 0, e.start) + 1) from e

    records: List[MeasurementRecord] = []
    header: Optional[List[str]] = None
    for line_no, row in enumerate(csv.reader(io.StringIO(text, newline='')), start=1):
        if not row or (row[0].lstrip().startswith('#')) or all(not c.strip() for c in row):
            continue
        cells = [c.strip() for c in row]
        if header is None:
            header = cells
            expected = list(MEASUREMENT_COLUMNS)
            if header not in (expected, expected + [OPTIONAL_MEASUREMENT_COLUMN]):
                raise InputFormatError(
                    f"expected header {','.join(expected)}[,{OPTIONAL_MEASUREMENT_COLUMN}], got {','.join(header)}",
                    line=line_no,
                )
            continue
        if len(cells) != len(header):
            raise InputFormatError(f"expected {len(header)} fields, got {len(cells)}", line=line_no)
        try:
            values = [None if c == "" or c.lower() == "nan" else float(c) for c in cells]
            if any(v is None for v in values[:3]):
                raise ValueError("empty required field")
            records.append(MeasurementRecord(*values))
        except (ValueError, DomainError) as e:
            raise InputFormatError(str(e), line=line_no) from e
    if header is None:
        raise InputFormatError("missing header row", line=1)
    logger.info(f"Loaded {len(records)} measurement records from {path}")
    return records


def format_measurements(records: Sequence[MeasurementRecord], digits: int = 9) -> str:
    """Measurement CSV text in the layout read_measurements accepts."""
    with_nf = any(r.nf_db_meas is not None for r in records)
    header = list(MEASUREMENT_COLUMNS) + ([OPTIONAL_MEASUREMENT_COLUMN] if with_nf else [])
    rows = []
    for r in records:
        row = [r.detuning_mhz, r.gain_probe_meas, r.gain_conjugate_meas]
        if with_nf:
            row.append(r.nf_db_meas if r.nf_db_meas is not None else float("nan"))
        rows.append(row)
    return rows_to_csv(header, rows, digits)


def inversion_rows(
    records: Sequence[MeasurementRecord],
    results: Sequence[Union[InversionResult, TwinBeamError]],
    eta: float,
    background_db: Optional[float] = None,
    with_powers: bool = False,
) -> Tuple[List[str], List[list], int]:
    """Output table of an inversion run.

    With with_powers the predicted noise variance and shot-noise level
    (var_pred, snl_pred, in units of the incident probe photon number) are
    appended, for comparison with measured noise powers.

    Returns:
        (header, rows, failures); failed rows carry NaN in every derived field
    """
    with_nf = any(r.nf_db_meas is not None for r in records)
    header = ["detuning_mhz", "G_intrinsic", "Ta", "residual", "nf_pred_db"]
    if with_nf:
        header += ["nf_meas_db", "excess_db"]
        if background_db is not None:
            header.append("nf_corrected_db")
    if with_powers:
        header += ["var_pred", "snl_pred"]
    nan = float("nan")
    rows = []
    failures = 0
    for rec, res in zip(records, results):
        if isinstance(res, InversionResult):
            prediction = predict_squeezing(res, eta)
            nf_pred, powers = prediction.nf_db, [prediction.variance_rel, prediction.snl_rel]
            row = [rec.detuning_mhz, res.g_intrinsic, res.ta_inferred, res.residual, nf_pred]
        else:
            failures += 1
            nf_pred, powers = nan, [nan, nan]
            row = [rec.detuning_mhz, nan, nan, nan, nan]
        if with_nf:
            meas = rec.nf_db_meas if rec.nf_db_meas is not None else nan
            row += [meas, meas - nf_pred]
            if background_db is not None:
                try:
                    row.append(excess_noise_db(meas, background_db))
                except DomainError as e:
                    logger.warning(f"Background subtraction failed at {rec.detuning_mhz} MHz: {e}")
                    row.append(nan)
        if with_powers:
            row += powers
        rows.append(row)
    return header, rows, failures


def write_measurements(path: str, records: Sequence[MeasurementRecord], digits: int = 9) -> None:
    """Write a measurement CSV.

    Raises:
        OSError: the file could not be written
    """
    if not safe_write_file(path, format_measurements(records, digits), logger):
        raise OSError(f"could not write measurements to {path}")


def write_inversions(
    path: str,
    records: Sequence[MeasurementRecord],
    results: Sequence[Union[InversionResult, TwinBeamError]],
    eta: float,
    background_db: Optional[float] = None,
    digits: int = 9,
    with_powers: bool = False,
) -> int:
    """Write the inversion table and return the number of failed rows.

    Raises:
        OSError: the file could not be written
    """
    header, rows, failures = inversion_rows(records, results, eta, background_db, with_powers)
    if not safe_write_file(path, rows_to_csv(header, rows, digits), logger):
        raise OSError(f"could not write inversions to {path}")
    return failures

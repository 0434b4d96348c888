"""Closed-form and continuum noise figures of four-wave-mixing twin beams."""
import math
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize_scalar

from .core import ClosedFormAux, SymMat2, a0_matrix, sym_exp, vacuum_sum
from .errors import DomainError
from .models import (
    DetectionParams,
    MediumParams,
    NoiseResult,
    VarianceBreakdown,
    squeezing_from_gain,
)
from .utils import setup_logging, to_db


logger = setup_logging(__name__)

OPTIMUM_GRID_POINTS = 100
OPTIMUM_GRID_MIN = 0.01
OPTIMUM_XTOL = 1e-9


def _require_gain(gain: float) -> None:
    if not math.isfinite(gain) or gain < 1.0:
        raise DomainError(f"intrinsic gain must be a finite value >= 1, got {gain!r}")


def nf_ideal(gain: float) -> NoiseResult:
    """Noise figure 1/(2G - 1) of lossless mixing with ideal detection."""
    _require_gain(gain)
    return NoiseResult.from_variance(1.0, gain, gain - 1.0)


def nf_post_loss(gain: float, d: DetectionParams) -> NoiseResult:
    """Lossless mixing followed by beamsplitter losses eta_a, eta_b."""
    _require_gain(gain)
    ea, eb = d.eta_a, d.eta_b
    nf = 1.0 + 2.0 * (gain - 1.0) * (gain * (ea - eb) ** 2 - eb ** 2) / (gain * ea + (gain - 1.0) * eb)
    return NoiseResult.from_nf(nf, ea * gain, eb * (gain - 1.0))


def effective_gains(m: MediumParams, d: DetectionParams) -> Tuple[float, float]:
    """Detected probe and conjugate powers relative to the incident probe.

    Args:
        m: Medium parameters
        d: Detection transmissions

    Returns:
        (G_a, G_b) = (eta_a alpha_1^2, eta_b alpha_2^2) from the first
        column of exp(A0)
    """
    e = sym_exp(a0_matrix(m))
    return d.eta_a * e.a11 ** 2, d.eta_b * e.a12 ** 2


def _general_parts(m: MediumParams, d: DetectionParams) -> Tuple[float, float, float, float]:
    """(input-mode variance, vacuum variance, G_a, G_b) of the continuum model."""
    a0 = a0_matrix(m)
    e = sym_exp(a0)
    e2 = sym_exp(a0.scaled(2.0))
    x = vacuum_sum(m)
    v = (e.a11, -e.a12)
    p = SymMat2.diag(d.eta_a, d.eta_b)
    detection_vacuum = SymMat2.diag((1.0 - d.eta_a) * d.eta_a, (1.0 - d.eta_b) * d.eta_b)
    input_var = p.sandwich(e2).quad(v)
    vacuum_var = p.sandwich(x).quad(v) + detection_vacuum.quad(v)
    return input_var, vacuum_var, d.eta_a * e.a11 ** 2, d.eta_b * e.a12 ** 2


def nf_general(m: MediumParams, d: DetectionParams) -> NoiseResult:
    """Noise figure of the continuum gain/loss model for any medium and detection."""
    input_var, vacuum_var, ga, gb = _general_parts(m, d)
    result = NoiseResult.from_variance(input_var + vacuum_var, ga, gb)
    logger.debug(f"nf_general {m} {d}: nf={result.nf_linear:.12g}")
    return result


def breakdown_general(m: MediumParams, d: DetectionParams) -> VarianceBreakdown:
    """Split the continuum noise figure by where the fluctuations enter.

    The vacuum term collects every injected vacuum mode (inside the medium
    and at detection); the mixing term is what the input probe and conjugate
    modes contribute beyond the shot-noise level.
    """
    input_var, vacuum_var, ga, gb = _general_parts(m, d)
    snl = ga + gb
    return VarianceBreakdown(snl_term=1.0, mixing_term=input_var / snl - 1.0, vacuum_term=vacuum_var / snl)


def closed_form_aux_arrays(S, log_ta, log_tb) -> Tuple[np.ndarray, np.ndarray]:
    """Vectorised (xi, chi); chi = 0 where xi = 0."""
    S = np.asarray(S, dtype=float)
    diff = np.asarray(log_ta, dtype=float) - np.asarray(log_tb, dtype=float)
    xi = 0.25 * np.sqrt(16.0 * S * S + diff * diff)
    safe_xi = np.where(xi > 0.0, xi, 1.0)
    ratio = np.clip(np.where(xi > 0.0, diff / (4.0 * safe_xi), 0.0), -1.0 + 1e-15, 1.0 - 1e-15)
    return xi, np.arctanh(ratio)


def _forward_terms(S, log_ta, xi, chi, eta):
    S = np.asarray(S, dtype=float)
    xi = np.asarray(xi, dtype=float)
    active = S > 0.0
    safe_xi = np.where(active, xi, 1.0)
    denom = np.cosh(2.0 * safe_xi + chi)
    mixing = -eta * 2.0 * S * np.sinh(safe_xi) ** 2 / (safe_xi * denom)
    vacuum = (
        eta * np.exp(0.5 * log_ta) * S * log_ta ** 2 * np.sinh(safe_xi) ** 4
        / (2.0 * safe_xi ** 3 * denom)
    )
    return np.where(active, mixing, 0.0), np.where(active, vacuum, 0.0)


def _reverse_terms(S, log_tb, xi, chi, eta):
    S = np.asarray(S, dtype=float)
    xi = np.asarray(xi, dtype=float)
    active = S > 0.0
    safe_xi = np.where(active, xi, 1.0)
    denom = np.cosh(2.0 * safe_xi + chi)
    mixing = -eta * 2.0 * S * np.cosh(safe_xi + chi) ** 2 / (safe_xi * denom)
    vacuum = (
        eta * np.exp(0.5 * log_tb) * S * (4.0 * S - log_tb * np.sinh(2.0 * safe_xi + chi)) ** 2
        / (8.0 * safe_xi ** 3 * denom)
    )
    # S -> 0 limit of this grouping is (-2 eta, +2 eta): the unsqueezed
    # conjugate vacuum is counted on both sides.
    return np.where(active, mixing, -2.0 * eta), np.where(active, vacuum, 2.0 * eta)


def nf_forward_closed(S: float, ta: float, eta: float) -> Tuple[NoiseResult, VarianceBreakdown]:
    """Closed-form noise figure with a loss-free conjugate (Tb = 1) and balanced detection.

    Args:
        S: Squeezing parameter (>= 0)
        ta: Probe transmission in (0, 1]
        eta: Detection transmission applied to both beams

    Returns:
        NoiseResult and its shot-noise / mixing / vacuum breakdown
    """
    m = MediumParams(S=S, ta=ta, tb=1.0)
    d = DetectionParams.balanced(eta)
    aux = ClosedFormAux.from_medium(m)
    mixing, vacuum = _forward_terms(m.S, math.log(m.ta), aux.xi, aux.chi, eta)
    breakdown = VarianceBreakdown(snl_term=1.0, mixing_term=float(mixing), vacuum_term=float(vacuum))
    ga, gb = effective_gains(m, d)
    return NoiseResult.from_nf(breakdown.total, ga, gb), breakdown


def nf_reverse_closed(S: float, tb: float, eta: float) -> Tuple[NoiseResult, VarianceBreakdown]:
    """Closed-form noise figure with a loss-free probe (Ta = 1) and balanced detection."""
    m = MediumParams(S=S, ta=1.0, tb=tb)
    d = DetectionParams.balanced(eta)
    aux = ClosedFormAux.from_medium(m)
    mixing, vacuum = _reverse_terms(m.S, math.log(m.tb), aux.xi, aux.chi, eta)
    breakdown = VarianceBreakdown(snl_term=1.0, mixing_term=float(mixing), vacuum_term=float(vacuum))
    ga, gb = effective_gains(m, d)
    return NoiseResult.from_nf(breakdown.total, ga, gb), breakdown


def closed_form_for(
    m: MediumParams, d: DetectionParams
) -> Optional[Tuple[str, NoiseResult, VarianceBreakdown]]:
    """Matching closed form for this configuration, if one applies.

    Returns:
        ("forward" | "reverse", result, breakdown), or None when detection is
        unbalanced or both beams are absorbed
    """
    if not d.is_balanced:
        return None
    if m.tb == 1.0:
        return ("forward",) + nf_forward_closed(m.S, m.ta, d.eta_a)
    if m.ta == 1.0:
        return ("reverse",) + nf_reverse_closed(m.S, m.tb, d.eta_a)
    return None


def forward_nf_grid(S, ta, eta: float) -> np.ndarray:
    """Forward closed-form noise figure (linear) broadcast over arrays of S and Ta."""
    S, ta = np.broadcast_arrays(np.asarray(S, dtype=float), np.asarray(ta, dtype=float))
    if np.any(S < 0.0) or np.any(ta <= 0.0) or np.any(ta > 1.0):
        raise DomainError("forward grid needs S >= 0 and Ta in (0, 1]")
    log_ta = np.log(ta)
    xi, chi = closed_form_aux_arrays(S, log_ta, 0.0)
    mixing, vacuum = _forward_terms(S, log_ta, xi, chi, eta)
    return 1.0 + mixing + vacuum


def reverse_nf_grid(S, tb, eta: float) -> np.ndarray:
    """Reverse closed-form noise figure (linear) broadcast over arrays of S and Tb."""
    S, tb = np.broadcast_arrays(np.asarray(S, dtype=float), np.asarray(tb, dtype=float))
    if np.any(S < 0.0) or np.any(tb <= 0.0) or np.any(tb > 1.0):
        raise DomainError("reverse grid needs S >= 0 and Tb in (0, 1]")
    log_tb = np.log(tb)
    xi, chi = closed_form_aux_arrays(S, 0.0, log_tb)
    mixing, vacuum = _reverse_terms(S, log_tb, xi, chi, eta)
    return 1.0 + mixing + vacuum


def optimal_probe_transmission(S: float, eta: float) -> Tuple[float, float]:
    """Probe transmission minimising the forward noise figure.

    A 100-point grid over (0, 1] brackets the minimum, then golden-section
    search refines it. When the grid minimum sits on an end of the grid a
    bounded search over the end cell is used instead.

    Args:
        S: Squeezing parameter (> 0)
        eta: Balanced detection transmission

    Returns:
        (Ta*, nf*) with nf* linear
    """
    if not math.isfinite(S) or S <= 0.0:
        raise DomainError(f"optimal transmission needs S > 0, got {S!r}")
    DetectionParams.balanced(eta)

    def objective(ta: float) -> float:
        return float(forward_nf_grid(S, ta, eta))

    grid = np.linspace(OPTIMUM_GRID_MIN, 1.0, OPTIMUM_GRID_POINTS)
    values = forward_nf_grid(S, grid, eta)
    idx = int(np.argmin(values))

    if 0 < idx < OPTIMUM_GRID_POINTS - 1:
        res = minimize_scalar(
            objective,
            bracket=(grid[idx - 1], grid[idx], grid[idx + 1]),
            method="golden",
            tol=OPTIMUM_XTOL,
        )
        ta_star, nf_star = float(res.x), float(res.fun)
    else:
        lo = grid[idx - 1] if idx > 0 else 1e-6
        hi = grid[idx + 1] if idx < OPTIMUM_GRID_POINTS - 1 else 1.0
        res = minimize_scalar(objective, bounds=(lo, hi), method="bounded", options={"xatol": OPTIMUM_XTOL})
        ta_star, nf_star = float(res.x), float(res.fun)

    # bounded search never samples its end points; Ta = 1 is one of them
    if nf_star > values[idx]:
        ta_star, nf_star = float(grid[idx]), float(values[idx])
    logger.debug(f"optimal Ta for S={S:.6g}, eta={eta:.3g}: Ta*={ta_star:.9f}, nf*={nf_star:.9g}")
    return ta_star, nf_star


def optimum_table(gains: Sequence[float], eta: float) -> List[Tuple[float, float, float, float]]:
    """(gain, Ta*, nf*_db, nf_db at Ta = 1) for each intrinsic gain > 1."""
    rows = []
    for gain in gains:
        S = squeezing_from_gain(gain)
        ta_star, nf_star = optimal_probe_transmission(S, eta)
        nf_unity = float(forward_nf_grid(S, 1.0, eta))
        rows.append((float(gain), ta_star, to_db(nf_star), to_db(nf_unity)))
    return rows


def sweep_forward(
    ta_values: Sequence[float], gain_values: Sequence[float], eta: float
) -> List[Tuple[float, float, float]]:
    """(ta, gain, nf_db) over the grid, ta-major, for the loss-free-conjugate case."""
    ta = np.asarray(ta_values, dtype=float)
    S = np.array([squeezing_from_gain(g) for g in gain_values])
    nf = forward_nf_grid(S[None, :], ta[:, None], eta)
    nf_db = 10.0 * np.log10(nf)
    logger.info(f"Evaluated forward sweep over {ta.size} x {S.size} grid points")
    return [
        (float(ta[i]), float(gain_values[j]), float(nf_db[i, j]))
        for i in range(ta.size)
        for j in range(S.size)
    ]


def forward_reverse_table(gain: float, eta: float, transmissions: Sequence[float]) -> List[Tuple[float, float, float]]:
    """(t, nf_forward_db, nf_reverse_db) at equal intrinsic gain and equal transmission."""
    S = squeezing_from_gain(gain)
    t = np.asarray(transmissions, dtype=float)
    fwd = 10.0 * np.log10(forward_nf_grid(S, t, eta))
    rev = 10.0 * np.log10(reverse_nf_grid(S, t, eta))
    return [(float(t[i]), float(fwd[i]), float(rev[i])) for i in range(t.size)]

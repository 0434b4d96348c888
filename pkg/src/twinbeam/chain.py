"""Discrete interleaved squeeze/loss chain.

The medium is cut into N stages, each an ideal two-mode squeeze by s = S/N
followed by beamsplitter loss with amplitude transmissions t_a, t_b. The
chain is evaluated exactly for finite N and serves as a brute-force oracle
for the continuum model in :mod:`twinbeam.analytic`.

Mode ordering of the coefficient sets is z = (a0, b0^dag, x_1, y_1^dag, ...,
x_N, y_N^dag); stage i injects the vacuum modes x_i and y_i.
"""
import math
from dataclasses import dataclass
from typing import List, NamedTuple, Sequence, Tuple

import numpy as np

from .analytic import nf_general
from .errors import DomainError, ResourceError
from .models import DetectionParams, MediumParams, NoiseResult
from .utils import setup_logging


logger = setup_logging(__name__)

DEFAULT_MAX_STAGES = 10_000_000


@dataclass(frozen=True)
class ChainConfig:
    """Medium discretised into `stages` interleaved squeeze/loss steps."""

    medium: MediumParams
    stages: int

    def __post_init__(self):
        if isinstance(self.stages, bool) or not isinstance(self.stages, int) or self.stages < 1:
            raise DomainError(f"stages must be a positive integer, got {self.stages!r}")

    @property
    def s(self) -> float:
        return self.medium.S / self.stages

    @property
    def t_a(self) -> float:
        return math.exp(math.log(self.medium.ta) / (2 * self.stages))

    @property
    def t_b(self) -> float:
        return math.exp(math.log(self.medium.tb) / (2 * self.stages))

    def loss_fractions(self) -> Tuple[float, float]:
        """(1 - t_a^2, 1 - t_b^2), accurate for large N."""
        return (
            -math.expm1(math.log(self.medium.ta) / self.stages),
            -math.expm1(math.log(self.medium.tb) / self.stages),
        )


@dataclass(frozen=True)
class CoefficientSet:
    """Expansion coefficients of a_N (alpha) and b_N^dag (beta) over the modes z."""

    alpha: np.ndarray
    beta: np.ndarray

    @property
    def stages(self) -> int:
        return (len(self.alpha) - 2) // 2


class CommutatorSums(NamedTuple):
    """Signed sums fixed by the canonical commutators."""

    alpha: float   # [a, a^dag] = 1
    beta: float    # [b^dag, b] = -1
    cross: float   # [a, b] = 0


class ConvergenceRow(NamedTuple):
    stages: int
    nf: float
    error: float


def _require_stage_budget(cfg: ChainConfig, max_stages: int) -> None:
    if cfg.stages > max_stages:
        raise ResourceError(f"{cfg.stages} stages exceeds the configured maximum of {max_stages}")


def stage_matrix(cfg: ChainConfig) -> np.ndarray:
    """One squeeze-then-loss step acting on (a, b^dag)."""
    s = cfg.s
    ta, tb = cfg.t_a, cfg.t_b
    return np.array([
        [ta * math.cosh(s), ta * math.sinh(s)],
        [tb * math.sinh(s), tb * math.cosh(s)],
    ])


def chain_coefficients(cfg: ChainConfig, max_stages: int = DEFAULT_MAX_STAGES) -> CoefficientSet:
    """All 2N+2 expansion coefficients of the chain output.

    Args:
        cfg: Chain configuration
        max_stages: Refuse configurations with more stages than this

    Returns:
        CoefficientSet in the mode order (a0, b0^dag, x_1, y_1^dag, ...)

    Raises:
        ResourceError: cfg.stages exceeds max_stages
    """
    _require_stage_budget(cfg, max_stages)
    n = cfg.stages
    a = stage_matrix(cfg)
    ca, cb = (math.sqrt(f) for f in cfg.loss_fractions())

    alpha = np.empty(2 * n + 2)
    beta = np.empty(2 * n + 2)
    power = np.eye(2)
    # stage i sees A^(N-i); walk i = N .. 1 growing the running product
    for i in range(n, 0, -1):
        alpha[2 * i] = power[0, 0] * ca
        beta[2 * i] = power[1, 0] * ca
        alpha[2 * i + 1] = power[0, 1] * cb
        beta[2 * i + 1] = power[1, 1] * cb
        power = a @ power
    alpha[0], alpha[1] = power[0, 0], power[0, 1]
    beta[0], beta[1] = power[1, 0], power[1, 1]
    return CoefficientSet(alpha=alpha, beta=beta)


def commutator_check(coeffs: CoefficientSet) -> CommutatorSums:
    """Signed sums over the modes; creation-operator modes carry sign -1."""
    signs = np.where(np.arange(len(coeffs.alpha)) % 2 == 0, 1.0, -1.0)
    return CommutatorSums(
        alpha=float(np.sum(signs * coeffs.alpha ** 2)),
        beta=float(np.sum(signs * coeffs.beta ** 2)),
        cross=float(np.sum(signs * coeffs.alpha * coeffs.beta)),
    )


def nf_from_coefficients(coeffs: CoefficientSet, d: DetectionParams) -> NoiseResult:
    """Noise figure from an explicit coefficient set plus the detection stage."""
    a1, b1 = coeffs.alpha[0], coeffs.beta[0]
    terms = (d.eta_a * a1 * coeffs.alpha - d.eta_b * b1 * coeffs.beta) ** 2
    variance = math.fsum(terms) + d.eta_a * (1.0 - d.eta_a) * a1 ** 2 + d.eta_b * (1.0 - d.eta_b) * b1 ** 2
    return NoiseResult.from_variance(variance, d.eta_a * a1 ** 2, d.eta_b * b1 ** 2)


def nf_discrete(
    cfg: ChainConfig,
    d: DetectionParams,
    max_stages: int = DEFAULT_MAX_STAGES,
) -> NoiseResult:
    """Noise figure of the N-stage chain followed by detection loss.

    Vacuum contributions are streamed stage by stage with compensated
    summation, so memory is constant in N.

    Raises:
        ResourceError: cfg.stages exceeds max_stages
    """
    _require_stage_budget(cfg, max_stages)
    a = stage_matrix(cfg)
    power_n = np.linalg.matrix_power(a, cfg.stages)
    a1, b1 = float(power_n[0, 0]), float(power_n[1, 0])
    w0, w1 = d.eta_a * a1, -d.eta_b * b1

    # probe and conjugate input modes: |w^T A^N|^2
    r_n = np.array([w0, w1]) @ power_n
    variance = float(r_n[0] ** 2 + r_n[1] ** 2)
    variance += d.eta_a * (1.0 - d.eta_a) * a1 ** 2 + d.eta_b * (1.0 - d.eta_b) * b1 ** 2

    loss_a, loss_b = cfg.loss_fractions()
    if loss_a > 0.0 or loss_b > 0.0:
        variance += _stream_vacuum(a, w0, w1, loss_a, loss_b, cfg.stages)

    result = NoiseResult.from_variance(variance, d.eta_a * a1 ** 2, d.eta_b * b1 ** 2)
    logger.debug(f"nf_discrete N={cfg.stages}: nf={result.nf_linear:.12g}")
    return result


def _stream_vacuum(a: np.ndarray, r0: float, r1: float, loss_a: float, loss_b: float, n: int) -> float:
    """Kahan sum of loss_a*(r A^k e1)^2 + loss_b*(r A^k e2)^2 for k = 0 .. n-1."""
    a00, a01, a10, a11 = float(a[0, 0]), float(a[0, 1]), float(a[1, 0]), float(a[1, 1])
    total = 0.0
    carry = 0.0
    for _ in range(n):
        term = loss_a * r0 * r0 + loss_b * r1 * r1
        y = term - carry
        t = total + y
        carry = (t - total) - y
        total = t
        r0, r1 = r0 * a00 + r1 * a10, r0 * a01 + r1 * a11
    return total


def convergence_table(
    m: MediumParams,
    d: DetectionParams,
    stage_counts: Sequence[int],
    max_stages: int = DEFAULT_MAX_STAGES,
) -> List[ConvergenceRow]:
    """Discrete-chain noise figure against the continuum value for each N.

    Args:
        m: Medium parameters
        d: Detection transmissions
        stage_counts: Ascending stage counts

    Returns:
        One ConvergenceRow(stages, nf, |nf - nf_general|) per N
    """
    counts = list(stage_counts)
    if not counts:
        raise DomainError("stage_counts must not be empty")
    if any(b <= a for a, b in zip(counts, counts[1:])):
        raise DomainError(f"stage_counts must be strictly ascending, got {counts}")

    reference = nf_general(m, d).nf_linear
    rows = []
    for n in counts:
        nf = nf_discrete(ChainConfig(medium=m, stages=int(n)), d, max_stages=max_stages).nf_linear
        rows.append(ConvergenceRow(stages=int(n), nf=nf, error=abs(nf - reference)))
        logger.info(f"N={n}: nf={nf:.12g}, |error|={abs(nf - reference):.3e}")
    return rows


def error_ratios(rows: Sequence[ConvergenceRow]) -> List[float]:
    """error[k+1] / error[k] between consecutive rows (NaN where error[k] is 0)."""
    return [
        (b.error / a.error) if a.error > 0.0 else float("nan")
        for a, b in zip(rows, rows[1:])
    ]

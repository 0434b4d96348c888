"""Twin-beam data models."""
from dataclasses import dataclass, asdict
from typing import Optional
import json
import math

from .errors import DomainError


def _require_finite(name: str, value: float) -> None:
    if not math.isfinite(value):
        raise DomainError(f"{name} must be finite, got {value!r}")


def _require_transmission(name: str, value: float) -> None:
    _require_finite(name, value)
    if not 0.0 < value <= 1.0:
        raise DomainError(f"{name} must lie in (0, 1], got {value!r}")


@dataclass(frozen=True)
class MediumParams:
    """Intrinsic squeezing and intensity transmissions of the vapor medium.

    S is the squeezing parameter accumulated over the medium in the absence
    of loss; ta and tb are the probe and conjugate transmissions in the
    absence of mixing.
    """

    S: float
    ta: float = 1.0
    tb: float = 1.0

    def __post_init__(self):
        _require_finite("S", self.S)
        if self.S < 0.0:
            raise DomainError(f"S must be >= 0, got {self.S!r}")
        _require_transmission("ta", self.ta)
        _require_transmission("tb", self.tb)

    @property
    def gain(self) -> float:
        """Intrinsic mixing gain G = cosh^2 S."""
        return math.cosh(self.S) ** 2

    @property
    def lossless(self) -> bool:
        return self.ta == 1.0 and self.tb == 1.0

    @classmethod
    def from_gain(cls, gain: float, ta: float = 1.0, tb: float = 1.0) -> 'MediumParams':
        """Create MediumParams from the intrinsic gain G >= 1."""
        return cls(S=squeezing_from_gain(gain), ta=ta, tb=tb)

    def to_dict(self) -> dict:
        """Convert to dictionary."""
        return asdict(self)


@dataclass(frozen=True)
class DetectionParams:
    """Post-medium intensity transmissions (optics and photodiode efficiency)."""

    eta_a: float = 0.85
    eta_b: float = 0.85

    def __post_init__(self):
        _require_transmission("eta_a", self.eta_a)
        _require_transmission("eta_b", self.eta_b)

    @classmethod
    def balanced(cls, eta: float) -> 'DetectionParams':
        return cls(eta_a=eta, eta_b=eta)

    @property
    def is_balanced(self) -> bool:
        return self.eta_a == self.eta_b

    def to_dict(self) -> dict:
        """Convert to dictionary."""
        return asdict(self)


@dataclass(frozen=True)
class NoiseResult:
    """Relative-intensity noise of the detected twin beams.

    variance_rel and snl_rel are in units of the incident probe photon
    number <N0>; gains are detected powers relative to the incident probe.
    """

    nf_linear: float
    nf_db: float
    variance_rel: float
    snl_rel: float
    gain_probe: float
    gain_conjugate: float

    @classmethod
    def from_variance(
        cls,
        variance_rel: float,
        gain_probe: float,
        gain_conjugate: float,
    ) -> 'NoiseResult':
        """Build a result whose shot-noise level is the total detected power."""
        snl_rel = gain_probe + gain_conjugate
        if not snl_rel > 0.0:
            raise DomainError(f"shot-noise level must be positive, got {snl_rel!r}")
        nf_linear = variance_rel / snl_rel
        return cls(
            nf_linear=nf_linear,
            nf_db=10.0 * math.log10(nf_linear),
            variance_rel=variance_rel,
            snl_rel=snl_rel,
            gain_probe=gain_probe,
            gain_conjugate=gain_conjugate,
        )

    @classmethod
    def from_nf(cls, nf_linear: float, gain_probe: float, gain_conjugate: float) -> 'NoiseResult':
        """Build a result from a noise figure and the detected gains."""
        return cls.from_variance(nf_linear * (gain_probe + gain_conjugate), gain_probe, gain_conjugate)

    def to_dict(self) -> dict:
        """Convert to dictionary."""
        return asdict(self)

    def to_json(self) -> str:
        """Convert to JSON string."""
        return json.dumps(self.to_dict(), indent=2)


@dataclass(frozen=True)
class VarianceBreakdown:
    """Noise figure split into shot-noise, mixing and injected-vacuum terms."""

    snl_term: float
    mixing_term: float
    vacuum_term: float

    @property
    def total(self) -> float:
        return self.snl_term + self.mixing_term + self.vacuum_term

    def to_dict(self) -> dict:
        """Convert to dictionary."""
        return asdict(self)


@dataclass(frozen=True)
class MeasurementRecord:
    """Measured effective gains (and optionally noise) at one pump detuning."""

    detuning_mhz: float
    gain_probe_meas: float
    gain_conjugate_meas: float
    nf_db_meas: Optional[float] = None

    def __post_init__(self):
        for name in ("detuning_mhz", "gain_probe_meas", "gain_conjugate_meas"):
            _require_finite(name, getattr(self, name))
        if self.gain_probe_meas < 0.0 or self.gain_conjugate_meas < 0.0:
            raise DomainError(
                f"measured gains must be >= 0, got ({self.gain_probe_meas!r}, {self.gain_conjugate_meas!r})"
            )
        if self.nf_db_meas is not None:
            _require_finite("nf_db_meas", self.nf_db_meas)

    def to_dict(self) -> dict:
        """Convert to dictionary."""
        return asdict(self)


@dataclass(frozen=True)
class InversionResult:
    """Intrinsic medium parameters recovered from one measurement record."""

    S: float
    g_intrinsic: float
    ta_inferred: float
    residual: float
    converged: bool
    tb_assumed: float = 1.0
    method: str = "levenberg-marquardt"
    iterations: int = 0

    @property
    def medium(self) -> MediumParams:
        return MediumParams(S=self.S, ta=self.ta_inferred, tb=self.tb_assumed)

    def to_dict(self) -> dict:
        """Convert to dictionary."""
        return asdict(self)

    def to_json(self) -> str:
        """Convert to JSON string."""
        return json.dumps(self.to_dict(), indent=2)


def squeezing_from_gain(gain: float) -> float:
    """Squeezing parameter S = arccosh(sqrt(G)) for intrinsic gain G >= 1."""
    _require_finite("gain", gain)
    if gain < 1.0:
        raise DomainError(f"intrinsic gain must be >= 1, got {gain!r}")
    return math.acosh(math.sqrt(gain))

"""Twin-beam relative-intensity noise with loss inside the mixing medium."""

__version__ = "1.0.0"

from .analytic import nf_forward_closed, nf_general, nf_reverse_closed, optimal_probe_transmission
from .chain import ChainConfig, nf_discrete
from .diagnostic import invert_gains, predict_squeezing
from .models import DetectionParams, InversionResult, MeasurementRecord, MediumParams, NoiseResult
from .utils import setup_logging

__all__ = [
    'ChainConfig',
    'DetectionParams',
    'InversionResult',
    'MeasurementRecord',
    'MediumParams',
    'NoiseResult',
    'invert_gains',
    'nf_discrete',
    'nf_forward_closed',
    'nf_general',
    'nf_reverse_closed',
    'optimal_probe_transmission',
    'predict_squeezing',
    'setup_logging',
]

"""Time encoding of periodic FRI signals and their recovery from trigger times."""

__version__ = "0.1.0"

from .exceptions import *  # noqa: F401,F403
from .genfri import GenfriOptions, genfri_tem
from .reconstruction import (
    ForwardSystem,
    ReconstructionResult,
    build_gct,
    build_gif,
    decode,
    forward_system,
    nmse_shifts,
    prony_shifts,
    recover_amplitudes,
    recover_fourier,
    stack_channels,
)
from .signal_model import (
    BSpline,
    Dirac,
    FourierVector,
    FriSignal,
    SamplingKernel,
    TabulatedSpectrum,
    filtered_signal,
    fourier_coefficients,
)
from .tem import CtemConfig, IftemConfig, TriggerSet, add_jitter, encode, multichannel_encode

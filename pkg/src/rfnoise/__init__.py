"""Behavioural modelling of a nonlinear amplifier from uniform-noise captures.

Stages: :mod:`siggen` (stimuli), :mod:`dutsim` (synthetic device),
:mod:`testbench` (acquisition and files), :mod:`pipeline` (alignment,
normalisation, windows), :mod:`neuralnet` (from-scratch networks),
:mod:`metrics` (spectral gain and OIP3) and :mod:`cli` (orchestration).
"""

from .dutsim import DutSpec, analytic_oip3_dbm, analytic_small_signal_gain_db, simulate
from .errors import RFNoiseError
from .kernels import BACKEND
from .siggen import BandSpec, ToneSpec, Waveform, amplitude_to_dbm, dbm_to_amplitude
from .testbench import CaptureMeta, CapturePair, DatasetPlan

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "BandSpec", "CaptureMeta", "CapturePair", "DatasetPlan", "DutSpec", "RFNoiseError",
    "ToneSpec", "Waveform", "amplitude_to_dbm", "analytic_oip3_dbm", "analytic_small_signal_gain_db",
    "dbm_to_amplitude", "simulate",
]

import numpy as np
import pytest

from rfnoise.dutsim import DutSpec
from rfnoise.siggen import Waveform


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def noiseless_dut():
    return DutSpec.pw210_like(noise_sigma_v=0.0)


def wf(samples, fs=1.0):
    return Waveform(np.asarray(samples, dtype=float), fs)


# criterion number -> (name, passed, detail); filled by test_acceptance.py
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        name, ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n} {name}: {'PASS' if ok else 'FAIL'} ({detail})")

import json
from pathlib import Path

import numpy as np
import pytest

from tempus_fri.experiments import build_signal, parse_config, x2_signal
from tempus_fri.signal_model import SamplingKernel, filtered_signal

ROOT = Path(__file__).resolve().parents[1]
CONFIGS = ROOT / "configs"

# one line per acceptance criterion, printed at the end of the session
ACCEPTANCE_LINES = []


def load_config(name):
    return parse_config(json.loads((CONFIGS / name).read_text()))


@pytest.fixture(scope="session")
def x2():
    return x2_signal()


@pytest.fixture(scope="session")
def x1():
    return build_signal(load_config("x1_single.json"))


@pytest.fixture(scope="session")
def y2(x2):
    return filtered_signal(x2, SamplingKernel(3, 1.0))


@pytest.fixture(scope="session")
def y1(x1):
    return filtered_signal(x1, SamplingKernel(5, 1.0))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def acceptance():
    def record(label, ok, detail=""):
        ACCEPTANCE_LINES.append(f"{'PASS' if ok else 'FAIL'}  {label}: {detail}")
        print(ACCEPTANCE_LINES[-1])
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)

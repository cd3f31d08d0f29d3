import numpy as np
import pytest

from gwdc.dictionary import Dictionary, DictionaryConfig


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def small_dict():
    return Dictionary(DictionaryConfig(block_size=32, trig_size=64))


@pytest.fixture(scope="session")
def dict256():
    return Dictionary(DictionaryConfig.standard(256))


def chirp_signal(n=65536, fs=8000):
    """Three amplitude-modulated linear chirps, peak well inside [-1, 1]."""
    t = np.arange(n) / fs
    x = (0.25 * np.sin(2 * np.pi * (220 * t + 15 * t ** 2))
         + 0.2 * np.sin(2 * np.pi * (660 * t + 25 * t ** 2) + 0.3)
         + 0.15 * np.sin(2 * np.pi * (1500 * t - 40 * t ** 2) + 1.1))
    return x * (0.6 + 0.4 * np.sin(2 * np.pi * 0.1 * t))


_ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def acceptance(request):
    """Record one pass/fail line for an acceptance criterion and assert it."""
    lines = request.config.stash.setdefault(_ACCEPTANCE, [])

    def record(number, title, ok, detail):
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:>2}: {title} ({detail})"
        lines.append((number, line))
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)

import struct

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from packscope.corpus import default_scenario, drift_scenario, generate_dataset, to_dataset

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def patch_u32(data: bytes, offset: int, value: int) -> bytes:
    b = bytearray(data)
    struct.pack_into("<I", b, offset, value)
    return bytes(b)


def opt_offset(data: bytes) -> int:
    (e_lfanew,) = struct.unpack_from("<I", data, 0x3C)
    return e_lfanew + 24


@pytest.fixture(scope="session")
def small_corpus():
    """200 plain + 200 packed samples from the default scenario."""
    return generate_dataset(default_scenario(200)[0], 5)


@pytest.fixture(scope="session")
def small_data(small_corpus):
    return to_dataset(small_corpus)


@pytest.fixture(scope="session")
def drift_data():
    return {s.name: to_dataset(generate_dataset(s, 11)) for s in drift_scenario()}


@pytest.fixture
def blobs():
    """Two well separated Gaussian blobs, labels 0/1."""
    rng = np.random.default_rng(0)
    a = rng.normal(0, 1, (60, 4))
    b = rng.normal(4, 1, (60, 4))
    return np.vstack([a, b]), np.array([0] * 60 + [1] * 60)


# one pass/fail line per acceptance criterion at the end of the run
_CRITERIA = pytest.StashKey[dict]()


def pytest_configure(config):
    config.stash[_CRITERIA] = {}


@pytest.hookimpl(wrapper=True)
def pytest_runtest_makereport(item, call):
    rep = yield
    mark = item.get_closest_marker("acceptance")
    if mark is not None and (rep.when == "call" or not rep.passed):
        n, title = mark.args
        seen = item.config.stash[_CRITERIA]
        seen[n] = (title, seen.get(n, (title, True))[1] and rep.passed)
    return rep


def pytest_terminal_summary(terminalreporter, config):
    seen = config.stash[_CRITERIA]
    if not seen:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(seen):
        title, ok = seen[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {title}")

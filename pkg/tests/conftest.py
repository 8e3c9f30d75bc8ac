import math

import numpy as np
import pytest

from thinfilm.es_model import DEFAULT_PRESET, preset_from_physical
from thinfilm.spectral_grid import GridSpec, RealField
from thinfilm.stepper import ModelConfig

PRESET = preset_from_physical(DEFAULT_PRESET)


def preset_model(k: int, N: int = 32, dt: float = 0.01, **changes) -> ModelConfig:
    kw = dict(grid=GridSpec.square(N), epsilon_sq=PRESET.epsilon_sq, gamma=PRESET.gamma, dt=dt)
    kw.update(changes)
    return ModelConfig(PRESET.for_variant(k), **kw)


def random_field(grid: GridSpec, rng: np.random.Generator, smooth: bool = True) -> RealField:
    """Mean-free random field; ``smooth`` keeps only low modes."""
    v = rng.standard_normal(grid.shape)
    if smooth:
        c = np.fft.rfft2(v)
        c[np.sqrt(grid.k_sq) > grid.N1 / 4] = 0.0
        v = np.fft.irfft2(c, s=grid.shape)
    return RealField(grid, v - v.mean())


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def grid64():
    return GridSpec.square(64)


@pytest.fixture
def two_pi():
    return 2 * math.pi


# per-criterion summary for the acceptance suite
_CRITERIA: dict[int, dict] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or report.when != "call" and not (report.when == "setup" and report.failed):
        return
    number, title = marker.args
    entry = _CRITERIA.setdefault(number, {"title": title, "passed": True, "details": []})
    entry["passed"] &= report.passed
    entry["details"].extend(v for k, v in item.user_properties if k == "measured")


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        entry = _CRITERIA[number]
        status = "PASS" if entry["passed"] else "FAIL"
        detail = "; ".join(entry["details"])
        terminalreporter.write_line(f"criterion {number:2d} {status}: {entry['title']}" + (f" [{detail}]" if detail else ""))


@pytest.fixture
def measured(request):
    """Attach a measured value to the acceptance summary line."""

    def add(text: str) -> None:
        request.node.user_properties.append(("measured", text))

    return add

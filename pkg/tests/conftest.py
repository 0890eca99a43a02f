import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from cylbuckle.grid import DomainSpec, from_spectral, project_zero_mean_arr

settings.register_profile(
    "invariants",
    max_examples=100,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
    derandomize=True,
)
settings.load_profile("invariants")

SMALL = DomainSpec(20.0, 20.0, 32, 32)


def smooth_field(spec: DomainSpec, seed: int, amplitude: float = 1.0, modes: int = 8) -> np.ndarray:
    """Zero-mean random field built from the lowest `modes` x `modes` cosine/Fourier modes."""
    rng = np.random.default_rng(seed)
    c = np.zeros((spec.nx + 1, spec.ny // 2 + 1), dtype=complex)
    c[:modes, :modes] = rng.standard_normal((modes, modes)) + 1j * rng.standard_normal((modes, modes))
    c[:, 0] = c[:, 0].real
    v = from_spectral(c, spec.ny)
    v = project_zero_mean_arr(v, spec)
    return amplitude * v / np.abs(v).max()


def rough_field(spec: DomainSpec, seed: int) -> np.ndarray:
    return np.random.default_rng(seed).standard_normal(spec.shape)


@pytest.fixture
def small_spec():
    return SMALL


# PASS/FAIL lines appended by test_acceptance.py, echoed after the run.
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)

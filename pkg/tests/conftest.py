"""Shared fixtures and the acceptance-criteria reporter.

Small geometries are deliberate: the covert constraint set has 2*K*L
halfspaces, and those must stay well below N2 or random draws produce
infeasible instances.  Every toy fixture here satisfies 2*K*L < N2.
"""

import hashlib
import pickle
from pathlib import Path

import numpy as np
import pytest

from irslat.outerloop import BcdOptions, bcd_solve
from irslat.scenario import SystemConfig, build_channel_set

_CACHE_DIR = Path(__file__).parent / "_acceptance_cache"
_SRC_DIR = Path(__file__).parent.parent / "src" / "irslat"


@pytest.fixture(scope="session")
def toy_cfg():
    # 2 devices, 1 eavesdropper: 2*K*L = 4 < N2 = 8
    return SystemConfig().with_counts(
        m1=4, m2=2, n1=8, n2=8, num_iotds=2, num_users=1
    )


@pytest.fixture(scope="session")
def toy_channels(toy_cfg):
    return build_channel_set(toy_cfg, rng_seed=3)


@pytest.fixture(scope="session")
def toy_solution(toy_cfg, toy_channels):
    return bcd_solve(toy_cfg, toy_channels, BcdOptions(seed=3))


@pytest.fixture()
def rng():
    return np.random.default_rng(0)


# --- acceptance reporting -------------------------------------------------

_criterion_lines: dict[int, str] = {}


def record_criterion(number: int, passed: bool, detail: str) -> None:
    verdict = "PASS" if passed else "FAIL"
    _criterion_lines[number] = f"criterion {number}: {verdict}  {detail}"


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _criterion_lines:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criterion_lines):
        terminalreporter.write_line(_criterion_lines[number])


# --- ensemble cache -------------------------------------------------------

def _source_digest() -> str:
    h = hashlib.sha256()
    for path in sorted(_SRC_DIR.glob("*.py")):
        h.update(path.read_bytes())
    return h.hexdigest()[:16]


def ensemble_cache(name: str, builder):
    """Memoize expensive solver ensembles on disk, keyed by the source tree.

    Any edit to the package invalidates every cached ensemble, so stale
    results can never leak into the acceptance run.
    """
    _CACHE_DIR.mkdir(exist_ok=True)
    path = _CACHE_DIR / f"{name}-{_source_digest()}.pkl"
    if path.exists():
        with open(path, "rb") as fh:
            return pickle.load(fh)
    value = builder()
    with open(path, "wb") as fh:
        pickle.dump(value, fh)
    return value

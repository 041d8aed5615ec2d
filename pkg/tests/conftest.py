import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

import acceptance_helpers as helpers  # noqa: E402


def _two_jobs(fn, args):
    """Run two independent jobs on separate processes when possible."""
    try:
        with ProcessPoolExecutor(max_workers=2) as pool:
            return list(pool.map(fn, args))
    except (OSError, RuntimeError):
        return [fn(a) for a in args]


@pytest.fixture(scope="session")
def mf_sweeps_1d():
    rl, lr = _two_jobs(helpers.mf_sweep_1d, ("rl", "lr"))
    return {"rl": rl, "lr": lr}


@pytest.fixture(scope="session")
def mf_sweeps_2d():
    rl, lr = _two_jobs(helpers.mf_sweep_2d, ("rl", "lr"))
    return {"rl": rl, "lr": lr}


@pytest.fixture(scope="session")
def mpo_chi11_sweeps():
    rl, lr = _two_jobs(helpers.mpo_chi11_sweep, ("rl", "lr"))
    return {"rl": rl, "lr": lr}


@pytest.fixture(scope="session")
def mpo_chi_scan():
    lo, hi = _two_jobs(helpers.mpo_chi_scan, (48, 64))
    return {48: lo, 64: hi}


@pytest.fixture(scope="session")
def mpo_correlation_sweep():
    return helpers.mpo_correlation_sweep()

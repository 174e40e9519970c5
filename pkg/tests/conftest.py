import numpy as np
import pytest

from quatnav import config as cfgmod
from quatnav import geometry as geo
from quatnav.runner import simulate

# criterion id -> (passed, detail); filled by the acceptance tests, printed at the end of the session
ACCEPTANCE: dict[str, tuple[bool, str]] = {}


def random_quats(rng, n):
    return geo.canonicalize(rng.standard_normal((n, 4)))


def random_rotvecs(rng, n, max_angle):
    axis = rng.standard_normal((n, 3))
    axis /= np.linalg.norm(axis, axis=1, keepdims=True)
    return axis * rng.uniform(0.0, max_angle, size=(n, 1))


def random_spd(rng, n, scale=1.0, cond=100.0):
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    eig = scale * np.geomspace(1.0, 1.0 / cond, n)
    return (Q * eig) @ Q.T


def short_spec(duration=2.0, **trajectory):
    """The shipped benchmark spec cut down to ``duration`` seconds."""
    spec = cfgmod.load_sim_spec(cfgmod.preset_path("benchmark"))
    return spec.model_copy(update={"trajectory": spec.trajectory.model_copy(update={"duration": duration, **trajectory})})


def preset_config(name, **updates):
    cfg = cfgmod.load_run_config(cfgmod.preset_path(name))
    return cfg.model_copy(update=updates) if updates else cfg


@pytest.fixture(scope="session")
def short_data():
    return simulate(short_spec(2.0))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def record_criterion():
    def record(cid: str, passed: bool, detail: str) -> None:
        ACCEPTANCE[cid] = (bool(passed), detail)
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for cid in sorted(ACCEPTANCE, key=lambda c: (int(c.split(".")[0].rstrip("abc")), c)):
        passed, detail = ACCEPTANCE[cid]
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  criterion {cid}: {detail}")

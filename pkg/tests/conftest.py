import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from sta_lambda import kernels, model, optimize

settings.register_profile(
    "default", deadline=None, max_examples=40,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


@pytest.fixture(scope="session")
def cfg():
    return model.SystemConfig()


def valid_vectors(count, duration, cfg, rng_seed=11, n_gaussians=4, box=None):
    """First ``count`` box draws (default box unless given) passing every check."""
    box = optimize.SeedBox(rng_seed=rng_seed) if box is None else box
    X, _ = optimize.draw_seed_vectors(box, 30 * count, duration, n_gaussians,
                                      cfg.grid_points)
    _, _, ok = kernels.candidate_scores(X, duration, cfg)
    X = X[ok]
    assert len(X) >= count
    return X[:count]


@pytest.fixture(scope="session")
def random_params(cfg):
    """Twenty valid random parameter sets at T = 0.25 ms."""
    T = 0.25e-3
    return [model.PulseParameters.from_vector(x, T) for x in valid_vectors(20, T, cfg)]


@pytest.fixture(scope="session")
def optimized_params(cfg):
    """A locally optimised pulse at T = 0.25 ms from a small screening run."""
    T = 0.25e-3
    seeds = optimize.generate_seeds(optimize.SeedBox(rng_seed=3), 4000, T, 4)
    best = optimize.screen(seeds, cfg, keep=1)[0][0]
    return optimize.local_minimize(best, cfg, budget=1500).best.params


@pytest.fixture(scope="session")
def desk_run():
    """Desk-scale pipeline (1e5 seeds, 100 optimised, budget 2000), cached per T."""
    cache = {}

    def run(duration):
        key = round(duration * 1e9)
        if key not in cache:
            cache[key] = optimize.optimize_duration(duration, optimize.PipelineConfig())
        return cache[key]

    return run


# ---- one summary line per acceptance criterion --------------------------------

_ACCEPTANCE: dict[str, tuple[str, str]] = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    props = dict(report.user_properties)
    if "criterion" not in props:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        status = "PASS" if report.outcome == "passed" else "FAIL"
        _ACCEPTANCE[props["criterion"]] = (status, props.get("detail", ""))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_ACCEPTANCE, key=lambda k: int(k.split()[0])):
        status, detail = _ACCEPTANCE[key]
        terminalreporter.write_line(f"criterion {key}: {status}  {detail}")

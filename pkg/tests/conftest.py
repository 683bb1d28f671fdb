from pathlib import Path

import pytest

from kmrates.harness import load_config, run_experiment
from kmrates.spaces import EuclideanSpace, HyperboloidSpace, StarTreeSpace

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"


def shipped_config_paths():
    return sorted(CONFIG_DIR.glob("*.toml"))


@pytest.fixture(scope="session")
def shipped_reports(tmp_path_factory):
    """Each shipped experiment, run exactly once for the whole session.

    The axiom suites at full sample counts dominate the runtime, so every
    test that needs a report shares these.
    """
    out = tmp_path_factory.mktemp("traces")
    reports = {}
    for path in shipped_config_paths():
        cfg = load_config(path)
        reports[cfg.name] = run_experiment(cfg, out_dir=out)
    return reports


@pytest.fixture
def euclid():
    return EuclideanSpace(2)


@pytest.fixture
def hyperboloid():
    return HyperboloidSpace(2)


@pytest.fixture
def tree():
    return StarTreeSpace([10.0, 10.0, 10.0])


@pytest.fixture(params=["euclid", "hyperboloid", "tree"])
def any_space(request):
    return request.getfixturevalue(request.param)

from importlib import resources

import pytest

from salvosim import parse_scenario


def bundled_text(name):
    return (
        resources.files("salvosim").joinpath("scenarios").joinpath(f"{name}.yaml")
        .read_text(encoding="utf-8")
    )


@pytest.fixture(scope="session")
def scenario1_config():
    return parse_scenario(bundled_text("scenario1"))


@pytest.fixture(scope="session")
def scenario2_config():
    return parse_scenario(bundled_text("scenario2_failure"))


@pytest.fixture(scope="session")
def scenario3_config():
    return parse_scenario(bundled_text("scenario3"))

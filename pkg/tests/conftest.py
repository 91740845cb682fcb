import pytest

from pushsum import config


@pytest.fixture(scope="session")
def calibrated_model():
    """The calibrated 4-agent truncated-normal model shipped in the presets."""
    return config.load_preset("star-hi").model

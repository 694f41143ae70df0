import numpy as np
import pytest

from lngd.data import SignalSpec, generate_dataset
from lngd.experiments import axis_aligned_spec


@pytest.fixture
def spec2d():
    return SignalSpec(mu=np.array([2.0, 0.0]), sigma_p=0.5, d=2)


@pytest.fixture
def small_spec():
    """Cheap high-ish-dimensional spec for trainer contract tests."""
    return axis_aligned_spec(1.5, 0.5, 60)


@pytest.fixture
def small_dataset(small_spec):
    return generate_dataset(small_spec, 8, np.random.default_rng(7))

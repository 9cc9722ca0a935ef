import numpy as np
import pytest

from memwave.model import FourierField, ModelParams


@pytest.fixture
def params_c2() -> ModelParams:
    return ModelParams(M=1.0, c=2.0, T=12.0, omega0=((0.0, np.pi / 2),), N=6)


@pytest.fixture
def params_chalf() -> ModelParams:
    return ModelParams(M=1.0, c=0.5, T=30.0, omega0=((0.0, np.pi / 2),), N=6)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(42)


def random_field(rng: np.random.Generator, N: int, scale: float = 1.0) -> FourierField:
    coeffs = {
        n: scale * complex(rng.standard_normal(), rng.standard_normal())
        for n in range(-N, N + 1) if n != 0
    }
    return FourierField.from_coeffs(coeffs, N)

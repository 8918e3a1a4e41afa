import functools

import numpy as np
import pytest

from lindbladscars import build_model, commutant_basis, irrep_decomposition


@functools.lru_cache(maxsize=None)
def cached_model(model_id, L, boundary="open", params=()):
    return build_model(model_id, L, boundary=boundary, params=dict(params))


@functools.lru_cache(maxsize=None)
def cached_basis(model_id, L, boundary="open", params=()):
    model = cached_model(model_id, L, boundary, params)
    return commutant_basis(model.algebra)


@functools.lru_cache(maxsize=None)
def cached_decomposition(model_id, L, boundary="open", params=()):
    model = cached_model(model_id, L, boundary, params)
    return irrep_decomposition(model.algebra, cached_basis(model_id, L, boundary, params))


@pytest.fixture
def model_of():
    return cached_model


@pytest.fixture
def basis_of():
    return cached_basis


@pytest.fixture
def decomposition_of():
    return cached_decomposition


def random_density_matrix(dim, rng):
    a = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    rho = a @ a.conj().T
    return rho / np.trace(rho).real


@pytest.fixture
def random_rho():
    return random_density_matrix

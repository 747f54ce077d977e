import numpy as np
import pytest

from jumplab import LindbladModel, MeasurementSetup, validate_model

SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
SIGMA_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
SIGMA_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
SIGMA_MINUS = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)  # |0><1|
SIGMA_PLUS = SIGMA_MINUS.conj().T


def rabi_model(u=1.0, gamma=10.0, eta=1.0, nu=(0.5, -0.5)):
    """Two-level system driven transversally and measured along z."""
    return validate_model(
        LindbladModel(
            h1=u * SIGMA_X / 2,
            h2diag=[0.0, 0.0],
            na_ops=(),
            nb_diags=(),
            setup=MeasurementSetup(nu=list(nu), gamma=gamma, eta=eta),
        )
    )


def thermal_model(lam=1.0, p=0.7, omega=1.0, gamma=10.0, eta=1.0):
    """Two-level system coupled to a bath, energy continuously measured.

    State 0 is the ground state; decay 1 -> 0 at rate lam*p, excitation at
    lam*(1-p).  The diagonal Hamiltonian rides in the fast slot and has no
    effect on populations.
    """
    g2 = gamma * gamma if gamma > 0 else 1.0
    return validate_model(
        LindbladModel(
            h1=np.zeros((2, 2), dtype=complex),
            h2diag=[omega / (2 * g2), -omega / (2 * g2)],
            na_ops=(np.sqrt(lam * p) * SIGMA_MINUS, np.sqrt(lam * (1 - p)) * SIGMA_PLUS),
            nb_diags=(),
            setup=MeasurementSetup(nu=[0.5, -0.5], gamma=gamma, eta=eta),
        )
    )


def pure_measurement_model(gamma=5.0, eta=1.0, nu=(0.5, -0.5)):
    d = len(nu)
    return validate_model(
        LindbladModel(
            h1=np.zeros((d, d), dtype=complex),
            h2diag=[0.0] * d,
            na_ops=(),
            nb_diags=(),
            setup=MeasurementSetup(nu=list(nu), gamma=gamma, eta=eta),
        )
    )


def random_model(rng, dim, gamma=1.0, eta=1.0, n_collapse=2, n_dephase=2):
    """Generic admissible model with well-separated measurement eigenvalues."""
    nu = np.arange(1, dim + 1) * 0.5 + 1j * rng.normal(0, 0.3, size=dim)
    h1 = rng.normal(0, 1, (dim, dim)) + 1j * rng.normal(0, 1, (dim, dim))
    h1 = 0.5 * (h1 + h1.conj().T)
    na = tuple(
        rng.normal(0, 1, (dim, dim)) + 1j * rng.normal(0, 1, (dim, dim))
        for _ in range(n_collapse)
    )
    nb = tuple(
        rng.normal(0, 1, dim) + 1j * rng.normal(0, 1, dim) for _ in range(n_dephase)
    )
    h2 = rng.normal(0, 1, dim)
    return validate_model(
        LindbladModel(
            h1=h1,
            h2diag=h2,
            na_ops=na,
            nb_diags=nb,
            setup=MeasurementSetup(nu=nu, gamma=gamma, eta=eta),
        )
    )


def random_density_matrix(rng, dim):
    a = rng.normal(0, 1, (dim, dim)) + 1j * rng.normal(0, 1, (dim, dim))
    rho = a @ a.conj().T
    return rho / np.trace(rho).real


@pytest.fixture
def rng():
    return np.random.default_rng(20250810)

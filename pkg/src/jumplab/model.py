"""Measured open-system model: scaled generator pieces plus measurement setup.

The model is entered directly in the measurement eigenbasis: the measurement
operator is specified by its diagonal ``nu`` and is never diagonalized here.
The generator pieces are grouped by the power of the measurement strength
``gamma`` they carry:

* ``h1``        Hermitian Hamiltonian applied at order gamma,
* ``h2diag``    real diagonal Hamiltonian applied at order gamma^2,
* ``na_ops``    collapse operators applied at order 1 (arbitrary matrices),
* ``nb_diags``  diagonal collapse operators applied at order gamma^2.

``drift`` evaluates the full deterministic generator at finite gamma,
``innovation`` the state-dependent diffusion coefficient, and
``record_increment`` the detector output increment.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateSpectrumError,
    DimensionMismatchError,
    NonDiagonalFastTermError,
    NonHermitianError,
)
from .matcore import as_cmatrix, hermiticity_defect, hermitize, min_eigenvalue

EIGENVALUE_GAP_TOL = 1e-9

DENSITY_HERMITICITY_TOL = 1e-10
DENSITY_TRACE_TOL = 1e-10
DENSITY_POSITIVITY_TOL = -1e-8


@dataclass(frozen=True)
class MeasurementSetup:
    """Continuous measurement of a diagonal operator with entries ``nu``.

    The measured observable has eigenvalues ``lam[k] = 2 Re nu[k]``; the
    measurement strength is ``gamma**2`` and ``eta`` is the detector
    efficiency.
    """

    nu: np.ndarray
    gamma: float
    eta: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "nu", np.asarray(self.nu, dtype=complex).reshape(-1))

    @property
    def dim(self) -> int:
        return len(self.nu)

    @property
    def lam(self) -> np.ndarray:
        """Real eigenvalues of the measured observable."""
        return 2.0 * self.nu.real


@dataclass(frozen=True)
class LindbladModel:
    h1: np.ndarray
    h2diag: np.ndarray
    na_ops: tuple
    nb_diags: tuple
    setup: MeasurementSetup

    def __post_init__(self):
        object.__setattr__(self, "h1", np.asarray(self.h1, dtype=complex))
        object.__setattr__(self, "h2diag", np.asarray(self.h2diag, dtype=float).reshape(-1))
        object.__setattr__(self, "na_ops", tuple(np.asarray(a, dtype=complex) for a in self.na_ops))
        object.__setattr__(
            self, "nb_diags", tuple(np.asarray(b, dtype=complex).reshape(-1) for b in self.nb_diags)
        )

    @property
    def dim(self) -> int:
        return self.setup.dim


@dataclass(frozen=True)
class ValidatedModel:
    """A model that passed ``validate_model``; the only input type accepted
    by the decomposition, integrator, and CLI layers."""

    h1: np.ndarray
    h2diag: np.ndarray
    na_ops: tuple
    nb_diags: tuple
    setup: MeasurementSetup

    @property
    def dim(self) -> int:
        return self.setup.dim

    @property
    def gamma(self) -> float:
        return self.setup.gamma

    @property
    def eta(self) -> float:
        return self.setup.eta

    @property
    def nu(self) -> np.ndarray:
        return self.setup.nu

    @property
    def lam(self) -> np.ndarray:
        return self.setup.lam

    def n_op(self) -> np.ndarray:
        """The measurement operator as a dense matrix."""
        return np.diag(self.setup.nu)

    def hamiltonian(self) -> np.ndarray:
        """gamma*h1 + gamma^2*diag(h2diag): total Hamiltonian at finite gamma."""
        g = self.setup.gamma
        return g * self.h1 + g * g * np.diag(self.h2diag.astype(complex))


def validate_model(model: LindbladModel) -> ValidatedModel:
    """Check structural and spectral admissibility, returning the validated form.

    gamma = 0 is admitted and means "measurement switched off": the drift is
    then purely the order-1 generator, which the deterministic oracles use.
    """
    setup = model.setup
    d = setup.dim
    if d < 1:
        raise DimensionMismatchError("empty measurement diagonal")
    if not setup.gamma >= 0:
        raise DimensionMismatchError(f"gamma must be >= 0, got {setup.gamma}")
    if not 0 < setup.eta <= 1:
        raise DimensionMismatchError(f"eta must lie in (0, 1], got {setup.eta}")

    h1 = as_cmatrix(model.h1)
    if h1.shape != (d, d):
        raise DimensionMismatchError(f"h1 shape {h1.shape} != ({d}, {d})")
    defect = hermiticity_defect(h1)
    if defect > 1e-10:
        raise NonHermitianError(f"h1 not Hermitian: defect {defect:.3e}")
    if len(model.h2diag) != d:
        raise DimensionMismatchError(f"h2diag length {len(model.h2diag)} != {d}")
    for k, a in enumerate(model.na_ops):
        if a.shape != (d, d):
            raise DimensionMismatchError(f"na_ops[{k}] shape {a.shape} != ({d}, {d})")
    for k, b in enumerate(model.nb_diags):
        if len(b) != d:
            raise DimensionMismatchError(f"nb_diags[{k}] length {len(b)} != {d}")

    lam = setup.lam
    for i in range(d):
        for j in range(i + 1, d):
            if abs(lam[i] - lam[j]) <= EIGENVALUE_GAP_TOL:
                raise DegenerateSpectrumError(
                    f"measurement eigenvalues {i} and {j} coincide: "
                    f"lam[{i}]={lam[i]!r}, lam[{j}]={lam[j]!r}"
                )

    return ValidatedModel(
        h1=h1,
        h2diag=model.h2diag,
        na_ops=model.na_ops,
        nb_diags=model.nb_diags,
        setup=setup,
    )


def lindblad_term(op: np.ndarray, rho: np.ndarray) -> np.ndarray:
    """L_M(rho) = M rho M† - (M†M rho + rho M†M)/2."""
    od = op.conj().T
    odo = od @ op
    return op @ rho @ od - 0.5 * (odo @ rho + rho @ odo)


def drift(rho: np.ndarray, vm: ValidatedModel) -> np.ndarray:
    """Full deterministic generator at finite gamma, including measurement."""
    g = vm.gamma
    h = vm.hamiltonian()
    out = -1j * (h @ rho - rho @ h)
    for a in vm.na_ops:
        out = out + lindblad_term(a, rho)
    g2 = g * g
    for b in vm.nb_diags:
        out = out + g2 * lindblad_term(np.diag(b), rho)
    out = out + g2 * lindblad_term(vm.n_op(), rho)
    return out


def innovation(rho: np.ndarray, vm: ValidatedModel) -> np.ndarray:
    """State-dependent diffusion coefficient N rho + rho N† - rho tr(O rho)."""
    n = vm.n_op()
    tr_o = float(np.einsum("kk,k->", rho, vm.lam).real)
    return n @ rho + rho @ n.conj().T - rho * tr_o


def record_increment(rho: np.ndarray, vm: ValidatedModel, dw: float, dt: float) -> float:
    """Detector output increment gamma*tr(O rho)*dt + eta^(-1/2)*dw."""
    tr_o = float(np.einsum("kk,k->", rho, vm.lam).real)
    return vm.gamma * tr_o * dt + dw / np.sqrt(vm.eta)


# -- density matrix helpers ---------------------------------------------------

def check_density_matrix(rho: np.ndarray) -> np.ndarray:
    """Validate Hermiticity, unit trace, and positivity of a state."""
    rho = as_cmatrix(rho)
    defect = hermiticity_defect(rho)
    if defect > DENSITY_HERMITICITY_TOL:
        raise NonHermitianError(f"state not Hermitian: defect {defect:.3e}")
    tr = complex(np.trace(rho))
    if abs(tr - 1.0) > DENSITY_TRACE_TOL:
        raise DimensionMismatchError(f"state trace {tr!r} differs from 1")
    w = min_eigenvalue(hermitize(rho))
    if w < DENSITY_POSITIVITY_TOL:
        raise NonHermitianError(f"state not positive: min eigenvalue {w:.3e}")
    return rho


def pointer_state(dim: int, k: int) -> np.ndarray:
    rho = np.zeros((dim, dim), dtype=complex)
    rho[k, k] = 1.0
    return rho


def mixed_state(dim: int) -> np.ndarray:
    return np.eye(dim, dtype=complex) / dim


def diagonal_state(probs) -> np.ndarray:
    p = np.asarray(probs, dtype=float)
    if p.min() < 0 or abs(p.sum() - 1.0) > 1e-12:
        raise DimensionMismatchError("diagonal state requires a probability vector")
    return np.diag(p.astype(complex))


# -- JSON model format --------------------------------------------------------
#
# Complex numbers are always 2-element [re, im] arrays.  Document fields:
#   dim, gamma, eta, nu, H1, H2diag, Na, Nbdiag

def _pair_to_complex(v) -> complex:
    if isinstance(v, (int, float)):
        return complex(v)
    if isinstance(v, (list, tuple)) and len(v) == 2:
        return complex(float(v[0]), float(v[1]))
    raise NonDiagonalFastTermError(f"expected [re, im] pair, got {v!r}")


def _complex_vector(v) -> np.ndarray:
    return np.array([_pair_to_complex(x) for x in v], dtype=complex)


def _complex_matrix(rows) -> np.ndarray:
    return np.array([[_pair_to_complex(x) for x in row] for row in rows], dtype=complex)


def _diagonal_or_reject(entry, what: str) -> np.ndarray:
    """Accept a vector; reject a full matrix with off-diagonal content.

    The fast (order gamma^2) generator slots must be diagonal; a genuinely
    non-diagonal matrix here has no admissible scaling.
    """
    arr = entry
    if arr and isinstance(arr[0], (list, tuple)) and arr[0] and isinstance(arr[0][0], (list, tuple)):
        m = _complex_matrix(arr)
        off = m - np.diag(np.diag(m))
        if np.abs(off).max() > 0:
            raise NonDiagonalFastTermError(
                f"{what} must be diagonal; got a matrix with off-diagonal entries"
            )
        return np.diag(m)
    return _complex_vector(arr)


def model_from_dict(doc: dict) -> LindbladModel:
    try:
        dim = int(doc["dim"])
        setup = MeasurementSetup(
            nu=_complex_vector(doc["nu"]),
            gamma=float(doc["gamma"]),
            eta=float(doc.get("eta", 1.0)),
        )
        h1 = _complex_matrix(doc.get("H1", [[[0.0, 0.0]] * dim] * dim))
        h2 = np.asarray(doc.get("H2diag", [0.0] * dim), dtype=float)
        if h2.ndim == 2:
            if np.abs(h2 - np.diag(np.diag(h2))).max() > 0:
                raise NonDiagonalFastTermError(
                    "H2diag must be diagonal; got a matrix with off-diagonal entries"
                )
            h2 = np.diag(h2)
        na = tuple(_complex_matrix(m) for m in doc.get("Na", []))
        nb = tuple(_diagonal_or_reject(v, "Nbdiag entry") for v in doc.get("Nbdiag", []))
    except KeyError as exc:
        raise DimensionMismatchError(f"model document missing field {exc}") from None
    if setup.dim != dim:
        raise DimensionMismatchError(f"nu length {setup.dim} != dim {dim}")
    return LindbladModel(h1=h1, h2diag=h2, na_ops=na, nb_diags=nb, setup=setup)


def _complex_to_pair(z: complex) -> list:
    return [float(np.real(z)), float(np.imag(z))]


def model_to_dict(model: LindbladModel) -> dict:
    return {
        "dim": model.dim,
        "gamma": model.setup.gamma,
        "eta": model.setup.eta,
        "nu": [_complex_to_pair(z) for z in model.setup.nu],
        "H1": [[_complex_to_pair(z) for z in row] for row in model.h1],
        "H2diag": [float(x) for x in model.h2diag],
        "Na": [[[_complex_to_pair(z) for z in row] for row in a] for a in model.na_ops],
        "Nbdiag": [[_complex_to_pair(z) for z in b] for b in model.nb_diags],
    }


def load_model(path) -> LindbladModel:
    with open(path, "r", encoding="utf-8") as fh:
        return model_from_dict(json.load(fh))


def save_model(model: LindbladModel, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_dict(model), fh, indent=2, sort_keys=True)

"""Block decomposition of the scaled generator in the measurement eigenbasis.

Acting on a state split into populations ``Q_i`` (diagonal) and phases
``U_kl`` (off-diagonal), the generator separates into four index tensors:

* ``a[i, j]``     population -> population flow (order 1),
* ``b[k, l, i]``  phase -> population coupling (order gamma),
* ``c[i, k, l]``  population -> phase coupling (order gamma),
* ``d[k, l]``     phase-damping coefficients (order gamma^2).

``a`` collects the squared off-diagonal matrix elements of the order-1
collapse operators; ``b`` and ``c`` come from expanding the order-gamma
Hamiltonian commutator into diagonal/off-diagonal blocks; ``d`` combines the
order-gamma^2 diagonal collapse operators and the diagonal Hamiltonian.

Conventions fixed once, package-wide: ``a[i, j]`` and rate ``m[i, j]`` mean
a transition i -> j, and phase pairs (k, l) are ordered indices k != l with
``b[k, l, i] = conj(b[l, k, i])`` and ``c[i, k, l] = conj(c[i, l, k])``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .model import ValidatedModel

ACTIVE_TOL = 1e-14


@dataclass(frozen=True)
class SuperoperatorTensors:
    dim: int
    a: np.ndarray  # (d, d) real
    b: np.ndarray  # (d, d, d) complex, b[k, l, i], zero for k == l
    c: np.ndarray  # (d, d, d) complex, c[i, k, l], zero for k == l
    d: np.ndarray  # (d, d) complex, zero diagonal

    def apply_a(self, q: np.ndarray) -> np.ndarray:
        """Population flow: sum_i q_i a[i, j]."""
        return q @ self.a

    def apply_b(self, y: np.ndarray) -> np.ndarray:
        """Phase-to-population term: sum_{k != l} b[k, l, i] y[k, l]; real for
        Hermitian-symmetric y."""
        return np.einsum("kli,kl->i", self.b, y).real

    def apply_c(self, q: np.ndarray) -> np.ndarray:
        """Population-to-phase term: sum_i c[i, k, l] q_i."""
        return np.einsum("ikl,i->kl", self.c, q)


def decompose(vm: ValidatedModel) -> SuperoperatorTensors:
    d = vm.dim
    h1 = vm.h1

    a = np.zeros((d, d), dtype=float)
    for op in vm.na_ops:
        a += np.abs(op.T) ** 2
        a[np.diag_indices(d)] -= np.real(np.diag(op.conj().T @ op))

    # -i[h1, rho] split into blocks; only off-diagonal h1 entries survive.
    b = np.zeros((d, d, d), dtype=complex)
    c = np.zeros((d, d, d), dtype=complex)
    for k in range(d):
        for l in range(d):
            if k == l:
                continue
            for i in range(d):
                b[k, l, i] = -1j * h1[i, k] * (l == i) + 1j * h1[l, i] * (k == i)
                c[i, k, l] = -1j * h1[k, l] * ((i == l) - (i == k))

    dmat = np.zeros((d, d), dtype=complex)
    for i in range(d):
        for j in range(d):
            if i == j:
                continue
            acc = 0.0 + 0.0j
            for nb in vm.nb_diags:
                acc += 0.5 * (
                    abs(nb[i]) ** 2 + abs(nb[j]) ** 2 - 2.0 * nb[i] * np.conj(nb[j])
                )
            dmat[i, j] = acc + 1j * (vm.h2diag[i] - vm.h2diag[j])

    return SuperoperatorTensors(dim=d, a=a, b=b, c=c, d=dmat)


@dataclass(frozen=True)
class ScalingReport:
    """Which mechanism drives each transition channel.

    ``mechanisms[i][j]`` is one of "dissipative", "hamiltonian", "both", or
    "frozen" for i != j (diagonal entries are empty strings).
    """

    dim: int
    mechanisms: tuple
    tensor_norms: dict
    zeno_frozen: bool

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "mechanisms": [list(row) for row in self.mechanisms],
            "tensor_norms": dict(self.tensor_norms),
            "zeno_frozen": self.zeno_frozen,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def validate_scaling(vm: ValidatedModel) -> ScalingReport:
    """Report the active rate channels of an admissible model.

    Structural admissibility of the fast terms (diagonal order-gamma^2 slots)
    is enforced by construction of the model types and by the ingestion path,
    which rejects full matrices in those slots.
    """
    t = decompose(vm)
    d = vm.dim

    mech = []
    any_active = False
    for i in range(d):
        row = []
        for j in range(d):
            if i == j:
                row.append("")
                continue
            dissipative = abs(t.a[i, j]) > ACTIVE_TOL
            ham = False
            for k in range(d):
                for l in range(k + 1, d):
                    if abs(t.c[i, k, l] * t.b[k, l, j]) > ACTIVE_TOL:
                        ham = True
                        break
                if ham:
                    break
            if dissipative and ham:
                row.append("both")
            elif dissipative:
                row.append("dissipative")
            elif ham:
                row.append("hamiltonian")
            else:
                row.append("frozen")
            any_active = any_active or dissipative or ham
        mech.append(tuple(row))

    norms = {
        "a": float(np.linalg.norm(t.a)),
        "b": float(np.linalg.norm(t.b)),
        "c": float(np.linalg.norm(t.c)),
        "d": float(np.linalg.norm(t.d)),
    }
    return ScalingReport(
        dim=d,
        mechanisms=tuple(mech),
        tensor_norms=norms,
        zeno_frozen=not any_active,
    )

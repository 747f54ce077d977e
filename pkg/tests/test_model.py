import numpy as np
import pytest

from jumplab import (
    DegenerateSpectrumError,
    DimensionMismatchError,
    LindbladModel,
    MeasurementSetup,
    NonDiagonalFastTermError,
    NonHermitianError,
    diagonal_state,
    drift,
    innovation,
    mixed_state,
    model_from_dict,
    model_to_dict,
    pointer_state,
    record_increment,
    validate_model,
)

from conftest import SIGMA_Z, pure_measurement_model, rabi_model, random_density_matrix, random_model, thermal_model


class TestValidateModel:
    def test_thermal_model_valid(self):
        vm = thermal_model(lam=1.0, p=0.7, omega=1.0, gamma=10.0)
        assert vm.dim == 2
        assert np.allclose(vm.lam, [1.0, -1.0])

    def test_degenerate_spectrum(self):
        with pytest.raises(DegenerateSpectrumError):
            validate_model(
                LindbladModel(
                    h1=np.zeros((2, 2)),
                    h2diag=[0, 0],
                    na_ops=(),
                    nb_diags=(),
                    setup=MeasurementSetup(nu=[0.5, 0.5], gamma=1.0),
                )
            )

    def test_non_hermitian_h1(self):
        with pytest.raises(NonHermitianError):
            validate_model(
                LindbladModel(
                    h1=np.array([[0, 1], [0, 0]]),
                    h2diag=[0, 0],
                    na_ops=(),
                    nb_diags=(),
                    setup=MeasurementSetup(nu=[0.5, -0.5], gamma=1.0),
                )
            )

    def test_dim_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            validate_model(
                LindbladModel(
                    h1=np.zeros((3, 3)),
                    h2diag=[0, 0],
                    na_ops=(),
                    nb_diags=(),
                    setup=MeasurementSetup(nu=[0.5, -0.5], gamma=1.0),
                )
            )

    def test_eta_zero_rejected(self):
        with pytest.raises(DimensionMismatchError):
            validate_model(
                LindbladModel(
                    h1=np.zeros((2, 2)),
                    h2diag=[0, 0],
                    na_ops=(),
                    nb_diags=(),
                    setup=MeasurementSetup(nu=[0.5, -0.5], gamma=1.0, eta=0.0),
                )
            )


class TestDrift:
    def test_empty_model_zero(self, rng):
        vm = validate_model(
            LindbladModel(
                h1=np.zeros((2, 2)),
                h2diag=[0, 0],
                na_ops=(),
                nb_diags=(),
                setup=MeasurementSetup(nu=[0.5, -0.5], gamma=0.0),
            )
        )
        rho = random_density_matrix(rng, 2)
        assert np.abs(drift(rho, vm)).max() == pytest.approx(0.0, abs=1e-15)

    def test_pointer_state_fixed_point(self):
        vm = pure_measurement_model(gamma=1.0)
        rho = pointer_state(2, 0)
        assert np.abs(drift(rho, vm)).max() <= 1e-14
        assert np.abs(innovation(rho, vm)).max() <= 1e-14

    def test_thermal_excited_decay(self):
        # hand evaluation of the dissipators on the excited projector
        vm = thermal_model(lam=1.0, p=0.7, gamma=0.0)
        out = drift(pointer_state(2, 1), vm)
        expected = 0.7 * (pointer_state(2, 0) - pointer_state(2, 1))
        assert np.allclose(out, expected, atol=1e-14)

    def test_trace_and_hermiticity(self, rng):
        for dim in (2, 3, 4):
            vm = random_model(rng, dim, gamma=1.3)
            rho = random_density_matrix(rng, dim)
            out = drift(rho, vm)
            assert abs(np.trace(out)) <= 1e-12
            assert np.abs(out - out.conj().T).max() <= 1e-12


class TestInnovation:
    def test_pointer_state_zero(self):
        vm = pure_measurement_model(gamma=1.0)
        assert np.abs(innovation(pointer_state(2, 0), vm)).max() <= 1e-14

    def test_mixed_state_sigma_z(self):
        # tr(O I/2) = 0, so the output is just N rho + rho N = sigma_z / 2
        vm = pure_measurement_model(gamma=1.0)
        out = innovation(mixed_state(2), vm)
        assert np.allclose(out, SIGMA_Z / 2, atol=1e-15)

    def test_traceless(self, rng):
        for dim in (2, 3):
            vm = random_model(rng, dim, gamma=0.7)
            rho = random_density_matrix(rng, dim)
            out = innovation(rho, vm)
            assert abs(np.trace(out)) <= 1e-12
            assert np.abs(out - out.conj().T).max() <= 1e-12


class TestRecordIncrement:
    def test_pointer_drift_term(self):
        # measured observable sigma_z: nu = (1/2, -1/2), tr(O |0><0|) = 1
        vm = pure_measurement_model(gamma=10.0, eta=1.0, nu=(0.5, -0.5))
        rho = pointer_state(2, 0)
        assert record_increment(rho, vm, dw=0.0, dt=1e-3) == pytest.approx(0.01, abs=1e-15)

    def test_noise_only(self):
        vm = pure_measurement_model(gamma=3.0, eta=0.25)
        out = record_increment(mixed_state(2), vm, dw=0.5, dt=0.01)
        assert out == pytest.approx(1.0, abs=1e-14)

    def test_zero_inputs(self):
        vm = pure_measurement_model(gamma=3.0)
        assert record_increment(mixed_state(2), vm, dw=0.0, dt=0.0) == 0.0


class TestStateHelpers:
    def test_diagonal_state_validation(self):
        with pytest.raises(DimensionMismatchError):
            diagonal_state([0.5, 0.6])

    def test_pointer(self):
        assert pointer_state(3, 1)[1, 1] == 1.0


class TestModelJson:
    def test_round_trip(self, rng):
        vm = random_model(rng, 3, gamma=2.0, eta=0.8)
        model = LindbladModel(
            h1=vm.h1, h2diag=vm.h2diag, na_ops=vm.na_ops, nb_diags=vm.nb_diags, setup=vm.setup
        )
        doc = model_to_dict(model)
        back = model_from_dict(doc)
        assert np.allclose(back.h1, model.h1)
        assert np.allclose(back.h2diag, model.h2diag)
        assert all(np.allclose(a, b) for a, b in zip(back.na_ops, model.na_ops))
        assert all(np.allclose(a, b) for a, b in zip(back.nb_diags, model.nb_diags))
        assert np.allclose(back.setup.nu, model.setup.nu)

    def test_full_matrix_in_diagonal_slot_rejected(self):
        doc = {
            "dim": 2,
            "gamma": 1.0,
            "eta": 1.0,
            "nu": [[0.5, 0.0], [-0.5, 0.0]],
            "H1": [[[0.0, 0.0], [0.0, 0.0]], [[0.0, 0.0], [0.0, 0.0]]],
            "H2diag": [0.0, 0.0],
            "Nbdiag": [[[[1.0, 0.0], [0.5, 0.0]], [[0.0, 0.0], [1.0, 0.0]]]],
        }
        with pytest.raises(NonDiagonalFastTermError):
            model_from_dict(doc)

    def test_nondiagonal_h2_rejected(self):
        doc = {
            "dim": 2,
            "gamma": 1.0,
            "nu": [[0.5, 0.0], [-0.5, 0.0]],
            "H2diag": [[0.0, 1.0], [1.0, 0.0]],
        }
        with pytest.raises(NonDiagonalFastTermError):
            model_from_dict(doc)

    def test_diagonal_matrix_in_diagonal_slot_accepted(self):
        doc = {
            "dim": 2,
            "gamma": 1.0,
            "nu": [[0.5, 0.0], [-0.5, 0.0]],
            "H2diag": [[0.25, 0.0], [0.0, -0.25]],
        }
        model = model_from_dict(doc)
        assert np.allclose(model.h2diag, [0.25, -0.25])

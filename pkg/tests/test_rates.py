import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from jumplab import (
    DimensionMismatchError,
    MeasurementSetup,
    RateGenerator,
    ReducibleError,
    SuperoperatorTensors,
    decompose,
    delta,
    delta_matrix,
    jump_rates,
    markov_sample,
    stationary,
)

from conftest import rabi_model, random_model, thermal_model


def _empty_tensors(dim):
    return SuperoperatorTensors(
        dim=dim,
        a=np.zeros((dim, dim)),
        b=np.zeros((dim, dim, dim), complex),
        c=np.zeros((dim, dim, dim), complex),
        d=np.zeros((dim, dim), complex),
    )


class TestDelta:
    def test_symmetric_real_nu(self):
        t = _empty_tensors(2)
        setup = MeasurementSetup(nu=[0.5, -0.5], gamma=1.0)
        assert delta(0, 1, t, setup) == pytest.approx(0.5)

    def test_pure_intrinsic_part(self):
        # equal nu never passes validation, but delta itself is defined
        t = _empty_tensors(2)
        d = t.d.copy()
        d[0, 1] = 3.0
        d[1, 0] = 3.0
        t = SuperoperatorTensors(dim=2, a=t.a, b=t.b, c=t.c, d=d)
        setup = MeasurementSetup(nu=[0.5, 0.5], gamma=1.0)
        assert delta(0, 1, t, setup) == pytest.approx(3.0)

    def test_complex_nu(self):
        t = _empty_tensors(2)
        setup = MeasurementSetup(nu=[1.0, 1.0j], gamma=1.0)
        assert delta(0, 1, t, setup) == pytest.approx(1.0 + 1.0j)

    def test_equal_indices_rejected(self):
        with pytest.raises(DimensionMismatchError):
            delta(1, 1, _empty_tensors(2), MeasurementSetup(nu=[0.5, -0.5], gamma=1.0))

    @given(st.integers(0, 10**6), st.floats(-3, 3, allow_nan=False))
    @settings(max_examples=30, deadline=None)
    def test_real_shift_invariance(self, seed, c):
        # for real nu the damping depends only on differences
        r = np.random.default_rng(seed)
        nu = np.sort(r.normal(0, 1, 3))
        nu += np.arange(3) * 1.0  # enforce distinctness
        t = _empty_tensors(3)
        s1 = MeasurementSetup(nu=nu, gamma=1.0)
        s2 = MeasurementSetup(nu=nu + c, gamma=1.0)
        for k in range(3):
            for l in range(3):
                if k != l:
                    assert delta(k, l, t, s1) == pytest.approx(delta(k, l, t, s2), abs=1e-9)


class TestJumpRates:
    def test_rabi(self):
        vm = rabi_model(u=1.0)
        gen = jump_rates(decompose(vm), vm.setup)
        assert gen.m[0, 1] == pytest.approx(1.0, abs=1e-12)
        assert gen.m[1, 0] == pytest.approx(1.0, abs=1e-12)

    def test_rabi_scales_with_u(self):
        vm = rabi_model(u=1.7)
        gen = jump_rates(decompose(vm), vm.setup)
        assert gen.m[0, 1] == pytest.approx(1.7**2, abs=1e-12)

    def test_thermal(self):
        vm = thermal_model(lam=1.0, p=0.7)
        gen = jump_rates(decompose(vm), vm.setup)
        assert gen.m[1, 0] == pytest.approx(0.7, abs=1e-12)
        assert gen.m[0, 1] == pytest.approx(0.3, abs=1e-12)

    def test_zero_tensors(self):
        gen = jump_rates(_empty_tensors(3), MeasurementSetup(nu=[0.5, 1.5, 2.5], gamma=1.0))
        assert np.abs(gen.m).max() == 0.0

    def test_row_sums_vanish(self, rng):
        for dim in (2, 3, 4):
            vm = random_model(rng, dim)
            gen = jump_rates(decompose(vm), vm.setup)
            assert np.abs(gen.row_sums()).max() <= 1e-12 * max(1.0, np.abs(gen.m).max())

    def test_eta_independence_bitwise(self, rng):
        vm1 = random_model(rng, 3, eta=0.1)
        vm2 = type(vm1)(
            h1=vm1.h1, h2diag=vm1.h2diag, na_ops=vm1.na_ops, nb_diags=vm1.nb_diags,
            setup=MeasurementSetup(nu=vm1.nu, gamma=vm1.gamma, eta=1.0),
        )
        m1 = jump_rates(decompose(vm1), vm1.setup).m
        m2 = jump_rates(decompose(vm2), vm2.setup).m
        assert np.array_equal(m1, m2)

    def test_ordered_sum_equivalence(self, rng):
        # summing over ordered pairs without the explicit real part gives the
        # same rates as the unordered sum with 2 Re
        for dim in (2, 3):
            vm = random_model(rng, dim)
            t = decompose(vm)
            dm = delta_matrix(t, vm.setup)
            gen = jump_rates(t, vm.setup)
            for i in range(dim):
                for j in range(dim):
                    if i == j:
                        continue
                    acc = t.a[i, j] + 0.0j
                    for k in range(dim):
                        for l in range(dim):
                            if k != l:
                                acc += t.c[i, k, l] * t.b[k, l, j] / dm[k, l]
                    assert acc.imag == pytest.approx(0.0, abs=1e-12)
                    assert gen.m[i, j] == pytest.approx(acc.real, abs=1e-10)


class TestStationary:
    def test_thermal(self):
        vm = thermal_model(lam=1.0, p=0.7)
        gen = jump_rates(decompose(vm), vm.setup)
        pi = stationary(gen)
        assert pi == pytest.approx([0.7, 0.3], abs=1e-12)

    def test_symmetric(self):
        gen = RateGenerator(dim=2, m=np.array([[-1.0, 1.0], [1.0, -1.0]]))
        assert stationary(gen) == pytest.approx([0.5, 0.5], abs=1e-12)

    def test_three_state_cycle(self):
        r = 0.8
        m = np.array([[-r, r, 0.0], [0.0, -r, r], [r, 0.0, -r]])
        pi = stationary(RateGenerator(dim=3, m=m))
        assert pi == pytest.approx([1 / 3] * 3, abs=1e-12)

    def test_reducible_rejected(self):
        gen = RateGenerator(dim=2, m=np.zeros((2, 2)))
        with pytest.raises(ReducibleError):
            stationary(gen)

    def test_residual(self, rng):
        for dim in (2, 3, 4):
            m = rng.uniform(0.1, 2.0, (dim, dim))
            np.fill_diagonal(m, 0.0)
            np.fill_diagonal(m, -m.sum(axis=1))
            pi = stationary(RateGenerator(dim=dim, m=m))
            assert np.abs(pi @ m).max() <= 1e-10
            assert pi.sum() == pytest.approx(1.0, abs=1e-14)
            assert pi.min() >= 0.0


class TestMarkovSample:
    def test_zero_generator_single_state(self):
        gen = RateGenerator(dim=2, m=np.zeros((2, 2)))
        path = markov_sample(gen, [0.0, 1.0], horizon=5.0, seed=1)
        assert list(path.states) == [1]
        assert path.dwell_totals()[1] == pytest.approx(5.0)

    def test_dwell_time_statistics(self):
        gen = RateGenerator(dim=2, m=np.array([[-1.0, 1.0], [1.0, -1.0]]))
        path = markov_sample(gen, [0.5, 0.5], horizon=1e4, seed=7)
        counts = path.transition_counts()
        dwell = path.dwell_totals()
        n = counts.sum()
        assert n > 5000
        # exponential dwells with unit mean: 3 standard errors
        for i in (0, 1):
            mean = dwell[i] / max(counts[i].sum(), 1)
            se = 1.0 / np.sqrt(counts[i].sum())
            assert abs(mean - 1.0) <= 3 * se + 3 / n  # censoring slack

    def test_determinism(self):
        gen = RateGenerator(dim=3, m=np.array([
            [-1.5, 1.0, 0.5], [0.3, -0.8, 0.5], [0.2, 0.9, -1.1],
        ]))
        p1 = markov_sample(gen, [1, 0, 0], horizon=100.0, seed=11)
        p2 = markov_sample(gen, [1, 0, 0], horizon=100.0, seed=11)
        assert np.array_equal(p1.times, p2.times)
        assert np.array_equal(p1.states, p2.states)

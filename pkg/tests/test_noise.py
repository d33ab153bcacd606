import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rieszwave import lattice as lat
from rieszwave import noise


@pytest.fixture(scope="module")
def small_family():
    return noise.sample_family(seed=123, J=6, q=8, T=1.0, n_replicas=4)


class TestBrownianFamily:
    def test_determinism(self, small_family):
        again = noise.sample_family(seed=123, J=6, q=8, T=1.0, n_replicas=4)
        assert np.array_equal(small_family.increments(), again.increments())
        # sub-range regeneration is order-independent
        assert np.array_equal(small_family.increments(2, 4), again.increments()[2:4])

    def test_seed_sensitivity(self, small_family):
        other = noise.sample_family(seed=124, J=6, q=8, T=1.0, n_replicas=1)
        assert not np.array_equal(small_family.increments(0, 1), other.increments())

    def test_increment_variance(self):
        fam = noise.sample_family(seed=5, J=4, q=10, T=1.0, n_replicas=32)
        inc = fam.increments()
        n = inc.size
        # chi-square: sample variance of N(0,δ) has sd δ·sqrt(2/n)
        assert abs(inc.var() - fam.delta) <= 3.0 * fam.delta * np.sqrt(2.0 / n)

    def test_cross_mode_covariance(self):
        fam = noise.sample_family(seed=6, J=2, q=10, T=1.0, n_replicas=64)
        inc = fam.increments()
        prod = inc[:, 0, :] * inc[:, 1, :]
        se = prod.std() / np.sqrt(prod.size)
        assert abs(prod.mean()) <= 3.0 * se

    def test_coarse_sums_exact(self, small_family):
        fine = small_family.increments()
        coarse = small_family.coarse_increments(3)
        rebuilt = fine.reshape(4, 6, 8, -1).sum(axis=-1)
        assert np.array_equal(coarse, rebuilt)

    def test_validation(self):
        with pytest.raises(ValueError):
            noise.sample_family(seed=1, J=0, q=4, T=1.0)
        with pytest.raises(ValueError):
            noise.sample_family(seed=1, J=1, q=0, T=1.0)


class TestDyadicFloor:
    def test_examples(self):
        assert noise.dyadic_floor(0.7, 2, 1.0) == (0.5, 0.25)
        assert noise.dyadic_floor(1.0, 3, 1.0) == (0.875, 0.75)
        assert noise.dyadic_floor(0.05, 4, 1.0) == (0.0, 0.0)

    def test_domain(self):
        with pytest.raises(ValueError):
            noise.dyadic_floor(1.5, 2, 1.0)

    @settings(max_examples=50, deadline=None)
    @given(
        t=st.floats(0.0, 1.0, allow_nan=False),
        n=st.integers(1, 10),
    )
    def test_floor_properties(self, t, n):
        T = 1.0
        t_u, t_n = noise.dyadic_floor(t, n, T)
        assert 0.0 <= t_n <= t_u
        assert t_u <= max(t, 0.0) or t_u == (2**n - 1) * T / 2**n
        # t̲ₙ is a dyadic multiple
        assert (t_u * 2**n / T) == pytest.approx(round(t_u * 2**n / T), abs=1e-12)

    def test_exact_endpoints(self):
        # no floating drift: t exactly at an interval boundary stays put
        for n in (2, 5, 9):
            for k in range(2**n):
                t = k / 2**n
                t_u, _ = noise.dyadic_floor(t, n, 1.0)
                assert t_u == min(k, 2**n - 1) / 2**n


class TestSmoothedNoise:
    def test_zero_initial_interval(self, small_family):
        sn = noise.SmoothedNoise(small_family, 3)
        tab = sn.derivative_table()
        assert np.all(tab[:, :, 0] == 0.0)

    def test_adaptedness_shift(self, small_family):
        sn = noise.SmoothedNoise(small_family, 3)
        coarse = small_family.coarse_increments(3)
        tab = sn.derivative_table()
        assert np.allclose(tab[:, :, 1:], 8.0 * coarse[:, :3, :-1])

    def test_future_increments_do_not_matter(self, small_family):
        # w^n at time t only reads increments with right endpoint ≤ dyadic floor
        sn = noise.SmoothedNoise(small_family, 3)
        t = 0.4  # inside Δ_3 = [3/8, 4/8): uses increments of Δ_0..Δ_2 only
        vals = sn.derivative_at(t)
        n_used = int(0.4 * 8)  # intervals with index < 3 feed the value at Δ_3
        coarse = small_family.coarse_increments(3)
        assert np.allclose(vals, 8.0 * coarse[:, :3, n_used - 1])

    def test_mode_truncation(self, small_family):
        sn = noise.SmoothedNoise(small_family, 2)
        assert sn.derivative_table().shape[1] == 2

    def test_level_validation(self, small_family):
        with pytest.raises(ValueError):
            noise.SmoothedNoise(small_family, 9)  # exceeds q=8


class TestSmoothedField:
    def test_zero_before_first_interval(self, small_family):
        grid = lat.TorusGrid(4.0, 8)
        w = lat.make_weights(grid, 1.0)
        mm = lat.ModeIndexMap(grid, w, n_modes=8)
        sn = noise.SmoothedNoise(small_family, 3)
        f = noise.smoothed_field(sn, 0.05, mm, w)
        assert np.all(f.values == 0.0)

    def test_single_mode_level_one(self, small_family):
        grid = lat.TorusGrid(4.0, 8)
        w = lat.make_weights(grid, 1.0)
        mm = lat.ModeIndexMap(grid, w, n_modes=4)
        sn = noise.SmoothedNoise(small_family, 1)
        f = noise.smoothed_field(sn, 0.75, mm, w)
        w1 = small_family.coarse_increments(1)[0, 0, 0]
        expected = (2.0 / small_family.T) * w1 * mm.mode_field(1).values
        assert np.allclose(f.values, expected)

    def test_parseval(self, small_family):
        grid = lat.TorusGrid(4.0, 8)
        w = lat.make_weights(grid, 1.0)
        mm = lat.ModeIndexMap(grid, w, n_modes=8)
        sn = noise.SmoothedNoise(small_family, 3)
        t = 0.6
        f = noise.smoothed_field(sn, t, mm, w)
        coeffs = sn.derivative_at(t)[0]
        norm_spec = np.sqrt(lat.h_inner_spectral(f, f, w))
        assert norm_spec == pytest.approx(np.sqrt(np.sum(coeffs**2)), abs=1e-10)


class TestLocalization:
    def test_alpha_domain(self, small_family):
        with pytest.raises(ValueError):
            noise.localization_indicator(small_family, 3, 1.0, 1.0)

    def test_zero_increments_true(self):
        fam = noise.sample_family(seed=1, J=4, q=6, T=1.0, n_replicas=1)
        zeros = np.zeros((4, 2**3))
        assert noise.localization_indicator(fam, 3, 1.0, 1.25, coarse=zeros)

    def test_threshold_crossing(self):
        fam = noise.sample_family(seed=1, J=4, q=6, T=1.0, n_replicas=1)
        n = 3
        coarse = np.zeros((4, 2**n))
        coarse[1, 2] = 2 * 1.25 * np.sqrt(n) * 2.0 ** (-n / 2)
        assert not noise.localization_indicator(fam, n, 1.0, 1.25, coarse=coarse)

    def test_decreasing_in_t(self, small_family):
        n = 4
        for r in range(small_family.n_replicas):
            coarse = small_family.coarse_increments(n, r, r + 1)[0]
            vals = [
                noise.localization_indicator(small_family, n, t, 1.25, coarse=coarse)
                for t in (0.2, 0.5, 0.8, 1.0)
            ]
            # indicator at larger t implies indicator at smaller t
            for a, b in zip(vals[:-1], vals[1:]):
                assert a or not b


class TestControlPath:
    def test_norm(self):
        h = noise.ControlPath(coeffs=np.ones((3, 8)), T=2.0)
        assert h.norm_squared() == pytest.approx(3 * 2.0)

    def test_validation(self):
        with pytest.raises(ValueError):
            noise.ControlPath(coeffs=np.full((2, 4), np.inf), T=1.0)


class TestProjectShift:
    def test_mode_truncation(self):
        f = np.zeros((5, 64))
        f[4] = 1.0  # mode j = 5 with n = 4: dropped
        out = noise.project_shift(f, 4, 1.0, 1.0)
        assert np.all(out[4] == 0.0)

    def test_fixed_point_away_from_clamp(self):
        # constant-in-time coarse functions are invariant except near t
        f = np.zeros((3, 64))
        f[1] = 0.7
        out = noise.project_shift(f, 2, 1.0, 1.0)
        assert np.allclose(out[1], 0.7)
        assert np.allclose(out[0], 0.0)

    def test_operator_norm_random(self):
        rng = np.random.default_rng(17)
        for _ in range(100):
            f = rng.standard_normal((6, 128))
            out = noise.project_shift(f, 3, 0.9, 1.0)
            ratio = np.sqrt(np.sum(out**2) / np.sum(f**2))
            assert ratio <= 1.0 + 1e-10

    def test_shape_validation(self):
        with pytest.raises(ValueError):
            noise.project_shift(np.zeros((2, 48)), 5, 1.0, 1.0)

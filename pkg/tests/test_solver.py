"""Tests for the time-stepping engine and its five variants."""
import numpy as np
import pytest

from rieszwave.lattice import Box, Field, TorusGrid, make_weights
from rieszwave.noise import ControlPath, SmoothedNoise, sample_family
from rieszwave.solver import (
    CoefficientSet,
    DivergenceError,
    PathSolution,
    ScalarFn,
    SimConfig,
    mode_forcing_scatter,
    picard_iterate,
    solve_regularized,
    solve_skeleton,
    solve_spde,
    solve_truncated,
)
from rieszwave.wavekernel import InitialData, initial_field

N = 16
GRID = TorusGrid(4.0, N)
WEIGHTS = make_weights(GRID, 1.0)
BOX = Box((1.7, 1.7, 1.7), (2.3, 2.3, 2.3))
ZERO_FN = ScalarFn.zero()


def _bump_initial(scale=1.0, vel=0.3):
    x = GRID.axis()
    X, Y, Z = np.meshgrid(x, x, x, indexing="ij")
    r2 = (X - 2.0) ** 2 + (Y - 2.0) ** 2 + (Z - 2.0) ** 2
    bump = scale * np.exp(-r2 / (2 * 0.36**2))
    return InitialData(Field(GRID, bump), Field(GRID, vel * bump))


def _zero_initial():
    z = Field(GRID, np.zeros((N,) * 3))
    return InitialData(z, z)


def _config(coeffs, initial, *, T=0.5, q=7, n=3, k_max=2, seed=3, **kw):
    return SimConfig(
        GRID, WEIGHTS, coeffs, initial, BOX, T=T, q=q, n=n, k_max=k_max, seed=seed, **kw
    )


def _crop(values, sol):
    (x0, x1), (y0, y1), (z0, z1) = sol.box_slices
    return values[x0:x1, y0:y1, z0:z1]


class TestScalarFn:
    def test_affine(self):
        f = ScalarFn.affine(1.5, -2.0)
        assert f(2.0) == 1.5 - 4.0
        assert f.lipschitz == 2.0
        assert f.is_affine and not f.is_constant

    def test_constant(self):
        f = ScalarFn.constant(0.7)
        x = np.linspace(-1, 1, 5)
        assert np.all(f(x) == 0.7)
        assert f.lipschitz == 0.0 and f.is_constant

    def test_sine(self):
        f = ScalarFn.sine(2.0, 3.0)
        assert f(0.5) == pytest.approx(2.0 * np.sin(1.5))
        assert f.lipschitz == 6.0 and not f.is_affine

    def test_clipped_linear(self):
        f = ScalarFn.clipped_linear(2.0, 1.0)
        assert f(10.0) == 1.0 and f(-10.0) == -1.0 and f(0.25) == 0.5
        assert f.lipschitz == 2.0
        with pytest.raises(ValueError):
            ScalarFn.clipped_linear(1.0, -1.0)


class TestCoefficientSet:
    def test_affine_requirement(self):
        cs = CoefficientSet(
            ZERO_FN, ScalarFn.sine(1, 1), ZERO_FN, ZERO_FN, requires_affine_B=True
        )
        with pytest.raises(ValueError):
            cs.validate()
        CoefficientSet(
            ZERO_FN, ScalarFn.affine(1, 2), ZERO_FN, ZERO_FN, requires_affine_B=True
        ).validate()

    def test_require_affine_helper(self):
        cs = CoefficientSet(ScalarFn.sine(1, 1), ZERO_FN, ZERO_FN, ZERO_FN)
        with pytest.raises(ValueError):
            cs.require_affine("A")
        cs.require_affine("D")


class TestSimConfigValidation:
    def test_shielding(self):
        coeffs = CoefficientSet(ZERO_FN, ZERO_FN, ZERO_FN, ZERO_FN)
        with pytest.raises(ValueError, match="domain too small"):
            _config(coeffs, _zero_initial(), T=2.0)

    def test_level_gap(self):
        coeffs = CoefficientSet(ZERO_FN, ZERO_FN, ZERO_FN, ZERO_FN)
        with pytest.raises(ValueError, match="q >= n"):
            _config(coeffs, _zero_initial(), q=5, n=4)

    def test_family_consistency(self):
        coeffs = CoefficientSet(ZERO_FN, ZERO_FN, ZERO_FN, ZERO_FN)
        cfg = _config(coeffs, _zero_initial())
        fam = sample_family(3, cfg.J + 1, cfg.q, cfg.T)
        with pytest.raises(ValueError, match="inconsistent"):
            solve_spde(cfg, fam)


class TestHomogeneous:
    def test_matches_free_field(self):
        coeffs = CoefficientSet(ZERO_FN, ZERO_FN, ZERO_FN, ZERO_FN)
        init = _bump_initial()
        cfg = _config(coeffs, init)
        fam = sample_family(3, cfg.J, cfg.q, cfg.T, n_replicas=1)
        sol = solve_spde(cfg, fam, snapshot_times=[0.25, 0.5])
        for it, t in enumerate(sol.times):
            ref = _crop(initial_field(init, t).values, sol)
            assert np.max(np.abs(sol.data[0, it] - ref)) < 1e-10


class TestConstantDrift:
    def test_quadratic_growth(self):
        coeffs = CoefficientSet(ZERO_FN, ZERO_FN, ZERO_FN, ScalarFn.constant(0.7))
        cfg = _config(coeffs, _zero_initial(), q=8)
        sol = solve_skeleton(cfg, snapshot_times=[0.25, 0.5])
        for it, t in enumerate(sol.times):
            assert np.max(np.abs(sol.data[0, it] - 0.7 * t**2 / 2)) < 1e-8


class TestSkeleton:
    def _control(self, cfg, n_modes=5, seed=0):
        rng = np.random.default_rng(seed)
        h = np.zeros((cfg.J, cfg.n_steps))
        h[:n_modes] = rng.normal(size=(n_modes, cfg.n_steps))
        return ControlPath(h, cfg.T)

    def test_reduces_to_free_field(self):
        coeffs = CoefficientSet(ZERO_FN, ZERO_FN, ScalarFn.affine(1.0, 0.0), ZERO_FN)
        init = _bump_initial()
        cfg = _config(coeffs, init)
        sol = solve_skeleton(cfg, snapshot_times=[0.5])
        ref = _crop(initial_field(init, 0.5).values, sol)
        assert np.max(np.abs(sol.data[0, 0] - ref)) < 1e-10

    def test_linearity_in_control(self):
        init = _zero_initial()
        coeffs = CoefficientSet(ZERO_FN, ZERO_FN, ScalarFn.constant(1.0), ZERO_FN)
        cfg1 = _config(coeffs, init)
        ctrl = self._control(cfg1)
        cfg1.control = ctrl
        cfg2 = _config(coeffs, init, control=ControlPath(2.0 * ctrl.coeffs, cfg1.T))
        s1 = solve_skeleton(cfg1, snapshot_times=[0.5])
        s2 = solve_skeleton(cfg2, snapshot_times=[0.5])
        assert np.max(np.abs(s2.data - 2.0 * s1.data)) < 1e-10

    def test_matches_zero_noise_spde(self):
        init = _bump_initial()
        coeffs = CoefficientSet(
            ZERO_FN, ZERO_FN, ScalarFn.affine(1.0, 0.2), ScalarFn.constant(0.1)
        )
        cfg = _config(coeffs, init)
        cfg.control = self._control(cfg)
        fam = sample_family(3, cfg.J, cfg.q, cfg.T, n_replicas=1)
        sk = solve_skeleton(cfg, snapshot_times=[0.5])
        sp = solve_spde(cfg, fam, snapshot_times=[0.5])
        assert np.max(np.abs(sk.data[0] - sp.data[0])) < 1e-10


class TestRegularized:
    COEFFS = CoefficientSet(ZERO_FN, ScalarFn.affine(0.5, 0.3), ZERO_FN, ZERO_FN)

    def test_discrepancy_decreases_with_n(self):
        errs = []
        for n in (2, 3, 4):
            cfg = _config(self.COEFFS, _bump_initial(), n=n, seed=5)
            fam = sample_family(5, cfg.J, cfg.q, cfg.T, n_replicas=4)
            full = solve_spde(cfg, fam, snapshot_times=[0.5])
            reg = solve_regularized(cfg, fam, SmoothedNoise(fam, n), snapshot_times=[0.5])
            errs.append(np.sqrt(np.mean((full.data - reg.data) ** 2)))
        assert errs[0] > errs[1] > errs[2]

    def test_first_interval_is_drift_only(self):
        # the smoothed derivative vanishes on the first coarse interval,
        # so with A=0 the dynamics there see drift only
        coeffs = CoefficientSet(
            ZERO_FN, ScalarFn.affine(0.5, 0.3), ZERO_FN, ScalarFn.constant(0.2)
        )
        cfg = _config(coeffs, _zero_initial(), n=3, seed=5)
        fam = sample_family(5, cfg.J, cfg.q, cfg.T, n_replicas=1)
        t = cfg.T / 2**cfg.n * 0.75
        t = round(t / cfg.delta) * cfg.delta
        reg = solve_regularized(cfg, fam, SmoothedNoise(fam, 3), snapshot_times=[t])
        assert np.max(np.abs(reg.data[0, 0] - 0.2 * t**2 / 2)) < 1e-8

    def test_level_mismatch_rejected(self):
        cfg = _config(self.COEFFS, _zero_initial(), n=3, seed=5)
        fam = sample_family(5, cfg.J, cfg.q, cfg.T, n_replicas=1)
        with pytest.raises(ValueError, match="level"):
            solve_regularized(cfg, fam, SmoothedNoise(fam, 2))

    def test_coupling_digest_shared(self):
        cfg = _config(self.COEFFS, _bump_initial(), n=3, seed=5)
        fam = sample_family(5, cfg.J, cfg.q, cfg.T, n_replicas=2)
        full = solve_spde(cfg, fam, snapshot_times=[0.5])
        reg = solve_regularized(cfg, fam, SmoothedNoise(fam, 3), snapshot_times=[0.5])
        assert full.meta["increment_digest"] == reg.meta["increment_digest"]


class TestTruncated:
    COEFFS = CoefficientSet(
        ScalarFn.affine(0.3, 0.1), ScalarFn.affine(0.5, 0.3), ZERO_FN, ZERO_FN
    )

    def test_early_time_equals_free_field(self):
        init = _bump_initial()
        cfg = _config(self.COEFFS, init, n=3, seed=5)
        fam = sample_family(5, cfg.J, cfg.q, cfg.T, n_replicas=1)
        sn = SmoothedNoise(fam, 3)
        t = cfg.T / 2**cfg.n / 2.0
        for variant in ("X_trunc", "Xn_minus"):
            sol = solve_truncated(cfg, fam, sn, variant, snapshot_times=[t])
            ref = _crop(initial_field(init, t).values, sol)
            assert np.max(np.abs(sol.data[0, 0] - ref)) < 1e-10

    def test_gating_freezes_sources(self):
        # gated run to t and full run to the predecessor share every source,
        # so rotating the gated snapshot back reproduces nothing new: the
        # gated field differs from the full field only through [t_n, t] sources
        cfg = _config(self.COEFFS, _bump_initial(), n=3, seed=5)
        fam = sample_family(5, cfg.J, cfg.q, cfg.T, n_replicas=2)
        sn = SmoothedNoise(fam, 3)
        full = solve_spde(cfg, fam, snapshot_times=[0.5])
        gated = solve_truncated(cfg, fam, sn, "X_trunc", snapshot_times=[0.5])
        diff = np.sqrt(np.mean((full.data - gated.data) ** 2))
        assert 0 < diff < np.sqrt(np.mean(full.data**2)) + 1.0

    def test_bad_variant(self):
        cfg = _config(self.COEFFS, _zero_initial(), n=3, seed=5)
        fam = sample_family(5, cfg.J, cfg.q, cfg.T, n_replicas=1)
        with pytest.raises(ValueError, match="variant"):
            solve_truncated(cfg, fam, SmoothedNoise(fam, 3), "bogus")


class TestPicard:
    def test_m0_is_localized_free_field(self):
        init = _bump_initial()
        coeffs = CoefficientSet(ZERO_FN, ZERO_FN, ZERO_FN, ZERO_FN)
        cfg = _config(coeffs, init, n=3, seed=5)
        fam = sample_family(5, cfg.J, cfg.q, cfg.T, n_replicas=1)
        p0 = picard_iterate(cfg, fam, SmoothedNoise(fam, 3), 0)
        dist = BOX.distance_grid(GRID)
        for it, t in enumerate(p0.times):
            mask = (dist <= cfg.T - t + 1e-12).astype(float)
            ref = _crop(initial_field(init, t).values * mask, p0)
            assert np.max(np.abs(p0.data[0, it] - ref)) < 1e-10

    def test_zero_coefficients_fixed_point(self):
        coeffs = CoefficientSet(ZERO_FN, ZERO_FN, ZERO_FN, ZERO_FN)
        cfg = _config(coeffs, _bump_initial(), n=3, seed=5)
        fam = sample_family(5, cfg.J, cfg.q, cfg.T, n_replicas=1)
        sn = SmoothedNoise(fam, 3)
        p0 = picard_iterate(cfg, fam, sn, 0)
        p2 = picard_iterate(cfg, fam, sn, 2)
        assert np.max(np.abs(p0.data - p2.data)) < 1e-12

    def test_geometric_contraction(self):
        coeffs = CoefficientSet(
            ScalarFn.affine(0.2, 0.3),
            ScalarFn.affine(0.1, 0.4),
            ZERO_FN,
            ScalarFn.affine(0.0, 0.5),
        )
        cfg = _config(coeffs, _bump_initial(), n=3, seed=5)
        fam = sample_family(5, cfg.J, cfg.q, cfg.T, n_replicas=1)
        sn = SmoothedNoise(fam, 3)
        sols = [picard_iterate(cfg, fam, sn, m) for m in range(5)]
        diffs = [
            np.max(np.abs(sols[m].data - sols[m - 1].data)) for m in range(1, 5)
        ]
        assert diffs[1] < 0.3 * diffs[0]
        assert diffs[2] < 0.3 * diffs[1]
        assert diffs[3] < 0.3 * diffs[2]

    def test_minus_variant_runs(self):
        coeffs = CoefficientSet(
            ScalarFn.affine(0.2, 0.3), ScalarFn.affine(0.1, 0.4), ZERO_FN, ZERO_FN
        )
        cfg = _config(coeffs, _bump_initial(), n=3, seed=5)
        fam = sample_family(5, cfg.J, cfg.q, cfg.T, n_replicas=1)
        sn = SmoothedNoise(fam, 3)
        pm = picard_iterate(cfg, fam, sn, 2, variant="minus")
        assert pm.data.shape[1] == 2**cfg.n + 1
        assert np.all(np.isfinite(pm.data))

    def test_negative_m_rejected(self):
        coeffs = CoefficientSet(ZERO_FN, ZERO_FN, ZERO_FN, ZERO_FN)
        cfg = _config(coeffs, _zero_initial(), n=3, seed=5)
        fam = sample_family(5, cfg.J, cfg.q, cfg.T, n_replicas=1)
        with pytest.raises(ValueError):
            picard_iterate(cfg, fam, SmoothedNoise(fam, 3), -1)


class TestNoiseNormalization:
    def test_variance_matches_semidiscrete_prediction(self):
        # additive noise: Var u(t,x) has a closed spectral form under the
        # impulse scheme; check the Monte Carlo estimate against it
        coeffs = CoefficientSet(ScalarFn.constant(1.0), ZERO_FN, ZERO_FN, ZERO_FN)
        cfg = _config(coeffs, _zero_initial(), q=7, k_max=3, seed=11)
        fam = sample_family(11, cfg.J, cfg.q, cfg.T, n_replicas=300)
        t = 0.5
        sol = solve_spde(cfg, fam, snapshot_times=[t])
        emp = np.mean(sol.data[:, 0] ** 2)

        scat = mode_forcing_scatter(cfg.mode_map, WEIGHTS)
        spec = np.asarray(scat.todense()).reshape(cfg.J, N, N, N // 2 + 1)
        fields = np.fft.irfftn(spec, s=(N,) * 3, axes=(1, 2, 3))
        om = 2 * np.pi / GRID.side_length * np.array(
            [np.linalg.norm(cfg.mode_map.k_of(j)) for j in range(1, cfg.J + 1)]
        )
        steps = np.arange(cfg.n_steps) * cfg.delta
        resp2 = np.empty(cfg.J)
        for j in range(cfg.J):
            lag = t - steps
            lag = lag[lag > 0]
            if om[j] > 0:
                resp2[j] = np.sum((np.sin(om[j] * lag) / om[j]) ** 2)
            else:
                resp2[j] = np.sum(lag**2)
        pred_field = np.einsum("j,jxyz->xyz", cfg.delta * resp2, fields**2)
        sol_pred = np.mean(_crop(pred_field, sol))
        assert emp == pytest.approx(sol_pred, rel=0.15)

    def test_variance_approaches_green_riesz_integral_from_below(self):
        # additive noise, zero data: E u(t,x)^2 equals the Green-Riesz
        # double integral in the continuum limit and the mode/lattice
        # truncation only removes spectral mass, so the estimate increases
        # with k_max while staying below the closed form
        from rieszwave.wavekernel import mu1_diagonal_closed_form

        coeffs = CoefficientSet(ScalarFn.constant(1.0), ZERO_FN, ZERO_FN, ZERO_FN)
        t = 0.5
        exact = mu1_diagonal_closed_form(t, 1.0)
        means, ses = {}, {}
        for k_max in (3, 5):
            cfg = _config(coeffs, _zero_initial(), q=8, k_max=k_max, seed=21)
            fam = sample_family(21, cfg.J, cfg.q, cfg.T, n_replicas=400)
            sol = solve_spde(cfg, fam, snapshot_times=[t])
            center = sol.data[:, 0, sol.data.shape[2] // 2,
                              sol.data.shape[3] // 2, sol.data.shape[4] // 2]
            sq = center**2
            means[k_max] = float(np.mean(sq))
            ses[k_max] = float(np.std(sq) / np.sqrt(sq.size))
        assert means[5] > means[3]
        for k_max in (3, 5):
            assert means[k_max] < exact + 3 * ses[k_max]
        # the finer truncation recovers most of the closed-form value
        assert means[5] > 0.6 * exact

    def test_finite_propagation_speed(self):
        # Gaussian data with nominal support radius 5 sigma is band-limited
        # to machine level at this resolution, so the cone is sharp
        grid = TorusGrid(4.0, 32)
        weights = make_weights(grid, 1.0)
        x = grid.axis()
        X, Y, Z = np.meshgrid(x, x, x, indexing="ij")
        r2 = (X - 2.0) ** 2 + (Y - 2.0) ** 2 + (Z - 2.0) ** 2
        sig = 0.25
        bump = np.exp(-r2 / (2 * sig**2))
        init = InitialData(Field(grid, bump), Field(grid, np.zeros((32,) * 3)))
        coeffs = CoefficientSet(ZERO_FN, ZERO_FN, ZERO_FN, ZERO_FN)
        cfg = SimConfig(
            grid, weights, coeffs, init, BOX, T=0.5, q=5, n=2, k_max=2, seed=1
        )
        sol = solve_skeleton(cfg, snapshot_times=[0.25])
        (x0, x1), (y0, y1), (z0, z1) = sol.box_slices
        dist = np.sqrt(r2[x0:x1, y0:y1, z0:z1])
        outside = sol.data[0, 0][dist > 5 * sig + 0.25 + 2 * grid.spacing]
        assert outside.size > 0
        assert np.max(np.abs(outside)) < 1e-6


class TestStepConvergence:
    def test_order_at_least_08(self):
        # affine drift and control, deterministic dynamics: left-point
        # evaluation converges at first order in the step size
        coeffs = CoefficientSet(
            ZERO_FN, ZERO_FN, ScalarFn.affine(0.3, 0.2), ScalarFn.affine(0.2, 0.4)
        )
        fields = {}
        for q in (5, 6, 7, 9):
            cfg = _config(coeffs, _bump_initial(), q=q, n=2, seed=13)
            steps = np.arange(cfg.n_steps) * cfg.delta
            h = np.zeros((cfg.J, cfg.n_steps))
            h[0] = np.sin(3.0 * steps)
            h[3] = np.cos(5.0 * steps)
            cfg.control = ControlPath(h, cfg.T)
            sol = solve_skeleton(cfg, snapshot_times=[0.5])
            fields[q] = sol.data[0, 0]
        errs = [np.max(np.abs(fields[q] - fields[9])) for q in (5, 6, 7)]
        fit = np.polyfit(np.log2([2.0**-5, 2.0**-6, 2.0**-7]), np.log2(errs), 1)
        assert fit[0] >= 0.8


class TestDivergenceGuard:
    def test_blowup_raises(self):
        # exponential drift with a huge rate overflows the cap within T
        coeffs = CoefficientSet(
            ZERO_FN, ZERO_FN, ZERO_FN, ScalarFn.affine(1.0, 4.0e4)
        )
        cfg = _config(coeffs, _bump_initial(), q=7)
        with pytest.raises(DivergenceError):
            solve_skeleton(cfg, snapshot_times=[0.5])


class TestPathSolutionIO:
    def test_roundtrip(self, tmp_path):
        coeffs = CoefficientSet(ZERO_FN, ZERO_FN, ZERO_FN, ScalarFn.constant(0.3))
        cfg = _config(coeffs, _bump_initial(), n=3, seed=5)
        fam = sample_family(5, cfg.J, cfg.q, cfg.T, n_replicas=2)
        sol = solve_spde(cfg, fam, snapshot_times=[0.25, 0.5])
        prefix = str(tmp_path / "run")
        sol.save(prefix)
        back = PathSolution.load(prefix)
        assert np.array_equal(back.times, sol.times)
        assert np.array_equal(back.data, sol.data)
        assert back.box_slices == sol.box_slices
        assert np.array_equal(back.loc, sol.loc)
        assert back.meta["increment_digest"] == sol.meta["increment_digest"]

    def test_rejects_unsorted_times(self):
        with pytest.raises(ValueError, match="sorted"):
            PathSolution(
                times=np.array([0.5, 0.25]),
                data=np.zeros((1, 2, 2, 2, 2)),
                box_slices=((0, 2),) * 3,
                grid=GRID,
            )

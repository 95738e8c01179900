import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from afspan import l2core as l2
from afspan.l2core import AffineAtom, GridFunction, GridSpec

GRID = l2.DEFAULT_GRID
STEP = GRID.step


def const_zero(grid=GRID):
    return GridFunction(grid.start, grid.step, np.zeros(grid.count))


class TestTypes:
    def test_grid_function_rejects_bad_inputs(self):
        with pytest.raises(ValueError):
            GridFunction(0.0, 0.0, [1.0, 2.0])
        with pytest.raises(ValueError):
            GridFunction(0.0, -1.0, [1.0])
        with pytest.raises(ValueError):
            GridFunction(0.0, 1.0, [])
        with pytest.raises(ValueError):
            GridFunction(0.0, 1.0, [1.0, np.nan])

    def test_samples_are_immutable(self):
        f = l2.gaussian()
        with pytest.raises(ValueError):
            f.samples[0] = 1.0

    def test_affine_atom_rejects_zero_alpha(self):
        with pytest.raises(ValueError):
            AffineAtom(0.0, 1.0)
        with pytest.raises(ValueError):
            AffineAtom(1e-13, 0.0)
        AffineAtom(-2.0, 3.0)

    def test_grid_spec_end(self):
        g = GridSpec(-1.0, 0.5, 5)
        assert g.end == 1.0
        assert np.allclose(g.points(), [-1.0, -0.5, 0.0, 0.5, 1.0])


class TestInnerProduct:
    def test_zero_function(self):
        assert l2.inner_product(const_zero(), l2.gaussian()) == 0.0

    def test_hat_self_energy(self):
        # integral (x+2)^2 on [-2,-1] plus integral x^2 on [-1,0] equals 2/3
        hat = l2.hat_from_relu()
        assert l2.inner_product(hat, hat) == pytest.approx(2.0 / 3.0, abs=1e-5)

    def test_indicator_overlap(self):
        # overlap of [0,1] and [0.5,1.5] has length 1/2; sampled indicators
        # pick up one boundary ramp cell per edge
        v = l2.inner_product(l2.indicator(0, 1), l2.indicator(0.5, 1.5))
        assert v == pytest.approx(0.5, abs=2 * STEP)

    def test_resampling_direction_documented(self):
        f = l2.gaussian(GridSpec(-4.0, 2.0 ** -6, 512))
        g = l2.gaussian(GridSpec(-8.0, 2.0 ** -5, 512))
        assert l2.inner_product(f, g) == pytest.approx(l2.inner_product(g, f), rel=1e-3)

    @settings(deadline=None, max_examples=50)
    @given(
        st.integers(0, 2 ** 31),
        st.floats(-10, 10, allow_nan=False),
        st.floats(-10, 10, allow_nan=False),
    )
    def test_bilinearity(self, seed, a, b):
        rng = np.random.default_rng(seed)
        grid = GridSpec(-1.0, 1.0 / 128, 256)
        f, g, h = (
            GridFunction(grid.start, grid.step, rng.standard_normal(grid.count))
            for _ in range(3)
        )
        combo = GridFunction(grid.start, grid.step, a * f.samples + b * g.samples)
        lhs = l2.inner_product(combo, h)
        rhs = a * l2.inner_product(f, h) + b * l2.inner_product(g, h)
        bound = 1e-10 * (abs(a) * l2.l2_norm(f) + abs(b) * l2.l2_norm(g)) * l2.l2_norm(h)
        assert abs(lhs - rhs) <= bound + 1e-14

    @settings(deadline=None, max_examples=50)
    @given(st.integers(0, 2 ** 31))
    def test_cauchy_schwarz(self, seed):
        rng = np.random.default_rng(seed)
        grid = GridSpec(0.0, 1.0 / 64, 128)
        f = GridFunction(grid.start, grid.step, rng.standard_normal(grid.count))
        g = GridFunction(grid.start, grid.step, rng.standard_normal(grid.count))
        assert l2.inner_product(f, g) <= l2.l2_norm(f) * l2.l2_norm(g) + 1e-10


class TestNorm:
    def test_zero(self):
        assert l2.l2_norm(const_zero()) == 0.0

    def test_unit_indicator(self):
        assert l2.l2_norm(l2.indicator(0, 1)) == pytest.approx(1.0, abs=STEP)

    def test_hat(self):
        assert l2.l2_norm(l2.hat_from_relu()) == pytest.approx(np.sqrt(2.0 / 3.0), abs=1e-5)


class TestPullback:
    def test_identity(self):
        f = l2.gaussian()
        g = l2.affine_pullback(f, AffineAtom(1.0, 0.0))
        assert np.max(np.abs(g.samples - f.samples)) <= 1e-12

    def test_indicator_halving(self):
        g = l2.affine_pullback(l2.indicator(0, 1), AffineAtom(2.0, 0.0))
        expect = l2.indicator(0, 0.5)
        # at most one cell of interpolation smear at each edge
        assert np.sum(np.abs(g.samples - expect.samples)) <= 2.0

    def test_reflection(self):
        f = l2.hat_from_relu()
        refl = l2.affine_pullback(f, AffineAtom(-1.0, 0.0))
        x = f.x()
        expect = np.interp(-x, x, f.samples, left=0, right=0)
        assert np.max(np.abs(refl.samples - expect)) <= 1e-12

    def test_composition_matches_direct_map(self):
        # fine grid keeps the double-interpolation error below 1e-6
        grid = GridSpec(-8.0, 2.0 ** -11, 2 ** 15)
        f = l2.gaussian(grid)
        a1, t1 = 1.3, 0.4
        a2, t2 = 0.7, -0.2
        inner = l2.affine_pullback(f, AffineAtom(a1, t1), grid)
        composed = l2.affine_pullback(inner, AffineAtom(a2, t2), grid)
        direct = np.exp(-np.pi * (a1 * (a2 * grid.points() - t2) - t1) ** 2)
        assert np.max(np.abs(composed.samples - direct)) <= 1e-6

    def test_l2_scaling_law(self):
        f = l2.gaussian()
        for alpha in (2.0, 0.5, -3.0):
            g = l2.affine_pullback(f, AffineAtom(alpha, 0.0))
            assert l2.l2_norm(g) == pytest.approx(
                abs(alpha) ** -0.5 * l2.l2_norm(f), rel=1e-3
            )


class TestHat:
    def test_knot_values(self):
        grid = GridSpec(-4.0, 2.0 ** -8, 2048)
        hat = l2.hat_from_relu(grid)
        x = hat.x()
        assert hat.samples[np.argmin(np.abs(x + 1.0))] == pytest.approx(1.0, abs=1e-12)
        assert hat.samples[np.argmin(np.abs(x + 0.5))] == pytest.approx(0.5, abs=1e-12)
        assert np.all(hat.samples[x >= 0.0] == 0.0)
        assert np.all(hat.samples[x <= -2.0] == 0.0)

    def test_matches_piecewise_formula(self):
        grid = GridSpec(-3.0, 2.0 ** -9, 2 ** 11)
        hat = l2.hat_from_relu(grid)
        x = hat.x()
        formula = np.where(x <= -2, 0.0, np.where(x <= -1, x + 2, np.where(x <= 0, -x, 0.0)))
        assert np.max(np.abs(hat.samples - formula)) <= 1e-12


class TestFourier:
    def test_gaussian_closed_form(self):
        # transform of exp(-pi x^2) is exp(-pi xi^2); example grid [-12,12] at 2^-8
        f = l2.gaussian(GridSpec(-12.0, 2.0 ** -8, 24 * 256))
        diag = l2.fourier_transform(f)
        freqs = diag.freqs()
        window = np.abs(freqs) <= 4.0
        exact = np.exp(-np.pi * freqs[window] ** 2)
        credible = exact >= 1e-3 * exact.max()
        rel = np.abs(diag.magnitudes[window][credible] - exact[credible]) / exact[credible]
        assert rel.max() <= 1e-3

    def test_zero_function(self):
        diag = l2.fourier_transform(const_zero())
        assert np.all(diag.magnitudes == 0.0)
        assert diag.zero_fraction == 1.0

    def test_sinc_first_zero(self):
        # transform of 1_[-1/2,1/2] is sin(pi xi)/(pi xi), first zero at xi = 1
        diag = l2.fourier_transform(l2.indicator(-0.5, 0.5))
        freqs = diag.freqs()
        sel = (freqs > 0.5) & (freqs < 1.5)
        zero_at = freqs[sel][np.argmin(diag.magnitudes[sel])]
        assert abs(zero_at - 1.0) <= diag.freq_step

    def test_too_few_samples(self):
        with pytest.raises(ValueError):
            l2.fourier_transform(GridFunction(0.0, 1.0, [1.0]))


class TestZeroSetFraction:
    def test_gaussian_has_no_zeros_on_core_band(self):
        diag = l2.fourier_transform(l2.gaussian(), zero_threshold=1e-6)
        assert l2.zero_set_fraction(diag, (-1.0, 1.0)) == 0.0

    def test_zero_function_is_all_zeros(self):
        diag = l2.fourier_transform(const_zero())
        assert l2.zero_set_fraction(diag, (-1.0, 1.0)) == 1.0

    def test_bandlimited_gap(self):
        diag = l2.fourier_transform(l2.bandlimited(1.0, 2.0))
        assert l2.zero_set_fraction(diag, (-0.5, 0.5)) == 1.0
        assert l2.zero_set_fraction(diag, (1.0, 2.0)) == 0.0

    def test_bad_windows(self):
        diag = l2.fourier_transform(l2.gaussian())
        with pytest.raises(ValueError):
            l2.zero_set_fraction(diag, (1.0, 1.0))
        with pytest.raises(ValueError):
            l2.zero_set_fraction(diag, (0.0, 1e9))


class TestScalingIdentity:
    def test_identity_alpha(self):
        report = l2.check_scaling_identity(l2.gaussian(), 1.0)
        assert report.max_rel_err <= 1e-12

    def test_gaussian_dilation(self):
        report = l2.check_scaling_identity(l2.gaussian(), 2.0)
        assert report.max_rel_err <= 1e-3

    def test_reflection(self):
        report = l2.check_scaling_identity(l2.gaussian(), -1.0)
        assert report.max_rel_err <= 1e-10

    def test_zero_alpha_rejected(self):
        with pytest.raises(ValueError):
            l2.check_scaling_identity(l2.gaussian(), 0.0)


class TestPlancherel:
    def test_energy_matches(self):
        for f in (l2.gaussian(), l2.hat_from_relu()):
            time_energy = l2.inner_product(f, f)
            freq_energy = l2.spectral_energy(l2.fourier_transform(f))
            assert freq_energy == pytest.approx(time_energy, rel=1e-3)


class TestSerialization:
    def test_binary_round_trip(self, tmp_path):
        f = l2.hat_from_relu(GridSpec(-3.0, 0.125, 48))
        path = tmp_path / "hat.gf"
        l2.save_grid_function(f, path)
        g = l2.load_grid_function(path)
        assert g.grid_start == f.grid_start
        assert g.step == f.step
        assert np.array_equal(g.samples, f.samples)
        assert path.read_bytes().startswith(b"AFSPAN-GF-v1\x00\x00\x00\x00")

    def test_text_round_trip(self, tmp_path):
        f = l2.gaussian(GridSpec(-2.0, 0.25, 17))
        path = tmp_path / "g.txt"
        l2.save_grid_function(f, path, fmt="text")
        g = l2.load_grid_function(path)
        assert np.allclose(g.samples, f.samples, atol=0, rtol=0)
        assert g.step == pytest.approx(f.step, rel=1e-12)

    def test_nonuniform_text_rejected(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("0 1\n1 2\n3 4\n")
        with pytest.raises(ValueError):
            l2.load_grid_function(path)

    def test_truncated_binary_rejected(self, tmp_path):
        path = tmp_path / "bad.gf"
        path.write_bytes(b"AFSPAN-GF-v1\x00\x00\x00\x00" + b"\x00" * 12)
        with pytest.raises(ValueError):
            l2.load_grid_function(path)

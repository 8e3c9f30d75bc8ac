import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from thinfilm.spectral_grid import (
    GridSpec,
    RealField,
    SpectralField,
    SpectralSymmetryError,
    dealias_mask,
    divergence,
    forward,
    gradient,
    integrate,
    inverse,
    laplacian,
    laplacian_symbol,
    read_snapshot,
    seminorms,
    write_snapshot,
)

from conftest import random_field

PI2 = math.pi**2


def field(grid, fn):
    x, y = grid.coordinates()
    return RealField(grid, fn(x, y))


class TestGridSpec:
    @pytest.mark.parametrize("n", [2, 5, 31])
    def test_rejects_small_or_odd(self, n):
        with pytest.raises(ValueError):
            GridSpec(n, 8)

    def test_rejects_bad_length(self):
        with pytest.raises(ValueError):
            GridSpec(8, 8, L1=0.0)

    def test_wavenumbers_scale_with_length(self):
        g = GridSpec(8, 8, L1=math.pi)
        kx, ky = g.wavenumbers
        assert kx[1, 0] == pytest.approx(2.0)
        assert ky[0, 1] == pytest.approx(1.0)

    def test_kappa_min_and_area(self):
        g = GridSpec(8, 16, L1=math.pi, L2=2 * math.pi)
        assert g.kappa_min == pytest.approx(1.0)
        assert g.area == pytest.approx(2 * PI2)

    def test_odd_wavenumbers_zero_nyquist(self):
        g = GridSpec.square(8)
        kx, ky = g.odd_wavenumbers
        assert np.all(kx[4, :] == 0)
        assert np.all(ky[:, 4] == 0)


class TestForwardInverse:
    def test_constant_only_mean_mode(self, grid64):
        F = forward(RealField(grid64, np.full(grid64.shape, 2.5)))
        assert F.coeffs[0, 0] == pytest.approx(2.5 * 64 * 64)
        rest = F.coeffs.copy()
        rest[0, 0] = 0
        assert np.abs(rest).max() < 1e-9
        assert F.mean == pytest.approx(2.5)

    def test_single_product_mode_has_four_coefficients(self, grid64):
        F = forward(field(grid64, lambda x, y: np.sin(3 * x) * np.sin(2 * y)))
        big = np.argwhere(np.abs(F.coeffs) > 1e-8)
        modes = {(int(i if i < 32 else i - 64), int(j)) for i, j in big}
        # half spectrum stores xi2 >= 0, so (+-3, 2) appear; (+-3, -2) are their conjugates
        assert modes == {(3, 2), (-3, 2)}

    def test_round_trip_random(self, grid64, rng):
        for _ in range(10):
            f = RealField(grid64, rng.standard_normal(grid64.shape))
            back = inverse(forward(f)).values
            assert np.abs(back - f.values).max() <= 1e-12 * np.abs(f.values).max()

    def test_round_trip_spectral(self, grid64, rng):
        F = forward(RealField(grid64, rng.standard_normal(grid64.shape)))
        G = forward(inverse(F))
        assert np.abs(G.coeffs - F.coeffs).max() <= 1e-12 * np.abs(F.coeffs).max()

    def test_zero_spectrum(self, grid64):
        F = SpectralField(grid64, np.zeros(grid64.spectral_shape, complex))
        assert not inverse(F).values.any()

    def test_single_mode_profile(self):
        g = GridSpec(16, 16, L1=math.pi)
        c = np.zeros(g.spectral_shape, complex)
        c[1, 0] = c[-1, 0] = 0.5 * g.N1 * g.N2
        x, _ = g.coordinates()
        assert np.allclose(inverse(SpectralField(g, c)).values, np.cos(2 * x), atol=1e-13)

    def test_rejects_non_hermitian(self):
        g = GridSpec.square(8)
        c = np.zeros(g.spectral_shape, complex)
        c[0, 0] = 1j * 64
        with pytest.raises(SpectralSymmetryError):
            inverse(SpectralField(g, c))

    def test_rejects_non_finite(self, grid64):
        v = np.zeros(grid64.shape)
        v[0, 0] = np.nan
        with pytest.raises(ValueError):
            RealField(grid64, v)

    def test_grid_mismatch(self):
        a = RealField.zeros(GridSpec.square(8))
        b = RealField.zeros(GridSpec.square(16))
        with pytest.raises(ValueError):
            a + b


class TestDerivatives:
    def test_gradient_of_sine(self, grid64):
        gx, gy = gradient(forward(field(grid64, lambda x, y: np.sin(x) + 0 * y)))
        x, _ = grid64.coordinates()
        assert np.abs(gx.values - np.cos(x)).max() <= 1e-12
        assert np.abs(gy.values).max() <= 1e-12

    def test_constant_has_zero_gradient(self, grid64):
        gx, gy = gradient(forward(RealField(grid64, np.full(grid64.shape, 3.0))))
        assert np.abs(gx.values).max() < 1e-12 and np.abs(gy.values).max() < 1e-12

    def test_gradient_norm_of_product_mode(self, grid64):
        _, grad_sq, _ = seminorms(field(grid64, lambda x, y: np.sin(3 * x) * np.sin(2 * y)))
        assert grad_sq == pytest.approx(13 * PI2, rel=1e-12)

    def test_gradient_norm_matches_quadrature(self, grid64):
        gx, gy = gradient(forward(field(grid64, lambda x, y: np.sin(3 * x) * np.sin(2 * y))))
        quad = integrate(RealField(grid64, gx.values**2 + gy.values**2))
        assert quad == pytest.approx(13 * PI2, rel=1e-12)

    def test_divergence_of_gradient_is_laplacian(self, grid64, rng):
        F = forward(random_field(grid64, rng))
        div = divergence(*gradient(F))
        assert np.abs(div.coeffs - laplacian(F).coeffs).max() <= 1e-12 * np.abs(F.coeffs).max()

    def test_divergence_of_constant(self, grid64):
        c = RealField(grid64, np.full(grid64.shape, 1.5))
        assert np.abs(divergence(c, c).coeffs).max() < 1e-9

    def test_divergence_analytic(self, grid64):
        x, _ = grid64.coordinates()
        div = inverse(divergence(RealField(grid64, np.cos(x)), RealField.zeros(grid64)))
        assert np.abs(div.values + np.sin(x)).max() <= 1e-12

    @pytest.mark.parametrize(
        "L1, mode, expected", [(2 * math.pi, (1, 0), -1.0), (2 * math.pi, (3, 2), -13.0), (math.pi, (1, 0), -4.0)]
    )
    def test_laplacian_symbol(self, L1, mode, expected):
        g = GridSpec(16, 16, L1=L1)
        assert laplacian_symbol(g)[mode] == pytest.approx(expected)


class TestIntegrals:
    def test_constant(self, grid64):
        assert integrate(RealField(grid64, np.ones(grid64.shape))) == pytest.approx(4 * PI2, rel=1e-14)

    def test_orthogonality(self, grid64):
        assert abs(integrate(field(grid64, lambda x, y: np.sin(3 * x) * np.sin(2 * y)))) < 1e-12

    def test_square_of_product_mode(self, grid64):
        f = field(grid64, lambda x, y: np.sin(3 * x) ** 2 * np.sin(2 * y) ** 2)
        assert integrate(f) == pytest.approx(PI2, rel=1e-13)

    def test_seminorms_zero(self, grid64):
        assert seminorms(RealField.zeros(grid64)) == (0.0, 0.0, 0.0)

    def test_l2_of_scaled_mode(self, grid64):
        f = field(grid64, lambda x, y: 0.1 * np.sin(3 * x) * np.sin(2 * y))
        l2, _, lap = seminorms(f)
        assert l2 == pytest.approx(0.01 * PI2, rel=1e-12)
        assert l2 == pytest.approx(integrate(RealField(grid64, f.values**2)), rel=1e-12)
        assert lap == pytest.approx(169 * 0.01 * PI2, rel=1e-12)

    def test_parseval_random(self, rng):
        g = GridSpec(32, 16, L1=3.0, L2=5.0)
        for _ in range(50):
            f = RealField(g, rng.standard_normal(g.shape))
            assert seminorms(f)[0] == pytest.approx(integrate(RealField(g, f.values**2)), rel=1e-12)

    def test_poincare_inequalities(self, rng):
        g = GridSpec(32, 32, L1=3.0, L2=7.0)
        for _ in range(50):
            f = random_field(g, rng, smooth=False)
            l2, grad, lap = seminorms(f)
            assert grad <= math.sqrt(l2 * lap) * (1 + 1e-12)
            assert math.sqrt(grad) <= math.sqrt(lap) / g.kappa_min * (1 + 1e-12)


class TestLinearity:
    @settings(max_examples=25, deadline=None)
    @given(a=st.floats(-10, 10), b=st.floats(-10, 10), seed=st.integers(0, 2**32 - 1))
    def test_operators_are_linear(self, a, b, seed):
        g = GridSpec.square(16)
        r = np.random.default_rng(seed)
        f, h = (RealField(g, r.standard_normal(g.shape)) for _ in range(2))
        combo = f * a + h * b
        scale = 1 + abs(a) + abs(b)
        F, H, C = forward(f), forward(h), forward(combo)
        assert np.abs(C.coeffs - (F * a + H * b).coeffs).max() <= 1e-12 * scale * g.N1 * g.N2
        assert np.abs(inverse(C).values - combo.values).max() <= 1e-12 * scale * 10
        gc, gf, gh = gradient(C), gradient(F), gradient(H)
        for i in range(2):
            assert np.abs(gc[i].values - (gf[i].values * a + gh[i].values * b)).max() <= 1e-11 * scale * 10
        dc = divergence(combo, combo)
        df, dh = divergence(f, f), divergence(h, h)
        assert np.abs(dc.coeffs - (df.coeffs * a + dh.coeffs * b)).max() <= 1e-11 * scale * g.N1 * g.N2


class TestDealias:
    def test_mask_keeps_low_modes(self):
        g = GridSpec.square(48)
        mask = dealias_mask(g)
        i, j = g.mode_indices
        assert np.all(mask[(np.abs(i) < 16) & (np.abs(j) < 16)])
        assert not np.any(mask[(np.abs(i) >= 16) | (np.abs(j) >= 16)])

    def test_gradient_divergence_on_dealiased(self, rng):
        g = GridSpec.square(32)
        F = forward(RealField(g, rng.standard_normal(g.shape)))
        F = SpectralField(g, F.coeffs * dealias_mask(g))
        div = divergence(*gradient(F))
        assert np.abs(div.coeffs - laplacian(F).coeffs).max() <= 1e-12 * np.abs(F.coeffs).max()


class TestSnapshots:
    def test_round_trip_exact(self, tmp_path, rng):
        g = GridSpec(8, 12, L1=1.5, L2=2.5)
        f = RealField(g, rng.standard_normal(g.shape))
        write_snapshot(tmp_path / "s.txt", f, 1.25)
        back, t = read_snapshot(tmp_path / "s.txt")
        assert t == 1.25 and back.grid == g
        assert np.array_equal(back.values, f.values)

    def test_header_format(self, tmp_path):
        g = GridSpec.square(4)
        write_snapshot(tmp_path / "s.txt", RealField.zeros(g), 0.0)
        assert (tmp_path / "s.txt").read_text().startswith("# thinfilm-field v1 4 4 ")

    @pytest.mark.parametrize(
        "text",
        ["# wrong header\n0 0\n", "# thinfilm-field v1 4 4 6.28 6.28 0\n1 2 3\n", "# thinfilm-field v1 4 4 6.28 6.28 0\n" + "x " * 16],
    )
    def test_malformed_rejected(self, tmp_path, text):
        (tmp_path / "bad.txt").write_text(text)
        with pytest.raises(ValueError):
            read_snapshot(tmp_path / "bad.txt")

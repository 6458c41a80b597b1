import numpy as np
import pytest

from sfrestore.transforms import (
    BicubicUpsample,
    IdentityTransform,
    SpectralFilter,
    chebyshev_radius_grid,
    fidelity_losses,
    ideal_highpass,
    ideal_lowpass,
    lowpass_mask,
    make_transform,
)


def _lowpass_count_oracle(n, r0):
    # independent double loop over the centered grid
    c = n // 2
    count = 0
    for u in range(n):
        for v in range(n):
            if max(abs(u - c), abs(v - c)) < r0:
                count += 1
    return count


@pytest.mark.parametrize("n", [8, 9, 16, 17])
@pytest.mark.parametrize("r0", [0, 1, 3, 5])
def test_lowpass_mask_counts(n, r0):
    assert int(lowpass_mask(n, n, r0).sum()) == _lowpass_count_oracle(n, r0)


def test_radius_grid_center_and_corner():
    g = chebyshev_radius_grid(8, 8)
    assert g[4, 4] == 0
    assert g[0, 0] == 4
    g = chebyshev_radius_grid(9, 9)
    assert g[4, 4] == 0 and g[0, 0] == 4 and g[8, 8] == 4


@pytest.mark.parametrize("n", [8, 9, 16])
@pytest.mark.parametrize("r0", [0, 2, 4])
def test_filter_partition(rng, n, r0):
    x = rng.standard_normal((n, n, 2))
    hp = ideal_highpass(x, r0)
    lp = ideal_lowpass(x, r0)
    assert np.max(np.abs(hp + lp - x)) < 1e-12


def test_r0_zero_lowpass_is_zero(rng):
    x = rng.standard_normal((8, 8, 1))
    assert np.array_equal(ideal_lowpass(x, 0), np.zeros_like(x))
    assert np.max(np.abs(ideal_highpass(x, 0) - x)) < 1e-12


def test_norm_decomposition(rng):
    # Parseval: complementary masks split the squared norm exactly
    x = rng.standard_normal((16, 16, 3))
    hp, lp = ideal_highpass(x, 4), ideal_lowpass(x, 4)
    total = np.sum(x**2)
    assert abs(np.sum(hp**2) + np.sum(lp**2) - total) < 1e-10 * total


def test_lowpass_removes_high_frequency():
    n = 16
    yy = np.arange(n)
    alternating = ((-1.0) ** yy)[:, None] * np.ones((n, n))
    x = alternating[:, :, None]  # pure Nyquist content
    assert np.max(np.abs(ideal_lowpass(x, 3))) < 1e-12
    dc = np.full((n, n, 1), 0.7)
    assert np.max(np.abs(ideal_lowpass(dc, 1) - 0.7)) < 1e-12


@pytest.mark.parametrize("band", ["high", "low"])
def test_spectral_filter_self_adjoint_idempotent(rng, band):
    f = SpectralFilter(in_shape=(8, 8, 1), r0=3, band=band)
    x = rng.standard_normal((8, 8, 1))
    y = rng.standard_normal((8, 8, 1))
    assert abs(np.sum(f.apply(x) * y) - np.sum(x * f.adjoint(y))) < 1e-10
    assert np.allclose(f.apply(f.apply(x)), f.apply(x), atol=1e-12)


def test_upsample_shapes_and_adjoint(rng):
    up = BicubicUpsample(in_shape=(6, 5, 2), factor=4)
    assert up.out_shape == (24, 20, 2)
    x = rng.standard_normal((6, 5, 2))
    y = rng.standard_normal((24, 20, 2))
    assert abs(np.sum(up.apply(x) * y) - np.sum(x * up.adjoint(y))) < 1e-9


def test_identity_transform(rng):
    t = IdentityTransform(in_shape=(4, 4, 1))
    x = rng.random((4, 4, 1))
    assert np.array_equal(t.apply(x), x)
    assert np.array_equal(t.adjoint(x), x)


def test_make_transform_kinds():
    shape = (8, 8, 1)
    assert make_transform("identity", shape).kind == "identity"
    assert make_transform("bicubic-upsample", shape, factor=2).kind == "bicubic-upsample"
    assert make_transform("highpass", shape, r0=2).kind == "highpass"
    assert make_transform("lowpass", shape, r0=2).kind == "lowpass"
    with pytest.raises(ValueError):
        make_transform("wavelet", shape)


def test_fidelity_losses_decompose_residual(rng):
    y = rng.random((8, 8, 1))
    ax = rng.random((8, 8, 1))
    psi_s = make_transform("identity", (8, 8, 1))
    l_s, l_h, l_l = fidelity_losses(y, ax, psi_s, r0=3)
    res = float(np.sum((y - ax) ** 2))
    assert abs(l_s - res) < 1e-12
    assert abs(l_h + l_l - res) < 1e-10 * res

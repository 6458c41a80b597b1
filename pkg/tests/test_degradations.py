import numpy as np
import pytest

from sfrestore.degradations import (
    CircularGaussianBlur,
    IdentityOperator,
    MaskOperator,
    NoiseModel,
    ShapeMismatchError,
    load_operator,
    make_bicubic_downsample,
    make_box_mask,
    make_gaussian_blur,
    make_random_mask,
    measure,
    operator_norm,
    save_operator,
)

SHAPE = (8, 8, 2)


def all_operators():
    return [
        IdentityOperator(in_shape=SHAPE),
        make_random_mask(SHAPE, 0.5, 1),
        make_box_mask(SHAPE, 4, 2),
        make_gaussian_blur(SHAPE, 5, 1.2),
        make_bicubic_downsample(SHAPE, 2),
    ]


@pytest.mark.parametrize("A", all_operators(), ids=lambda a: a.kind)
def test_adjoint_identity(A, rng):
    # <A x, y> == <x, A^T y> for random probes
    for _ in range(5):
        x = rng.standard_normal(A.in_shape)
        y = rng.standard_normal(A.out_shape)
        lhs = np.sum(A.apply(x) * y)
        rhs = np.sum(x * A.adjoint(y))
        assert abs(lhs - rhs) < 1e-10 * max(abs(lhs), 1.0)


@pytest.mark.parametrize("A", all_operators(), ids=lambda a: a.kind)
def test_linearity(A, rng):
    x1 = rng.standard_normal(A.in_shape)
    x2 = rng.standard_normal(A.in_shape)
    out = A.apply(2.5 * x1 - x2)
    assert np.allclose(out, 2.5 * A.apply(x1) - A.apply(x2), atol=1e-12)


def test_random_mask_exact_count():
    # exactly round(fraction * H * W) pixels removed
    A = make_random_mask((32, 32, 1), 0.92, 0)
    assert int((~A.mask).sum()) == round(0.92 * 1024) == 942
    x = np.ones((32, 32, 1))
    assert int(A.apply(x).sum()) == 1024 - 942


def test_box_mask_is_contiguous_square():
    A = make_box_mask((16, 16, 1), 5, 3)
    removed = ~A.mask
    assert removed.sum() == 25
    rows, cols = np.nonzero(removed)
    assert rows.max() - rows.min() == 4 and cols.max() - cols.min() == 4


def test_mask_shared_across_channels(rng):
    A = make_random_mask((8, 8, 3), 0.4, 5)
    x = rng.random((8, 8, 3))
    out = A.apply(x)
    for c in range(3):
        assert np.array_equal(out[:, :, c] == 0.0, (~A.mask) | (x[:, :, c] == 0.0))


def test_blur_kernel_normalized_and_self_adjoint(rng):
    A = make_gaussian_blur(SHAPE, 5, 1.0)
    assert abs(A.kernel.sum() - 1.0) < 1e-12
    x = rng.standard_normal(SHAPE)
    y = rng.standard_normal(SHAPE)
    assert abs(np.sum(A.apply(x) * y) - np.sum(x * A.apply(y))) < 1e-10


def test_blur_preserves_constants():
    A = make_gaussian_blur(SHAPE, 7, 2.0)
    x = np.full(SHAPE, 0.6)
    assert np.max(np.abs(A.apply(x) - 0.6)) < 1e-12


@pytest.mark.parametrize(
    "A,expected",
    [
        (IdentityOperator(in_shape=SHAPE), 1.0),
        (make_random_mask(SHAPE, 0.5, 1), 1.0),
        (make_gaussian_blur(SHAPE, 5, 1.2), 1.0),  # DC gain of a sum-1 kernel
    ],
    ids=["identity", "mask", "blur"],
)
def test_operator_norms(A, expected):
    assert abs(operator_norm(A) - expected) < 1e-6


def test_measure_noiseless_and_noisy(rng):
    A = IdentityOperator(in_shape=(4, 4, 1))
    x0 = rng.random((4, 4, 1))
    assert np.array_equal(measure(A, x0, NoiseModel(0.0), 0), x0)
    y1 = measure(A, x0, NoiseModel(0.1), 7)
    y2 = measure(A, x0, NoiseModel(0.1), 7)
    assert np.array_equal(y1, y2)
    assert not np.array_equal(y1, x0)


def test_shape_check(rng):
    A = make_bicubic_downsample(SHAPE, 2)
    with pytest.raises(ShapeMismatchError):
        A.apply(rng.random((4, 4, 2)))
    with pytest.raises(ShapeMismatchError):
        A.adjoint(rng.random(SHAPE))


@pytest.mark.parametrize("A", all_operators(), ids=lambda a: a.kind)
def test_operator_serialization_round_trip(tmp_path, A, rng):
    path = tmp_path / "op.npz"
    save_operator(path, A)
    B = load_operator(path)
    assert B.kind == A.kind and B.in_shape == A.in_shape
    x = rng.standard_normal(A.in_shape)
    assert np.array_equal(B.apply(x), A.apply(x))


def test_invalid_constructor_args():
    with pytest.raises(ValueError):
        make_random_mask(SHAPE, 1.0, 0)
    with pytest.raises(ValueError):
        make_box_mask(SHAPE, 9, 0)
    with pytest.raises(ValueError):
        make_gaussian_blur(SHAPE, 4, 1.0)
    with pytest.raises(ValueError):
        make_gaussian_blur(SHAPE, 5, 0.0)
    with pytest.raises(ValueError):
        NoiseModel(-0.1)

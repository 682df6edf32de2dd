import numpy as np
import pytest

from stembed.subspace import (
    combined_feature,
    spectral_feature,
    svd_decompose,
    temporal_feature,
    truncate,
)


def random_bases(rng, c, t):
    return svd_decompose(rng.normal(size=(c, t)))


# ---------------------------------------------------------------------------
# svd_decompose

def test_diagonal_matrix():
    b = svd_decompose(np.diag([3.0, 2.0]))
    assert np.allclose(b.singular_values, [3.0, 2.0])
    assert np.allclose(b.spectral, np.eye(2))
    # singular values are absorbed into the temporal rows
    assert np.allclose(b.temporal, np.diag([3.0, 2.0]))
    assert np.allclose(b.temporal / b.singular_values[:, None], np.eye(2))


def test_rank_one():
    rng = np.random.default_rng(1)
    u = rng.normal(size=6)
    u /= np.linalg.norm(u)
    v = rng.normal(size=9)
    v /= np.linalg.norm(v)
    b = svd_decompose(3.0 * np.outer(u, v))
    assert b.singular_values[0] == pytest.approx(3.0)
    assert np.all(b.singular_values[1:] <= 1e-9)
    assert np.allclose(np.abs(b.spectral[:, 0]), np.abs(u), atol=1e-10)


def test_singular_values_match_eigendecomposition_oracle():
    rng = np.random.default_rng(2)
    s = rng.normal(size=(5, 7))
    b = svd_decompose(s)
    eigvals = np.linalg.eigh(s @ s.T)[0][::-1]
    assert np.allclose(b.singular_values, np.sqrt(np.maximum(eigvals, 0.0)), atol=1e-8)


def test_reconstruction_and_orthonormality():
    rng = np.random.default_rng(3)
    s = rng.normal(size=(40, 100)) * 5.0
    b = svd_decompose(s)
    assert np.max(np.abs(b.spectral @ b.temporal - s)) <= 1e-6 * np.max(np.abs(s))
    gram = b.spectral.T @ b.spectral
    assert np.max(np.abs(gram - np.eye(gram.shape[0]))) <= 1e-6


def test_sign_convention():
    rng = np.random.default_rng(4)
    b = random_bases(rng, 10, 20)
    pivot = np.argmax(np.abs(b.spectral), axis=0)
    assert np.all(b.spectral[pivot, np.arange(b.spectral.shape[1])] > 0)


def test_non_finite_input_rejected():
    s = np.ones((3, 3))
    s[1, 1] = np.nan
    with pytest.raises(ValueError):
        svd_decompose(s)


def test_frame_permutation_invariance():
    rng = np.random.default_rng(5)
    s = rng.normal(size=(12, 30))
    perm = rng.permutation(30)
    b1 = truncate(svd_decompose(s), 3, 3)
    b2 = truncate(svd_decompose(s[:, perm]), 3, 3)
    assert np.allclose(b1.singular_values, b2.singular_values, atol=1e-8)
    assert np.allclose(spectral_feature(b1).vector, spectral_feature(b2).vector, atol=1e-6)


def test_determinism():
    rng = np.random.default_rng(6)
    s = rng.normal(size=(20, 40))
    b1 = svd_decompose(s.copy())
    b2 = svd_decompose(s.copy())
    assert np.array_equal(spectral_feature(truncate(b1, 2, 2)).vector,
                          spectral_feature(truncate(b2, 2, 2)).vector)
    assert np.array_equal(temporal_feature(truncate(b1, 2, 2)).vector,
                          temporal_feature(truncate(b2, 2, 2)).vector)


# ---------------------------------------------------------------------------
# truncate

def test_truncate_small_defaults():
    rng = np.random.default_rng(7)
    b = truncate(random_bases(rng, 40, 100), 2, 5)
    assert b.spectral.shape == (40, 2)
    assert b.temporal.shape == (5, 100)


def test_truncate_large_defaults():
    rng = np.random.default_rng(8)
    b = truncate(random_bases(rng, 40, 120), 4, 10)
    assert b.spectral.shape == (40, 4)
    assert b.temporal.shape == (10, 120)


def test_truncate_full_rank_is_identity_on_spectral():
    rng = np.random.default_rng(9)
    full = random_bases(rng, 6, 15)
    b = truncate(full, 6, 6)
    assert np.array_equal(b.spectral, full.spectral)


def test_truncate_out_of_range():
    rng = np.random.default_rng(10)
    full = random_bases(rng, 6, 15)
    for d_s, d_t in [(0, 1), (7, 1), (1, 0), (1, 7)]:
        with pytest.raises(ValueError):
            truncate(full, d_s, d_t)


def test_eckart_young_monotone():
    rng = np.random.default_rng(11)
    for _ in range(5):
        s = rng.normal(size=(15, 40))
        full = svd_decompose(s)
        errors = []
        for d in range(1, 16):
            b = truncate(full, d, d)
            errors.append(np.linalg.norm(s - b.spectral @ b.temporal))
        assert np.all(np.diff(errors) <= 1e-9)
        assert errors[-1] <= 1e-6 * np.linalg.norm(s)


# ---------------------------------------------------------------------------
# features

def test_spectral_feature_flattening_order():
    rng = np.random.default_rng(12)
    b = truncate(random_bases(rng, 2, 4), 2, 2)
    b.spectral = np.array([[1.0, 0.0], [0.0, 1.0]])
    assert np.array_equal(spectral_feature(b).vector, [1.0, 0.0, 0.0, 1.0])


@pytest.mark.parametrize("d,expected", [(2, 80), (4, 160)])
def test_spectral_feature_lengths(d, expected):
    rng = np.random.default_rng(13)
    b = truncate(random_bases(rng, 40, 120), d, 1)
    assert spectral_feature(b).dim == expected


def test_temporal_feature_length():
    rng = np.random.default_rng(14)
    b = truncate(random_bases(rng, 40, 100), 1, 5)
    assert temporal_feature(b).dim == 250


def test_temporal_feature_constant_row():
    rng = np.random.default_rng(15)
    b = truncate(random_bases(rng, 4, 30), 1, 1)
    b.temporal = np.full((1, 30), 2.5)
    vec = temporal_feature(b).vector
    assert np.allclose(vec[:25], 2.5)
    assert np.allclose(vec[25:], 0.0)


def test_temporal_feature_window_oracle():
    rng = np.random.default_rng(16)
    b = truncate(random_bases(rng, 4, 30), 1, 1)
    row = np.arange(1.0, 31.0)
    b.temporal = row[None, :]
    vec = temporal_feature(b).vector
    # oracle: enumerate the 6 windows directly
    windows = np.stack([row[i:i + 25] for i in range(6)])
    assert np.allclose(vec[:25], windows.mean(axis=0))
    assert np.allclose(vec[25:], windows.std(axis=0))
    assert np.allclose(vec[:25], np.arange(3.5, 28.0))
    assert np.allclose(vec[25:], np.sqrt(35.0 / 12.0))
    assert vec[25] == pytest.approx(1.7078, abs=1e-4)


def test_temporal_feature_short_row_padding():
    rng = np.random.default_rng(17)
    b = truncate(random_bases(rng, 4, 10), 1, 2)
    vec = temporal_feature(b)
    assert vec.dim == 100
    # one padded window per row: mean equals the padded window itself
    padded = np.concatenate([np.full(15, b.temporal[0, 0]), b.temporal[0]])
    assert np.allclose(vec.vector[:25], padded)


def test_temporal_feature_reversal_symmetry():
    rng = np.random.default_rng(18)
    b = truncate(random_bases(rng, 4, 40), 1, 1)
    fwd = temporal_feature(b).vector
    b.temporal = b.temporal[:, ::-1].copy()
    rev = temporal_feature(b).vector
    assert np.allclose(fwd[:25], rev[:25][::-1])
    assert np.allclose(fwd[25:], rev[25:][::-1])


# ---------------------------------------------------------------------------
# combined

@pytest.mark.parametrize("d_s,d_t,expected", [(2, 5, 330), (4, 10, 660)])
def test_combined_lengths(d_s, d_t, expected):
    rng = np.random.default_rng(19)
    b = truncate(random_bases(rng, 40, 120), d_s, d_t)
    cf = combined_feature(spectral_feature(b), temporal_feature(b))
    assert cf.dim == expected
    assert cf.kind == "spectro-temporal"


def test_combined_zero_vectors():
    rng = np.random.default_rng(20)
    b = truncate(random_bases(rng, 40, 100), 2, 5)
    sf, tf = spectral_feature(b), temporal_feature(b)
    sf.vector = np.zeros_like(sf.vector)
    tf.vector = np.zeros_like(tf.vector)
    assert np.array_equal(combined_feature(sf, tf).vector, np.zeros(330))


def test_combined_utterance_mismatch():
    rng = np.random.default_rng(21)
    b1 = truncate(svd_decompose(rng.normal(size=(40, 60)), utterance_id="u1"), 2, 5)
    b2 = truncate(svd_decompose(rng.normal(size=(40, 60)), utterance_id="u2"), 2, 5)
    with pytest.raises(ValueError):
        combined_feature(spectral_feature(b1), temporal_feature(b2))

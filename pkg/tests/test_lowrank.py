"""Truncated SVD, truncated Takagi factorization, and spectral initialization."""

import numpy as np
import pytest

from hankel_scs import hankel_ops, lowrank, signal_model
from conftest import rand_complex, rel


def matvec_pair(M):
    return (lambda V: M @ V), (lambda U: M.conj().T @ U)


def random_rank_k(rng, n_rows, n_cols, k, spectrum=None):
    U, _ = np.linalg.qr(rand_complex(rng, n_rows, k))
    V, _ = np.linalg.qr(rand_complex(rng, n_cols, k))
    s = np.sort(rng.uniform(1.0, 5.0, k))[::-1] if spectrum is None else np.asarray(spectrum)
    return U @ np.diag(s) @ V.conj().T, s


def random_symmetric_rank_k(rng, n, k):
    A = rand_complex(rng, n, k)
    return A @ A.T


# ---------------------------------------------------------------------------
# trunc_svd
# ---------------------------------------------------------------------------

def test_trunc_svd_diagonal_example():
    M = np.diag([3.0, 2.0, 1.0]).astype(complex)
    apply, applyH = matvec_pair(M)
    _, sigma, _ = lowrank.trunc_svd(apply, applyH, (3, 3), 2, seed=0)
    assert np.allclose(sigma, [3.0, 2.0], atol=1e-10)


def test_trunc_svd_zero_matrix():
    M = np.zeros((4, 4), dtype=complex)
    apply, applyH = matvec_pair(M)
    U, sigma, V = lowrank.trunc_svd(apply, applyH, (4, 4), 2, seed=0)
    assert np.allclose(sigma, 0.0, atol=1e-12)
    assert rel(U.conj().T @ U, np.eye(2)) <= 1e-10


def test_trunc_svd_exact_low_rank_reconstruction(rng):
    M, _ = random_rank_k(rng, 40, 40, 5)
    apply, applyH = matvec_pair(M)
    U, sigma, V = lowrank.trunc_svd(apply, applyH, (40, 40), 5, seed=1)
    recon = U @ np.diag(sigma) @ V.conj().T
    assert np.linalg.norm(recon - M) <= 1e-8 * sigma[0]


def test_trunc_svd_matches_dense_oracle(rng):
    for trial in range(10):
        n_rows = int(rng.integers(5, 129))
        n_cols = int(rng.integers(5, 129))
        r = int(rng.integers(1, 6))
        M = rand_complex(rng, n_rows, n_cols)
        apply, applyH = matvec_pair(M)
        _, sigma, _ = lowrank.trunc_svd(apply, applyH, (n_rows, n_cols), r, seed=trial)
        want = np.linalg.svd(M, compute_uv=False)[:r]
        assert np.max(np.abs(sigma - want)) <= 1e-9 * want[0]


def test_trunc_svd_rectangular(rng):
    M, s = random_rank_k(rng, 30, 50, 4)
    apply, applyH = matvec_pair(M)
    U, sigma, V = lowrank.trunc_svd(apply, applyH, (30, 50), 4, seed=3)
    assert U.shape == (30, 4) and V.shape == (50, 4)
    assert np.allclose(sigma, s, atol=1e-9 * s[0])


def test_trunc_svd_deterministic(rng):
    M = rand_complex(rng, 20, 20)
    apply, applyH = matvec_pair(M)
    out1 = lowrank.trunc_svd(apply, applyH, (20, 20), 3, seed=11)
    out2 = lowrank.trunc_svd(apply, applyH, (20, 20), 3, seed=11)
    for a, b in zip(out1, out2):
        assert np.array_equal(a, b)


def test_trunc_svd_strict_nonconvergence_raises(rng):
    M = rand_complex(rng, 60, 60)  # full-rank noise: slow tail convergence
    apply, applyH = matvec_pair(M)
    with pytest.raises(lowrank.ConvergenceError):
        lowrank.trunc_svd(apply, applyH, (60, 60), 3, seed=0,
                          tol=1e-300, max_rounds=1, strict=True)


# ---------------------------------------------------------------------------
# takagi_truncated
# ---------------------------------------------------------------------------

def test_takagi_identity_matrix():
    M = np.eye(3, dtype=complex)
    fac = lowrank.takagi_truncated(lambda V: M @ V, 3, 3, seed=0)
    assert np.allclose(fac.sigma, [1, 1, 1], atol=1e-10)
    recon = fac.U_hat @ np.diag(fac.sigma) @ fac.U_hat.T
    assert rel(recon, M) <= 1e-10
    assert rel(fac.U_hat.conj().T @ fac.U_hat, np.eye(3)) <= 1e-10


def test_takagi_rank_one_closed_form(rng):
    z = rand_complex(rng, 12)
    M = np.outer(z, z)
    fac = lowrank.takagi_truncated(lambda V: M @ V, 12, 1, seed=0)
    assert fac.sigma[0] == pytest.approx(np.linalg.norm(z) ** 2, rel=1e-12)
    recon = fac.U_hat @ np.diag(fac.sigma) @ fac.U_hat.T
    assert np.linalg.norm(recon - M) <= 1e-12 * np.linalg.norm(M)


def test_takagi_on_model_lift(rng):
    model = signal_model.random_model(15, 3, rng=rng, min_sep=0.1)
    M = hankel_ops.lift_dense(signal_model.synthesize(model))
    fac = lowrank.takagi_truncated(lambda V: M @ V, 8, 3, seed=0)
    recon = fac.U_hat @ np.diag(fac.sigma) @ fac.U_hat.T
    assert np.linalg.norm(recon - M) <= 1e-9 * np.linalg.norm(M)


def test_takagi_matches_truncated_svd_error(rng):
    """Takagi reconstruction error equals the truncated-SVD error (1e-8 rel)."""
    for trial in range(10):
        n = int(rng.integers(8, 41))
        seed_mat = rand_complex(rng, n, n)
        M = seed_mat + seed_mat.T  # complex symmetric, full rank
        r = int(rng.integers(1, 6))
        fac = lowrank.takagi_truncated(lambda V: M @ V, n, r, seed=trial)
        recon = fac.U_hat @ np.diag(fac.sigma) @ fac.U_hat.T
        err = np.linalg.norm(M - recon)
        sig = np.linalg.svd(M, compute_uv=False)
        best = np.linalg.norm(sig[r:])
        assert err <= best + 1e-8 * sig[0]
        assert rel(fac.U_hat.conj().T @ fac.U_hat, np.eye(r)) <= 1e-10
        assert np.all(np.diff(fac.sigma) <= 1e-12)  # nonincreasing


def test_takagi_handles_singular_value_clusters(rng):
    """Repeated singular values: reconstruction must still be symmetric-exact."""
    U, _ = np.linalg.qr(rand_complex(rng, 16, 5))
    s = np.array([3.0, 2.0, 2.0, 2.0, 1.0])
    M = U @ np.diag(s) @ U.T
    M = 0.5 * (M + M.T)
    fac = lowrank.takagi_truncated(lambda V: M @ V, 16, 5, seed=0)
    recon = fac.U_hat @ np.diag(fac.sigma) @ fac.U_hat.T
    assert np.allclose(fac.sigma, s, atol=1e-8)
    assert np.linalg.norm(recon - M) <= 1e-8 * np.linalg.norm(M)


def test_takagi_rejects_asymmetric_operator(rng):
    M = rand_complex(rng, 10, 10)  # generic: not symmetric
    with pytest.raises(ValueError, match="symmetric"):
        lowrank.takagi_truncated(lambda V: M @ V, 10, 2, seed=0)


def test_takagi_rank_deficiency_error(rng):
    M = random_symmetric_rank_k(rng, 12, 2)
    with pytest.raises(lowrank.RankDeficiencyError):
        lowrank.takagi_truncated(lambda V: M @ V, 12, 5, seed=0)


def test_takagi_deterministic(rng):
    M = random_symmetric_rank_k(rng, 14, 3)
    a = lowrank.takagi_truncated(lambda V: M @ V, 14, 3, seed=4)
    b = lowrank.takagi_truncated(lambda V: M @ V, 14, 3, seed=4)
    assert np.array_equal(a.U_hat, b.U_hat)
    assert np.array_equal(a.sigma, b.sigma)


# ---------------------------------------------------------------------------
# spectral_init
# ---------------------------------------------------------------------------

def full_mask_instance(rng, n=63, r=3):
    model = signal_model.random_model(n, r, rng=rng, min_sep=1.0 / n)
    x = signal_model.synthesize(model)
    mask = signal_model.uniform_mask(n, n, rng=rng)
    return x, mask


def test_spectral_init_full_mask_is_exact(rng):
    x, mask = full_mask_instance(rng)
    y = hankel_ops.apply_D(x)
    Z0, sigma1 = lowrank.spectral_init(y, mask, 3, seed=0)
    Gy = hankel_ops.lift_dense(x)  # G y = H x when y = D x
    assert rel(Z0 @ Z0.T, Gy) <= 1e-8
    assert sigma1 == pytest.approx(np.linalg.svd(Gy, compute_uv=False)[0], rel=1e-6)


def test_spectral_init_partial_mask_sanity_band():
    """At m = 0.5 n the rescaled truncated lift lands within a factor-0.5
    relative band of the true lift for typical draws (median over seeds;
    band established by a 50-seed sweep before pinning)."""
    ratios = []
    for seed in range(10):
        rng = np.random.default_rng(seed)
        n, r, m = 127, 4, 63
        model = signal_model.random_model(n, r, rng=rng)
        x = signal_model.synthesize(model)
        mask = signal_model.uniform_mask(n, m, rng=rng)
        y = hankel_ops.apply_D(signal_model.observe(x, mask))
        Z0, _ = lowrank.spectral_init(y, mask, r, seed=seed)
        Gy = hankel_ops.lift_dense(x)
        ratios.append(np.linalg.norm(Z0 @ Z0.T - Gy) / np.linalg.norm(Gy))
    assert np.median(ratios) <= 0.5
    assert max(ratios) <= 0.7


def test_spectral_init_scaling_homogeneity(rng):
    x, mask = full_mask_instance(rng)
    y = hankel_ops.apply_D(x)
    Z0, s1 = lowrank.spectral_init(y, mask, 3, seed=0)
    Z0c, s1c = lowrank.spectral_init(4.0 * y, mask, 3, seed=0)
    assert s1c == pytest.approx(4.0 * s1, rel=1e-8)
    assert rel(Z0c @ Z0c.T, 4.0 * (Z0 @ Z0.T)) <= 1e-8


def test_spectral_init_rank_too_large(rng):
    x, mask = full_mask_instance(rng, n=15, r=2)
    y = hankel_ops.apply_D(x)
    with pytest.raises((ValueError, lowrank.RankDeficiencyError)):
        lowrank.spectral_init(y, mask, 9, seed=0)

import numpy as np
import pytest
import torch

from cvrc.errors import ConvergenceError, InvalidInputError, SolverError
from cvrc.rc.cxnum import (CDTYPE, RDTYPE, cmatrix, cvector, hermitian, matmul,
                           solve_regularized, spectral_radius)

from conftest import ridge_oracle


def _random_complex(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def test_constructors_coerce_and_validate():
    m = cmatrix([[1, 2], [3, 4]])
    assert m.dtype == CDTYPE
    assert cmatrix([[1.0, 2.0]], complex_valued=False).dtype == RDTYPE
    assert cvector([1j, 2]).shape == (2,)
    with pytest.raises(InvalidInputError):
        cmatrix(torch.zeros(0, 3))
    with pytest.raises(InvalidInputError):
        cvector(torch.zeros(2, 2))


def test_matmul_matches_triple_loop(rng):
    a = _random_complex(rng, 3, 4)
    b = _random_complex(rng, 4, 2)
    expected = np.zeros((3, 2), dtype=np.complex128)
    for i in range(3):
        for j in range(2):
            for k in range(4):
                expected[i, j] += a[i, k] * b[k, j]
    got = matmul(torch.from_numpy(a), torch.from_numpy(b)).numpy()
    assert np.allclose(got, expected, atol=1e-12)


def test_matmul_rejects_mismatched_dims():
    with pytest.raises(InvalidInputError, match='cannot multiply'):
        matmul(torch.zeros(2, 3, dtype=CDTYPE), torch.zeros(2, 3, dtype=CDTYPE))


def test_hermitian_is_conjugate_transpose():
    a = torch.tensor([[1 + 2j, 3 - 1j]], dtype=CDTYPE)
    h = hermitian(a)
    assert h.shape == (2, 1)
    assert h[0, 0] == 1 - 2j and h[1, 0] == 3 + 1j


@pytest.mark.parametrize('lam', [0.0, 1e-12, 1e-3])
def test_solve_matches_gaussian_elimination_oracle(rng, lam):
    for _ in range(67):
        n_res = int(rng.integers(1, 21))
        n = int(rng.integers(n_res + 2, 51))
        n_out = int(rng.integers(1, 6))
        x = _random_complex(rng, n, n_res)
        d = _random_complex(rng, n, n_out)
        xa = np.hstack([x, np.ones((n, 1))])
        got = solve_regularized(torch.from_numpy(xa), torch.from_numpy(d), lam).numpy()
        want = ridge_oracle(x, d, lam)
        assert got.shape == (n_out, n_res + 1)
        assert np.linalg.norm(got - want) <= 1e-8 * np.linalg.norm(want)


def test_singular_gram_reports_step():
    x = torch.tensor([[1.0, 0.0], [2.0, 0.0], [3.0, 0.0]], dtype=CDTYPE)
    d = torch.ones(3, 1, dtype=CDTYPE)
    with pytest.raises(SolverError) as info:
        solve_regularized(x, d, 0.0)
    assert info.value.step == 2


def test_regularization_resolves_zero_column():
    x = torch.tensor([[1.0, 0.0], [2.0, 0.0], [3.0, 0.0]], dtype=CDTYPE)
    d = torch.tensor([[2.0], [4.0], [6.0]], dtype=CDTYPE)
    params = solve_regularized(x, d, 1e-6)
    assert abs(params[0, 0] - 2) < 1e-5
    assert abs(params[0, 1]) < 1e-12


def test_solve_rejects_bad_input():
    with pytest.raises(InvalidInputError):
        solve_regularized(torch.ones(3, 2), torch.ones(2, 1), 0.0)
    with pytest.raises(InvalidInputError):
        solve_regularized(torch.ones(3, 2), torch.ones(3, 1), -1.0)


def test_spectral_radius_known_matrices():
    diag = torch.diag(torch.tensor([0.3, -0.8, 0.5], dtype=RDTYPE))
    assert abs(spectral_radius(diag) - 0.8) < 1e-8
    # real rotation: dominant eigenvalues are the conjugate pair +-0.5j
    rot = 0.5 * torch.tensor([[0.0, -1.0], [1.0, 0.0]], dtype=RDTYPE)
    assert abs(spectral_radius(rot) - 0.5) < 1e-8
    assert spectral_radius(torch.zeros(4, 4, dtype=CDTYPE)) == 0.0


def test_spectral_radius_matches_eigvals(rng):
    for _ in range(10):
        w = _random_complex(rng, 8, 8)
        want = np.max(np.abs(np.linalg.eigvals(w)))
        got = spectral_radius(torch.from_numpy(w))
        assert abs(got - want) <= 1e-6 * want


def test_spectral_radius_is_repeatable(rng):
    w = torch.from_numpy(_random_complex(rng, 6, 6))
    assert spectral_radius(w) == spectral_radius(w)


def test_spectral_radius_errors(rng):
    with pytest.raises(InvalidInputError):
        spectral_radius(torch.ones(2, 3))
    # wider than the iterated block, so one sweep cannot settle
    w = torch.from_numpy(_random_complex(rng, 40, 40))
    with pytest.raises(ConvergenceError) as info:
        spectral_radius(w, max_iter=1)
    assert info.value.estimate > 0


@pytest.mark.parametrize('n', [50, 300])
def test_spectral_radius_of_large_matrices(rng, n):
    for w in (_random_complex(rng, n, n), rng.uniform(-1, 1, (n, n))):
        want = np.max(np.abs(np.linalg.eigvals(w)))
        got = spectral_radius(torch.from_numpy(w))
        assert abs(got - want) <= 1e-8 * want


def test_spectral_radius_separates_nearly_tied_moduli(rng):
    # real eigenvalue 2.9911 next to a complex pair of modulus 2.9892
    n = 30
    core = np.zeros((n, n))
    core[0, 0] = 2.9911
    c, s = 2.9892 * np.cos(0.4), 2.9892 * np.sin(0.4)
    core[1:3, 1:3] = [[c, -s], [s, c]]
    core[3:, 3:] = np.diag(rng.uniform(-1, 1, n - 3))
    q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    w = q @ core @ q.T
    assert abs(spectral_radius(torch.from_numpy(w)) - 2.9911) < 1e-8


def test_spectral_radius_scales_with_the_matrix(rng):
    w = torch.from_numpy(_random_complex(rng, 12, 12))
    c = complex(rng.standard_normal(), rng.standard_normal())
    assert abs(spectral_radius(c * w) - abs(c) * spectral_radius(w)) < 1e-6


def test_matmul_is_associative(rng):
    a, b, c = (torch.from_numpy(_random_complex(rng, *shape))
               for shape in ((3, 4), (4, 5), (5, 2)))
    assert torch.allclose(matmul(matmul(a, b), c), matmul(a, matmul(b, c)), atol=1e-12)


def test_hermitian_is_an_involution(rng):
    a = torch.from_numpy(_random_complex(rng, 4, 3))
    assert torch.equal(hermitian(hermitian(a)), a)
    sym = torch.tensor([[2.0, 1.0], [1.0, 3.0]], dtype=CDTYPE)
    assert torch.equal(hermitian(sym), sym)

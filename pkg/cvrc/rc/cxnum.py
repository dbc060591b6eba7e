"""
Dense complex linear algebra used by the reservoir and the readout.

Matrices and vectors are plain torch tensors (2-D and 1-D). Complex data
is always complex128; the real-valued baseline runs the same code paths
on float64 tensors.
"""

import torch

from cvrc.errors import ConvergenceError, InvalidInputError, SolverError
from cvrc.utils import make_generator

CDTYPE = torch.complex128
RDTYPE = torch.float64

SPECTRAL_TOL = 1e-12
SPECTRAL_BLOCK = 8
SPECTRAL_MAX_ITER = 10000
SPECTRAL_SEED = 20210401

# Type aliases for readability; both are torch.Tensor at runtime.
CMatrix = torch.Tensor
CVector = torch.Tensor


def _coerce(data, complex_valued):
    t = torch.as_tensor(data)
    if complex_valued or t.is_complex():
        return t.to(CDTYPE)
    return t.to(RDTYPE)


def cmatrix(data, complex_valued=True):
    t = _coerce(data, complex_valued)
    if t.dim() != 2 or t.shape[0] < 1 or t.shape[1] < 1:
        raise InvalidInputError(
            'cxnum', 'matrix needs rows >= 1 and cols >= 1, got shape {}'.format(tuple(t.shape)))
    return t


def cvector(data, complex_valued=True):
    t = _coerce(data, complex_valued)
    if t.dim() != 1 or t.shape[0] < 1:
        raise InvalidInputError(
            'cxnum', 'vector needs length >= 1, got shape {}'.format(tuple(t.shape)))
    return t


def matmul(a, b):
    if a.dim() != 2 or b.dim() != 2 or a.shape[1] != b.shape[0]:
        raise InvalidInputError(
            'cxnum', 'cannot multiply {} by {}'.format(tuple(a.shape), tuple(b.shape)))
    if a.dtype != b.dtype:
        a, b = a.to(CDTYPE), b.to(CDTYPE)
    return a @ b


def hermitian(a):
    # resolve_conj materializes the lazy conjugate view
    return a.conj().transpose(-2, -1).resolve_conj().contiguous()


def solve_regularized(x, d, lam):
    """
    Ridge solve of the stacked readout [W_out b_out] = ((X^H X + lam I)^-1 X^H D)^T.

    The Gram matrix is factorized with Cholesky. For lam > 0 a rounding-level
    breakdown falls back to a Bunch-Kaufman LDL^H factorization of the same
    Hermitian system; for lam == 0 it is reported as a SolverError.
    """
    if x.dim() != 2 or d.dim() != 2:
        raise InvalidInputError('cxnum', 'design and target must be matrices')
    if x.shape[0] != d.shape[0]:
        raise InvalidInputError(
            'cxnum', 'design has {} rows but targets have {}'.format(x.shape[0], d.shape[0]))
    if lam < 0:
        raise InvalidInputError('cxnum', 'lambda must be >= 0, got {}'.format(lam))
    if x.dtype != d.dtype:
        x, d = x.to(CDTYPE), d.to(CDTYPE)

    xh = hermitian(x)
    gram = xh @ x
    if lam > 0:
        gram = gram + lam * torch.eye(gram.shape[0], dtype=gram.dtype)
    rhs = xh @ d

    chol, info = torch.linalg.cholesky_ex(gram)
    step = int(info)
    if step == 0:
        params = torch.cholesky_solve(rhs, chol)
    elif lam > 0:
        ld, pivots, ld_info = torch.linalg.ldl_factor_ex(gram, hermitian=True)
        if int(ld_info) != 0:
            raise SolverError(
                'cxnum', 'LDL factorization failed at step {}'.format(int(ld_info)),
                step=int(ld_info))
        params = torch.linalg.ldl_solve(ld, pivots, rhs, hermitian=True)
    else:
        raise SolverError(
            'cxnum',
            'Gram matrix is singular with lambda=0: leading minor of order {} '
            'of {} is not positive definite'.format(step, gram.shape[0]),
            step=step)
    return params.transpose(0, 1).contiguous()


def _top_ritz_pair(q, wq):
    """Ritz value of largest modulus from the projected block and its residual."""
    h = hermitian(q) @ wq
    evals, evecs = torch.linalg.eig(h)
    k = int(torch.argmax(evals.abs()))
    lam, s = evals[k], evecs[:, k]
    resid = wq.to(CDTYPE) @ s - lam * (q.to(CDTYPE) @ s)
    return float(lam.abs()), float(torch.linalg.vector_norm(resid))


def spectral_radius(w, tol=SPECTRAL_TOL, max_iter=SPECTRAL_MAX_ITER):
    """
    Spectral radius by block power (subspace) iteration.

    A block of up to SPECTRAL_BLOCK columns is iterated so that dominant
    eigenvalues of nearly equal modulus, including complex-conjugate pairs
    of real matrices, sit inside the same subspace. The estimate is the
    largest Ritz value modulus of the projected block; iteration stops once
    the residual of that Ritz pair is below tol times the Frobenius norm of
    w. The start block is drawn from a fixed seed so repeated calls are
    bit-identical.
    """
    if w.dim() != 2 or w.shape[0] != w.shape[1]:
        raise InvalidInputError(
            'cxnum', 'spectral radius needs a square matrix, got {}'.format(tuple(w.shape)))
    n = w.shape[0]
    scale = float(torch.linalg.matrix_norm(w))
    if scale == 0.0:
        return 0.0
    p = min(SPECTRAL_BLOCK, n)
    gen = make_generator(SPECTRAL_SEED)
    q = torch.randn(n, p, generator=gen, dtype=RDTYPE)
    if w.is_complex():
        q = torch.complex(q, torch.randn(n, p, generator=gen, dtype=RDTYPE))
    q, _ = torch.linalg.qr(q)

    estimate = 0.0
    for _ in range(max_iter):
        wq = w @ q
        if float(torch.linalg.matrix_norm(wq)) == 0.0:
            return 0.0
        estimate, resid = _top_ritz_pair(q, wq)
        if resid <= tol * scale:
            return estimate
        q, _ = torch.linalg.qr(wq)
    raise ConvergenceError(
        'cxnum', 'power iteration did not converge in {} iterations '
        '(last estimate {:.12g})'.format(max_iter, estimate), estimate=estimate)

import numpy as np
import pytest

from cvrc.experiments.aspect import AspectHyper, train_aspect
from cvrc.rc.reservoir import ReservoirConfig
from cvrc.scene.synthscene import Cone, SceneSpec, build_scene


def gauss_solve(a, b):
    """Gaussian elimination with partial pivoting, written out by hand."""
    a = np.array(a, dtype=np.complex128)
    b = np.array(b, dtype=np.complex128)
    n = a.shape[0]
    for k in range(n):
        p = k + int(np.argmax(np.abs(a[k:, k])))
        a[[k, p]] = a[[p, k]]
        b[[k, p]] = b[[p, k]]
        for i in range(k + 1, n):
            f = a[i, k] / a[k, k]
            a[i, k:] -= f * a[k, k:]
            b[i] -= f * b[k]
    x = np.zeros_like(b)
    for k in range(n - 1, -1, -1):
        x[k] = (b[k] - a[k, k + 1:] @ x[k + 1:]) / a[k, k]
    return x


def ridge_oracle(x, d, lam):
    """[W b]^T from the normal equations of the design [x 1]."""
    x = np.asarray(x, dtype=np.complex128)
    d = np.asarray(d, dtype=np.complex128)
    xa = np.hstack([x, np.ones((x.shape[0], 1))])
    gram = xa.conj().T @ xa + lam * np.eye(xa.shape[1])
    return gauss_solve(gram, xa.conj().T @ d).T


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope='session')
def small_spec():
    return SceneSpec(width=120, height=120, cone=Cone(60, 60, 50, 500.0),
                     coherence=1.0, scree_radius=0.0, seed=1)


@pytest.fixture(scope='session')
def clean_scene(small_spec):
    return build_scene(small_spec)


@pytest.fixture(scope='session')
def small_hyper():
    return AspectHyper(n_w=5, n_t=5, per_area=100, lam=1e-12)


@pytest.fixture(scope='session')
def trained_run(clean_scene, small_hyper):
    return train_aspect(clean_scene.diff_ew, clean_scene.diff_ns, clean_scene.teacher_areas,
                        small_hyper, ReservoirConfig(), seed=3)

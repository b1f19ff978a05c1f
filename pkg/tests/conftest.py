import numpy as np
import pytest

from stlf import _kernels


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    """Compile the jitted kernels once so timing-sensitive tests stay honest."""
    y = np.linspace(1.0, 2.0, 16)
    _kernels.dshw_pass(y, 0.1, 0.1, 0.1, 1.0, np.ones(24), np.ones(168))
    _kernels.arma_innovations(y, np.array([0.5]), np.array([0.1]), 0.0, 1)
    rng = np.random.default_rng(0)
    X = rng.standard_normal((40, 3))
    t = X[:, 0].copy()
    arrays = _kernels.grow_tree(X, t, np.arange(40, dtype=np.int64), 3, 5, np.uint64(1))
    out = np.zeros(X.shape[0])
    _kernels.predict_tree(*arrays, X, out)

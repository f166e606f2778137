import numpy as np

from .errors import NumericalDegeneracyError

_JITTERS = (1e-10, 1e-9, 1e-8, 1e-7, 1e-6)


def symmetrize(S):
    S = np.asarray(S, dtype=float)
    return 0.5 * (S + np.swapaxes(S, -1, -2))


def _cholesky_one(A):
    try:
        return np.linalg.cholesky(A)
    except np.linalg.LinAlgError:
        pass
    eye = np.eye(A.shape[-1])
    scale = max(float(np.max(np.abs(np.diag(A)))), np.finfo(float).tiny)
    for jitter in _JITTERS:
        try:
            return np.linalg.cholesky(A + jitter * scale * eye)
        except np.linalg.LinAlgError:
            continue
    raise NumericalDegeneracyError(
        "matrix is not positive definite even after jitter of 1e-6 (relative)"
    )


def cholesky(S):
    """Lower Cholesky factor of a (stack of) SPD matrices.

    The input is symmetrized first. Matrices that fail the plain factorization
    are retried individually with relative diagonal jitter escalating from
    1e-10 to 1e-6 before a :class:`NumericalDegeneracyError` is raised.
    """
    S = symmetrize(S)
    if not np.all(np.isfinite(S)):
        raise NumericalDegeneracyError("matrix contains non-finite entries")
    try:
        return np.linalg.cholesky(S)
    except np.linalg.LinAlgError:
        pass
    if S.ndim == 2:
        return _cholesky_one(S)
    flat = S.reshape((-1,) + S.shape[-2:])
    out = np.empty_like(flat)
    for i, A in enumerate(flat):
        out[i] = _cholesky_one(A)
    return out.reshape(S.shape)


def logdet_from_chol(L):
    return 2.0 * np.sum(np.log(np.diagonal(L, axis1=-2, axis2=-1)), axis=-1)


def spd_inv_logdet(S):
    """Return (S^-1, log|S|) for a stack of SPD matrices."""
    L = cholesky(S)
    Linv = np.linalg.inv(L)
    inv = np.swapaxes(Linv, -1, -2) @ Linv
    return symmetrize(inv), logdet_from_chol(L)


def spd_inv(S):
    return spd_inv_logdet(S)[0]


def spd_logdet(S):
    return logdet_from_chol(cholesky(S))


def outer(a, b=None):
    b = a if b is None else b
    return a[..., :, None] * b[..., None, :]

"""Structured matrices of the OFDMA block model and the two decomposition
kernels (kernel basis, regularized inverse) the precoders are built from.

Conventions: taps ``h = [h(0), ..., h(L)]``; ``N`` useful subcarriers;
cyclic prefix of length ``L``; all matrices are dense complex ndarrays.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.linalg import lapack

from ._validation import check_matrix, check_positive, check_positive_int
from .exceptions import DegenerateChannelError, SingularSystemError

__all__ = [
    "SpectralMask",
    "toeplitz_channel",
    "toeplitz_channel_batch",
    "cp_insertion_matrix",
    "dft_matrix",
    "subcarrier_masks",
    "subcarrier_owner",
    "null_space_basis",
    "null_space_basis_batch",
    "regularized_inverse",
]

NULL_RANK_TOL = 1e-10
SINGULAR_COND = 1e12


@dataclass(frozen=True, eq=False)
class SpectralMask:
    """Receive filter of one MUE: 0/1 indicator over the N subcarriers."""

    diag: np.ndarray
    user_index: int  # 1-based

    @property
    def matrix(self):
        return np.diag(self.diag.astype(float))

    @property
    def support(self):
        return np.flatnonzero(self.diag)


def toeplitz_channel(h, N, L=None):
    """Banded ``N x (N+L)`` convolution matrix of a tap vector.

    Row ``r`` holds ``h(L), ..., h(0)`` in columns ``r .. r+L``, i.e. the
    channel after cyclic-prefix removal acting on one transmitted block.
    """
    h = np.asarray(h, dtype=complex).ravel()
    N = check_positive_int(N, "N")
    if h.size == 0:
        raise ValueError("empty tap vector")
    if L is not None and h.size != L + 1:
        raise ValueError(f"tap vector has {h.size} entries, expected L+1={L + 1}")
    L = h.size - 1
    first_row = np.zeros(N + L, dtype=complex)
    first_row[:L + 1] = h[::-1]
    first_col = np.zeros(N, dtype=complex)
    first_col[0] = h[-1]
    return scipy.linalg.toeplitz(first_col, first_row)


def toeplitz_channel_batch(taps, N):
    """Stack of :func:`toeplitz_channel` over the leading axes of ``taps``.

    ``taps`` has shape ``(..., L+1)``; the result ``(..., N, N+L)``.
    """
    taps = np.asarray(taps, dtype=complex)
    L = taps.shape[-1] - 1
    out = np.zeros(taps.shape[:-1] + (N, N + L), dtype=complex)
    rows = np.arange(N)
    for offset in range(L + 1):
        out[..., rows, rows + offset] = taps[..., L - offset, None]
    return out


def cp_insertion_matrix(N, L):
    """``(N+L) x N`` matrix prepending the last ``L`` entries of a block."""
    N = check_positive_int(N, "N")
    L = check_positive_int(L, "L")
    if L >= N:
        raise ValueError(f"cyclic prefix L={L} must be shorter than N={N}")
    A = np.zeros((N + L, N))
    A[:L, N - L:] = np.eye(L)
    A[L:, :] = np.eye(N)
    return A


def dft_matrix(N):
    """Unitary DFT, ``F[k, l] = exp(-2j*pi*k*l/N) / sqrt(N)``."""
    N = check_positive_int(N, "N")
    k = np.arange(N)
    # reduce k*l mod N first so large N keeps full phase accuracy
    phase = np.outer(k, k) % N
    return np.exp(-2j * np.pi * phase / N) / np.sqrt(N)


def subcarrier_masks(N, M):
    """Contiguous uniform OFDMA allocation of ``N/M`` subcarriers per MUE."""
    N = check_positive_int(N, "N")
    M = check_positive_int(M, "M")
    if N % M:
        raise ValueError(f"M={M} does not divide N={N}")
    width = N // M
    masks = []
    for j in range(M):
        d = np.zeros(N, dtype=np.int8)
        d[j * width:(j + 1) * width] = 1
        masks.append(SpectralMask(d, j + 1))
    return masks


def subcarrier_owner(masks):
    """0-based index of the MUE owning each subcarrier."""
    stacked = np.array([m.diag for m in masks])
    if not np.all(stacked.sum(axis=0) == 1):
        raise ValueError("masks do not partition the subcarriers")
    return np.argmax(stacked, axis=0)


def null_space_basis(H, tol=NULL_RANK_TOL):
    """Orthonormal basis of ``ker(H)`` for a wide full-row-rank ``H``.

    Computed from the LQ factorization ``H = L Q`` obtained as the
    conjugate transpose of the Householder QR of ``H^H``; the trailing
    ``cols - rows`` columns of ``Q^H`` span the kernel.

    Raises
    ------
    DegenerateChannelError
        If a diagonal entry of the triangular factor falls below
        ``tol * ||H||_F``.
    """
    H = check_matrix(H, "H")
    n_rows, n_cols = H.shape
    if n_rows >= n_cols:
        raise ValueError(f"H {H.shape} is not wide, kernel is trivial")
    Q, R = np.linalg.qr(H.conj().T, mode="complete")
    scale = np.linalg.norm(H)
    if scale == 0 or np.abs(np.diag(R)).min() < tol * scale:
        raise DegenerateChannelError("degenerate channel: rank(H) < rows")
    return Q[:, n_rows:]


def null_space_basis_batch(H, tol=NULL_RANK_TOL):
    """:func:`null_space_basis` over a stack ``(..., rows, cols)``.

    Only the trailing Householder columns are formed (``geqrf`` followed
    by ``unmqr`` on ``[0; I]``), about half the work of a complete QR.
    """
    H = np.asarray(H, dtype=complex)
    n_rows, n_cols = H.shape[-2:]
    if n_rows >= n_cols:
        raise ValueError(f"blocks {H.shape[-2:]} are not wide")
    lead = H.shape[:-2]
    flat = H.reshape((-1, n_rows, n_cols))
    dim = n_cols - n_rows
    seed = np.zeros((n_cols, dim), dtype=complex)
    seed[n_rows:] = np.eye(dim)
    out = np.empty((flat.shape[0], n_cols, dim), dtype=complex)
    for i, block in enumerate(flat):
        scale = np.linalg.norm(block)
        qr, tau, _, info = lapack.zgeqrf(block.conj().T)
        if info != 0:
            raise np.linalg.LinAlgError(f"geqrf failed with info={info}")
        if scale == 0 or np.abs(np.diag(qr)).min() < tol * scale:
            raise DegenerateChannelError("degenerate channel: rank(H) < rows")
        basis, _, info = lapack.zunmqr("L", "N", qr, tau, seed.copy(),
                                       lwork=max(1, n_cols * dim))
        if info != 0:
            raise np.linalg.LinAlgError(f"unmqr failed with info={info}")
        out[i] = basis
    return out.reshape(lead + (n_cols, dim))


def regularized_inverse(H, alpha):
    """``H^H (alpha I + H H^H)^{-1}``.

    ``alpha = 0`` gives the right pseudo-inverse and requires ``H H^H`` to be
    well conditioned.
    """
    H = check_matrix(H, "H")
    alpha = check_positive(alpha, "alpha", strict=False)
    gram = H @ H.conj().T
    if alpha == 0 and np.linalg.cond(gram) > SINGULAR_COND:
        raise SingularSystemError("singular system: H H^H is not invertible")
    system = gram + alpha * np.eye(H.shape[0])
    # the system matrix is Hermitian, so (S^{-1} H)^H = H^H S^{-1}
    return np.linalg.solve(system, H).conj().T

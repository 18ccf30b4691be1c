"""Column-stacked vectorization and the Lindblad superoperator.

Entry ``(r, c)`` of an ``N x N`` matrix sits at index ``c * N + r`` of its
vectorization, so ``vec(A rho B) = (B^T kron A) vec(rho)`` and

    L = -i (I kron H - H^T kron I)
        + sum_k G_k [ conj(O_k) kron O_k - 1/2 I kron O_k^dag O_k - 1/2 (O_k^dag O_k)^T kron I ].
"""

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import kernels
from .dissipators import JumpSet

DROP_TOL = 1e-16


def vec(rho):
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {rho.shape}")
    return rho.reshape(-1, order="F").copy()


def unvec(x):
    x = np.asarray(x)
    if x.ndim != 1:
        raise ValueError("expected a 1-d vector")
    n = math.isqrt(x.shape[0])
    if n * n != x.shape[0]:
        raise ValueError(f"length {x.shape[0]} is not a perfect square")
    return x.reshape((n, n), order="F").copy()


def _hamiltonian_csr(h):
    hs = sp.csr_matrix(np.asarray(h, dtype=np.complex128))
    hs.eliminate_zeros()
    hs.sort_indices()
    return hs


def _check_dims(h, jumps):
    h = np.asarray(h)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise ValueError(f"Hamiltonian must be square, got shape {h.shape}")
    if not isinstance(jumps, JumpSet):
        raise TypeError("jumps must be a JumpSet")
    if jumps.n != h.shape[0]:
        raise ValueError(f"Hamiltonian dimension {h.shape[0]} does not match jump set dimension {jumps.n}")
    return h


def _action_args(hs, jumps):
    return (hs.indptr.astype(np.int64), hs.indices.astype(np.int64), hs.data) + jumps.packed


@dataclass(frozen=True, eq=False)
class Superoperator:
    """Liouvillian as a CSR matrix plus a matrix-free evaluator."""

    n: int
    sparse: sp.csr_matrix
    hamiltonian: np.ndarray
    jumps: JumpSet

    @property
    def dim(self):
        return self.n * self.n

    def action(self, x):
        """``L @ x`` computed without the assembled matrix."""
        rho = np.asarray(x, dtype=np.complex128).reshape((self.n, self.n), order="F")
        out = kernels.lindblad_action(np.ascontiguousarray(rho), *self._args)
        return out.reshape(-1, order="F")

    def apply(self, rho):
        """Matrix form of the master-equation right-hand side."""
        return kernels.lindblad_action(np.ascontiguousarray(rho, dtype=np.complex128), *self._args)

    def to_dense(self):
        return self.sparse.toarray()

    @property
    def max_abs(self):
        return float(np.abs(self.sparse.data).max(initial=0.0))

    def __post_init__(self):
        hs = _hamiltonian_csr(self.hamiltonian)
        object.__setattr__(self, "_args", _action_args(hs, self.jumps))


def assemble_liouvillian(h, jumps):
    """Sparse Liouvillian; Hamiltonian part first, then channels in order."""
    h = _check_dims(h, jumps)
    n = h.shape[0]
    hs = _hamiltonian_csr(h)
    coo = hs.tocoo()
    rows, cols, vals = kernels.assemble_coo(
        n,
        coo.row.astype(np.int64),
        coo.col.astype(np.int64),
        coo.data.astype(np.complex128),
        *jumps.packed,
    )
    mat = sp.coo_matrix((vals, (rows, cols)), shape=(n * n, n * n)).tocsr()
    mat.sum_duplicates()
    mat.data[np.abs(mat.data) < DROP_TOL] = 0.0
    mat.eliminate_zeros()
    mat.sort_indices()
    return Superoperator(n=n, sparse=mat, hamiltonian=np.array(h), jumps=jumps)


def apply_liouvillian(h, jumps, rho):
    """``-i[H, rho] + sum_k G_k (O rho O^dag - 1/2 {O^dag O, rho})``."""
    h = _check_dims(h, jumps)
    rho = np.asarray(rho, dtype=np.complex128)
    if rho.shape != h.shape:
        raise ValueError(f"density matrix shape {rho.shape} does not match {h.shape}")
    hs = _hamiltonian_csr(h)
    return kernels.lindblad_action(np.ascontiguousarray(rho), *_action_args(hs, jumps))


def write_coo(superop, path):
    """Write ``row col re im`` lines (0-based, 17 significant digits)."""
    coo = superop.sparse.tocoo()
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# {superop.dim} {superop.dim} {coo.nnz}\n")
        for r, c, z in zip(coo.row, coo.col, coo.data):
            fh.write(f"{r} {c} {z.real:.17g} {z.imag:.17g}\n")


def read_coo(path):
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().split()
        dim = int(header[1])
        data = np.loadtxt(fh, ndmin=2)
    if data.size == 0:
        return sp.csr_matrix((dim, dim), dtype=np.complex128)
    rows = data[:, 0].astype(np.int64)
    cols = data[:, 1].astype(np.int64)
    return sp.csr_matrix((data[:, 2] + 1j * data[:, 3], (rows, cols)), shape=(dim, dim))

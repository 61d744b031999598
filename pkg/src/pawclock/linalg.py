"""Dense complex linear algebra on small tensor-product Hilbert spaces.

Operators are plain ``complex128`` numpy arrays of shape ``(d, d)`` and
states are 1-d arrays of length ``d``.  Tensor factors are ordered with the
leftmost factor as the slowest-varying index (``np.kron`` convention).

All routines are pure: inputs are never modified.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from typing import Sequence

import numpy as np

HERMITIAN_RTOL = 1e-12
UNITARY_ATOL = 1e-10
KERNEL_RTOL = 1e-9
DEGENERACY_RTOL = 1e-9

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)


def as_operator(a) -> np.ndarray:
    op = np.asarray(a, dtype=complex)
    if op.ndim != 2 or op.shape[0] != op.shape[1]:
        raise ValueError(f"operator must be square, got shape {op.shape}")
    return op


def opnorm(a: np.ndarray) -> float:
    """Spectral norm (largest singular value)."""
    a = np.asarray(a)
    if a.size == 0:
        return 0.0
    return float(np.linalg.norm(a, ord=2))


def hermitian_defect(op: np.ndarray) -> float:
    op = np.asarray(op)
    return float(np.max(np.abs(op - op.conj().T))) if op.size else 0.0


def is_hermitian(op: np.ndarray, rtol: float = HERMITIAN_RTOL) -> bool:
    """True iff ``max|O - O^dag| <= rtol * max(1, max|O|)``."""
    op = np.asarray(op)
    scale = max(1.0, float(np.max(np.abs(op)))) if op.size else 1.0
    return hermitian_defect(op) <= rtol * scale


def is_unitary(op: np.ndarray, atol: float = UNITARY_ATOL) -> bool:
    op = np.asarray(op)
    return float(np.max(np.abs(op.conj().T @ op - np.eye(op.shape[0])))) <= atol


def _require_hermitian(op: np.ndarray) -> np.ndarray:
    op = as_operator(op)
    if not is_hermitian(op):
        raise ValueError(
            f"operator is not Hermitian (defect {hermitian_defect(op):.3e})")
    return op


def commutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a @ b - b @ a


def fidelity(x: np.ndarray, y: np.ndarray) -> float:
    """Phase-invariant overlap ``|<x|y>| / (|x| |y|)``."""
    nx, ny = np.linalg.norm(x), np.linalg.norm(y)
    if nx == 0 or ny == 0:
        raise ValueError("fidelity of a zero vector is undefined")
    return float(abs(np.vdot(x, y)) / (nx * ny))


def tensor_product(*ops: np.ndarray) -> np.ndarray:
    """Kronecker product with the first factor as the slowest index."""
    if not ops:
        raise ValueError("need at least one factor")
    return reduce(np.kron, (np.asarray(o, dtype=complex) for o in ops))


def embed_local(op: np.ndarray, site: int, dims: Sequence[int]) -> np.ndarray:
    """Return ``1 x ... x op x ... x 1`` with ``op`` acting on factor ``site``."""
    op = as_operator(op)
    dims = [int(d) for d in dims]
    if not 0 <= site < len(dims):
        raise IndexError(f"site {site} out of range for {len(dims)} factors")
    if dims[site] != op.shape[0]:
        raise ValueError(
            f"operator dimension {op.shape[0]} does not match dims[{site}]={dims[site]}")
    left = int(np.prod(dims[:site], dtype=int))
    right = int(np.prod(dims[site + 1:], dtype=int))
    return np.kron(np.kron(np.eye(left), op), np.eye(right))


@dataclass(frozen=True)
class SpectralDecomposition:
    """Eigen-data of a Hermitian operator, eigenvalues ascending.

    ``eigenvectors[:, k]`` is the eigenvector for ``eigenvalues[k]``.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def dim(self) -> int:
        return len(self.eigenvalues)

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.conj().T

    def apply(self, fn) -> np.ndarray:
        """Operator function ``sum_k fn(lambda_k) |v_k><v_k|``."""
        v = self.eigenvectors
        return (v * fn(self.eigenvalues)) @ v.conj().T

    def evolve(self, t: float) -> np.ndarray:
        return self.apply(lambda lam: np.exp(-1j * lam * t))

    def evolve_state(self, psi: np.ndarray, times) -> np.ndarray:
        """Rows are ``exp(-i O t) psi`` for each ``t`` in ``times``."""
        v = self.eigenvectors
        coeff = v.conj().T @ np.asarray(psi, dtype=complex)
        phases = np.exp(-1j * np.outer(np.atleast_1d(times), self.eigenvalues))
        return (phases * coeff) @ v.T

    def degenerate_groups(self, rtol: float = DEGENERACY_RTOL) -> list[np.ndarray]:
        """Index groups of eigenvalues coinciding within ``rtol * |O|``."""
        lam = self.eigenvalues
        if lam.size == 0:
            return []
        scale = max(float(np.max(np.abs(lam))), 1e-300)
        groups, current = [], [0]
        for k in range(1, lam.size):
            if lam[k] - lam[current[-1]] <= rtol * scale:
                current.append(k)
            else:
                groups.append(np.array(current))
                current = [k]
        groups.append(np.array(current))
        return groups

    def projector(self, indices) -> np.ndarray:
        v = self.eigenvectors[:, np.asarray(indices)]
        return v @ v.conj().T


def eig_hermitian(op: np.ndarray) -> SpectralDecomposition:
    op = _require_hermitian(op)
    herm = 0.5 * (op + op.conj().T)
    lam, vec = np.linalg.eigh(herm)
    return SpectralDecomposition(lam, vec)


def kernel(op: np.ndarray, tol: float = KERNEL_RTOL) -> list[np.ndarray]:
    """Orthonormal basis of the (numerical) null space of a Hermitian operator.

    A direction is kept when its eigenvalue satisfies ``|lambda| <= tol * |O|``.
    An empty list is a valid answer.
    """
    spec = eig_hermitian(op)
    scale = float(np.max(np.abs(spec.eigenvalues))) if spec.dim else 0.0
    keep = np.abs(spec.eigenvalues) <= tol * scale
    if scale == 0.0:
        keep[:] = True
    return [spec.eigenvectors[:, k].copy() for k in np.flatnonzero(keep)]


def evolve(op: np.ndarray, t: float) -> np.ndarray:
    """``exp(-i O t)`` through the spectral decomposition (hbar = 1)."""
    return eig_hermitian(op).evolve(t)


@dataclass(frozen=True)
class SchmidtData:
    """``psi = sum_n sqrt(lambda_n) left[:, n] (x) right[:, n]``."""

    coefficients: np.ndarray
    left: np.ndarray
    right: np.ndarray

    @property
    def rank(self) -> int:
        return len(self.coefficients)

    def reconstruct(self) -> np.ndarray:
        amps = np.sqrt(self.coefficients)
        mat = (self.left * amps) @ self.right.T
        return mat.reshape(-1)


def schmidt(psi: np.ndarray, d_left: int, d_right: int,
            cutoff: float = 1e-14) -> SchmidtData:
    """Schmidt decomposition by SVD; weights below ``cutoff`` are dropped."""
    psi = np.asarray(psi, dtype=complex)
    if psi.shape != (d_left * d_right,):
        raise ValueError(
            f"state of length {psi.size} cannot split as {d_left} x {d_right}")
    u, s, vh = np.linalg.svd(psi.reshape(d_left, d_right), full_matrices=False)
    lam = s ** 2
    norm = lam.sum()
    if norm == 0:
        raise ValueError("zero state has no Schmidt decomposition")
    keep = lam > cutoff * norm
    lam = lam[keep] / norm
    return SchmidtData(lam, u[:, keep], vh[keep].T)


def partial_trace(rho: np.ndarray, dims: Sequence[int], keep) -> np.ndarray:
    """Trace out every factor not listed in ``keep`` (kept order preserved)."""
    rho = as_operator(rho)
    dims = [int(d) for d in dims]
    if int(np.prod(dims)) != rho.shape[0]:
        raise ValueError(f"dims {dims} do not match operator of size {rho.shape[0]}")
    keep = sorted({int(k) for k in np.atleast_1d(keep)})
    if any(not 0 <= k < len(dims) for k in keep):
        raise IndexError(f"keep={keep} out of range for {len(dims)} factors")
    n = len(dims)
    letters = "abcdefghijklmnopqrstuvwxyz"
    if 2 * n > len(letters):
        raise ValueError("too many tensor factors")
    row = list(letters[:n])
    col = [row[i] if i not in keep else letters[n + i] for i in range(n)]
    out = "".join(row[i] for i in keep) + "".join(col[i] for i in keep)
    tensor = rho.reshape(dims + dims)
    d_keep = int(np.prod([dims[i] for i in keep], dtype=int))
    return np.einsum(f"{''.join(row)}{''.join(col)}->{out}", tensor).reshape(d_keep, d_keep)


def density(psi: np.ndarray) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    return np.outer(psi, psi.conj())


def random_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unitary from the QR of a complex Ginibre matrix."""
    z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_hermitian(d: int, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    z = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    return scale * 0.5 * (z + z.conj().T)


def random_state(d: int, rng: np.random.Generator) -> np.ndarray:
    z = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    return z / np.linalg.norm(z)

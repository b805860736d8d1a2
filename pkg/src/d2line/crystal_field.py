"""Rank-2 perturbations of the 6P3/2 manifold and their Kramers doublets.

A symmetric traceless tensor ``Q`` (cm^-1) couples to the level through

    H = sum_ij Q_ij T_ij,   T_ij = (J_i J_j + J_j J_i)/2 - delta_ij J(J+1)/3

With ``Q = (B/6) diag(-1, -1, 2)`` this is the axial form
``B (3 Jz^2 - J(J+1)) / 6``, so ``B > 0`` puts ``|m| = 3/2`` at ``+B/2``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .angular import j_matrices, twice

__all__ = [
    "AxialPerturbation",
    "TracelessTensor",
    "KramersSpectrum",
    "KramersError",
    "quadrupole_operators",
    "tensor_basis",
    "axial_tensor",
    "axial_hamiltonian",
    "tensor_hamiltonian",
    "hamiltonian_stack",
    "diagonalize_kramers",
    "rotate_tensor",
    "rotation_between",
]


class KramersError(ValueError):
    """Raised when eigenvalues of a 4x4 Hamiltonian do not pair into doublets."""


def _unit(v, name="axis") -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.shape != (3,):
        raise ValueError(f"{name} must be a 3-vector")
    n = np.linalg.norm(v)
    if abs(n - 1) > 1e-12:
        raise ValueError(f"{name} must be a unit vector, |{name}| = {n}")
    return v


@dataclass(frozen=True)
class AxialPerturbation:
    """Isotropic shift ``A`` and axial parameter ``B`` (cm^-1) about ``axis``."""

    A: float
    B: float
    axis: tuple = (0.0, 0.0, 1.0)

    def __post_init__(self):
        object.__setattr__(self, "axis", tuple(_unit(self.axis)))


@dataclass(frozen=True, eq=False)
class TracelessTensor:
    """Symmetric traceless 3x3 anisotropy tensor in cm^-1."""

    q: np.ndarray

    def __post_init__(self):
        q = np.array(self.q, dtype=float)
        if q.shape != (3, 3):
            raise ValueError("tensor must be 3x3")
        _check_traceless(q, 1e-12)
        q.setflags(write=False)
        object.__setattr__(self, "q", q)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.q))


def _check_traceless(q: np.ndarray, rtol: float) -> None:
    scale = np.linalg.norm(q)
    if np.abs(q - q.T).max() > rtol * scale:
        raise ValueError("tensor is not symmetric")
    if abs(np.trace(q)) > rtol * scale:
        raise ValueError(f"tensor is not traceless (trace = {np.trace(q)})")


def _as_q(Q, rtol=1e-9) -> np.ndarray:
    if isinstance(Q, TracelessTensor):
        return Q.q
    q = np.asarray(Q, dtype=float)
    if q.shape != (3, 3):
        raise ValueError("tensor must be 3x3")
    _check_traceless(q, rtol)
    return q


@lru_cache(maxsize=None)
def _quadrupole_operators(tj: int) -> np.ndarray:
    j = tj / 2
    J = j_matrices(j)
    dim = tj + 1
    t = np.empty((3, 3, dim, dim), dtype=complex)
    for a in range(3):
        for b in range(3):
            t[a, b] = 0.5 * (J[a] @ J[b] + J[b] @ J[a])
        t[a, a] -= j * (j + 1) / 3 * np.eye(dim)
    t.setflags(write=False)
    return t


def quadrupole_operators(j=1.5) -> np.ndarray:
    """Operators ``T_ij`` as an array of shape ``(3, 3, dim, dim)``.

    For ``j = 1/2`` every ``T_ij`` vanishes, so the 6P1/2 level is never
    split by a rank-2 perturbation.
    """
    return _quadrupole_operators(twice(j)).copy()


def tensor_basis() -> np.ndarray:
    """Orthonormal (Frobenius) basis of symmetric traceless 3x3 matrices, shape ``(5, 3, 3)``."""
    b = np.zeros((5, 3, 3))
    b[0] = np.diag([-1.0, -1.0, 2.0]) / np.sqrt(6)
    b[1] = np.diag([1.0, -1.0, 0.0]) / np.sqrt(2)
    for k, (i, j) in enumerate(((0, 1), (0, 2), (1, 2)), start=2):
        b[k, i, j] = b[k, j, i] = 1 / np.sqrt(2)
    return b


def axial_tensor(B: float, axis=(0.0, 0.0, 1.0)) -> np.ndarray:
    """``(B/6)(3 n n^T - 1)``: the tensor equivalent of the axial form about ``n``."""
    n = np.asarray(axis, dtype=float)
    return (B / 6) * (3 * np.multiply.outer(n, n) - np.eye(3))


def axial_hamiltonian(p: AxialPerturbation, j=1.5) -> np.ndarray:
    """``A + B (3 (n.J)^2 - J(J+1)) / 6`` on the ``j`` manifold."""
    jval = twice(j) / 2
    n = np.asarray(p.axis)
    jn = sum(c * a for c, a in zip(n, j_matrices(jval)))
    dim = twice(j) + 1
    return p.A * np.eye(dim) + (p.B / 6) * (3 * jn @ jn - jval * (jval + 1) * np.eye(dim))


def tensor_hamiltonian(Q, j=1.5) -> np.ndarray:
    """``sum_ij Q_ij T_ij``. Raw arrays must be symmetric and traceless to 1e-9 relative."""
    q = _as_q(Q)
    return np.einsum("ab,abij->ij", q, _quadrupole_operators(twice(j)))


def hamiltonian_stack(q: np.ndarray, shift=None) -> np.ndarray:
    """Vectorized J=3/2 Hamiltonians for tensors of shape ``(N, 3, 3)``.

    No validation; used by the Monte Carlo sampler on tensors that are
    traceless by construction.
    """
    h = np.einsum("nab,abij->nij", q, _quadrupole_operators(3))
    if shift is not None:
        h += np.asarray(shift)[:, None, None] * np.eye(4)
    return h


@dataclass(frozen=True, eq=False)
class KramersSpectrum:
    """Two doublets of a 4x4 Hamiltonian.

    ``vectors[:, :2]`` span the lower doublet and ``vectors[:, 2:]`` the
    upper one. When the whole level is unsplit ``degenerate`` is set, the
    two energies are equal and the spectrum should be read as one level.
    """

    e_lower: float
    e_upper: float
    vectors: np.ndarray
    labels: tuple = ("lower", "upper")
    degenerate: bool = False
    axis: np.ndarray | None = field(default=None, repr=False)

    @property
    def splitting(self) -> float:
        return self.e_upper - self.e_lower

    def label_of(self, tag: str) -> int:
        """Index (0 lower, 1 upper) of the doublet carrying ``tag``."""
        return self.labels.index(tag)


def _extract_tensor(h0: np.ndarray) -> tuple[np.ndarray, float]:
    ops = np.einsum("mab,abij->mij", tensor_basis(), _quadrupole_operators(3))
    A = ops.reshape(5, -1).T
    coef, *_ = np.linalg.lstsq(A, h0.ravel(), rcond=None)
    resid = np.linalg.norm(A @ coef - h0.ravel())
    return np.einsum("m,mab->ab", coef.real, tensor_basis()), float(resid)


def _axial_frame(h: np.ndarray, scale: float, tol: float = 1e-10) -> np.ndarray | None:
    """Unit axis ``n`` with ``[H, (n.J)^2] = 0`` if the tensor part of ``H`` is axial."""
    h0 = h - np.trace(h).real / 4 * np.eye(4)
    q, resid = _extract_tensor(h0)
    if resid > tol * scale:
        return None
    w, v = np.linalg.eigh(q)
    if abs(w[1] - w[0]) <= tol * scale:
        n = v[:, 2]
    elif abs(w[2] - w[1]) <= tol * scale:
        n = v[:, 0]
    else:
        return None
    jn = np.einsum("a,aij->ij", n, np.array(j_matrices(1.5)))
    jn2 = jn @ jn
    if np.abs(h @ jn2 - jn2 @ h).max() > tol * scale:
        return None
    return n


def diagonalize_kramers(H, resolution_floor: float = 1e-6, pair_tol: float = 1e-9) -> KramersSpectrum:
    """Split a time-reversal-symmetric 4x4 Hamiltonian into two doublets.

    Raises :class:`KramersError` if the sorted eigenvalues do not pair within
    ``pair_tol`` times the spectral scale. Doublets are labelled ``|m|=1/2``
    and ``|m|=3/2`` only when an exact axial frame exists.
    """
    h = np.asarray(H, dtype=complex)
    if h.shape != (4, 4):
        raise ValueError("expected a 4x4 Hamiltonian on J=3/2")
    if np.abs(h - h.conj().T).max() > 1e-12 * max(np.abs(h).max(), 1.0):
        raise ValueError("Hamiltonian is not Hermitian")
    w, v = np.linalg.eigh(h)
    scale = max(np.abs(w).max(), np.finfo(float).tiny)
    gaps = (w[1] - w[0], w[3] - w[2])
    if max(gaps) >= pair_tol * scale:
        raise KramersError(f"eigenvalues {w} do not form Kramers pairs")
    e_lo, e_hi = (w[0] + w[1]) / 2, (w[2] + w[3]) / 2
    if e_hi - e_lo < resolution_floor:
        centre = w.mean()
        return KramersSpectrum(centre, centre, v, labels=("level", "level"), degenerate=True)
    labels = ("lower", "upper")
    axis = _axial_frame(h, scale)
    if axis is not None:
        jn = np.einsum("a,aij->ij", axis, np.array(j_matrices(1.5)))
        m2_lower = np.einsum("ik,ij,jk->", v[:, :2].conj(), jn @ jn, v[:, :2]).real / 2
        labels = ("|m|=1/2", "|m|=3/2") if m2_lower < 1.25 else ("|m|=3/2", "|m|=1/2")
    return KramersSpectrum(e_lo, e_hi, v, labels=labels, axis=axis)


def _check_rotation(R: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    R = np.asarray(R, dtype=float)
    if R.shape != (3, 3):
        raise ValueError("rotation must be 3x3")
    if np.abs(R @ R.T - np.eye(3)).max() > tol or abs(np.linalg.det(R) - 1) > tol:
        raise ValueError("matrix is not a proper rotation")
    return R


def rotate_tensor(Q, R) -> TracelessTensor:
    """``R Q R^T`` for a proper rotation ``R``."""
    R = _check_rotation(R)
    q = _as_q(Q)
    q = R @ q @ R.T
    return TracelessTensor(0.5 * (q + q.T))


def rotation_between(a, b) -> np.ndarray:
    """Smallest proper rotation taking unit vector ``a`` onto unit vector ``b``."""
    a, b = _unit(a, "a"), _unit(b, "b")
    v = np.cross(a, b)
    c = float(np.dot(a, b))
    if c < -1 + 1e-12:
        # antiparallel: half turn about any axis perpendicular to a
        p = np.eye(3)[np.argmin(np.abs(a))]
        u = np.cross(a, p)
        u /= np.linalg.norm(u)
        return 2 * np.multiply.outer(u, u) - np.eye(3)
    vx = np.array([[0, -v[2], v[1]], [v[2], 0, -v[0]], [-v[1], v[0], 0]])
    return np.eye(3) + vx + vx @ vx / (1 + c)

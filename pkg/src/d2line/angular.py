"""Angular-momentum algebra for half-integer and integer J.

Conventions used everywhere in the package:

* Basis vectors ``|J m>`` are ordered ``m = +J, J-1, ..., -J``; index ``i``
  corresponds to ``m = J - i``.
* Condon-Shortley phases: ``J+`` has real non-negative matrix elements and
  ``<j1 j1; j2 (J-j1) | J J> > 0``.
* Spherical components of a vector operator ``d_0 = d_z``,
  ``d_{+1} = -(d_x + i d_y)/sqrt(2)``, ``d_{-1} = (d_x - i d_y)/sqrt(2)``.
* Rotations use z-y-z Euler angles, ``D = exp(-i a Jz) exp(-i b Jy) exp(-i g Jz)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

__all__ = [
    "HalfIntegerJ",
    "SphericalPolarization",
    "twice",
    "m_values",
    "j_matrices",
    "clebsch_gordan",
    "dipole_amplitudes",
    "dipole_operator",
    "polarization_spherical",
    "wigner_rotation",
]


@dataclass(frozen=True)
class HalfIntegerJ:
    """Angular momentum quantum number stored as the integer ``2J``."""

    twice_j: int

    def __post_init__(self):
        if int(self.twice_j) != self.twice_j or self.twice_j < 0:
            raise ValueError(f"twice_j must be a non-negative integer, got {self.twice_j!r}")

    @classmethod
    def from_value(cls, j) -> "HalfIntegerJ":
        if isinstance(j, HalfIntegerJ):
            return j
        return cls(twice(j))

    @property
    def value(self) -> float:
        return self.twice_j / 2

    @property
    def dim(self) -> int:
        return self.twice_j + 1

    def __float__(self):
        return self.value


def twice(x) -> int:
    """Return ``2x`` as an int, rejecting anything that is not a multiple of 1/2."""
    if isinstance(x, HalfIntegerJ):
        return x.twice_j
    if isinstance(x, Fraction):
        t = 2 * x
        if t.denominator != 1:
            raise ValueError(f"{x} is not an integer or half-integer")
        return int(t)
    t = 2 * float(x)
    r = round(t)
    if abs(t - r) > 1e-9:
        raise ValueError(f"{x!r} is not an integer or half-integer")
    return int(r)


def _twice_j(j) -> int:
    tj = twice(j)
    if tj < 0:
        raise ValueError(f"angular momentum must be non-negative, got {j!r}")
    return tj


def m_values(j) -> np.ndarray:
    """Magnetic quantum numbers ``+J ... -J`` in basis order."""
    tj = _twice_j(j)
    return (tj - 2 * np.arange(tj + 1)) / 2


def _j_plus(tj: int) -> np.ndarray:
    j = tj / 2
    m = m_values(HalfIntegerJ(tj))
    # <m+1|J+|m> sits one column right of the diagonal in the +J..-J ordering
    return np.diag(np.sqrt(j * (j + 1) - m[1:] * (m[1:] + 1)), k=1)


@lru_cache(maxsize=None)
def _j_matrices_cached(tj: int):
    jp = _j_plus(tj)
    jm = jp.T
    jx = (0.5 * (jp + jm)).astype(complex)
    jy = -0.5j * (jp - jm)
    jz = np.diag(m_values(HalfIntegerJ(tj))).astype(complex)
    for a in (jx, jy, jz):
        a.setflags(write=False)
    return jx, jy, jz


def j_matrices(j) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return ``(Jx, Jy, Jz)`` in the ``|J m>`` basis, ``m = +J ... -J``.

    >>> jx, jy, jz = j_matrices(0.5)
    >>> np.diag(jz).real
    array([ 0.5, -0.5])
    """
    return tuple(a.copy() for a in _j_matrices_cached(_twice_j(j)))


@lru_cache(maxsize=None)
def _coupled_states(tj1: int, tj2: int) -> dict[tuple[int, int], np.ndarray]:
    """Coupled states ``|J M>`` expanded on the product basis ``|m1> x |m2>``.

    Built by the lowering-operator construction: the top state of each J is
    the part of the ``M = J`` subspace orthogonal to all larger J, with the
    Condon-Shortley sign, then ``J-`` generates the rest of the multiplet.
    """
    d1, d2 = tj1 + 1, tj2 + 1
    jm_total = np.kron(_j_plus(tj1).T, np.eye(d2)) + np.kron(np.eye(d1), _j_plus(tj2).T)
    tm1 = tj1 - 2 * np.arange(d1)
    tm2 = tj2 - 2 * np.arange(d2)
    tm_total = (tm1[:, None] + tm2[None, :]).ravel()

    states: dict[tuple[int, int], np.ndarray] = {}
    for tJ in range(tj1 + tj2, abs(tj1 - tj2) - 1, -2):
        # seed with |m1 = j1, m2 = J - j1>
        seed_index = np.ravel_multi_index((0, (tj2 - (tJ - tj1)) // 2), (d1, d2))
        v = np.zeros(d1 * d2)
        v[seed_index] = 1.0
        for (tJp, tMp), w in states.items():
            if tMp == tJ:
                v -= (w @ v) * w
        v /= np.linalg.norm(v)
        if v[seed_index] < 0:
            v = -v
        assert np.all(tm_total[np.abs(v) > 1e-12] == tJ)
        states[(tJ, tJ)] = v
        J = tJ / 2
        for tM in range(tJ, -tJ, -2):
            M = tM / 2
            w = jm_total @ states[(tJ, tM)]
            states[(tJ, tM - 2)] = w / np.sqrt(J * (J + 1) - M * (M - 1))
    for w in states.values():
        w.setflags(write=False)
    return states


def clebsch_gordan(j1, m1, j2, m2, J, M) -> float:
    """Clebsch-Gordan coefficient ``<J M | j1 m1; j2 m2>``.

    Arguments may be ints, floats or :class:`fractions.Fraction` as long as
    they are multiples of 1/2. Returns 0 when the triangle rule or
    ``M = m1 + m2`` fails, or when a projection lies outside its range.
    Raises ``ValueError`` for non-half-integer input or a projection whose
    parity does not match its angular momentum.
    """
    tj1, tj2, tJ = _twice_j(j1), _twice_j(j2), _twice_j(J)
    tm1, tm2, tM = twice(m1), twice(m2), twice(M)
    for tj, tm in ((tj1, tm1), (tj2, tm2), (tJ, tM)):
        if (tj - tm) % 2:
            raise ValueError(f"projection {tm / 2} incompatible with angular momentum {tj / 2}")
    if tM != tm1 + tm2:
        return 0.0
    if abs(tm1) > tj1 or abs(tm2) > tj2 or abs(tM) > tJ:
        return 0.0
    if tJ > tj1 + tj2 or tJ < abs(tj1 - tj2) or (tj1 + tj2 - tJ) % 2:
        return 0.0
    vec = _coupled_states(tj1, tj2)[(tJ, tM)]
    idx = np.ravel_multi_index(((tj1 - tm1) // 2, (tj2 - tm2) // 2), (tj1 + 1, tj2 + 1))
    return float(vec[idx])


def dipole_amplitudes(Jg, Je) -> np.ndarray:
    """Dipole amplitudes ``<Je me| d_q |Jg mg>`` in units of the reduced element.

    Returns an array ``amp[ie, q + 1, ig]`` with ``ie``/``ig`` the basis
    indices of ``me``/``mg`` (``+J`` first) and ``q = -1, 0, +1``. The
    amplitude equals ``<Je me | Jg mg; 1 q>``.
    """
    tjg, tje = _twice_j(Jg), _twice_j(Je)
    if abs(tje - tjg) > 2 or (tje + tjg) % 2:
        raise ValueError(f"no dipole coupling between J={tjg / 2} and J={tje / 2}")
    mg = m_values(HalfIntegerJ(tjg))
    me = m_values(HalfIntegerJ(tje))
    amp = np.zeros((tje + 1, 3, tjg + 1))
    for ie, m_e in enumerate(me):
        for iq, q in enumerate((-1, 0, 1)):
            for ig, m_g in enumerate(mg):
                amp[ie, iq, ig] = clebsch_gordan(tjg / 2, m_g, 1, q, tje / 2, m_e)
    return amp


@dataclass(frozen=True)
class SphericalPolarization:
    """Spherical components ``a_q`` of a polarization vector, ``d.e = sum_q a_q d_q``."""

    a_minus1: complex
    a_0: complex
    a_plus1: complex

    def __post_init__(self):
        norm = abs(self.a_minus1) ** 2 + abs(self.a_0) ** 2 + abs(self.a_plus1) ** 2
        if abs(norm - 1) > 1e-12:
            raise ValueError(f"polarization not normalized: sum |a_q|^2 = {norm}")

    def as_array(self) -> np.ndarray:
        """Components in ``q = -1, 0, +1`` order."""
        return np.array([self.a_minus1, self.a_0, self.a_plus1], dtype=complex)


def _spherical_components(e: np.ndarray) -> np.ndarray:
    # a_q = (-1)^q e_{-q}; works on (..., 3) arrays
    ex, ey, ez = e[..., 0], e[..., 1], e[..., 2]
    s = np.sqrt(0.5)
    return np.stack([s * (ex + 1j * ey), ez + 0j, -s * (ex - 1j * ey)], axis=-1)


def polarization_spherical(e) -> SphericalPolarization:
    """Convert a unit Cartesian polarization vector to spherical components.

    >>> polarization_spherical([0, 0, 1]).as_array().real
    array([0., 1., 0.])
    """
    e = np.asarray(e, dtype=complex)
    if e.shape != (3,):
        raise ValueError("polarization must be a 3-vector")
    n = np.linalg.norm(e)
    if n == 0:
        raise ValueError("zero polarization vector")
    if abs(n - 1) > 1e-12:
        raise ValueError(f"polarization must be a unit vector, |e| = {n}")
    return SphericalPolarization(*_spherical_components(e))


def dipole_operator(Jg, Je, e) -> np.ndarray:
    """Matrix of ``d.e`` from the ``Jg`` manifold to ``Je``, shape ``(dim_e, dim_g)``.

    ``e`` is a Cartesian vector (not required to be normalized here) or a
    stack of them with shape ``(..., 3)``; the result then has shape
    ``(..., dim_e, dim_g)``.
    """
    amp = dipole_amplitudes(Jg, Je)
    a = _spherical_components(np.asarray(e, dtype=complex))
    return np.einsum("...q,eqg->...eg", a, amp)


def _exp_hermitian(h: np.ndarray, t: float) -> np.ndarray:
    """``exp(-i t h)`` for Hermitian ``h``."""
    w, v = np.linalg.eigh(h)
    return (v * np.exp(-1j * t * w)) @ v.conj().T


def wigner_rotation(j, alpha: float, beta: float, gamma: float) -> np.ndarray:
    """Wigner D-matrix ``D[m', m]`` for z-y-z Euler angles."""
    _, jy, jz = _j_matrices_cached(_twice_j(j))
    mz = np.diag(jz).real
    left = np.diag(np.exp(-1j * alpha * mz))
    right = np.diag(np.exp(-1j * gamma * mz))
    return left @ _exp_hermitian(jy, beta) @ right

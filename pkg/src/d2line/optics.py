"""Polarization-resolved absorption and fluorescence of the D2 components.

Lab geometry: the exciting beam travels along x, fluorescence is collected
along y. Atoms start unpolarized (1/2 in each 6S1/2 sublevel) and the
reduced dipole element is 1, which is the normalization of the classic
intensity table (e.g. 4/9 for z excitation seen through a z analyzer).

Excitation prepares ``rho = (1/2) M_e M_e^+`` on the 6P3/2 level, where
``M_e`` is the matrix of ``d.e``. Coherences between the two doublets are
dropped because the doublets are spectrally resolved; inside a doublet the
prepared state is proportional to the identity (both ground sublevels are
Kramers partners), so the detected intensity of doublet ``D`` through an
analyzer ``eps``

    I_D = Tr(P_D rho P_D M_eps M_eps^+)

equals the sum over its eigenstates of population times emission
probability, in any basis. For an unsplit level ``P`` is the identity and
the full coherent trace is used.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .angular import dipole_operator
from .crystal_field import AxialPerturbation, KramersSpectrum, axial_hamiltonian, diagonalize_kramers

__all__ = [
    "Analyzer",
    "NoAnalyzer",
    "Depolarized",
    "Geometry",
    "ExcitedState",
    "ComponentIntensities",
    "UndefinedRatioError",
    "excited_populations",
    "detected_intensity",
    "weight_ratio",
    "stick_spectrum",
    "table1",
    "TABLE1_ROWS",
    "TABLE1_EXCITATIONS",
    "TABLE1_REFERENCE",
]

X, Y, Z = np.eye(3)


class UndefinedRatioError(ValueError):
    pass


def _unit(v, name) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.shape != (3,):
        raise ValueError(f"{name} must be a 3-vector")
    n = np.linalg.norm(v)
    if n == 0 or abs(n - 1) > 1e-12:
        raise ValueError(f"{name} must be a unit vector (norm {n})")
    return v


@dataclass(frozen=True, eq=False)
class Analyzer:
    """Linear analyzer along ``vector`` for light collected along ``direction``."""

    vector: np.ndarray
    direction: np.ndarray = Y

    def __post_init__(self):
        v = _unit(self.vector, "analyzer")
        d = _unit(self.direction, "detection direction")
        if abs(np.dot(v, d)) > 1e-12:
            raise ValueError("analyzer must be perpendicular to the detection direction")
        object.__setattr__(self, "vector", v)
        object.__setattr__(self, "direction", d)


@dataclass(frozen=True, eq=False)
class NoAnalyzer:
    """Sum of two crossed analyzers transverse to ``direction`` (z and x for y)."""

    direction: np.ndarray = Y

    def __post_init__(self):
        object.__setattr__(self, "direction", _unit(self.direction, "detection direction"))

    def analyzers(self) -> tuple[Analyzer, Analyzer]:
        d = self.direction
        if np.allclose(d, Y, atol=0):
            return Analyzer(Z), Analyzer(X)
        a = np.cross(d, np.eye(3)[np.argmin(np.abs(d))])
        a /= np.linalg.norm(a)
        return Analyzer(a, d), Analyzer(np.cross(d, a), d)


@dataclass(frozen=True)
class Depolarized:
    """Excited state fully depolarized before emission: ``I = (2/3) * population``."""


@dataclass(frozen=True, eq=False)
class Geometry:
    excitation_pol: np.ndarray
    detection: Analyzer | NoAnalyzer | Depolarized

    def __post_init__(self):
        object.__setattr__(self, "excitation_pol", _unit(self.excitation_pol, "excitation polarization"))
        if not isinstance(self.detection, (Analyzer, NoAnalyzer, Depolarized)):
            raise TypeError(f"unknown detection mode {self.detection!r}")


@dataclass(frozen=True, eq=False)
class ExcitedState:
    """Excited-level state after absorption, expressed in the eigenbasis of ``ks``.

    ``states`` are the four eigenstate populations, ``doublets`` the
    (lower, upper) sums and ``rho`` the density matrix restricted to the
    doublet blocks (the whole level if it is unsplit).
    """

    states: np.ndarray
    doublets: tuple[float, float]
    rho: np.ndarray

    @property
    def total(self) -> float:
        return float(self.states.sum())


@dataclass(frozen=True)
class ComponentIntensities:
    """Detected intensities of the (lower, upper) doublets."""

    i_lower: float
    i_upper: float
    e_lower: float
    e_upper: float
    labels: tuple = ("lower", "upper")
    degenerate: bool = False

    def __post_init__(self):
        if self.i_lower < 0 or self.i_upper < 0:
            raise ValueError("intensities must be non-negative")

    @property
    def total(self) -> float:
        return self.i_lower + self.i_upper

    def by_label(self, tag: str) -> float:
        return (self.i_lower, self.i_upper)[self.labels.index(tag)]

    def sticks(self) -> list[tuple[float, float]]:
        """``(energy, intensity)`` pairs; a single stick for an unsplit level."""
        if self.degenerate:
            return [(self.e_lower, self.total)]
        return [(self.e_lower, self.i_lower), (self.e_upper, self.i_upper)]


# Batched kernels. ``v`` holds eigenvectors as columns, shape (N, 4, 4),
# lower doublet first.


def _m(e) -> np.ndarray:
    return dipole_operator(0.5, 1.5, e)


def _block_trace(a: np.ndarray, b: np.ndarray, sl: slice) -> np.ndarray:
    """``Tr(P (a a^+) P (b b^+))`` for amplitude stacks of shape (N, 4, 2)."""
    ab = np.einsum("nkg,nkh->ngh", a[:, sl].conj(), b[:, sl])
    return np.einsum("ngh,ngh->n", ab, ab.conj()).real


def doublet_intensities(v: np.ndarray, excitation, detection, degenerate=None) -> np.ndarray:
    """Detected intensities of both doublets for a stack of eigenbases.

    Returns an array of shape ``(N, 2)``. Rows flagged in ``degenerate``
    get the coherent whole-level intensity in column 0 and zero in column 1.
    """
    a = np.einsum("nki,kg->nig", v.conj(), _m(excitation))
    lower, upper, full = slice(0, 2), slice(2, 4), slice(0, 4)
    if isinstance(detection, Depolarized):
        pop = 0.5 * np.einsum("nig,nig->ni", a, a.conj()).real
        out = (2 / 3) * np.stack([pop[:, :2].sum(1), pop[:, 2:].sum(1)], axis=1)
        whole = (2 / 3) * pop.sum(1)
    else:
        analyzers = detection.analyzers() if isinstance(detection, NoAnalyzer) else (detection,)
        out = np.zeros((len(v), 2))
        whole = np.zeros(len(v))
        for an in analyzers:
            b = np.einsum("nki,kg->nig", v.conj(), _m(an.vector))
            out[:, 0] += 0.5 * _block_trace(a, b, lower)
            out[:, 1] += 0.5 * _block_trace(a, b, upper)
            whole += 0.5 * _block_trace(a, b, full)
    if degenerate is not None and np.any(degenerate):
        out[degenerate, 0] = whole[degenerate]
        out[degenerate, 1] = 0.0
    return out


def excited_populations(ks: KramersSpectrum, pol) -> ExcitedState:
    """Populations prepared by exciting along unit polarization ``pol``."""
    pol = _unit(pol, "polarization")
    a = ks.vectors.conj().T @ _m(pol)
    rho = 0.5 * a @ a.conj().T
    if not ks.degenerate:
        rho[:2, 2:] = 0
        rho[2:, :2] = 0
    states = np.diag(rho).real.copy()
    return ExcitedState(states, (float(states[:2].sum()), float(states[2:].sum())), rho)


def _emission_operator(ks: KramersSpectrum, eps) -> np.ndarray:
    b = ks.vectors.conj().T @ _m(eps)
    return b @ b.conj().T


def detected_intensity(ks: KramersSpectrum, populations: ExcitedState, mode) -> ComponentIntensities:
    """Intensities detected in ``mode`` from the excited state ``populations``."""
    rho = populations.rho
    if isinstance(mode, Depolarized):
        lo, hi = (2 / 3) * populations.doublets[0], (2 / 3) * populations.doublets[1]
    elif isinstance(mode, (Analyzer, NoAnalyzer)):
        analyzers = mode.analyzers() if isinstance(mode, NoAnalyzer) else (mode,)
        o = sum(_emission_operator(ks, an.vector) for an in analyzers)
        lo = float(np.trace(rho[:2, :2] @ o[:2, :2]).real)
        hi = float(np.trace(rho[2:, 2:] @ o[2:, 2:]).real)
        if ks.degenerate:
            lo, hi = float(np.trace(rho @ o).real), 0.0
    else:
        raise TypeError(f"unknown detection mode {mode!r}")
    if ks.degenerate and isinstance(mode, Depolarized):
        lo, hi = lo + hi, 0.0
    # round-off can leave -1e-17 on dark components
    lo, hi = max(lo, 0.0), max(hi, 0.0)
    return ComponentIntensities(lo, hi, ks.e_lower, ks.e_upper, ks.labels, ks.degenerate)


def weight_ratio(ci: ComponentIntensities) -> float:
    """``I_{3/2} / I_{1/2}`` when labelled, else upper over lower.

    Returns ``inf`` when only the numerator is bright.
    """
    if "|m|=3/2" in ci.labels:
        num, den = ci.by_label("|m|=3/2"), ci.by_label("|m|=1/2")
    else:
        num, den = ci.i_upper, ci.i_lower
    if num == 0 and den == 0:
        raise UndefinedRatioError("both components have zero intensity")
    if den == 0:
        return float("inf")
    return num / den


def stick_spectrum(H, geometry: Geometry, resolution_floor: float = 1e-6) -> ComponentIntensities:
    """Energies and detected intensities of the two D2 components of ``H``."""
    ks = diagonalize_kramers(H, resolution_floor=resolution_floor)
    pops = excited_populations(ks, geometry.excitation_pol)
    return detected_intensity(ks, pops, geometry.detection)


TABLE1_ROWS = ("z-analyzer", "x-analyzer", "no analyzer", "depolarized")
TABLE1_EXCITATIONS = ("z", "y")

# (I_3/2, I_1/2) per row and excitation, used as a check reference only
TABLE1_REFERENCE = {
    ("z-analyzer", "z"): (Fraction(0), Fraction(4, 9)),
    ("z-analyzer", "y"): (Fraction(0), Fraction(1, 9)),
    ("x-analyzer", "z"): (Fraction(0), Fraction(1, 9)),
    ("x-analyzer", "y"): (Fraction(1, 4), Fraction(1, 36)),
    ("no analyzer", "z"): (Fraction(0), Fraction(5, 9)),
    ("no analyzer", "y"): (Fraction(1, 4), Fraction(5, 36)),
    ("depolarized", "z"): (Fraction(0), Fraction(4, 9)),
    ("depolarized", "y"): (Fraction(1, 3), Fraction(1, 9)),
}


def table1() -> np.ndarray:
    """Intensities for a z-axis crystal, shape ``(4, 2, 2)``.

    Axes: detection mode (``TABLE1_ROWS``), excitation polarization
    (``TABLE1_EXCITATIONS``), component ``(I_3/2, I_1/2)``.
    """
    ks = diagonalize_kramers(axial_hamiltonian(AxialPerturbation(0.0, 1.0)))
    modes = {
        "z-analyzer": Analyzer(Z),
        "x-analyzer": Analyzer(X),
        "no analyzer": NoAnalyzer(),
        "depolarized": Depolarized(),
    }
    pols = {"z": Z, "y": Y}
    out = np.zeros((4, 2, 2))
    for i, row in enumerate(TABLE1_ROWS):
        for k, exc in enumerate(TABLE1_EXCITATIONS):
            ci = detected_intensity(ks, excited_populations(ks, pols[exc]), modes[row])
            out[i, k] = ci.by_label("|m|=3/2"), ci.by_label("|m|=1/2")
    return out

"""Polarization-resolved D2 line shapes of Cs impurities in anisotropic helium.

Submodules
----------
angular
    Angular-momentum matrices, Clebsch-Gordan coefficients, dipole
    amplitudes and Wigner rotations.
crystal_field
    Rank-2 perturbations of the 6P3/2 level and their Kramers doublets.
optics
    Absorption and polarization-resolved fluorescence intensities.
ensemble
    Monte Carlo line shapes over orientations and fluctuating tensors.
fitting
    Two-Gaussian decomposition of spectra.
io, cli
    File formats and the ``d2line`` command line front end.
"""

__version__ = "0.1.0"

from .angular import (
    HalfIntegerJ,
    SphericalPolarization,
    clebsch_gordan,
    dipole_amplitudes,
    dipole_operator,
    j_matrices,
    polarization_spherical,
    wigner_rotation,
)
from .crystal_field import (
    AxialPerturbation,
    KramersSpectrum,
    TracelessTensor,
    axial_hamiltonian,
    diagonalize_kramers,
    quadrupole_operators,
    rotate_tensor,
    tensor_hamiltonian,
)
from .optics import (
    Analyzer,
    ComponentIntensities,
    Depolarized,
    Geometry,
    NoAnalyzer,
    detected_intensity,
    excited_populations,
    stick_spectrum,
    table1,
    weight_ratio,
)
from .fitting import (
    FitResult,
    TwoGaussianModel,
    fit_two_gaussians,
    initial_guess,
    nm_to_wavenumber,
    two_gaussian_eval,
    wavenumber_to_nm,
)
from .ensemble import (
    EnsembleConfig,
    FluctuationModel,
    OrientationDistribution,
    SpectrumHistogram,
    calibrate_sigma,
    contrast_scan,
    sample_traceless_tensor,
    sample_unit_vector,
    simulate_spectrum,
)

"""Monte Carlo line shapes of the D2 line in a disordered or fluctuating matrix.

Each sample combines a static axial tensor of strength ``static_B`` about a
(fixed or random) crystal axis, a fluctuating traceless tensor with iid
Gaussian components in an orthonormal tensor basis, and a Gaussian scalar
shift centred on ``mean_shift``. The sample is diagonalized and its two
detected sticks are binned.

Reproducibility: samples are processed in blocks of ``BLOCK_SIZE``; block
``b`` draws from a Philox stream keyed by ``(seed, b)`` and partial
histograms are merged in block order, so results are bit-identical for any
number of worker threads.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, astuple, dataclass, field, replace

import numpy as np

from .crystal_field import KramersError, TracelessTensor, hamiltonian_stack, tensor_basis
from .fitting import fit_two_gaussians
from .optics import Analyzer, Geometry, NoAnalyzer, doublet_intensities

__all__ = [
    "BLOCK_SIZE",
    "FluctuationModel",
    "OrientationDistribution",
    "EnsembleConfig",
    "ComponentStats",
    "SpectrumHistogram",
    "ContrastPoint",
    "ContrastFitError",
    "block_rng",
    "sample_unit_vector",
    "sample_traceless_tensor",
    "simulate_spectrum",
    "contrast_scan",
    "calibrate_sigma",
    "derive_seed",
]

BLOCK_SIZE = 8192
CLIP_WARN_FRACTION = 0.01

_X, _Y, _Z = np.eye(3)


@dataclass(frozen=True)
class FluctuationModel:
    """Dynamic perturbation statistics, all in cm^-1."""

    sigma_aniso: float = 0.0
    sigma_iso: float = 0.0
    mean_shift: float = 0.0

    def __post_init__(self):
        if self.sigma_aniso < 0 or self.sigma_iso < 0:
            raise ValueError("fluctuation widths must be non-negative")


@dataclass(frozen=True)
class OrientationDistribution:
    """Crystal c-axis: a fixed unit vector, or uniform on the sphere."""

    kind: str = "fixed"
    axis: tuple = (0.0, 0.0, 1.0)

    def __post_init__(self):
        if self.kind not in ("fixed", "isotropic"):
            raise ValueError(f"unknown orientation kind {self.kind!r}")
        if self.kind == "fixed":
            a = np.asarray(self.axis, dtype=float)
            if a.shape != (3,) or abs(np.linalg.norm(a) - 1) > 1e-12:
                raise ValueError("fixed orientation axis must be a unit 3-vector")
            object.__setattr__(self, "axis", tuple(float(c) for c in a))

    @classmethod
    def fixed(cls, axis=(0.0, 0.0, 1.0)) -> "OrientationDistribution":
        return cls("fixed", tuple(axis))

    @classmethod
    def isotropic(cls) -> "OrientationDistribution":
        return cls("isotropic")

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.kind == "fixed":
            return np.broadcast_to(np.asarray(self.axis), (size, 3)).copy()
        return sample_unit_vector(rng, size)


@dataclass(frozen=True)
class EnsembleConfig:
    n_samples: int
    seed: int
    static_B: float = 0.0
    orientation: OrientationDistribution = field(default_factory=OrientationDistribution)
    fluctuation: FluctuationModel = field(default_factory=FluctuationModel)
    geometry: Geometry = field(default_factory=lambda: Geometry(_Z, Analyzer(_Z)))
    histogram: tuple | None = None
    kernel_width: float = 0.0
    resolution_floor: float = 1e-6

    def __post_init__(self):
        if int(self.n_samples) != self.n_samples or self.n_samples <= 0:
            raise ValueError("n_samples must be a positive integer")
        if int(self.seed) != self.seed or not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an integer in [0, 2**64)")
        if self.kernel_width < 0:
            raise ValueError("kernel_width must be non-negative")
        e_min, e_max, n_bins = self.binning
        if not e_min < e_max:
            raise ValueError("histogram needs e_min < e_max")
        if int(n_bins) != n_bins or n_bins <= 1:
            raise ValueError("histogram needs more than one bin")

    @property
    def binning(self) -> tuple[float, float, int]:
        """``(e_min, e_max, n_bins)``; default 2 cm^-1 bins over mean_shift +- 600."""
        if self.histogram is None:
            c = self.fluctuation.mean_shift
            return (c - 600.0, c + 600.0, 600)
        e_min, e_max, n_bins = self.histogram
        return float(e_min), float(e_max), int(n_bins)


@dataclass(frozen=True)
class ComponentStats:
    """Running sums of per-sample detected intensities of the two doublets.

    ``l`` and ``u`` are the lower- and upper-doublet intensities of one
    sample; the sums allow delta-method standard errors of ratios.
    """

    n: int = 0
    sum_l: float = 0.0
    sum_u: float = 0.0
    sum_ll: float = 0.0
    sum_uu: float = 0.0
    sum_lu: float = 0.0
    sum_split: float = 0.0
    sum_split2: float = 0.0
    n_degenerate: int = 0

    def __add__(self, other: "ComponentStats") -> "ComponentStats":
        return ComponentStats(*(a + b for a, b in zip(astuple(self), astuple(other))))

    @property
    def ratio(self) -> float:
        """Upper over lower area."""
        return self.sum_u / self.sum_l if self.sum_l else float("inf")

    @property
    def ratio_stderr(self) -> float:
        r = self.ratio
        var = (self.sum_uu - 2 * r * self.sum_lu + r * r * self.sum_ll) / self.n
        var -= ((self.sum_u - r * self.sum_l) / self.n) ** 2
        return math.sqrt(max(var, 0.0) / self.n) / (self.sum_l / self.n)

    @property
    def upper_fraction(self) -> float:
        tot = self.sum_u + self.sum_l
        return self.sum_u / tot if tot else float("nan")

    @property
    def upper_fraction_stderr(self) -> float:
        w = self.upper_fraction
        # z_i = u_i - w (u_i + l_i) = (1 - w) u_i - w l_i
        a, b = 1 - w, -w
        ez2 = (a * a * self.sum_uu + 2 * a * b * self.sum_lu + b * b * self.sum_ll) / self.n
        ez = (a * self.sum_u + b * self.sum_l) / self.n
        mean_t = (self.sum_u + self.sum_l) / self.n
        return math.sqrt(max(ez2 - ez * ez, 0.0) / self.n) / mean_t

    @property
    def mean_splitting(self) -> float:
        return self.sum_split / self.n

    @property
    def mean_splitting_stderr(self) -> float:
        m = self.mean_splitting
        return math.sqrt(max(self.sum_split2 / self.n - m * m, 0.0) / self.n)


@dataclass(frozen=True, eq=False)
class SpectrumHistogram:
    """Binned detected intensity; ``intensities`` are sums over samples."""

    centers: np.ndarray
    intensities: np.ndarray
    axis: str = "cm-1"
    metadata: dict = field(default_factory=dict)
    stats: ComponentStats | None = None

    def __post_init__(self):
        c = np.asarray(self.centers, dtype=float)
        y = np.asarray(self.intensities, dtype=float)
        if c.shape != y.shape or c.ndim != 1:
            raise ValueError("centers and intensities must be 1-D arrays of equal length")
        d = np.diff(c)
        if not (np.all(d > 0) or np.all(d < 0)):
            raise ValueError("bin centers must be strictly monotone")
        if np.any(y < 0):
            raise ValueError("intensities must be non-negative")
        if self.axis not in ("cm-1", "nm"):
            raise ValueError(f"unknown axis unit {self.axis!r}")
        object.__setattr__(self, "centers", c)
        object.__setattr__(self, "intensities", y)

    @property
    def clipped_fraction(self) -> float:
        return self.metadata.get("clipped_fraction", 0.0)

    @property
    def component_areas(self) -> tuple[float, float]:
        """Doublet-attributed (lower, upper) intensity sums."""
        return self.stats.sum_l, self.stats.sum_u

    def to_nm(self) -> "SpectrumHistogram":
        """Same data on a wavelength axis, ascending in nm; needs positive energies."""
        from .fitting import wavenumber_to_nm

        if self.axis == "nm":
            return self
        return SpectrumHistogram(
            wavenumber_to_nm(self.centers)[::-1], self.intensities[::-1], "nm", dict(self.metadata), self.stats
        )


def sample_unit_vector(rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Uniform point(s) on the unit sphere (normalized isotropic Gaussians)."""
    n = 1 if size is None else size
    v = rng.standard_normal((n, 3))
    norm = np.linalg.norm(v, axis=1)
    # a zero-norm draw has probability zero; redraw just in case
    while np.any(norm == 0):
        bad = norm == 0
        v[bad] = rng.standard_normal((int(bad.sum()), 3))
        norm = np.linalg.norm(v, axis=1)
    v /= norm[:, None]
    return v[0] if size is None else v


_BASIS = tensor_basis()


def sample_traceless_tensor(rng: np.random.Generator, sigma_aniso: float, size: int | None = None):
    """Rotation-invariant Gaussian traceless tensor(s), ``sum_m g_m T^(m)`` with ``g_m ~ N(0, sigma)``.

    Returns a :class:`TracelessTensor` when ``size`` is None, else an array
    of shape ``(size, 3, 3)``.
    """
    if sigma_aniso < 0:
        raise ValueError("sigma_aniso must be non-negative")
    n = 1 if size is None else size
    g = sigma_aniso * rng.standard_normal((n, 5))
    q = np.einsum("nm,mab->nab", g, _BASIS)
    return TracelessTensor(q[0]) if size is None else q


def block_rng(seed: int, block: int) -> np.random.Generator:
    """Counter-based stream for sample block ``block`` of run ``seed``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(block)])))


def derive_seed(seed: int, *keys: int) -> int:
    """Deterministic 64-bit child seed for an independent sub-run."""
    return int(np.random.SeedSequence([int(seed), *map(int, keys)]).generate_state(1, dtype=np.uint64)[0])


def _run_block(cfg: EnsembleConfig, block: int):
    start = block * BLOCK_SIZE
    count = min(BLOCK_SIZE, cfg.n_samples - start)
    rng = block_rng(cfg.seed, block)
    fl = cfg.fluctuation
    # draw order fixed so the stream does not depend on the parameters
    axes = cfg.orientation.sample(rng, count)
    g = rng.standard_normal((count, 5))
    shift = fl.mean_shift + fl.sigma_iso * rng.standard_normal(count)

    q = (cfg.static_B / 6) * (3 * np.einsum("na,nb->nab", axes, axes) - np.eye(3))
    q += fl.sigma_aniso * np.einsum("nm,mab->nab", g, _BASIS)
    w, v = np.linalg.eigh(hamiltonian_stack(q, shift))

    scale = np.maximum(np.abs(w).max(axis=1), np.finfo(float).tiny)
    gap = np.maximum(w[:, 1] - w[:, 0], w[:, 3] - w[:, 2])
    bad = np.flatnonzero(gap >= 1e-9 * scale)
    if bad.size:
        raise KramersError(f"sample {start + bad[0]} does not split into Kramers doublets")

    e_lo = 0.5 * (w[:, 0] + w[:, 1])
    e_hi = 0.5 * (w[:, 2] + w[:, 3])
    split = e_hi - e_lo
    degenerate = split < cfg.resolution_floor
    e_lo = np.where(degenerate, w.mean(axis=1), e_lo)

    geo = cfg.geometry
    inten = doublet_intensities(v, geo.excitation_pol, geo.detection, degenerate)

    e_min, e_max, n_bins = cfg.binning
    width = (e_max - e_min) / n_bins
    energies = np.stack([e_lo, e_hi], axis=1).ravel()
    weights = inten.ravel()
    idx = np.floor((energies - e_min) / width).astype(np.int64)
    inside = (idx >= 0) & (idx < n_bins)
    hist = np.bincount(idx[inside], weights=weights[inside], minlength=n_bins)
    clipped = float(weights[~inside].sum())

    l, u = inten[:, 0], inten[:, 1]
    stats = ComponentStats(
        n=count,
        sum_l=float(l.sum()),
        sum_u=float(u.sum()),
        sum_ll=float(l @ l),
        sum_uu=float(u @ u),
        sum_lu=float(l @ u),
        sum_split=float(np.where(degenerate, 0.0, split).sum()),
        sum_split2=float((np.where(degenerate, 0.0, split) ** 2).sum()),
        n_degenerate=int(degenerate.sum()),
    )
    return hist, clipped, float(weights.sum()), stats


def _gaussian_kernel(width: float, bin_width: float) -> np.ndarray:
    half = int(math.ceil(5 * width / bin_width))
    t = np.arange(-half, half + 1) * bin_width
    k = np.exp(-0.5 * (t / width) ** 2)
    return k / k.sum()


def _config_echo(cfg: EnsembleConfig) -> dict:
    geo = cfg.geometry
    det = geo.detection
    if isinstance(det, Analyzer):
        detection = {"mode": "analyzer", "vector": det.vector.tolist(), "direction": det.direction.tolist()}
    elif isinstance(det, NoAnalyzer):
        detection = {"mode": "no_analyzer", "direction": det.direction.tolist()}
    else:
        detection = {"mode": "depolarized"}
    e_min, e_max, n_bins = cfg.binning
    return {
        "n_samples": cfg.n_samples,
        "seed": cfg.seed,
        "static_B": cfg.static_B,
        "orientation": asdict(cfg.orientation),
        "fluctuation": asdict(cfg.fluctuation),
        "geometry": {"excitation": geo.excitation_pol.tolist(), "detection": detection},
        "histogram": {"e_min": e_min, "e_max": e_max, "n_bins": n_bins},
        "kernel_width": cfg.kernel_width,
    }


def simulate_spectrum(cfg: EnsembleConfig, n_workers: int = 1) -> SpectrumHistogram:
    """Accumulate the detected D2 spectrum of ``cfg.n_samples`` sampled atoms.

    With ``kernel_width > 0`` the binned sticks are convolved with a
    normalized Gaussian of that standard deviation; weight spilling past the
    histogram edges is counted as clipped, like sticks falling outside it.
    """
    n_blocks = -(-cfg.n_samples // BLOCK_SIZE)
    if n_workers > 1:
        with ThreadPoolExecutor(n_workers) as pool:
            parts = list(pool.map(lambda b: _run_block(cfg, b), range(n_blocks)))
    else:
        parts = [_run_block(cfg, b) for b in range(n_blocks)]

    e_min, e_max, n_bins = cfg.binning
    width = (e_max - e_min) / n_bins
    hist = np.zeros(n_bins)
    clipped = total = 0.0
    stats = ComponentStats()
    for h, c, t, s in parts:
        hist += h
        clipped += c
        total += t
        stats = stats + s
    stick_clipped = clipped
    if cfg.kernel_width > 0:
        kern = _gaussian_kernel(cfg.kernel_width, width)
        half = kern.size // 2
        full = np.convolve(hist, kern, mode="full")
        kept = full[half : half + n_bins]
        clipped += float(full.sum() - kept.sum())
        hist = np.clip(kept, 0.0, None)

    frac = clipped / total if total else 0.0
    meta = {
        "config": _config_echo(cfg),
        "total_weight": total,
        "clipped_weight": clipped,
        "clipped_fraction": frac,
        "stick_clipped_fraction": stick_clipped / total if total else 0.0,
        "clipping_warning": frac > CLIP_WARN_FRACTION,
    }
    if meta["clipping_warning"]:
        warnings.warn(f"{100 * frac:.2f}% of the detected weight fell outside the histogram", RuntimeWarning)
    centers = e_min + width * (np.arange(n_bins) + 0.5)
    return SpectrumHistogram(centers, hist, "cm-1", meta, stats)


@dataclass(frozen=True)
class ContrastPoint:
    sigma: float
    contrast: float
    stderr: float
    w_yx: float
    w_zz: float
    error: str | None = None


class ContrastFitError(RuntimeError):
    def __init__(self, sigma, reason):
        super().__init__(f"two-Gaussian fit failed at sigma={sigma}: {reason}")
        self.sigma = sigma


CONTRAST_GEOMETRIES = {
    "yx": Geometry(_Y, Analyzer(_X)),
    "zz": Geometry(_Z, Analyzer(_Z)),
}


def _upper_fraction(spec: SpectrumHistogram, method: str) -> tuple[float, float]:
    if method == "sticks":
        return spec.stats.upper_fraction, spec.stats.upper_fraction_stderr
    res = fit_two_gaussians(spec.centers, spec.intensities)
    if not res.converged:
        raise RuntimeError("fit did not converge")
    # error of hi/(hi+lo) from the ratio error: dw/dr = 1/(1+r)^2
    return res.upper_fraction, res.area_ratio_err / (1 + res.area_ratio) ** 2


def contrast_scan(
    static_B: float,
    sigmas,
    base: EnsembleConfig,
    method: str = "sticks",
    on_error: str = "raise",
    n_workers: int = 1,
) -> list[ContrastPoint]:
    """Polarization contrast ``w(y-exc, x-analyzer) - w(z-exc, z-analyzer)`` versus ``sigma_aniso``.

    ``w`` is the upper-component weight fraction, taken from the doublet
    attribution of every stick (``method="sticks"``) or from two-Gaussian
    fits of the binned spectra (``method="fit"``, which needs resolvable
    components, e.g. ``kernel_width > 0``). Each sigma and geometry uses its
    own seed derived from ``base.seed``.
    """
    if method not in ("sticks", "fit"):
        raise ValueError(f"unknown method {method!r}")
    if on_error not in ("raise", "record"):
        raise ValueError(f"unknown on_error {on_error!r}")
    out = []
    for i, sigma in enumerate(sigmas):
        fl = replace(base.fluctuation, sigma_aniso=float(sigma))
        ws = {}
        try:
            for k, (name, geo) in enumerate(CONTRAST_GEOMETRIES.items()):
                cfg = replace(base, static_B=static_B, fluctuation=fl, geometry=geo, seed=derive_seed(base.seed, i, k))
                with warnings.catch_warnings():
                    if method == "sticks":
                        # stick attribution does not depend on the binning
                        warnings.simplefilter("ignore", RuntimeWarning)
                    spec = simulate_spectrum(cfg, n_workers)
                ws[name] = _upper_fraction(spec, method)
        except (RuntimeError, ValueError) as exc:
            if on_error == "raise":
                raise ContrastFitError(sigma, exc) from exc
            out.append(ContrastPoint(float(sigma), float("nan"), float("nan"), float("nan"), float("nan"), str(exc)))
            continue
        (w1, e1), (w2, e2) = ws["yx"], ws["zz"]
        out.append(ContrastPoint(float(sigma), float(w1 - w2), float(math.hypot(e1, e2)), float(w1), float(w2)))
    return out


def calibrate_sigma(
    target_splitting: float,
    base: EnsembleConfig,
    observable: str = "fit",
    tol: float = 0.05,
    max_iter: int = 60,
    n_workers: int = 1,
) -> float:
    """``sigma_aniso`` whose simulated splitting equals ``target_splitting`` (cm^-1).

    ``observable="fit"`` uses the center distance of a two-Gaussian fit of
    the simulated spectrum, ``"mean"`` the mean per-sample doublet
    splitting. The map is evaluated with common random numbers (fixed seed)
    and inverted by bracketing and bisection until the splitting is within
    ``tol`` cm^-1 of the target.
    """
    if observable not in ("fit", "mean"):
        raise ValueError(f"unknown observable {observable!r}")
    if target_splitting <= 0:
        raise ValueError("target splitting must be positive")

    def splitting(sigma):
        cfg = replace(base, fluctuation=replace(base.fluctuation, sigma_aniso=sigma))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            spec = simulate_spectrum(cfg, n_workers)
        if observable == "mean":
            return spec.stats.mean_splitting
        res = fit_two_gaussians(spec.centers, spec.intensities)
        if not res.converged:
            raise RuntimeError(f"calibration fit did not converge at sigma={sigma}")
        return res.splitting

    hi = target_splitting / 5
    while splitting(hi) < target_splitting:
        hi *= 2
        if hi > 1e3 * target_splitting:
            raise RuntimeError("could not bracket the target splitting")
    lo = hi / 2
    while splitting(lo) > target_splitting:
        lo /= 2
        if lo < 1e-6 * target_splitting:
            raise RuntimeError("target splitting below the static splitting")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        s = splitting(mid)
        if abs(s - target_splitting) < tol:
            return mid
        if s < target_splitting:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)

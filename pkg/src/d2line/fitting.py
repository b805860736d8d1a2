"""Two-Gaussian decomposition of D2 absorption spectra.

The model is ``amp1 exp(-(x-c1)^2 / 2 s1^2) + amp2 exp(-(x-c2)^2 / 2 s2^2)``
with ``amp`` the peak height, so a component's area is ``amp * s * sqrt(2 pi)``.
An optional constant offset can be added.

Minimization is a Levenberg-Marquardt loop over
``(amp1, amp2, c1, c2, log s1, log s2[, offset])``: Gauss-Newton steps with
a damping term proportional to ``diag(J^T J)``, damping decreased on an
accepted step and increased on a rejected one.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.signal import find_peaks

__all__ = [
    "TwoGaussianModel",
    "FitResult",
    "two_gaussian_eval",
    "two_gaussian_jacobian",
    "initial_guess",
    "fit_two_gaussians",
    "nm_to_wavenumber",
    "wavenumber_to_nm",
    "MIN_POINTS",
]

MIN_POINTS = 12
SQRT2PI = np.sqrt(2 * np.pi)


@dataclass(frozen=True)
class TwoGaussianModel:
    amp1: float
    amp2: float
    c1: float
    c2: float
    s1: float
    s2: float
    offset: float = 0.0

    def __post_init__(self):
        if not (self.s1 > 0 and self.s2 > 0):
            raise ValueError("Gaussian widths must be positive")

    @property
    def areas(self) -> tuple[float, float]:
        return self.amp1 * self.s1 * SQRT2PI, self.amp2 * self.s2 * SQRT2PI

    def ordered(self) -> "TwoGaussianModel":
        """Same model with component 1 at the lower center."""
        if self.c1 <= self.c2:
            return self
        return TwoGaussianModel(self.amp2, self.amp1, self.c2, self.c1, self.s2, self.s1, self.offset)


def two_gaussian_eval(m: TwoGaussianModel, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return (
        m.amp1 * np.exp(-0.5 * ((x - m.c1) / m.s1) ** 2)
        + m.amp2 * np.exp(-0.5 * ((x - m.c2) / m.s2) ** 2)
        + m.offset
    )


def two_gaussian_jacobian(m: TwoGaussianModel, x) -> np.ndarray:
    """Derivatives w.r.t. ``(amp1, amp2, c1, c2, s1, s2, offset)``, shape ``(len(x), 7)``."""
    x = np.asarray(x, dtype=float)
    cols = np.empty((x.size, 7))
    for k, (a, c, s) in enumerate(((m.amp1, m.c1, m.s1), (m.amp2, m.c2, m.s2))):
        u = (x - c) / s
        g = np.exp(-0.5 * u * u)
        cols[:, k] = g
        cols[:, 2 + k] = a * g * u / s
        cols[:, 4 + k] = a * g * u * u / s
    cols[:, 6] = 1.0
    return cols


@dataclass(frozen=True)
class FitResult:
    """Outcome of :func:`fit_two_gaussians`.

    ``model`` is ordered so component 1 is the lower-energy one.
    ``area_ratio`` is area(upper)/area(lower), or its inverse when the fit
    was asked to put the lower component in the numerator.
    """

    model: TwoGaussianModel
    splitting: float
    area_ratio: float
    stderr: dict
    residual_rms: float
    converged: bool
    iterations: int
    cost_history: tuple = field(default=(), repr=False)
    baseline: bool = False

    @property
    def splitting_err(self) -> float:
        return self.stderr["splitting"]

    @property
    def area_ratio_err(self) -> float:
        return self.stderr["area_ratio"]

    @property
    def upper_fraction(self) -> float:
        """area(upper) / (area(upper) + area(lower))."""
        lo, hi = self.model.areas
        return hi / (hi + lo)


def _validate(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim != 1 or x.shape != y.shape:
        raise ValueError("x and y must be 1-D arrays of equal length")
    if x.size == 0:
        raise ValueError("empty spectrum")
    if x.size < MIN_POINTS:
        raise ValueError(f"need at least {MIN_POINTS} points, got {x.size}")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValueError("spectrum contains non-finite values")
    if np.ptp(y) == 0:
        raise ValueError("constant spectrum")
    return x, y


def _moving_average(y: np.ndarray, width: int) -> np.ndarray:
    pad = width // 2
    yp = np.pad(y, pad, mode="edge")
    return np.convolve(yp, np.ones(width) / width, mode="valid")


def initial_guess(x, y, smooth_width: int | None = None) -> TwoGaussianModel:
    """Two-peak starting point for the fit.

    The data are smoothed with an odd-width moving average (default width
    about ``len(x)/40``, at least 5). The two highest local maxima more than
    three bins apart, each standing out by 10% of the range, seed the
    centers; with a single maximum both centers start one standard
    deviation either side of the intensity-weighted mean.
    """
    x, y = _validate(x, y)
    if smooth_width is None:
        smooth_width = max(5, (x.size // 40) | 1)
    if smooth_width % 2 == 0 or smooth_width < 1:
        raise ValueError("smooth_width must be a positive odd integer")
    order = np.argsort(x)
    x, y = x[order], y[order]
    ys = _moving_average(y, smooth_width)
    base = ys.min()
    peaks, _ = find_peaks(ys - base, distance=4, prominence=0.1 * np.ptp(ys))
    if len(peaks) >= 2:
        top = np.sort(peaks[np.argsort(ys[peaks])[::-1][:2]])
        c1, c2 = x[top]
        sep = c2 - c1
        s = sep / 4
        return TwoGaussianModel(ys[top[0]] - base, ys[top[1]] - base, c1, c2, s, s)
    w = np.clip(y - base, 0, None)
    mu = np.sum(w * x) / np.sum(w)
    sd = np.sqrt(np.sum(w * (x - mu) ** 2) / np.sum(w))
    h = np.max(ys) - base
    return TwoGaussianModel(0.6 * h, 0.6 * h, mu - sd, mu + sd, 0.7 * sd, 0.7 * sd)


def _unpack(theta, baseline):
    return TwoGaussianModel(
        theta[0], theta[1], theta[2], theta[3], np.exp(theta[4]), np.exp(theta[5]), theta[6] if baseline else 0.0
    )


def _internal_jacobian(theta, x, baseline):
    m = _unpack(theta, baseline)
    jac = two_gaussian_jacobian(m, x)
    jac[:, 4] *= m.s1
    jac[:, 5] *= m.s2
    return jac if baseline else jac[:, :6]


def fit_two_gaussians(
    x,
    y,
    guess: TwoGaussianModel | None = None,
    baseline: bool = False,
    max_iter: int = 500,
    ftol: float = 1e-10,
    xtol: float = 1e-10,
    upper_in_numerator: bool = True,
) -> FitResult:
    """Least-squares fit of two Gaussians (plus optional offset) to ``(x, y)``.

    Converges when an accepted step changes the cost by less than ``ftol``
    relative, or when the step is shorter than ``xtol`` relative to the
    parameter vector. Without convergence after ``max_iter`` iterations the
    best point is returned with ``converged=False``. Standard errors come
    from ``(J^T J)^-1`` scaled by the residual variance.
    """
    x, y = _validate(x, y)
    if guess is None:
        guess = initial_guess(x, y)
    theta = np.array(
        [guess.amp1, guess.amp2, guess.c1, guess.c2, np.log(guess.s1), np.log(guess.s2)]
        + ([guess.offset] if baseline else [])
    )
    n_par = theta.size

    def residual(t):
        return y - two_gaussian_eval(_unpack(t, baseline), x)

    r = residual(theta)
    cost = 0.5 * r @ r
    floor = 1e-28 * (0.5 * y @ y)
    history = [cost]
    lam = 1e-3
    converged = False
    it = 0
    jac = _internal_jacobian(theta, x, baseline)
    while it < max_iter:
        it += 1
        if cost <= floor:
            converged = True
            break
        jtj = jac.T @ jac
        g = jac.T @ r
        d = np.diag(jtj).copy()
        d[d == 0] = 1.0
        try:
            step = np.linalg.solve(jtj + lam * np.diag(d), g)
        except np.linalg.LinAlgError:
            lam *= 10
            continue
        trial = theta + step
        r_new = residual(trial)
        cost_new = 0.5 * r_new @ r_new
        if np.isfinite(cost_new) and cost_new < cost:
            rel = (cost - cost_new) / cost
            small_step = np.linalg.norm(step) < xtol * (np.linalg.norm(theta) + xtol)
            theta, r, cost = trial, r_new, cost_new
            history.append(cost)
            jac = _internal_jacobian(theta, x, baseline)
            lam = max(lam / 10, 1e-15)
            if rel < ftol or small_step:
                converged = True
                break
        else:
            lam *= 10
            if lam > 1e16:
                # no descent direction left at working precision
                converged = True
                break

    dof = max(x.size - n_par, 1)
    s2 = 2 * cost / dof
    try:
        cov = np.linalg.inv(jac.T @ jac) * s2
    except np.linalg.LinAlgError:
        cov = np.full((n_par, n_par), np.nan)

    m = _unpack(theta, baseline)
    # internal index of (lower, upper) component
    lo, hi = (0, 1) if m.c1 <= m.c2 else (1, 0)
    om = m.ordered()
    areas = om.areas
    num, den = (areas[1], areas[0]) if upper_in_numerator else (areas[0], areas[1])
    ratio = num / den if den != 0 else float("inf")

    var = np.diag(cov)
    se_amp = np.sqrt(var[[lo, hi]])
    se_c = np.sqrt(var[[2 + lo, 2 + hi]])
    se_s = np.sqrt(var[[4 + lo, 4 + hi]]) * np.array([om.s1, om.s2])
    g_split = np.zeros(n_par)
    g_split[2 + hi], g_split[2 + lo] = 1.0, -1.0
    # d log(area_hi / area_lo) / d theta
    g_ratio = np.zeros(n_par)
    sign = 1.0 if upper_in_numerator else -1.0
    g_ratio[hi] = sign / theta[hi] if theta[hi] != 0 else np.nan
    g_ratio[lo] = -sign / theta[lo] if theta[lo] != 0 else np.nan
    g_ratio[4 + hi], g_ratio[4 + lo] = sign, -sign
    stderr = {
        "amp1": float(se_amp[0]),
        "amp2": float(se_amp[1]),
        "c1": float(se_c[0]),
        "c2": float(se_c[1]),
        "s1": float(se_s[0]),
        "s2": float(se_s[1]),
        "splitting": float(np.sqrt(g_split @ cov @ g_split)),
        "area_ratio": float(abs(ratio) * np.sqrt(g_ratio @ cov @ g_ratio)),
    }
    if baseline:
        stderr["offset"] = float(np.sqrt(var[6]))
    return FitResult(
        model=om,
        splitting=float(om.c2 - om.c1),
        area_ratio=float(ratio),
        stderr=stderr,
        residual_rms=float(np.sqrt(2 * cost / x.size)),
        converged=converged,
        iterations=it,
        cost_history=tuple(history),
        baseline=baseline,
    )


def nm_to_wavenumber(lam):
    """Vacuum wavelength in nm to wavenumber in cm^-1, ``1e7 / lambda``."""
    lam_arr = np.asarray(lam, dtype=float)
    if np.any(~(lam_arr > 0)):
        raise ValueError("wavelength must be positive")
    out = 1e7 / lam_arr
    return float(out) if out.ndim == 0 else out


def wavenumber_to_nm(k):
    """Wavenumber in cm^-1 to wavelength in nm."""
    k_arr = np.asarray(k, dtype=float)
    if np.any(~(k_arr > 0)):
        raise ValueError("wavenumber must be positive")
    out = 1e7 / k_arr
    return float(out) if out.ndim == 0 else out

"""Recovering the doublet splitting from a noisy simulated spectrum.

1. Find the fluctuation width whose isotropic ensemble has a mean
   splitting of 200 cm-1.
2. Simulate a fresh spectrum with another seed and multiply it by 5%
   Gaussian noise.
3. Fit two Gaussians and compare their center distance with 200 cm-1.

    python3 demos/04_fit_recovery.py [--n 200000]
"""

import argparse
from dataclasses import replace

import numpy as np

from d2line import (
    EnsembleConfig,
    FluctuationModel,
    OrientationDistribution,
    calibrate_sigma,
    fit_two_gaussians,
    simulate_spectrum,
)

ap = argparse.ArgumentParser()
ap.add_argument("--n", type=int, default=200_000)
args = ap.parse_args()

base = EnsembleConfig(
    n_samples=args.n, seed=1, orientation=OrientationDistribution.isotropic(), fluctuation=FluctuationModel(1.0)
)
for observable in ("mean", "fit"):
    sigma = calibrate_sigma(200.0, base, observable=observable, tol=0.2)
    cfg = replace(base, seed=99, fluctuation=FluctuationModel(sigma))
    spec = simulate_spectrum(cfg)
    rng = np.random.default_rng(5)
    noisy = spec.intensities * (1 + 0.05 * rng.standard_normal(spec.intensities.size))
    res = fit_two_gaussians(spec.centers, noisy)
    print(f"calibrated on {observable} splitting: sigma = {sigma:.2f} cm-1")
    print(f"  fitted splitting {res.splitting:.1f} +- {res.splitting_err:.1f} cm-1, area ratio {res.area_ratio:.3f}")
print("\nThe fitted centers sit a few cm-1 inside the mean splitting because the")
print("per-atom splitting distribution is skewed, not Gaussian.")

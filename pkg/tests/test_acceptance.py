"""Acceptance criteria 1-9; each test prints one line in the terminal summary."""

import json
import math
import subprocess
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from d2line import (
    AxialPerturbation,
    EnsembleConfig,
    FluctuationModel,
    OrientationDistribution,
    axial_hamiltonian,
    calibrate_sigma,
    contrast_scan,
    diagonalize_kramers,
    fit_two_gaussians,
    quadrupole_operators,
    sample_traceless_tensor,
    simulate_spectrum,
    stick_spectrum,
    table1,
    tensor_hamiltonian,
    weight_ratio,
)
from d2line.cli import main
from d2line.optics import TABLE1_EXCITATIONS, TABLE1_REFERENCE, TABLE1_ROWS, Analyzer, Geometry

X, Y, Z = np.eye(3)
ROOT = Path(__file__).resolve().parents[1]


@pytest.mark.criterion(1, "single-crystal intensity table from CG amplitudes and detection models")
def test_table1_reproduction(criterion_detail):
    t0 = time.perf_counter()
    t = table1()
    elapsed = time.perf_counter() - t0
    worst = 0.0
    for i, row in enumerate(TABLE1_ROWS):
        for k, exc in enumerate(TABLE1_EXCITATIONS):
            for c in range(2):
                worst = max(worst, abs(t[i, k, c] - float(TABLE1_REFERENCE[(row, exc)][c])))
    criterion_detail(f"16 entries, max deviation {worst:.1e}, {elapsed:.3f} s")
    assert t.size == 16
    assert worst < 1e-12
    assert elapsed < 1.0


@pytest.mark.criterion(2, "static-crystal weight ratios 0 and 9")
def test_static_ratios(criterion_detail):
    H = axial_hamiltonian(AxialPerturbation(0.0, 200.0))
    r_zz = weight_ratio(stick_spectrum(H, Geometry(Z, Analyzer(Z))))
    r_yx = weight_ratio(stick_spectrum(H, Geometry(Y, Analyzer(X))))
    criterion_detail(f"z/z {r_zz!r}, y/x {r_yx!r}")
    assert r_zz == 0
    assert r_yx == pytest.approx(9, abs=1e-12)


@pytest.mark.criterion(3, "axial eigenvalues A +- B/2 with |m|=3/2 at A+B/2")
@pytest.mark.parametrize("A,B", [(0.0, 1.0), (11700.0, 200.0), (-3.0, -250.0), (5.0, 1e-3)])
def test_axial_eigenstructure(A, B, criterion_detail):
    ks = diagonalize_kramers(axial_hamiltonian(AxialPerturbation(A, B)))
    tol = 1e-12 * (abs(A) + abs(B))
    e32 = ks.e_upper if ks.label_of("|m|=3/2") == 1 else ks.e_lower
    e12 = ks.e_lower if ks.label_of("|m|=3/2") == 1 else ks.e_upper
    criterion_detail(f"A={A:g} B={B:g}: |e32-(A+B/2)|={abs(e32 - (A + B / 2)):.1e}")
    assert abs(e32 - (A + B / 2)) <= tol
    assert abs(e12 - (A - B / 2)) <= tol


@pytest.mark.criterion(4, "Kramers degeneracy for random tensors and vanishing J=1/2 quadrupole")
def test_kramers_property(criterion_detail):
    t0 = time.perf_counter()
    rng = np.random.default_rng(20240)
    worst = 0.0
    for q in sample_traceless_tensor(rng, 50.0, 1000):
        e = np.linalg.eigvalsh(tensor_hamiltonian(q, 1.5))
        norm = np.linalg.norm(q)
        worst = max(worst, abs(e[1] - e[0]) / norm, abs(e[3] - e[2]) / norm)
    t_half = np.abs(quadrupole_operators(0.5)).max()
    elapsed = time.perf_counter() - t0
    criterion_detail(f"max pair gap {worst:.1e} ||Q||, J=1/2 max |T| {t_half:.1e}, {elapsed:.2f} s")
    assert worst < 1e-9
    assert t_half < 1e-14
    assert elapsed < 10


@pytest.mark.criterion(5, "isotropic pure fluctuations give equal weights in every geometry")
def test_isotropy(criterion_detail):
    t0 = time.perf_counter()
    stats = {}
    for seed, (name, geo) in enumerate((("z/z", Geometry(Z, Analyzer(Z))), ("y/x", Geometry(Y, Analyzer(X))))):
        cfg = EnsembleConfig(
            n_samples=1_000_000,
            seed=500 + seed,
            orientation=OrientationDistribution.isotropic(),
            fluctuation=FluctuationModel(40.0),
            geometry=geo,
        )
        stats[name] = simulate_spectrum(cfg, n_workers=4).stats
    a, b = stats["z/z"], stats["y/x"]
    diff, se = abs(a.ratio - b.ratio), math.hypot(a.ratio_stderr, b.ratio_stderr)
    elapsed = time.perf_counter() - t0
    criterion_detail(
        f"z/z {a.ratio:.4f}+-{a.ratio_stderr:.4f}, y/x {b.ratio:.4f}+-{b.ratio_stderr:.4f}, "
        f"diff {diff / se:.1f} SE, {elapsed:.0f} s"
    )
    assert abs(a.ratio - 1) <= 0.01
    assert abs(b.ratio - 1) <= 0.01
    assert diff < 3 * se


@pytest.mark.criterion(6, "contrast non-increasing in sigma/B, starting at 0.9")
def test_contrast_reduction(criterion_detail):
    B = 200.0
    pts = contrast_scan(B, [r * B for r in (0, 0.25, 0.5, 1, 2)], EnsembleConfig(n_samples=200_000, seed=606))
    criterion_detail("contrast " + ", ".join(f"{p.contrast:.3f}" for p in pts))
    assert pts[0].contrast == pytest.approx(0.9, abs=1e-12)
    for a, b in zip(pts, pts[1:]):
        assert b.contrast <= a.contrast + 3 * math.hypot(a.stderr, b.stderr)


@pytest.mark.criterion(7, "fit recovers a 200 cm-1 calibrated splitting within +-10 under 5% noise")
def test_fit_recovery(criterion_detail):
    base = EnsembleConfig(
        n_samples=200_000,
        seed=700,
        orientation=OrientationDistribution.isotropic(),
        fluctuation=FluctuationModel(1.0),
    )
    sigma = calibrate_sigma(200.0, base, observable="mean", tol=0.2)
    fresh = replace(base, seed=701, n_samples=1_000_000, fluctuation=FluctuationModel(sigma))
    spec = simulate_spectrum(fresh, n_workers=4)
    noise = np.random.default_rng(702).standard_normal(spec.intensities.size)
    res = fit_two_gaussians(spec.centers, spec.intensities * (1 + 0.05 * noise))
    criterion_detail(f"sigma {sigma:.2f}, fitted splitting {res.splitting:.1f}+-{res.splitting_err:.1f} cm-1")
    assert res.converged
    assert abs(res.splitting - 200.0) <= 10.0


@pytest.mark.criterion(8, "exploratory mixture scenario ships and runs (experimental ratios are not targets)")
def test_exploratory_scenario(criterion_detail, tmp_path):
    demo = ROOT / "demos" / "05_exploratory_mixture.py"
    r = subprocess.run([sys.executable, str(demo), "--n", "20000"], capture_output=True, text=True, timeout=300)
    assert r.returncode == 0, r.stderr
    assert "EXPLORATORY" in r.stdout
    cfg = json.loads((ROOT / "demos" / "exploratory_mixture.json").read_text())
    cfg.update(n_samples=20000, output={})
    path = tmp_path / "mix.json"
    path.write_text(json.dumps(cfg))
    assert main(["simulate", "-c", str(path)]) == 0
    ratio = json.loads((tmp_path / "mix.summary.json").read_text())["ratio_upper_lower"]
    criterion_detail(f"exploratory z/z ratio {ratio:.2f}, compare observed 0.7 (not a pass/fail target)")
    # the mixture sits between the static crystal (0) and the pure fluctuation limit (1)
    assert 0 < ratio < 1


@pytest.mark.criterion(9, "simulate and contrast-scan outputs byte-identical across thread counts")
def test_determinism(criterion_detail, tmp_path):
    sim = {
        "seed": 9,
        "n_samples": 50_000,
        "static_B": 100.0,
        "orientation": {"kind": "isotropic"},
        "fluctuation": {"sigma_aniso": 60.0, "sigma_iso": 10.0},
        "kernel_width": 3.0,
    }
    scan = {"seed": 9, "n_samples": 30_000, "static_B": 200.0, "sigmas": [0, 50, 100, 200, 400]}
    identical = []
    for name, raw, cmd, outs in (
        ("sim", sim, "simulate", ("spectrum.csv", "summary.json")),
        ("scan", scan, "contrast-scan", ("contrast.csv",)),
    ):
        blobs = []
        for threads in (1, 4):
            d = tmp_path / f"{name}{threads}"
            d.mkdir()
            cfg = d / "run.json"
            cfg.write_text(json.dumps(raw))
            assert main([cmd, "-c", str(cfg), "--threads", str(threads)]) == 0
            blobs.append([(d / f"run.{o}").read_bytes() for o in outs])
        identical.append(blobs[0] == blobs[1])
    criterion_detail(f"simulate identical={identical[0]}, contrast-scan identical={identical[1]}")
    assert all(identical)

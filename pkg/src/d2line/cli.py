"""``d2line`` command line interface.

Exit codes: 0 success, 1 validation or convergence failure, 2 I/O failure.
"""

from __future__ import annotations

import argparse
import sys
import warnings
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .ensemble import contrast_scan, simulate_spectrum
from .fitting import fit_two_gaussians, nm_to_wavenumber, two_gaussian_eval, wavenumber_to_nm
from .io import (
    ConfigError,
    SpectrumFormatError,
    dump_json,
    file_digest,
    fmt,
    format_spectrum,
    load_run_config,
    read_spectrum,
)
from .optics import TABLE1_EXCITATIONS, TABLE1_REFERENCE, TABLE1_ROWS, table1

EXIT_OK, EXIT_FAIL, EXIT_IO = 0, 1, 2


def _err(msg: str) -> None:
    print(f"d2line: {msg}", file=sys.stderr)


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, newline="\n")


def cmd_table1(args) -> int:
    t = table1()
    header = f"{'detection':<12}" + "".join(f"{f'{e}-exc I3/2':>22}{f'{e}-exc I1/2':>22}" for e in TABLE1_EXCITATIONS)
    print(header)
    mismatches = []
    for i, row in enumerate(TABLE1_ROWS):
        cells = []
        for k, exc in enumerate(TABLE1_EXCITATIONS):
            for c in range(2):
                v = t[i, k, c]
                frac = Fraction(v).limit_denominator(1000)
                cells.append(f"{str(frac) + ' (' + format(v, '.6f') + ')':>22}")
                ref = TABLE1_REFERENCE[(row, exc)][c]
                if abs(v - float(ref)) > 1e-12:
                    mismatches.append(f"{row}, {exc}-exc, component {('I3/2', 'I1/2')[c]}: got {v!r}, expected {ref}")
        print(f"{row:<12}" + "".join(cells))
    if mismatches:
        for m in mismatches:
            _err("mismatch: " + m)
        return EXIT_FAIL
    return EXIT_OK


def _load_config(path):
    try:
        return load_run_config(path), None
    except ConfigError as exc:
        _err(str(exc))
        return None, EXIT_FAIL
    except OSError as exc:
        _err(f"cannot read config: {exc}")
        return None, EXIT_IO


def cmd_simulate(args) -> int:
    rc, code = _load_config(args.config)
    if rc is None:
        return code
    threads = args.threads or rc.threads
    cfg_path = Path(args.config)
    spectrum_path = rc.outputs.get("spectrum", cfg_path.with_suffix(".spectrum.csv"))
    summary_path = rc.outputs.get("summary", cfg_path.with_suffix(".summary.json"))
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", RuntimeWarning)
        spec = simulate_spectrum(rc.ensemble, n_workers=threads)
    for w in caught:
        _err(f"warning: {w.message}")
    st = spec.stats
    summary = {
        "tool": "d2line",
        "version": __version__,
        "command": "simulate",
        "config_digest": rc.digest,
        "seed": rc.ensemble.seed,
        "config": spec.metadata["config"],
        "component_areas": {"lower": st.sum_l, "upper": st.sum_u},
        "per_sample": {"lower": st.sum_l / st.n, "upper": st.sum_u / st.n},
        "ratio_upper_lower": st.ratio,
        "ratio_stderr": st.ratio_stderr if st.sum_l else None,
        "upper_fraction": st.upper_fraction,
        "upper_fraction_stderr": st.upper_fraction_stderr,
        "mean_splitting": st.mean_splitting,
        "n_degenerate": st.n_degenerate,
        "clipped_fraction": spec.clipped_fraction,
        "clipping_warning": spec.metadata["clipping_warning"],
    }
    text = format_spectrum(spec.centers, spec.intensities, "cm-1", [f"config_digest={rc.digest}"])
    try:
        _write(Path(spectrum_path), text)
        _write(Path(summary_path), dump_json(summary))
    except OSError as exc:
        _err(f"cannot write output: {exc}")
        return EXIT_IO
    print(f"wrote {spectrum_path} and {summary_path}")
    return EXIT_OK


def cmd_fit(args) -> int:
    try:
        spec = read_spectrum(args.spectrum)
        digest = file_digest(args.spectrum)
    except (OSError, SpectrumFormatError) as exc:
        _err(str(exc))
        return EXIT_IO
    if args.axis == "cm-1":
        work = spec.in_wavenumbers()
        x, y = work.x, work.y
    else:
        lam = spec.x if spec.axis == "nm" else wavenumber_to_nm(spec.x)
        order = np.argsort(lam)
        x, y = lam[order], spec.y[order]
    try:
        res = fit_two_gaussians(x, y, baseline=args.baseline)
    except ValueError as exc:
        _err(f"cannot fit {args.spectrum}: {exc}")
        return EXIT_FAIL
    m = res.model
    if args.axis == "nm":
        split_k = abs(nm_to_wavenumber(m.c1) - nm_to_wavenumber(m.c2))
    else:
        split_k = res.splitting
    params = {"amp1": m.amp1, "amp2": m.amp2, "c1": m.c1, "c2": m.c2, "s1": m.s1, "s2": m.s2}
    if args.baseline:
        params["offset"] = m.offset
    report = {
        "tool": "d2line",
        "version": __version__,
        "command": "fit",
        "input": {"file": Path(args.spectrum).name, "digest": digest, "axis": spec.axis},
        "fit_axis": args.axis,
        "baseline": args.baseline,
        "parameters": params,
        "stderr": res.stderr,
        "splitting_cm-1": split_k,
        "splitting": res.splitting,
        "area_ratio": res.area_ratio,
        "residual_rms": res.residual_rms,
        "converged": res.converged,
        "iterations": res.iterations,
    }
    out = Path(args.output) if args.output else Path(args.spectrum).with_suffix(".fit.json")
    try:
        _write(out, dump_json(report))
        if args.residuals:
            resid = y - two_gaussian_eval(m, x)
            _write(Path(args.residuals), format_spectrum(x, resid, args.axis, [f"residuals of {digest}"]))
    except OSError as exc:
        _err(f"cannot write report: {exc}")
        return EXIT_IO
    print(f"splitting {fmt(split_k)} cm-1, area ratio {fmt(res.area_ratio)}, converged={res.converged}")
    if not res.converged:
        _err("fit did not converge")
        return EXIT_FAIL
    return EXIT_OK


def _monotone(points) -> bool:
    ok = [p for p in points if p.error is None]
    for a, b in zip(ok, ok[1:]):
        if b.contrast > a.contrast + 3 * np.hypot(a.stderr, b.stderr):
            return False
    return True


def cmd_contrast_scan(args) -> int:
    rc, code = _load_config(args.config)
    if rc is None:
        return code
    if rc.sigmas is None:
        _err("contrast-scan config needs a 'sigmas' list")
        return EXIT_FAIL
    threads = args.threads or rc.threads
    out = rc.outputs.get("contrast", Path(args.config).with_suffix(".contrast.csv"))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        points = contrast_scan(
            rc.ensemble.static_B, rc.sigmas, rc.ensemble, method=rc.method, on_error="record", n_workers=threads
        )
    lines = [
        f"# config_digest={rc.digest}",
        f"# static_B={fmt(rc.ensemble.static_B)} method={rc.method} seed={rc.ensemble.seed}",
        "sigma,contrast,stderr,w_yx,w_zz,status",
    ]
    for p in points:
        if p.error is None:
            lines.append(",".join([fmt(p.sigma), fmt(p.contrast), fmt(p.stderr), fmt(p.w_yx), fmt(p.w_zz), "ok"]))
        else:
            reason = p.error.replace(",", ";").replace("\n", " ")
            lines.append(f"{fmt(p.sigma)},,,,,error: {reason}")
    lines.append(f"# monotone_nonincreasing={'true' if _monotone(points) else 'false'}")
    try:
        _write(Path(out), "\n".join(lines) + "\n")
    except OSError as exc:
        _err(f"cannot write output: {exc}")
        return EXIT_IO
    print(f"wrote {out}")
    return EXIT_OK


_UNITS = {"nm": "nm", "cm-1": "cm-1", "cm^-1": "cm-1"}


def cmd_convert_units(args) -> int:
    src, dst = _UNITS.get(args.src), _UNITS.get(args.dst)
    if src is None or dst is None:
        _err("units must be 'nm' or 'cm-1'")
        return EXIT_FAIL
    try:
        value = float(args.value)
        out = value if src == dst else (nm_to_wavenumber(value) if src == "nm" else wavenumber_to_nm(value))
    except ValueError as exc:
        _err(str(exc))
        return EXIT_FAIL
    print(fmt(out))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="d2line", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("table1", help="print the polarization intensity table and check it")
    s.set_defaults(func=cmd_table1)

    s = sub.add_parser("simulate", help="Monte Carlo spectrum from a JSON config")
    s.add_argument("-c", "--config", required=True)
    s.add_argument("--threads", type=int, default=None)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("fit", help="two-Gaussian fit of a spectrum CSV")
    s.add_argument("spectrum")
    s.add_argument("--baseline", action="store_true", help="add a constant offset")
    s.add_argument("--axis", choices=["nm", "cm-1"], default="cm-1", help="axis to fit on")
    s.add_argument("-o", "--output", help="report path (default <spectrum>.fit.json)")
    s.add_argument("--residuals", help="also write residuals as a spectrum CSV")
    s.set_defaults(func=cmd_fit)

    s = sub.add_parser("contrast-scan", help="polarization contrast versus fluctuation width")
    s.add_argument("-c", "--config", required=True)
    s.add_argument("--threads", type=int, default=None)
    s.set_defaults(func=cmd_contrast_scan)

    s = sub.add_parser("convert-units", help="convert between nm and cm-1")
    s.add_argument("value")
    s.add_argument("src", metavar="from")
    s.add_argument("dst", metavar="to")
    s.set_defaults(func=cmd_convert_units)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "threads", None) is not None and args.threads < 1:
        _err("--threads must be at least 1")
        return EXIT_FAIL
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())

"""Command line front end.

Subcommands: verify (identity self-checks), predict (closed-form budget),
simulate (one synthesized realization to an ECSD series), ber (Monte Carlo
bit error rate, optionally swept), decode (bits from a stored series).

Exit codes: 0 success, 1 invalid configuration, 2 regime refusal,
3 unreliable signature.
"""

import argparse
import json
import math
import os
import sys
import warnings
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .config import (
    ConfigError,
    build_bits,
    build_scene,
    build_spectrum,
    build_windows,
    config_from_mapping,
    config_hash,
    echo_config,
)
from .kernel import (
    RegimeError,
    RegimeWarning,
    fresnel_bound_check,
    hk_residual_standard,
    hk_residual_generalized,
    mean_general,
    measurement_noise_var,
    nyquist_node_count,
    snr_budget,
)
from .link import UnreliableSignatureError, decode, encode, run_ber
from .ecsd import ecsd_series, load_ecsd_csv
from .synth import RealizationSeed, add_measurement_noise, default_dt, save_fld, synth_realization
from . import reports


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="scenario JSON file (default: built-in desk scene)")
    common.add_argument("--out", help="output directory (default: out_dir from the config)")
    common.add_argument("--seed", type=int, help="override master_seed")
    common.add_argument(
        "--workers", type=int,
        help="parallel trial count; falls back to AMBIENTLINK_WORKERS, then the config",
    )
    common.add_argument(
        "--override-spacing", action="store_true",
        help="accept receiver spacing away from half a wavelength",
    )
    p = argparse.ArgumentParser(prog="ambientlink", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("verify", parents=[common], help="run identity self-checks")
    sub.add_parser("predict", parents=[common], help="write the closed-form link budget")
    sub.add_parser("simulate", parents=[common], help="synthesize one realization and its ECSD series")
    sub.add_parser("ber", parents=[common], help="Monte Carlo bit error rate")
    d = sub.add_parser("decode", parents=[common], help="decode bits from an ECSD series CSV")
    d.add_argument("series", nargs="?", help="series CSV (default: <out>/ecsd_k.csv)")
    d.add_argument("--mode", choices=("complex", "psd_diff"), default="complex")
    return p


def _load_config(args):
    if args.config is None:
        raw = {}
    else:
        with open(args.config) as fh:
            try:
                raw = json.load(fh)
            except json.JSONDecodeError as err:
                raise ConfigError(
                    ["%s: line %d: %s" % (args.config, err.lineno, err.msg)]
                ) from err
        if not isinstance(raw, dict):
            raise ConfigError(["top level of %s must be an object" % args.config])
    if args.override_spacing:
        raw["override_spacing"] = True
    if args.seed is not None:
        raw["master_seed"] = args.seed
    if args.out is not None:
        raw["out_dir"] = args.out
    if args.workers is not None:
        raw["workers"] = args.workers
    elif os.environ.get("AMBIENTLINK_WORKERS"):
        raw["workers"] = int(os.environ["AMBIENTLINK_WORKERS"])
    return config_from_mapping(raw)


def _units_line(cfg) -> str:
    return "config %s; units: time s, frequency rad/s, ECSD field^2 s^2" % config_hash(cfg)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_verify(args, cfg, out: Path) -> int:
    scene = build_scene(cfg)
    spectrum = build_spectrum(cfg)
    windows = build_windows(cfg)
    lam0 = cfg.lam0
    lines = [_units_line(cfg)]

    mass = spectrum.band_mass(0.0, spectrum.omega0 + 2.0 * spectrum.B)
    lines.append("ok - spectrum band mass pi (rel err %.2e)" % abs(mass / math.pi - 1.0))

    from scipy import integrate

    phi_mass = integrate.quad(lambda t: float(windows.phi(t)), -1.0, 1.0)[0]
    psi_mass = integrate.quad(lambda t: float(windows.psi(t)), -10.0, 10.0)[0]
    lines.append("ok - time window unit mass (rel err %.2e)" % abs(phi_mass - 1.0))
    lines.append("ok - lag window unit mass (rel err %.2e)" % abs(psi_mass - 1.0))

    x = np.array([0.3 * lam0, 0.0, 0.0])
    y = np.array([-0.8 * lam0, 0.1 * lam0, 0.0])
    l_hk = 10.0 * lam0
    res = hk_residual_standard(
        spectrum.omega0, x, y, l_hk, nyquist_node_count(spectrum.omega0, l_hk, scene.bg), scene.bg
    )
    lines.append("%s - free-space correlation identity residual %.2e"
                 % ("ok" if res < 3e-2 else "warn", res))

    n_gen = max(cfg.n_nodes, nyquist_node_count(spectrum.omega0, cfg.L_src, scene.bg))
    if n_gen <= 300000:
        try:
            res_g = hk_residual_generalized(
                spectrum.omega0, scene.receivers.xr, scene.receivers.xrp, scene.at_level(1), n_gen
            )
            lines.append("info - scattering identity residual %.2e at %d nodes" % (res_g, n_gen))
        except RegimeError as exc:
            lines.append("warn - scattering identity skipped: %s" % exc)
    else:
        lines.append("skip - scattering identity needs %d shell nodes; over budget" % n_gen)

    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", RegimeWarning)
        rb1_abs, bound = fresnel_bound_check(
            scene.surface, scene.receivers.xr, spectrum.omega0, scene.bg
        )
        budget = snr_budget(scene, spectrum, windows, cfg.rho1)
    lines.append("%s - |R_B1| = %.4f vs paraxial bound %.4f"
                 % ("ok" if rb1_abs <= bound else "warn", rb1_abs, bound))
    for w in caught:
        lines.append("warn - %s" % w.message)
    lines.append("info - predicted snr %.3f, implied rate %.3g bit/s"
                 % (budget.snr_ratio, budget.implied_rate))

    text = "\n".join(lines) + "\n"
    (out / "verify.txt").write_text(text)
    sys.stdout.write(text)
    return 0


def cmd_predict(args, cfg, out: Path) -> int:
    scene = build_scene(cfg)
    spectrum = build_spectrum(cfg)
    windows = build_windows(cfg)
    budget = snr_budget(scene, spectrum, windows, cfg.rho1)
    rows = [
        ("mean_I", budget.mean_I.real, budget.mean_I.imag),
        ("mean_II", budget.mean_II.real, budget.mean_II.imag),
        ("mean_III", budget.mean_III.real, budget.mean_III.imag),
        ("variance", budget.variance, 0.0),
        ("snr_ratio", budget.snr_ratio, 0.0),
        ("rho_B", budget.rho_B.real, budget.rho_B.imag),
        ("R_B1", budget.R_B1.real, budget.R_B1.imag),
        ("R_B2", budget.R_B2.real, budget.R_B2.imag),
        ("fresnel_bound", budget.fresnel_bound, 0.0),
        ("implied_rate_bit_s", budget.implied_rate, 0.0),
        ("scheme_rate_bit_s", budget.scheme_rate, 0.0),
    ]
    if cfg.sigma_meas > 0:
        rows.append(
            ("measurement_noise_var",
             measurement_noise_var(cfg.sigma_meas, cfg.resolved_t_meas(), windows), 0.0)
        )
    with open(out / "budget.csv", "w") as fh:
        fh.write("# %s\n" % _units_line(cfg))
        fh.write("name,re,im\n")
        for name, re, im in rows:
            fh.write("%s,%.17g,%.17g\n" % (name, re, im))
    reports.save_budget_figure(budget, out / "budget.png")
    print("snr_ratio %.3f  implied rate %.3g bit/s  scheme rate %.3g bit/s"
          % (budget.snr_ratio, budget.implied_rate, budget.scheme_rate))
    return 0


def cmd_simulate(args, cfg, out: Path) -> int:
    scene = build_scene(cfg)
    spectrum = build_spectrum(cfg)
    windows = build_windows(cfg)
    schedule = encode(build_bits(cfg), rho1=cfg.rho1, T=windows.T, preamble=cfg.preamble)
    dt = None
    if cfg.sigma_meas > 0:
        # the record grid must resolve the noise correlation time
        dt = min(default_dt(spectrum), cfg.resolved_t_meas() / 2.0)
    record = synth_realization(
        scene, spectrum, schedule, windows, RealizationSeed(cfg.master_seed, 0), dt=dt
    )
    if cfg.sigma_meas > 0:
        record = add_measurement_noise(
            record, cfg.sigma_meas, cfg.resolved_t_meas(),
            RealizationSeed(cfg.master_seed ^ 0x5EED, 0),
        )
    series = ecsd_series(record, schedule, windows, spectrum.omega0)
    save_fld(record, out / "record.fld")
    series.save_csv(out / "ecsd_k.csv", comment=_units_line(cfg))
    reports.save_series_figure(series, schedule.slot_levels(), out / "ecsd_series.png")

    # slot-averaged ECSD per modulation level against the band-quadrature mean
    values = np.asarray(series.values)
    levels = np.asarray(schedule.slot_levels())
    with open(out / "moments.csv", "w") as fh:
        fh.write("# %s\n" % _units_line(cfg))
        fh.write("level,n_slots,re_mean,im_mean,re_predicted,im_predicted\n")
        for level in (0, 1):
            sel = values[levels == level]
            if sel.size == 0:
                continue
            pred = mean_general(
                spectrum.omega0, scene.receivers.xr, scene.receivers.xrp,
                scene.at_level(level), spectrum, windows,
            )
            emp = complex(sel.mean())
            fh.write("%d,%d,%.17g,%.17g,%.17g,%.17g\n"
                     % (level, sel.size, emp.real, emp.imag, pred.real, pred.imag))
    print("simulated %d slots (%d bits) to %s" % (len(series), schedule.K, out / "ecsd_k.csv"))
    return 0


def _axis_variant(cfg, axis: str, value: float):
    raw = asdict(cfg)
    if axis == "T":
        raw["T"] = float(value)
    elif axis == "n_side":
        raw["n_side"] = int(round(value))
    elif axis == "sigma_meas":
        raw["sigma_meas"] = float(value)
    elif axis == "L":
        xr = np.asarray(cfg.xr)
        direction = np.asarray(cfg.center) - xr
        direction = direction / np.linalg.norm(direction)
        raw["center"] = tuple(xr + float(value) * direction)
    else:
        raise ConfigError(["cannot sweep axis %r" % axis])
    raw["sweep_axis"] = None
    raw["sweep_values"] = ()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RegimeWarning)
        return config_from_mapping(raw)


def cmd_ber(args, cfg, out: Path) -> int:
    if cfg.sweep_axis is not None and not cfg.sweep_values:
        raise ConfigError(["sweep over %r requested but sweep_values is empty" % cfg.sweep_axis])
    if cfg.sweep_axis is None:
        points = [(cfg.resolved_T(), cfg)]
        axis = "T"
    else:
        axis = cfg.sweep_axis
        points = [(v, _axis_variant(cfg, axis, v)) for v in cfg.sweep_values]

    stats_list = []
    with open(out / "ber.csv", "w") as fh:
        fh.write("# %s\n" % _units_line(cfg))
        fh.write("%s,n_bits,n_errors,ber,wilson_low,wilson_high,snr_predicted\n" % axis)
        for value, variant in points:
            stats = run_ber(
                variant, n_bits=variant.n_bits, n_trials=variant.n_realizations,
                seed=variant.master_seed, workers=variant.workers,
            )
            stats_list.append(stats)
            fh.write("%.17g,%d,%d,%.17g,%.17g,%.17g,%.17g\n"
                     % (value, stats.n_payload_bits, stats.n_errors, stats.ber,
                        stats.wilson_low, stats.wilson_high, stats.snr_predicted))
            print("%s = %-10g ber %.4f [%.4f, %.4f] over %d bits"
                  % (axis, value, stats.ber, stats.wilson_low, stats.wilson_high,
                     stats.n_payload_bits))
    reports.save_ber_figure(axis, [v for v, _ in points], stats_list, out / "ber.png")
    return 0


def cmd_decode(args, cfg, out: Path) -> int:
    path = args.series if args.series else out / "ecsd_k.csv"
    try:
        series = load_ecsd_csv(path)
        result = decode(series, mode=args.mode, preamble_bits=(1,) * cfg.preamble)
    except (RegimeError, ConfigError):
        raise
    except (OSError, ValueError) as err:
        raise ConfigError(["cannot decode %s: %s" % (path, err)]) from err
    result.save_csv(out / "deltas.csv", comment=_units_line(cfg))
    print("bits: %s" % "".join(str(b) for b in result.payload))
    print("signature snr %.2f, preamble errors %d/%d"
          % (result.snr, result.preamble_errors, result.preamble))
    return 0


_DISPATCH = {
    "verify": cmd_verify,
    "predict": cmd_predict,
    "simulate": cmd_simulate,
    "ber": cmd_ber,
    "decode": cmd_decode,
}


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = _load_config(args)
        out = Path(cfg.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        echo_config(cfg, out / "config.echo.json")
        return _DISPATCH[args.command](args, cfg, out)
    except ConfigError as err:
        print("error: %s" % err, file=sys.stderr)
        return 1
    except RegimeError as err:
        print("regime refusal: %s" % err, file=sys.stderr)
        return 2
    except UnreliableSignatureError as err:
        print("decode refused: %s" % err, file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())

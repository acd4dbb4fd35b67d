"""Command-line front end.

Subcommands: ``simulate``, ``pulse``, ``analyze``, ``fit-modes``, ``spectrum``.
Every subcommand takes ``--config FILE``: one JSON document whose sections
are named after the package modules (``squeezer_model``, ``event_simulator``,
``pulse_analysis``, ``fock_stats``, ``mode_inference``, ``jsa_spectrum``).
Flags given on the command line override values from the file.

CSV columns
  counts       n,count
  distribution n,P_n,sigma
  points       label,g2,sigma_g2,g3,sigma_g3
  modes        k,lambda_k,r_k[<label>]...
  spectrum     wavelength_nm,intensity
  lambdas      k,lambda
  peaks        n,center,sigma,fwhm,weight,upper_threshold
  heights      height,count

Exit codes: 0 ok, 2 usage, 3 I/O, 4 numeric or physics-domain error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import fock, jsa, modes, pulses, report, simulate
from .errors import PhysicsDomainError
from .squeezer import DEFAULT_K_MAX, SqueezerSpec

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_DOMAIN = 0, 2, 3, 4


class UsageError(Exception):
    pass


class InputError(Exception):
    pass


def _read_text(path) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror or exc}") from exc


def _write_text(path, text: str) -> None:
    try:
        Path(path).write_text(text)
    except OSError as exc:
        raise InputError(f"cannot write {path}: {exc.strerror or exc}") from exc


def _load_config(path) -> dict:
    if path is None:
        return {}
    try:
        cfg = json.loads(_read_text(path))
    except json.JSONDecodeError as exc:
        raise InputError(f"{path} is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise InputError(f"{path}: top-level JSON must be an object")
    return cfg


def _pick(flag, section: dict, key: str, default=None):
    if flag is not None:
        return flag
    return section.get(key, default)


def _parse_float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.replace(",", " ").split()]
    except ValueError as exc:
        raise UsageError(f"cannot parse number list {text!r}") from exc


def _spec_from(args, cfg: dict) -> SqueezerSpec:
    sec = cfg.get("squeezer_model", {})
    r_list = _parse_float_list(args.r_list) if args.r_list else sec.get("r_list")
    if r_list is not None:
        return SqueezerSpec.explicit(r_list)
    mu = _pick(args.mu, sec, "mu")
    B = _pick(args.B, sec, "B")
    if mu is None or B is None:
        raise UsageError("simulate needs --r-list or both --mu and --B")
    return SqueezerSpec.thermal(mu, B, _pick(args.K_max, sec, "K_max", DEFAULT_K_MAX))


def _waveform_options(args, sec: dict) -> simulate.WaveformOptions:
    opts = dict(sec.get("waveform", {}))
    if args.samples_per_record is not None:
        opts["samples_per_record"] = args.samples_per_record
    if args.photon_energy is not None:
        opts["photon_energy_eV"] = args.photon_energy
    if args.resolution is not None:
        opts["resolution_fwhm_eV"] = args.resolution
    try:
        return simulate.WaveformOptions(**opts)
    except TypeError as exc:
        raise UsageError(f"bad waveform options: {exc}") from exc


def cmd_simulate(args) -> int:
    cfg = _load_config(args.config)
    sec = cfg.get("event_simulator", {})
    spec = _spec_from(args, cfg)
    eta = _pick(args.eta, sec, "eta")
    events = _pick(args.events, sec, "n_events")
    if eta is None or events is None:
        raise UsageError("simulate needs --eta and --events")
    seed = _pick(args.seed, sec, "seed", 0)
    threads = _pick(args.threads, sec, "threads", 1)
    if args.out is None and args.waveforms is None:
        raise UsageError("simulate needs --out and/or --waveforms")
    config = simulate.ExperimentConfig(spec, float(eta), int(events), int(seed), _waveform_options(args, sec))
    per_event = simulate.sample_event_counts(config, threads=int(threads))
    hist = fock.CountHistogram.from_events(per_event)
    if args.out is not None:
        _write_text(args.out, hist.to_csv())
    if args.waveforms is not None:
        wset = simulate.synthesize_waveforms(per_event, config, threads=int(threads))
        try:
            simulate.write_tesw(wset, args.waveforms)
        except OSError as exc:
            raise InputError(f"cannot write {args.waveforms}: {exc}") from exc
    return EXIT_OK


def cmd_pulse(args) -> int:
    cfg = _load_config(args.config).get("pulse_analysis", {})
    try:
        wset = simulate.read_tesw(args.input)
    except OSError as exc:
        raise InputError(f"cannot read {args.input}: {exc.strerror or exc}") from exc
    except ValueError as exc:
        raise InputError(f"{args.input}: {exc}") from exc
    hopts = pulses.HeightOptions(
        baseline_samples=int(_pick(args.baseline_samples, cfg, "baseline_samples", 80)),
        filter_width=int(_pick(args.filter_width, cfg, "filter_width", 8)),
    )
    heights = pulses.extract_heights(wset, hopts)
    peaks = pulses.fit_peaks(heights, int(_pick(args.max_peaks, cfg, "expected_max_peaks", 12)))
    energy = float(_pick(args.photon_energy, cfg, "photon_energy_eV", 0.8))
    result = pulses.assign_counts(heights, peaks, photon_energy_eV=energy)
    _write_text(args.out, result.histogram.to_csv())
    if args.peaks:
        _write_text(args.peaks, pulses.peak_table_csv(peaks, result.thresholds))
    if args.heights:
        _write_text(args.heights, pulses.height_histogram_csv(heights))
    print(f"peaks={len(peaks)} resolution_eV={result.resolution_eV:.4f} events={result.histogram.total_events}")
    return EXIT_OK


def _dist_block(d: fock.PhotonDistribution) -> dict:
    return {"probs": d.probs, "sigmas": d.sigmas, "cutoff": d.cutoff, "compensated": d.compensated, "tail_mass": d.tail_mass}


def _klyshko_block(d: fock.PhotonDistribution, n_max: int) -> list:
    n_max = min(n_max, d.cutoff - 1)
    if n_max < 1:
        return []
    return [{"n": k.n, "value": k.value, "sigma": k.sigma, "defined": k.defined} for k in fock.klyshko_figures(d, n_max)]


def _safe(fn, *a):
    try:
        return report.estimate_block(fn(*a))
    except PhysicsDomainError:
        return None


def photon_statistics(hist: fock.CountHistogram, eta: float | None, cutoff: int, compensate: bool, klyshko_max: int) -> dict:
    """Statistics block of an ``analyze`` report."""
    raw = fock.from_counts(hist)
    if raw.cutoff < cutoff:
        raw = raw.padded(cutoff)
    comp = None
    if compensate:
        if eta is None:
            raise UsageError("--compensate requires --eta")
        comp = fock.compensate_loss(raw, eta, cutoff)
    block = {
        "total_events": hist.total_events,
        "eta": eta,
        "raw": _dist_block(raw),
        "compensated": _dist_block(comp) if comp is not None else None,
        "mean": _safe(fock.mean_photon, raw),
        "fano": _safe(fock.fano, raw),
        "g2": _safe(fock.g_factorial, raw, 2),
        "g3": _safe(fock.g_factorial, raw, 3),
        "klyshko": _klyshko_block(raw, klyshko_max),
        "eta_estimate": _safe(fock.estimate_efficiency, raw),
    }
    if comp is not None:
        block["compensated_stats"] = {
            "mean": _safe(fock.mean_photon, comp),
            "g2": _safe(fock.g_factorial, comp, 2),
            "g3": _safe(fock.g_factorial, comp, 3),
            "klyshko": _klyshko_block(comp, klyshko_max),
            "sum_deviation": -comp.tail_mass,
        }
    return block


def cmd_analyze(args) -> int:
    cfg = _load_config(args.config).get("fock_stats", {})
    text = _read_text(args.input)
    try:
        hist = fock.CountHistogram.from_csv(text)
    except (KeyError, ValueError) as exc:
        raise InputError(f"{args.input}: malformed counts CSV ({exc})") from exc
    eta = _pick(args.eta, cfg, "eta")
    cutoff = int(_pick(args.cutoff, cfg, "cutoff", fock.DEFAULT_CUTOFF))
    compensate = bool(args.compensate or cfg.get("compensate", False))
    klyshko_max = int(_pick(args.klyshko_max, cfg, "klyshko_max", 6))
    stats = photon_statistics(hist, None if eta is None else float(eta), cutoff, compensate, klyshko_max)
    params = {"eta": eta, "cutoff": cutoff, "compensate": compensate, "klyshko_max": klyshko_max}
    manifest = []
    if args.csv_prefix:
        raw_path = f"{args.csv_prefix}_raw.csv"
        _write_text(raw_path, fock.PhotonDistribution(stats["raw"]["probs"], stats["raw"]["sigmas"]).to_csv())
        manifest.append(raw_path)
        if stats["compensated"] is not None:
            comp_path = f"{args.csv_prefix}_compensated.csv"
            comp = stats["compensated"]
            _write_text(comp_path, fock.PhotonDistribution(comp["probs"], comp["sigmas"], True).to_csv())
            manifest.append(comp_path)
    manifest.append(str(args.out))
    meta = {
        "config_hash": report.config_hash({"params": params, "input_sha256": report.file_digest(args.input)}),
        "seed": None,
        "versions": report.versions(),
        "input": str(args.input),
        "label": args.label if args.label is not None else Path(args.input).stem,
        "params": params,
    }
    bundle = report.ReportBundle("analyze", meta, photon_statistics=stats, modes=None, manifest=manifest)
    try:
        report.write_report(bundle, args.out)
    except OSError as exc:
        raise InputError(f"cannot write {args.out}: {exc.strerror or exc}") from exc
    return EXIT_OK


def _points_from_reports(paths) -> list[modes.CorrelationPoint]:
    pts = []
    for path in paths:
        try:
            rep = report.ReportBundle.from_dict(json.loads(_read_text(path)))
        except (json.JSONDecodeError, KeyError, ValueError) as exc:
            raise InputError(f"{path}: not an analyze report ({exc})") from exc
        stats = rep.photon_statistics or {}
        g2, g3 = stats.get("g2"), stats.get("g3")
        if g2 is None or g3 is None:
            raise PhysicsDomainError(f"{path}: report has no g2/g3 values")
        pts.append(modes.CorrelationPoint(g2["value"], g2["sigma"], g3["value"], g3["sigma"], rep.metadata.get("label", str(path))))
    return pts


def cmd_fit_modes(args) -> int:
    cfg = _load_config(args.config).get("mode_inference", {})
    if bool(args.points) == bool(args.reports):
        raise UsageError("fit-modes needs exactly one of --points or --reports")
    if args.points:
        try:
            pts = modes.points_from_csv(_read_text(args.points))
        except (KeyError, ValueError) as exc:
            raise InputError(f"{args.points}: malformed points CSV ({exc})") from exc
        sources = [str(args.points)]
    else:
        pts = _points_from_reports(args.reports)
        sources = [str(p) for p in args.reports]
    K_max = int(_pick(args.K_max, cfg, "K_max", DEFAULT_K_MAX))
    rec = modes.reconstruct_modes(pts, K_max=K_max)
    manifest = []
    if args.csv:
        _write_text(args.csv, rec.to_csv())
        manifest.append(str(args.csv))
    manifest.append(str(args.out))
    block = rec.to_dict()
    block["points"] = [p.to_dict() for p in pts]
    meta = {
        "config_hash": report.config_hash({"K_max": K_max, "points": block["points"]}),
        "seed": None,
        "versions": report.versions(),
        "sources": sources,
    }
    bundle = report.ReportBundle("fit-modes", meta, modes=block, manifest=manifest)
    try:
        report.write_report(bundle, args.out)
    except OSError as exc:
        raise InputError(f"cannot write {args.out}: {exc.strerror or exc}") from exc
    return EXIT_OK


def cmd_spectrum(args) -> int:
    if args.config is not None:
        raw_cfg = _load_config(args.config)
        try:
            scfg = jsa.SpectrumConfig.from_dict(raw_cfg, Path(args.config).parent)
        except OSError as exc:
            raise InputError(f"cannot read Sellmeier file: {exc}") from exc
        except (KeyError, TypeError) as exc:
            raise UsageError(f"bad jsa_spectrum config: {exc}") from exc
    else:
        scfg = jsa.default_config()
        raw_cfg = {}
    if args.grid_n is not None:
        scfg = jsa.SpectrumConfig(scfg.crystal, scfg.pump, scfg.grid_lambda_nm, args.grid_n, scfg.sellmeier)
    amp = scfg.build()
    spec = jsa.marginal_spectrum(amp)
    sch = jsa.schmidt_decompose(amp, args.k_keep)
    _write_text(args.out, jsa.spectrum_to_csv(spec))
    manifest = [str(args.out)]
    lam_path = args.lambdas or str(Path(args.out).with_suffix("")) + "_lambdas.csv"
    _write_text(lam_path, jsa.lambdas_to_csv(sch.lambdas))
    manifest.append(lam_path)
    try:
        thermal = jsa.fit_thermal_mu(sch.lambdas)
        thermal_block = {"mu": thermal.mu, "residual": thermal.residual}
    except PhysicsDomainError:
        thermal_block = None
    rep_path = args.report or str(Path(args.out).with_suffix(".json"))
    manifest.append(rep_path)
    block = {
        "fwhm_nm": spec.fwhm_nm,
        "fwhm_defined": spec.fwhm_defined,
        "center_nm": float(jsa.nm_from_omega(spec.center_omega)),
        "center_offset_steps": (spec.center_omega - scfg.crystal.omega0) / amp.step,
        "grid_step_rad_s": amp.step,
        "grid_n": int(amp.omega.size),
        "min_lobe_steps": amp.meta.get("min_lobe_steps"),
        "schmidt_number": sch.schmidt_number,
        "lambda_sum_sq": float(np.sum(sch.lambdas**2)),
        "thermal_fit": thermal_block,
    }
    meta = {
        "config_hash": report.config_hash(raw_cfg),
        "seed": None,
        "versions": report.versions(),
        "crystal": vars(scfg.crystal),
        "pump": vars(scfg.pump),
        "sellmeier": scfg.coefficients().name,
    }
    bundle = report.ReportBundle("spectrum", meta, spectrum=block, manifest=manifest)
    try:
        report.write_report(bundle, rep_path)
    except OSError as exc:
        raise InputError(f"cannot write {rep_path}: {exc.strerror or exc}") from exc
    print(f"fwhm_nm={spec.fwhm_nm:.2f} schmidt_number={sch.schmidt_number:.2f}")
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="broadsqueeze", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="sample photon counts (and optionally TES waveforms)")
    s.add_argument("--config")
    s.add_argument("--mu", type=float)
    s.add_argument("--B", type=float)
    s.add_argument("--K-max", dest="K_max", type=int)
    s.add_argument("--r-list", help="comma-separated explicit squeezing parameters")
    s.add_argument("--eta", type=float)
    s.add_argument("--events", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--threads", type=int)
    s.add_argument("--samples-per-record", type=int)
    s.add_argument("--photon-energy", type=float)
    s.add_argument("--resolution", type=float, help="amplitude-noise FWHM in eV")
    s.add_argument("--out", help="counts CSV (n,count)")
    s.add_argument("--waveforms", help="TESW binary output")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("pulse", help="TES waveforms -> photon-number counts")
    s.add_argument("input")
    s.add_argument("--config")
    s.add_argument("--out", required=True, help="counts CSV")
    s.add_argument("--peaks", help="peak table CSV")
    s.add_argument("--heights", help="pulse-height histogram CSV")
    s.add_argument("--max-peaks", type=int)
    s.add_argument("--photon-energy", type=float)
    s.add_argument("--baseline-samples", type=int)
    s.add_argument("--filter-width", type=int)
    s.set_defaults(func=cmd_pulse)

    s = sub.add_parser("analyze", help="photon statistics report from a counts CSV")
    s.add_argument("input")
    s.add_argument("--config")
    s.add_argument("--eta", type=float)
    s.add_argument("--cutoff", type=int)
    s.add_argument("--compensate", action="store_true")
    s.add_argument("--klyshko-max", type=int)
    s.add_argument("--label")
    s.add_argument("--csv-prefix", help="write <prefix>_raw.csv and <prefix>_compensated.csv")
    s.add_argument("--out", required=True, help="report JSON")
    s.set_defaults(func=cmd_analyze)

    s = sub.add_parser("fit-modes", help="recover mu, B and r_k from (g2, g3) points")
    s.add_argument("--config")
    s.add_argument("--points", help="points CSV")
    s.add_argument("--reports", nargs="+", help="analyze report JSON files")
    s.add_argument("--K-max", dest="K_max", type=int)
    s.add_argument("--csv", help="mode table CSV")
    s.add_argument("--out", required=True, help="report JSON")
    s.set_defaults(func=cmd_fit_modes)

    s = sub.add_parser("spectrum", help="SPDC marginal spectrum and Schmidt weights")
    s.add_argument("--config")
    s.add_argument("--grid-n", type=int)
    s.add_argument("--k-keep", type=int)
    s.add_argument("--out", required=True, help="spectrum CSV")
    s.add_argument("--lambdas", help="Schmidt weights CSV")
    s.add_argument("--report", help="summary JSON (default: <out>.json)")
    s.set_defaults(func=cmd_spectrum)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (PhysicsDomainError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except (ValueError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

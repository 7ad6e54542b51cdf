"""Command-line front end.

Subcommands::

    uavcorridor eval                  single-point analytic coverages
    uavcorridor sweep                 tau / N / (R, h) sweeps to CSV
    uavcorridor mc                    Monte-Carlo estimates (and raw samples)
    uavcorridor calibrate-thresholds  thresholds hitting target coverages

Exit codes: 0 ok, 1 usage or configuration error, 2 numeric failure,
3 sweep finished with failed rows.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import hashlib
import json
import sys
import warnings
from pathlib import Path
from typing import Optional

from . import __version__, analysis, experiments, montecarlo
from .model import ConfigError, NetworkConfig, dbm_to_watt
from .numerics import EULER, TALBOT

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_DEGRADED = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage; 2 is reserved for numeric failures
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# flag name -> (config field, type, help)
_OVERRIDES = [
    ("--n-uavs", "n_uavs", int, "number of UAVs N"),
    ("--altitude", "altitude_m", float, "corridor altitude h [m]"),
    ("--radius", "radius_m", float, "corridor half-length R [m]"),
    ("--alpha", "alpha", float, "path-loss exponent"),
    ("--carrier-hz", "carrier_hz", float, "carrier frequency [Hz]"),
    ("--nakagami-m", "nakagami_m", int, "Nakagami m of the links (integer)"),
    ("--interferer-m", "interferer_m", int,
     "Nakagami m of the interfering links (default: same as --nakagami-m)"),
    ("--shadow-q", "shadow_q", float, "inverse-gamma shadowing shape q"),
    ("--shadow-gamma", "shadow_gamma", float,
     "inverse-gamma shadowing scale (default q - 1, unit mean)"),
    ("--tx-power-w", "tx_power_w", float, "UAV transmit power [W]"),
    ("--eta", "rf_dc_eff", float, "RF-to-DC conversion efficiency in (0, 1)"),
    ("--slot", "slot_s", float, "slot duration T [s]"),
    ("--tau", "tau", float, "fraction of the slot spent harvesting, in [0, 1]"),
    ("--noise-w", "noise_w", float, "noise power [W]"),
    ("--gamma-h", "energy_threshold_j", float, "energy threshold [J]"),
    ("--gamma-c", "sinr_threshold", float, "SINR threshold (linear)"),
]


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path,
                   help="JSON file with flat NetworkConfig keys, a run manifest, "
                        "or any CSV written by this tool (its config echo is used)")
    p.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    p.add_argument("--threads", type=int, default=1,
                   help="maximum worker threads (default 1)")
    p.add_argument("--out-dir", type=Path, help="directory for output files")
    g = p.add_argument_group("configuration overrides (flags win over --config)")
    for flag, dest, typ, text in _OVERRIDES:
        g.add_argument(flag, dest=dest, type=typ, default=None, help=text)
    g.add_argument("--tx-power-dbm", type=float, default=None,
                   help="UAV transmit power [dBm], alternative to --tx-power-w")
    g.add_argument("--noise-dbm", type=float, default=None,
                   help="noise power [dBm], alternative to --noise-w")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="uavcorridor",
                     description="Energy, SINR and joint coverage of an RF-powered "
                                 "receiver under a UAV corridor.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("eval", help="analytic coverages at one configuration")
    _add_common(p)
    p.add_argument("--inversion", choices=["talbot", "euler"], default="talbot",
                   help="Laplace inversion used for the exact energy coverage")
    p.add_argument("--json", action="store_true", help="print JSON instead of text")

    p = sub.add_parser("sweep", help="parameter sweep written as CSV")
    _add_common(p)
    p.add_argument("--spec", type=Path,
                   help="JSON sweep spec (keys: variable, grid, h_grid, "
                        "fixed_overrides, tracks, mc_slots, seed; optional config)")
    p.add_argument("--variable", choices=[v.value for v in experiments.SweepVariable],
                   help="swept parameter (overrides the spec file)")
    p.add_argument("--grid", type=float, nargs="+",
                   help="grid values (tau, N, or R for grid_rh)")
    p.add_argument("--h-grid", type=float, nargs="+", help="altitudes for grid_rh [m]")
    p.add_argument("--mc", action="store_true", help="also run the Monte-Carlo track")
    p.add_argument("--no-analytic", action="store_true",
                   help="skip the analytic track")
    p.add_argument("--mc-slots", type=int, help="slots per Monte-Carlo point")

    p = sub.add_parser("mc", help="Monte-Carlo estimates of the three coverages")
    _add_common(p)
    p.add_argument("--slots", type=int, default=10 ** 6,
                   help="number of simulated slots (default 1e6)")
    p.add_argument("--r-pin", type=float, default=None,
                   help="pin the serving distance [m] (conditional estimate)")
    p.add_argument("--dump-samples", action="store_true",
                   help="also write one row per slot to samples.csv")

    p = sub.add_parser("calibrate-thresholds",
                       help="thresholds giving target energy and SINR coverage")
    _add_common(p)
    p.add_argument("--target-h", type=float, default=0.8,
                   help="target exact energy coverage (default 0.8)")
    p.add_argument("--target-c", type=float, default=0.6,
                   help="target SINR coverage (default 0.6)")
    return parser


# --------------------------------------------------------------------------
# configuration
# --------------------------------------------------------------------------

def load_config_source(path: Path) -> dict:
    """Flat config mapping from a JSON config, a manifest, or a CSV echo."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc.strerror}")
    try:
        data = json.loads(text)
    except json.JSONDecodeError:
        try:
            return experiments.read_config_echo(path).to_dict()
        except ValueError:
            raise UsageError(f"{path}: neither JSON nor a CSV with a config echo")
    if not isinstance(data, dict):
        raise UsageError(f"{path}: top level must be a JSON object")
    if isinstance(data.get("config"), dict):
        return dict(data["config"])
    return data


def resolve_config(args, base: Optional[dict] = None) -> NetworkConfig:
    """Config file (or ``base``) first, then flag overrides.

    Overrides go through :meth:`NetworkConfig.replace`, so changing q or m
    on the command line also moves the derived shadowing scale and
    interferer m when the file left them at their defaults.
    """
    values = dict(base or {})
    if getattr(args, "config", None) is not None:
        values.update(load_config_source(args.config))
    overrides = {}
    for _, dest, _, _ in _OVERRIDES:
        v = getattr(args, dest, None)
        if v is not None:
            overrides[dest] = v
    if getattr(args, "tx_power_dbm", None) is not None:
        if "tx_power_w" in overrides:
            raise UsageError("give either --tx-power-w or --tx-power-dbm, not both")
        overrides["tx_power_w"] = float(dbm_to_watt(args.tx_power_dbm))
    if getattr(args, "noise_dbm", None) is not None:
        if "noise_w" in overrides:
            raise UsageError("give either --noise-w or --noise-dbm, not both")
        overrides["noise_w"] = float(dbm_to_watt(args.noise_dbm))
    return NetworkConfig.from_dict(values).replace(**overrides)


# --------------------------------------------------------------------------
# outputs
# --------------------------------------------------------------------------

def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def write_manifest(out_dir: Path, command: str, config: NetworkConfig,
                   seed: Optional[int], started: str, outputs: list,
                   extra: Optional[dict] = None) -> Path:
    """``manifest.json`` listing every output with its checksum."""
    manifest = {
        "tool": "uavcorridor",
        "version": __version__,
        "command": command,
        "argv": sys.argv[1:],
        "config": config.to_dict(),
        "seed": seed,
        "started_utc": started,
        "finished_utc": _now(),
        "outputs": {p.name: {"sha256": _sha256(p), "bytes": p.stat().st_size}
                    for p in outputs},
    }
    if extra:
        manifest.update(extra)
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def verify_manifest(path: Path) -> list:
    """Names of outputs that are missing or whose checksum changed."""
    path = Path(path)
    manifest = json.loads(path.read_text())
    bad = []
    for name, meta in manifest["outputs"].items():
        f = path.parent / name
        if not f.exists() or _sha256(f) != meta["sha256"]:
            bad.append(name)
    return bad


def _write_config(out_dir: Path, config: NetworkConfig) -> Path:
    path = out_dir / "config.json"
    path.write_text(json.dumps(config.to_dict(), indent=2, sort_keys=True) + "\n")
    return path


def _out_dir(args) -> Path:
    out = args.out_dir or Path(".")
    out.mkdir(parents=True, exist_ok=True)
    return out


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------

def cmd_eval(args) -> int:
    config = resolve_config(args)
    inversion = EULER if args.inversion == "euler" else TALBOT
    results, failed = {}, {}
    jobs = [
        ("p_h_exact", lambda: analysis.energy_coverage_exact(config, inversion)),
        ("p_h_approx", lambda: analysis.energy_coverage_approx(config)),
        ("p_c", lambda: analysis.comm_coverage(config)),
        ("p_jc", lambda: analysis.joint_coverage(config)),
    ]
    for name, job in jobs:
        try:
            with warnings.catch_warnings(record=True) as caught:
                warnings.simplefilter("always")
                results[name] = job()
            for w in caught:
                print(f"warning ({name}): {w.message}", file=sys.stderr)
        except (ArithmeticError, analysis.DegenerateModelError) as exc:
            failed[name] = f"{type(exc).__module__}.{type(exc).__name__}: {exc}"
    if args.json:
        payload = {k: {"value": r.value, "method": r.method.value}
                   for k, r in results.items()}
        payload.update({k: {"value": None, "error": e} for k, e in failed.items()})
        print(json.dumps(payload, indent=2))
    else:
        for name, _ in jobs:
            if name in results:
                r = results[name]
                print(f"{name:<11} {r.value:.6f}  [{r.method.value}]")
            else:
                print(f"{name:<11} failed: {failed[name]}")
    if args.out_dir is not None:
        started = _now()
        out = _out_dir(args)
        path = out / "eval.csv"
        with open(path, "w", newline="") as fh:
            for line in experiments.header_lines(config, None):
                fh.write(line + "\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["quantity", "value", "method", "error"])
            for name, _ in jobs:
                if name in results:
                    w.writerow([name, f"{results[name].value:.12g}",
                                results[name].method.value, ""])
                else:
                    w.writerow([name, "nan", "", failed[name]])
        cfg = _write_config(out, config)
        write_manifest(out, "eval", config, None, started, [path, cfg])
    return EXIT_NUMERIC if failed else EXIT_OK


def _sweep_spec(args) -> tuple:
    data, base = {}, {}
    if args.spec is not None:
        try:
            data = json.loads(args.spec.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read sweep spec {args.spec}: {exc}")
        base = data.pop("config", {}) or {}
    if args.variable:
        data["variable"] = args.variable
    if "variable" not in data:
        raise UsageError("sweep needs --variable or a spec file with 'variable'")
    if args.grid:
        data["grid"] = args.grid
    if args.h_grid:
        data["h_grid"] = args.h_grid
    if args.mc_slots is not None:
        data["mc_slots"] = args.mc_slots
    tracks = set(data.get("tracks", ["analytic"]))
    if args.mc:
        tracks.add("monte_carlo")
    if args.no_analytic:
        tracks.discard("analytic")
    if not tracks:
        raise UsageError("no tracks left to run")
    data["tracks"] = sorted(tracks)
    data["seed"] = args.seed
    if data["variable"] == experiments.SweepVariable.N_UAVS.value and "grid" in data:
        data["grid"] = [int(round(n)) for n in data["grid"]]
    try:
        spec = experiments.SweepSpec.from_dict(data)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"invalid sweep spec: {exc}")
    return spec, base


def cmd_sweep(args) -> int:
    spec, base = _sweep_spec(args)
    config = resolve_config(args, base)
    # validate the overrides before doing any work
    config.replace(**spec.fixed_overrides)
    started = _now()
    result = experiments.run_sweep(spec, config, threads=args.threads)
    out = _out_dir(args)
    outputs = []
    path = out / "sweep.csv"
    experiments.write_sweep_csv(result, path)
    outputs.append(path)
    if spec.variable is experiments.SweepVariable.GRID_RH:
        for col, name in (("p_jc", "heatmap_p_jc.dat"), ("mc_p_jc", "heatmap_mc_p_jc.dat")):
            if col == "p_jc" and experiments.Track.ANALYTIC not in spec.tracks:
                continue
            if col == "mc_p_jc" and experiments.Track.MONTE_CARLO not in spec.tracks:
                continue
            heat = result.column(col).reshape(len(spec.h_grid), len(spec.grid))
            path = out / name
            experiments.write_heatmap_matrix(path, spec.grid, spec.h_grid, heat)
            outputs.append(path)
    outputs.append(_write_config(out, result.config))
    optima = {k: {"point": o.point, "value": o.value, "runner_up": o.runner_up,
                  "runner_up_value": o.runner_up_value, "note": o.note}
              for k, o in result.optima.items()}
    write_manifest(out, "sweep", result.config, spec.seed, started, outputs,
                   {"sweep": spec.to_dict(), "optima": optima,
                    "failed_rows": sum(bool(r.error) for r in result.rows)})
    print(f"wrote {len(result.rows)} rows to {out / 'sweep.csv'}")
    for k, o in result.optima.items():
        print(f"argmax {k}: {o.point} = {o.value:.6f} (gap {o.gap:.3g})")
    if result.degraded:
        n_bad = sum(bool(r.error) for r in result.rows)
        print(f"{n_bad} of {len(result.rows)} rows failed; see the error column",
              file=sys.stderr)
        return EXIT_DEGRADED
    return EXIT_OK


def cmd_mc(args) -> int:
    config = resolve_config(args)
    if args.slots < 1:
        raise UsageError("--slots must be >= 1")
    started = _now()
    samples = montecarlo.sample_slots(config, args.slots, args.seed,
                                      args.threads, r_pin=args.r_pin)
    est = montecarlo.estimate(samples, config.energy_threshold_j,
                              config.sinr_threshold, args.seed)
    print(f"p_h   {est.p_h:.6f} +- {est.halfwidth_h:.6f}")
    print(f"p_c   {est.p_c:.6f} +- {est.halfwidth_c:.6f}")
    print(f"p_jc  {est.p_jc:.6f} +- {est.halfwidth_jc:.6f}")
    out = _out_dir(args)
    path = out / "mc.csv"
    with open(path, "w", newline="") as fh:
        extra = {"n_slots": args.slots, "r_pin": args.r_pin}
        for line in experiments.header_lines(config, args.seed, extra):
            fh.write(line + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["metric", "estimate", "halfwidth_95"])
        for name in ("p_h", "p_c", "p_jc"):
            w.writerow([name, f"{getattr(est, name):.12g}",
                        f"{est.halfwidth_95[name]:.12g}"])
    outputs = [path]
    if args.dump_samples:
        path = out / "samples.csv"
        montecarlo.write_samples_csv(path, samples, config)
        outputs.append(path)
    outputs.append(_write_config(out, config))
    write_manifest(out, "mc", config, args.seed, started, outputs,
                   {"n_slots": args.slots, "r_pin": args.r_pin})
    return EXIT_OK


def cmd_calibrate(args) -> int:
    config = resolve_config(args)
    g_h, g_c = experiments.calibrate_thresholds(config, args.target_h, args.target_c)
    print(f"energy_threshold_j {g_h:.6g}")
    print(f"sinr_threshold     {g_c:.6g}")
    if args.out_dir is not None:
        started = _now()
        out = _out_dir(args)
        calibrated = config.replace(energy_threshold_j=g_h, sinr_threshold=g_c)
        cfg = _write_config(out, calibrated)
        write_manifest(out, "calibrate-thresholds", calibrated, None, started, [cfg],
                       {"targets": {"p_h": args.target_h, "p_c": args.target_c}})
    return EXIT_OK


_COMMANDS = {"eval": cmd_eval, "sweep": cmd_sweep, "mc": cmd_mc,
             "calibrate-thresholds": cmd_calibrate}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.threads < 1:
        parser.error("--threads must be >= 1")
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"configuration error in field '{exc.field}': {exc}", file=sys.stderr)
        return EXIT_USAGE
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ArithmeticError, analysis.DegenerateModelError) as exc:
        print(f"numeric failure in {type(exc).__module__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        # domain errors raised below the config layer, e.g. r_pin out of support
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

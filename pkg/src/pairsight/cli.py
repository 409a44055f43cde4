"""Command-line entry point: ``pairsight simulate | coincide | certify | sweep``."""
from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

import numpy as np

from . import io
from .certification import SweepConfig, certify_data, run_sweep
from .coincidence import (accumulate_pass, iter_accidentals_frames, iter_accidentals_stream,
                          iter_coincidences_frames, iter_coincidences_stream, projection_spec,
                          subtract_projection)
from .config import load_config, parse_delta_ts
from .core import Arm, AxisKind, Basis, EventStream, field_of_view
from .detector import detect_events, detect_frames, frames_for_duration
from .errors import PairsightError
from .results import emit_results, fmt, write_projection_csv, write_sweep_csv, write_table_csv
from .spdc import emit_truth_stream

log = logging.getLogger("pairsight")

_PROJECTION = {Basis.POSITION: AxisKind.MINUS, Basis.MOMENTUM: AxisKind.SUM}


def _config(args) -> SweepConfig:
    cfg = load_config(args.config)
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if getattr(args, "delta_t", None):
        changes["delta_ts"] = parse_delta_ts(args.delta_t)
    if getattr(args, "duration", None) is not None:
        changes["duration"] = args.duration
    return dataclasses.replace(cfg, **changes) if changes else cfg


def _bases(choice: str):
    return [Basis.POSITION, Basis.MOMENTUM] if choice == "both" else [Basis(choice)]


def cmd_simulate(args) -> int:
    cfg = _config(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    seeds = dict(zip((Basis.POSITION, Basis.MOMENTUM), np.random.SeedSequence(cfg.seed).spawn(2)))
    rows = []
    for basis in _bases(args.basis):
        s_truth, s_det = seeds[basis].spawn(2)
        fov = field_of_view(cfg.geometry, cfg.calibration, basis, Arm.SIGNAL)
        truth = emit_truth_stream(cfg.state, basis, cfg.duration, s_truth, fov=fov)
        rng = np.random.default_rng(s_det)
        if cfg.camera == "event":
            data = detect_events(truth, cfg.geometry, cfg.calibration, rng)
            path = out / f"events_{basis.value}.{'bin' if args.binary else 'txt'}"
            io.write_events(data, path, binary=args.binary)
            exposure = ""
        else:
            exposure = float(cfg.delta_ts[0])
            n = frames_for_duration(cfg.duration, exposure, cfg.readout_gap)
            data = detect_frames(truth, cfg.geometry, cfg.calibration, exposure, n, rng, cfg.readout_gap)
            path = out / f"frames_{basis.value}.txt"
            io.write_frames(data, path)
        st = data.stats
        rows.append([basis.value, cfg.camera, exposure, st.truth, st.efficiency_dropped, st.clipped,
                     st.dead_time_dropped, st.kept, path.name])
        log.info("wrote %s (%d records)", path, st.kept)
    write_table_csv(out / "simulate.csv", ["basis", "camera", "exposure_ns", "emitted", "efficiency_dropped",
                                           "clipped", "dead_time_dropped", "kept", "file"], rows)
    return 0


def _read_any(path):
    with open(path, "rb") as fh:
        head = fh.read(len(io.FRAMES_MAGIC))
    if head == io.FRAMES_MAGIC.encode():
        return io.read_frames(path)
    return io.read_events(path, resort=True)


def cmd_coincide(args) -> int:
    cfg = _config(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    data = _read_any(args.input)
    basis = Basis(args.basis)
    kind = _PROJECTION[basis]
    spec = projection_spec(cfg.calibration, basis, kind, cfg.projection_half)
    rows = []
    if isinstance(data, EventStream):
        windows = sorted(cfg.delta_ts)
        for i, dt in enumerate(windows):
            raw = accumulate_pass(iter_coincidences_stream(data, dt, cfg.calibration, basis), kind, spec)
            acc = accumulate_pass(iter_accidentals_stream(data, dt, cfg.shift_for(dt), cfg.calibration,
                                                          basis), kind, spec)
            rows.append([dt, basis.value, raw.n_pairs, acc.n_pairs])
            if i == len(windows) - 1:
                final = raw, acc, 1.0
    else:
        raw = accumulate_pass(iter_coincidences_frames(data, cfg.calibration, basis), kind, spec)
        acc = accumulate_pass(iter_accidentals_frames(data, cfg.calibration, basis), kind, spec)
        norm = data.n_frames / (data.n_frames - 1)
        rows.append([data.exposure, basis.value, raw.n_pairs, acc.n_pairs * norm])
        final = raw, acc, norm
    write_table_csv(out / "coincide.csv", ["delta_t_ns", "basis", "pairs", "accidental_est"], rows)
    raw, acc, norm = final
    write_projection_csv(raw.projection, out / "projection_raw.csv")
    write_projection_csv(subtract_projection(raw.projection, acc.projection, norm),
                         out / "projection_subtracted.csv")
    return 0


def cmd_certify(args) -> int:
    cfg = _config(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if (args.position is None) != (args.momentum is None):
        raise PairsightError("give both --position and --momentum, or neither")
    if args.position is not None:
        result = certify_data(cfg, _read_any(args.position), _read_any(args.momentum))
    else:
        result = run_sweep(cfg)
    write_sweep_csv(result.rows, out / "certify.csv", cfg.axis.value)
    _report(result)
    return 0


def cmd_sweep(args) -> int:
    cfg = _config(args)
    out = Path(args.out)
    result = run_sweep(cfg)
    emit_results(result, out, "sweep", cfg.axis.value)
    write_table_csv(out / "sweep_summary.csv", ["camera", "duration_s", "seed", "entropy_slope_per_efold"],
                    [[cfg.camera, cfg.duration, cfg.seed, result.entropy_slope]])
    _report(result)
    return 0


def _report(result) -> None:
    for r in result.rows:
        if r.error:
            log.warning("delta_t=%s ns failed: %s", fmt(r.delta_t), r.error)
        else:
            log.info("delta_t=%s ns  raw %s  subtracted %s  variance %s  entropy %s",
                     fmt(r.delta_t), fmt(r.epr_raw.product), fmt(r.epr_subtracted.product),
                     fmt(r.epr_variance.product), fmt(r.entropy.sum))


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI configuration file")
    common.add_argument("--seed", type=int, help="override the configured seed")
    common.add_argument("--out", default=".", help="output directory (default: current)")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="pairsight",
                                description="Photon-pair correlation analysis and entanglement certification.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", parents=[common], help="simulate a source and write detector files")
    s.add_argument("--basis", choices=["position", "momentum", "both"], default="both")
    s.add_argument("--duration", type=float, help="seconds per basis")
    s.add_argument("--delta-t", help="frame exposure in ns (frame cameras)")
    s.add_argument("--binary", action="store_true", help="write the binary event container")
    s.set_defaults(func=cmd_simulate)

    c = sub.add_parser("coincide", parents=[common], help="pair counts and projections of one file")
    c.add_argument("input", help="event or frame file")
    c.add_argument("--basis", choices=["position", "momentum"], required=True)
    c.add_argument("--delta-t", help="comma-separated windows in ns (event files)")
    c.set_defaults(func=cmd_coincide)

    e = sub.add_parser("certify", parents=[common], help="EPR and entropic verdicts from files or a simulation")
    e.add_argument("--position", help="position-basis event or frame file")
    e.add_argument("--momentum", help="momentum-basis event or frame file")
    e.add_argument("--delta-t", help="comma-separated windows in ns")
    e.add_argument("--duration", type=float, help="seconds per basis when simulating")
    e.set_defaults(func=cmd_certify)

    w = sub.add_parser("sweep", parents=[common], help="full window sweep with CSV and SVG output")
    w.add_argument("--delta-t", help="comma-separated windows in ns")
    w.add_argument("--duration", type=float, help="seconds per basis")
    w.set_defaults(func=cmd_sweep)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (PairsightError, OSError) as exc:
        print(f"pairsight {args.command}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

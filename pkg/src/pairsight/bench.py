"""Throughput harness for the streaming coincidence join.

``python -m pairsight.bench --events 10000000`` writes a binary event file,
reads it back and times the join single-threaded.
"""
from __future__ import annotations

import argparse
import tempfile
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from . import io
from .coincidence import accumulate_projection, iter_coincidences_stream, projection_spec
from .core import Arm, AxisKind, Basis, EventStream, tpx3cam, tpx3cam_calibration


def synthetic_stream(n_events: int, rate: float = 1e7, pair_fraction: float = 0.5,
                     seed=0) -> EventStream:
    """Tpx3Cam-like stream of ``n_events`` events at ``rate`` events/s.

    A share ``pair_fraction`` of events comes in signal/idler pairs sharing a
    timestamp up to a few ticks of jitter; the rest are unpaired singles
    spread over both arms.  Pixels are uniform within each arm.
    """
    geom = tpx3cam()
    rng = np.random.default_rng(seed)
    n_pairs = int(n_events * pair_fraction) // 2
    n_single = n_events - 2 * n_pairs
    span_ticks = n_events / rate * 1e9 / geom.time_quantum
    t_pair = rng.integers(0, int(span_ticks), n_pairs)
    t = np.concatenate([t_pair, t_pair + rng.integers(-3, 4, n_pairs),
                        rng.integers(0, int(span_ticks), n_single)])
    t = np.maximum(t, 0)
    arm = np.concatenate([np.full(n_pairs, Arm.SIGNAL), np.full(n_pairs, Arm.IDLER),
                          rng.integers(0, 2, n_single)]).astype(np.int8)
    half = geom.width // 2
    px = rng.integers(0, half, n_events) + half * arm.astype(np.int64)
    py = rng.integers(0, geom.height, n_events)
    order = np.argsort(t, kind="stable")
    return EventStream(t[order], px[order], py[order], arm[order], geom.width, geom.height,
                       geom.time_quantum)


@dataclass
class BenchResult:
    n_events: int
    n_pairs: int
    read_seconds: float
    join_seconds: float
    histogram_seconds: Optional[float] = None

    @property
    def join_rate(self) -> float:
        return self.n_events / self.join_seconds

    @property
    def read_rate(self) -> float:
        return self.n_events / self.read_seconds


def run_bench(path, delta_t: float = 6.0, basis: Basis = Basis.MOMENTUM,
              histogram: bool = False, repeat: int = 1) -> BenchResult:
    """Read ``path`` and time the join; the best of ``repeat`` runs is kept."""
    t0 = time.perf_counter()
    events = io.read_events(path)
    read_s = time.perf_counter() - t0
    cal = tpx3cam_calibration()
    best = np.inf
    n_pairs = 0
    for _ in range(repeat):
        t0 = time.perf_counter()
        n_pairs = sum(len(b) for b in iter_coincidences_stream(events, delta_t, cal, basis))
        best = min(best, time.perf_counter() - t0)
    hist_s = None
    if histogram:
        spec = projection_spec(cal, basis, AxisKind.SUM)
        t0 = time.perf_counter()
        accumulate_projection(iter_coincidences_stream(events, delta_t, cal, basis), AxisKind.SUM, spec)
        hist_s = time.perf_counter() - t0
    return BenchResult(len(events), n_pairs, read_s, best, hist_s)


def main(argv=None) -> int:
    p = argparse.ArgumentParser(prog="python -m pairsight.bench", description=__doc__)
    p.add_argument("--events", type=int, default=10_000_000)
    p.add_argument("--delta-t", type=float, default=6.0)
    p.add_argument("--repeat", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--file", help="existing event file (otherwise a synthetic one is written)")
    args = p.parse_args(argv)
    with tempfile.TemporaryDirectory() as tmp:
        path = args.file
        if path is None:
            path = Path(tmp) / "bench.bin"
            io.write_events(synthetic_stream(args.events, seed=args.seed), path, binary=True)
        res = run_bench(path, args.delta_t, histogram=True, repeat=args.repeat)
    print(f"events        {res.n_events}")
    print(f"pairs         {res.n_pairs}")
    print(f"read          {res.read_seconds:.3f} s  ({res.read_rate:.3g} events/s)")
    print(f"join          {res.join_seconds:.3f} s  ({res.join_rate:.3g} events/s)")
    print(f"join+hist     {res.histogram_seconds:.3f} s  ({res.n_events / res.histogram_seconds:.3g} events/s)")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())

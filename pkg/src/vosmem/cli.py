"""Command-line front end.

Subcommands: simulate (one episode per seed, per-frame CSV + summary),
sweep (policy-axis tables), bench (per-frame latency/occupancy buckets for
bounded vs unlimited memory), check-metrics (metric oracle equivalence),
and bench-kernels (backend comparison). All outputs are deterministic given
(config, seeds) except wall-time columns.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__, kernels
from .benchmark import format_table, kernel_benchmark
from .config import RunConfig, load_config
from .core import ObjectMask
from .episode import run_episode, seeded_variant, sweep as run_sweep
from .errors import VosmemError
from .metrics import boundary_f
from .oracles import boundary_f_reference, iou_reference
from .quality import mask_iou

FRAMES_SCHEMA = "vosmem-frames-v1"
SUMMARY_SCHEMA = "vosmem-summary-v1"
SWEEP_SCHEMA = "vosmem-sweep-v1"
BENCH_SCHEMA = "vosmem-bench-v1"

FRAMES_HEADER = ["frame", "j", "f", "jf", "bank_size", "decision",
                 "evicted_frame", "wall_ms"]
SUMMARY_HEADER = ["seed", "frames", "mean_j", "mean_f", "mean_jf",
                  "final_bank_size", "quality_flagged", "total_wall_ms"]
SWEEP_HEADER = ["axis", "value", "seed_count", "mean_j", "mean_f", "mean_jf"]
BENCH_HEADER = ["mode", "frames", "bucket_start", "bucket_end", "median_ms",
                "p90_ms", "occupancy_start", "occupancy_end"]


def _fmt(x: float) -> str:
    return f"{x:.10g}"


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _prepare_out(out: str) -> Path:
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    probe = path / ".write_probe"
    probe.write_text("")
    probe.unlink()
    return path


def _manifest(out: Path, command: str, cfg: RunConfig | None, seeds,
              outputs, schemas, extra=None) -> None:
    payload = {
        "tool": "vosmem",
        "version": __version__,
        "command": command,
        "kernel_backend": kernels.active_backend(),
        "config_sha256": cfg.digest if cfg else None,
        "seeds": list(seeds),
        "outputs": sorted(outputs),
        "schemas": schemas,
    }
    if extra:
        payload.update(extra)
    with open(out / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _parse_seeds(raw: str | None, default) -> list[int]:
    if raw is None:
        return list(default)
    parts = [p.strip() for p in raw.split(",") if p.strip()]
    if not parts:
        raise VosmemError("seed list is empty")
    return [int(p) for p in parts]


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    out = _prepare_out(args.out)
    seeds = _parse_seeds(args.seeds, cfg.seeds)
    outputs = []
    summary_rows = []
    for seed in seeds:
        video, policy, scorer = seeded_variant(cfg.video, cfg.policy,
                                               cfg.scorer, seed)
        result = run_episode(video, policy, scorer)
        name = f"frames_seed{seed}.csv"
        rows = [[t, _fmt(result.frame_j[t]), _fmt(result.frame_f[t]),
                 _fmt(result.frame_jf[t]), int(result.occupancy[t]),
                 result.decisions[t], result.evicted[t],
                 f"{result.wall_ms[t]:.3f}"]
                for t in range(len(result.frame_j))]
        _write_csv(out / name, FRAMES_HEADER, rows)
        outputs.append(name)
        summary_rows.append([seed, len(result.frame_j), _fmt(result.mean_j),
                             _fmt(result.mean_f), _fmt(result.mean_jf),
                             int(result.occupancy[-1]),
                             int(result.quality_flagged),
                             f"{result.wall_ms.sum():.3f}"])
        print(f"seed {seed}: J={result.mean_j:.4f} F={result.mean_f:.4f} "
              f"J&F={result.mean_jf:.4f}")
    _write_csv(out / "summary.csv", SUMMARY_HEADER, summary_rows)
    outputs.append("summary.csv")
    _manifest(out, "simulate", cfg, seeds, outputs,
              {"frames": FRAMES_SCHEMA, "summary": SUMMARY_SCHEMA})
    return 0


def cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    out = _prepare_out(args.out)
    seeds = _parse_seeds(args.seeds, cfg.seeds)
    values = [v.strip() for v in args.values.split(",") if v.strip()]
    if not values:
        raise VosmemError("--values must list at least one value")
    rows = run_sweep(cfg.video, args.axis, values, cfg.policy, cfg.scorer,
                     seeds, workers=args.workers)
    table = [[r.axis, r.value, r.seed_count, _fmt(r.mean_j), _fmt(r.mean_f),
              _fmt(r.mean_jf)] for r in rows]
    _write_csv(out / "sweep.csv", SWEEP_HEADER, table)
    _manifest(out, "sweep", cfg, seeds, ["sweep.csv"],
              {"sweep": SWEEP_SCHEMA},
              extra={"axis": args.axis, "values": values})
    for r in rows:
        print(f"{r.axis}={r.value}: J&F={r.mean_jf:.4f} "
              f"(J={r.mean_j:.4f} F={r.mean_f:.4f}, {r.seed_count} seeds)")
    return 0


def cmd_bench(args) -> int:
    cfg = load_config(args.config)
    out = _prepare_out(args.out)
    frame_counts = [int(v) for v in args.frames.split(",") if v.strip()]
    if not frame_counts:
        raise VosmemError("--frames must list at least one frame count")
    for count in frame_counts:
        if count < 100:
            raise VosmemError("frame counts must be >= 100")
    bucket = args.bucket
    rows = []
    for count in frame_counts:
        video = replace(cfg.video, frame_count=count)
        for mode in ("bounded", "unlimited"):
            policy = cfg.policy if mode == "bounded" else \
                replace(cfg.policy, capacity=None, eviction="unlimited")
            result = run_episode(video, policy, cfg.scorer)
            for start in range(0, count, bucket):
                end = min(start + bucket, count)
                window = result.wall_ms[start:end]
                rows.append([mode, count, start, end,
                             f"{float(np.median(window)):.3f}",
                             f"{float(np.percentile(window, 90)):.3f}",
                             int(result.occupancy[start]),
                             int(result.occupancy[end - 1])])
            print(f"{mode} {count} frames: total "
                  f"{result.wall_ms.sum() / 1e3:.2f}s, final occupancy "
                  f"{int(result.occupancy[-1])}")
    _write_csv(out / "bench.csv", BENCH_HEADER, rows)
    _manifest(out, "bench", cfg, cfg.seeds, ["bench.csv"],
              {"bench": BENCH_SCHEMA},
              extra={"frame_counts": frame_counts, "bucket": bucket})
    return 0


def cmd_check_metrics(args) -> int:
    ok, lines = run_metric_check(args.pairs, args.max_size, args.seed)
    for line in lines:
        print(line)
    return 0 if ok else 1


def run_metric_check(pairs: int, max_size: int, seed: int):
    """Compare the fast J/F paths against the brute-force oracles on random
    mask pairs; used by `check-metrics` and the acceptance suite."""
    rng = np.random.default_rng(seed)
    max_f_err = 0.0
    for _ in range(pairs):
        h = int(rng.integers(4, max_size + 1))
        w = int(rng.integers(4, max_size + 1))
        pred = _random_mask(rng, h, w)
        true = _random_mask(rng, h, w)
        j_fast = mask_iou(pred, true)
        j_ref = iou_reference(pred, true)
        if j_fast != j_ref:
            return False, [f"FAIL J: {j_fast!r} != {j_ref!r} on {h}x{w}"]
        tol = int(rng.integers(1, 4))
        f_fast = boundary_f(pred, true, tol)
        f_ref = boundary_f_reference(pred, true, tol)
        err = abs(f_fast - f_ref)
        max_f_err = max(max_f_err, err)
        if err > 1e-12:
            return False, [f"FAIL F: |{f_fast!r} - {f_ref!r}| = {err:g} "
                           f"on {h}x{w} tol {tol}"]
    return True, [f"PASS J: exact match on {pairs} random pairs",
                  f"PASS F: max |err| = {max_f_err:.3g} <= 1e-12 on "
                  f"{pairs} random pairs"]


def _random_mask(rng, h: int, w: int) -> ObjectMask:
    kind = rng.integers(3)
    grid = np.zeros((h, w))
    if kind == 0:  # random blob from a blurred threshold
        grid = (rng.random((h, w)) < 0.35).astype(np.float64)
    elif kind == 1:  # rectangle
        r0, c0 = int(rng.integers(h)), int(rng.integers(w))
        r1, c1 = int(rng.integers(r0, h + 1)), int(rng.integers(c0, w + 1))
        grid[r0:r1, c0:c1] = 1.0
    # kind == 2: empty mask
    return ObjectMask(h, w, grid)


def cmd_bench_kernels(args) -> int:
    rows = kernel_benchmark(repeats=args.repeats)
    print(f"active backend: {kernels.active_backend()} "
          f"(available: {', '.join(kernels.available_backends())})")
    print(format_table(rows))
    if args.out:
        out = _prepare_out(args.out)
        table = [[r.backend, r.query_locations, r.memory_locations,
                  r.key_channels, r.value_channels, f"{r.median_ms:.3f}"]
                 for r in rows]
        _write_csv(out / "kernels.csv",
                   ["backend", "query_locations", "memory_locations",
                    "key_channels", "value_channels", "median_ms"], table)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vosmem",
        description="Quality-gated dynamic memory engine for video object "
                    "segmentation: synthetic-video experiments and checks.")
    parser.add_argument("--version", action="version",
                        version=f"vosmem {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run one episode per seed")
    sim.add_argument("--config", required=True)
    sim.add_argument("--out", required=True)
    sim.add_argument("--seeds", help="comma list; overrides [run] seeds")
    sim.set_defaults(func=cmd_simulate)

    swp = sub.add_parser("sweep", help="sweep one policy axis")
    swp.add_argument("--config", required=True)
    swp.add_argument("--out", required=True)
    swp.add_argument("--axis", required=True,
                     choices=["threshold", "capacity", "interval"])
    swp.add_argument("--values", required=True,
                     help="comma list (capacity accepts 'unlimited')")
    swp.add_argument("--seeds", help="comma list; overrides [run] seeds")
    swp.add_argument("--workers", type=int, default=1)
    swp.set_defaults(func=cmd_sweep)

    ben = sub.add_parser("bench", help="bounded vs unlimited latency buckets")
    ben.add_argument("--config", required=True)
    ben.add_argument("--out", required=True)
    ben.add_argument("--frames", required=True,
                     help="comma list of frame counts (each >= 100)")
    ben.add_argument("--bucket", type=int, default=100)
    ben.set_defaults(func=cmd_bench)

    chk = sub.add_parser("check-metrics",
                         help="metric oracle equivalence check")
    chk.add_argument("--pairs", type=int, default=500)
    chk.add_argument("--max-size", type=int, default=32)
    chk.add_argument("--seed", type=int, default=0)
    chk.set_defaults(func=cmd_check_metrics)

    bk = sub.add_parser("bench-kernels",
                        help="compare numpy and native kernel backends")
    bk.add_argument("--repeats", type=int, default=5)
    bk.add_argument("--out")
    bk.set_defaults(func=cmd_bench_kernels)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except VosmemError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

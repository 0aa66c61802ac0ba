"""Micro-benchmark comparing the kernel backends on read-path shapes."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import kernels

# (query locations, memory locations, key channels, value channels):
# roughly a 12x12 grid against growing bank occupancies.
DEFAULT_SHAPES = (
    (144, 1440, 5, 7),
    (144, 3600, 5, 7),
    (256, 6400, 5, 7),
    (256, 12800, 5, 7),
)


@dataclass(frozen=True)
class KernelTiming:
    backend: str
    query_locations: int
    memory_locations: int
    key_channels: int
    value_channels: int
    median_ms: float


def kernel_benchmark(shapes=DEFAULT_SHAPES, repeats: int = 5,
                     seed: int = 0) -> list[KernelTiming]:
    """Median wall time of the fused read per backend and shape."""
    rows = []
    restore = kernels.active_backend()
    try:
        for backend in kernels.available_backends():
            kernels.set_backend(backend)
            for lq, lm, ck, cv in shapes:
                rng = np.random.default_rng(seed)
                qk = rng.uniform(0.0, 1.0, (lq, ck))
                mk = rng.uniform(0.0, 1.0, (lm, ck))
                mv = rng.uniform(0.0, 1.0, (lm, cv))
                kernels.read(qk, mk, mv, 24.0, "softmax")  # warm-up
                samples = []
                for _ in range(repeats):
                    start = time.perf_counter()
                    kernels.read(qk, mk, mv, 24.0, "softmax")
                    samples.append((time.perf_counter() - start) * 1e3)
                rows.append(KernelTiming(
                    backend=backend, query_locations=lq, memory_locations=lm,
                    key_channels=ck, value_channels=cv,
                    median_ms=float(np.median(samples))))
    finally:
        kernels.set_backend(restore)
    return rows


def format_table(rows: list[KernelTiming]) -> str:
    lines = [f"{'backend':8s} {'Lq':>6s} {'Lm':>7s} {'Ck':>3s} {'Cv':>3s} "
             f"{'median_ms':>10s}"]
    for r in rows:
        lines.append(f"{r.backend:8s} {r.query_locations:6d} "
                     f"{r.memory_locations:7d} {r.key_channels:3d} "
                     f"{r.value_channels:3d} {r.median_ms:10.3f}")
    return "\n".join(lines)

"""Throughput benchmark over a grid of camera and person counts.

Timing covers the tracking stages only (single-view tracking, association,
fusion, linking); scene synthesis and detection rendering are excluded.
"""
from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass
from typing import Iterable, Optional

import numpy as np

from . import kernels
from .config import PipelineConfig
from .diagnostics import Diagnostics
from .pipeline import run_pipeline
from .sim import NoiseConfig, SceneConfig, generate_scene, render_detections


@dataclass
class BenchRow:
    n_cameras: int
    n_persons: int
    frames: int
    seconds: float
    fps: float
    assoc_per_window: float
    windows: int
    backend: str


def bench_cell(n_cameras, n_persons, duration=300, repeats=3, cfg: Optional[PipelineConfig] = None,
               noise: Optional[NoiseConfig] = None, seed=0) -> BenchRow:
    cfg = cfg or PipelineConfig()
    noise = noise or NoiseConfig(pixel_sigma=1.0, seed=seed)
    scene = generate_scene(SceneConfig(n_persons=n_persons, n_cameras=n_cameras, duration=duration, seed=seed))
    dets = render_detections(scene, noise)
    best = None
    for _ in range(max(1, repeats)):
        res = run_pipeline(cfg, scene.rig, dets, diagnostics=Diagnostics(), length=duration)
        busy = sum(res.timings.get(k, 0.0) for k in ("svtrack", "assoc", "cmmt", "linker"))
        if best is None or busy < best[0]:
            best = (busy, res.timings.get("assoc", 0.0))
    n_windows = len(range(cfg.window.size // 2, duration + cfg.window.size // 2, cfg.window.step))
    busy, assoc = best
    return BenchRow(n_cameras, n_persons, duration, busy, duration / busy if busy else float("inf"),
                    assoc / max(n_windows, 1), n_windows, kernels.BACKEND)


def benchmark(cameras: Iterable[int] = (2, 4, 6), persons: Iterable[int] = (2, 4, 8), duration=300,
              repeats=3, cfg=None, seed=0) -> list[BenchRow]:
    """One row per (n_cameras, n_persons) cell, cameras varying slowest."""
    return [bench_cell(c, p, duration, repeats, cfg, seed=seed) for c in cameras for p in persons]


def assoc_scaling_slope(rows: list[BenchRow]) -> float:
    """Log-log slope of per-window association time against N_p * N_c."""
    x = np.log([r.n_cameras * r.n_persons for r in rows])
    y = np.log([r.assoc_per_window for r in rows])
    return float(np.polyfit(x, y, 1)[0])


def compare_backends(sizes=(20, 50, 100, 200), repeats=5, seed=0) -> list[dict]:
    """Time the clustering kernel of every available backend on random inputs."""
    rng = np.random.default_rng(seed)
    rows = []
    for n in sizes:
        pts = rng.random((n, 3))
        D = np.linalg.norm(pts[:, None] - pts[None], axis=-1)
        D[rng.random((n, n)) < 0.2] = np.nan
        D = np.fmax(D, D.T)  # symmetric, NaN only where both halves are
        np.fill_diagonal(D, np.nan)
        for name, impl in sorted(kernels.BACKENDS.items()):
            best = float("inf")
            for _ in range(repeats):
                t0 = time.perf_counter()
                impl.propagable_linkage(D, 0.3)
                best = min(best, time.perf_counter() - t0)
            rows.append({"backend": name, "n": n, "seconds": best})
    return rows


def format_table(rows) -> str:
    """Tab-separated table with a header line."""
    recs = [asdict(r) if not isinstance(r, dict) else r for r in rows]
    if not recs:
        return ""
    keys = list(recs[0])
    lines = ["\t".join(keys)]
    for r in recs:
        lines.append("\t".join(f"{r[k]:.6g}" if isinstance(r[k], float) else str(r[k]) for k in keys))
    return "\n".join(lines)


def to_json(rows) -> str:
    return json.dumps([asdict(r) if not isinstance(r, dict) else r for r in rows], indent=2)

"""Single-sample inference latency."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
from threadpoolctl import threadpool_limits

from ..autograd import no_grad

WARMUP = 10


@dataclass(frozen=True)
class LatencyStats:
    median_ms: float
    q1_ms: float
    q3_ms: float
    reps: int

    @property
    def iqr_ms(self) -> float:
        return self.q3_ms - self.q1_ms


def measure_latency(model, probe: np.ndarray, reps: int = 30, warmup: int = WARMUP,
                    threads: int = 1) -> LatencyStats:
    """Median (and quartiles) of batch-1 forward times in milliseconds per sample.

    Sample ``i`` of the probe set is used for repetition ``i``; the first
    ``warmup`` passes are discarded.
    """
    probe = np.asarray(probe)
    if len(probe) == 0:
        raise ValueError("latency needs a non-empty probe set")
    if reps < 1:
        raise ValueError("reps must be >= 1")
    model.eval()
    times = []
    with threadpool_limits(limits=threads), no_grad():
        for i in range(warmup + reps):
            x = probe[i % len(probe)][None]
            t0 = time.perf_counter()
            model(x)
            dt = time.perf_counter() - t0
            if i >= warmup:
                times.append(dt * 1e3)
    q1, med, q3 = np.percentile(times, [25, 50, 75])
    return LatencyStats(float(med), float(q1), float(q3), reps)

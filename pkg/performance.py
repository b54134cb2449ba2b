# -*- coding: utf-8 -*-

# State-Aliasing Lab - Performance Module
# Phase timing for long-running generation, training and probing work

import logging
import time
from collections import defaultdict
from typing import Dict

logger = logging.getLogger(__name__)

# phases slower than this are logged at WARNING
SLOW_PHASE_MS = 10 * 60 * 1000.0

_phase_totals: Dict[str, float] = defaultdict(float)
_phase_counts: Dict[str, int] = defaultdict(int)


class PhaseTimer:
    """
    Context manager for timing a named phase.

    Example:
        with PhaseTimer("train aux-ptr seed 0") as timer:
            # do work
            pass
        print(f"Phase took {timer.elapsed_ms}ms")
    """

    def __init__(self, phase: str = "", slow_ms: float = SLOW_PHASE_MS):
        self.phase = phase
        self.slow_ms = slow_ms
        self.start_time = 0.0
        self.end_time = 0.0
        self.elapsed_ms = 0.0

    def __enter__(self):
        self.start_time = time.perf_counter()
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        self.end_time = time.perf_counter()
        self.elapsed_ms = (self.end_time - self.start_time) * 1000
        _phase_totals[self.phase] += self.elapsed_ms
        _phase_counts[self.phase] += 1

        if self.elapsed_ms > self.slow_ms:
            logger.warning(f"SLOW PHASE: {self.phase} took {self.elapsed_ms / 1000:.1f}s")
        else:
            logger.debug(f"Phase: {self.phase} took {self.elapsed_ms:.2f}ms")

        return False  # Don't suppress exceptions


def get_phase_stats() -> Dict[str, Dict[str, float]]:
    """Accumulated wall time per phase name."""
    return {
        phase: {"count": _phase_counts[phase], "total_ms": round(total, 2)}
        for phase, total in sorted(_phase_totals.items())
    }


def reset_phase_stats() -> None:
    _phase_totals.clear()
    _phase_counts.clear()


def log_performance_stats() -> None:
    """Log accumulated phase timings."""
    stats = get_phase_stats()
    if not stats:
        return

    logger.info("=" * 60)
    logger.info("PHASE TIMINGS")
    logger.info("=" * 60)
    for phase, entry in stats.items():
        logger.info(f"{phase}: {entry['total_ms'] / 1000:.2f}s over {entry['count']} run(s)")
    logger.info("=" * 60)


# Export public API
__all__ = [
    "PhaseTimer",
    "get_phase_stats",
    "reset_phase_stats",
    "log_performance_stats",
]

"""Process-level runtime knobs."""

import os

THREADS_ENV = "MESHFORGE_THREADS"


def worker_count() -> int:
    """Number of workers parallel sections may use.

    Controlled by the MESHFORGE_THREADS environment variable; 0 or unset
    means "one worker per CPU". Library results never depend on this value,
    it only caps concurrency.
    """
    raw = os.environ.get(THREADS_ENV, "0").strip()
    try:
        value = int(raw)
    except ValueError:
        raise ValueError(f"{THREADS_ENV} must be a non-negative integer, got {raw!r}")
    if value < 0:
        raise ValueError(f"{THREADS_ENV} must be a non-negative integer, got {value}")
    if value == 0:
        return os.cpu_count() or 1
    return value

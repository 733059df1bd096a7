"""Shared plumbing: seeded RNG construction and error types."""

import numpy as np


class NumericalFailure(RuntimeError):
    """A computation produced nonfinite values or failed to converge."""


class StateError(RuntimeError):
    """An operation was called before its state was ready (e.g. empty history)."""


def rng(seed):
    """Counter-based generator (numpy Philox) so a seed means the same
    stream on every platform."""
    return np.random.Generator(np.random.Philox(key=np.uint64(seed)))

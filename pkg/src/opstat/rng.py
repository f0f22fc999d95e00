"""Seeded random streams.

Every stream is a Philox counter-based generator keyed by a
:class:`numpy.random.SeedSequence` built from ``(seed, *stream)``, so that
sub-streams for parallel trials are addressable by index and never depend
on scheduling order. Gaussian variates use numpy's ziggurat sampler
(``Generator.standard_normal``).
"""
import numpy as np

from .errors import ValidationError

MAX_SEED = 2**64 - 1


def check_seed(seed):
    if isinstance(seed, bool) or not isinstance(seed, (int, np.integer)):
        raise ValidationError(f"seed must be an integer, got {seed!r}")
    seed = int(seed)
    if not 0 <= seed <= MAX_SEED:
        raise ValidationError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return seed


def make_rng(seed, *stream):
    """Return a Philox generator for ``seed`` and the sub-stream path ``stream``."""
    key = [check_seed(seed)] + [int(s) for s in stream]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(key)))

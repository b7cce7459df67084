"""Per-shot random substreams.

Shot ``k`` of a run with base seed ``s`` draws from a Philox counter-based
generator keyed by ``SeedSequence(s, spawn_key=(k,))``. Streams are
independent of evaluation order, so shots can be generated in any order or
in parallel with identical results.
"""
import numpy as np

ALGORITHM = "numpy.Philox/SeedSequence(seed, spawn_key=(shot,))"


def shot_stream(seed: int, shot: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(shot),))
    return np.random.Generator(np.random.Philox(ss))


def complex_normal(rng: np.random.Generator, size, variance=1.0):
    """Circular complex Gaussian samples with E|z|^2 = variance."""
    z = rng.standard_normal((2,) + tuple(np.atleast_1d(size)))
    return np.sqrt(np.asarray(variance) / 2) * (z[0] + 1j * z[1])

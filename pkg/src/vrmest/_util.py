"""Small shared helpers: seed derivation and ball sampling."""

import zlib

import numpy as np


def derived_seed(base, *tags):
    """Stable child seed from a base seed and a list of string/int tags.

    String tags hash through crc32 so the derivation does not depend on
    Python's per-process hash randomization.
    """
    ints = [int(base)]
    for t in tags:
        if isinstance(t, (int, np.integer)):
            ints.append(int(t))
        else:
            ints.append(zlib.crc32(str(t).encode("utf-8")))
    return np.random.SeedSequence(ints)


def derived_rng(base, *tags):
    return np.random.default_rng(derived_seed(base, *tags))


def uniform_ball(rng, count, dim, radius=1.0, center=None):
    """Uniform points in a euclidean ball: direction on the sphere times a
    radius with the volume-correct r^(1/dim) law."""
    d = rng.standard_normal((count, dim))
    nrm = np.linalg.norm(d, axis=1, keepdims=True)
    nrm[nrm == 0.0] = 1.0
    d /= nrm
    r = radius * rng.random(count) ** (1.0 / dim)
    pts = d * r[:, None]
    if center is not None:
        pts = pts + np.asarray(center, dtype=float)
    return pts

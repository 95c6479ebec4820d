"""Seed domains for independent random streams.

The panel generator spawns its stage streams straight from the user seed, so
child ``i`` of ``SeedSequence(seed)`` is already in use. Every other
stochastic consumer draws from its own tagged branch, which keeps, for
example, permutation keys from replaying the uniforms that placed students.
"""

import numpy as np

DOMAINS = {"permute": 1001, "spells": 1002, "survey": 1003, "replicate": 1004, "oracle": 1005}


def domain_sequence(seed, domain):
    """Root ``SeedSequence`` of a named domain for ``seed`` (an int or a sequence of ints)."""
    return np.random.SeedSequence(seed, spawn_key=(DOMAINS[domain],))


def domain_streams(seed, domain, n):
    return domain_sequence(seed, domain).spawn(n)

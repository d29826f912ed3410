"""Deterministic random-stream fan-out.

A single master seed per run is split into named substreams so that data
sampling, model initialisation, strategy randomness and prompt shuffling
draw from independent generators.  The split rule is
``SeedSequence([master, stream, index])``, which is stable across
processes and platforms; two runs with the same master seed therefore see
bit-identical draws in every stream.
"""

from __future__ import annotations

import numpy as np

# Stream identifiers.  Values are part of the on-disk reproducibility
# contract: changing them changes every derived run.
OBS = 1        # observational dataset
INIT = 2       # learner initialisation
FIT = 3        # per-round fitting (index = round)
INTERVENTION = 4  # per-round interventional batch (index = round)
STRATEGY = 5   # strategy-internal randomness
SHUFFLE = 6    # prompt variable-order shuffling


def seed_sequence(master: int, stream: int, index: int = 0) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(master), int(stream), int(index)])


def generator(master: int, stream: int, index: int = 0) -> np.random.Generator:
    """Generator for the given (master, stream, index) triple."""
    return np.random.Generator(np.random.PCG64(seed_sequence(master, stream, index)))


def derive_int(master: int, stream: int, index: int = 0) -> int:
    """A plain integer seed derived from the same split rule."""
    return int(seed_sequence(master, stream, index).generate_state(1, np.uint64)[0])

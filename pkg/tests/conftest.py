"""Shared fixtures: disk-cached trained codebooks to keep reruns fast."""

import pathlib

import pytest

from lfmimo import SeededRng, read_codebook, train_msip_codebook, write_codebook

CACHE_DIR = pathlib.Path(__file__).parent / "_codebook_cache"


@pytest.fixture(scope="session")
def codebook_factory():
    """Train (or load from cache) a codebook for (M, B, seed, training_count).

    Training cost dominates the slow tests, so trained codebooks are cached
    as files keyed by their parameters; delete tests/_codebook_cache to
    retrain from scratch.
    """
    CACHE_DIR.mkdir(exist_ok=True)
    memory = {}

    def build(M, B, seed=1, training_count=None):
        count = training_count if training_count is not None else 100 * 2**B
        key = (M, B, seed, count)
        if key in memory:
            return memory[key]
        path = CACHE_DIR / f"msip_M{M}_B{B}_s{seed}_t{count}_tol4.txt"
        if path.exists():
            book = read_codebook(path)
        else:
            # Loose tolerance: the held-out error is within a percent of the
            # converged value long before the 1e-6 default tolerance bites.
            book = train_msip_codebook(M, B, training_count=count,
                                       tolerance=1e-4, max_iterations=50,
                                       rng=SeededRng((seed, 0xC0DEB00C)))
            write_codebook(book, path)
        memory[key] = book
        return book

    return build

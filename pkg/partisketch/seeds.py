"""Labelled seed fan-out.

A single master seed drives every random stage. Each stage asks for its own
seed by label, so any stage can be replayed without running the others.
"""

import hashlib

SEED_BITS = 63


def derive_seed(seed: int, label: str) -> int:
    """Derive an independent non-negative seed for one stage.

    Args:
        seed: Master seed
        label: Stage label such as ``'sample'``, ``'queries'`` or ``'leaf-3'``

    Returns:
        A 63-bit seed, stable across platforms and Python versions
    """
    digest = hashlib.blake2b(f'{seed}:{label}'.encode(), digest_size=8).digest()
    return int.from_bytes(digest, 'little') >> (64 - SEED_BITS)

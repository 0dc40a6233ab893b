"""Deterministic random-source splitting for replica experiments.

Replicas are grouped in fixed blocks of BLOCK lanes. Block ``b`` of the
experiment tagged ``stream`` draws from

    Generator(PCG64(SeedSequence(seed, spawn_key=(stream, b))))

and replica ``i`` is lane ``i % BLOCK`` of block ``i // BLOCK``. Blocks are
the unit of work handed to workers and results are concatenated in block
order, so output never depends on the worker count.
"""

import zlib
from functools import partial

import numpy as np

from urncut.utils import fan_out

BLOCK = 4096


def stream_id(name):
    """Stable 32-bit tag for an experiment name."""
    return zlib.crc32(name.encode("utf-8"))


def block_source(seed, stream, block):
    sequence = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(stream), int(block)))
    return np.random.Generator(np.random.PCG64(sequence))


def blocks(reps):
    """(block index, lane count) pairs covering `reps` replicas."""
    if reps < 0:
        raise ValueError(f"reps must be non-negative, got {reps}")
    return [(b, min(BLOCK, reps - b * BLOCK)) for b in range((reps + BLOCK - 1) // BLOCK)]


def _run_block(worker, seed, stream, item):
    block, lanes = item
    return worker(lanes, block_source(seed, stream, block))


def run_replicas(worker, reps, seed, name, jobs=1):
    """Run ``worker(lanes, source)`` once per block; results in block order."""
    task = partial(_run_block, worker, seed, stream_id(name))
    return fan_out(task, blocks(reps), jobs)


def concat(results, axis=0):
    """Concatenate per-block arrays (or tuples of arrays) in block order."""
    if not results:
        return np.empty(0)
    if isinstance(results[0], tuple):
        return tuple(np.concatenate(parts, axis=axis) for parts in zip(*results))
    return np.concatenate(results, axis=axis)

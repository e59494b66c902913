"""Counter-based deterministic pseudo-randomness for key subsampling.

The sparse attention path needs random key subsets that are reproducible
across runs, across platforms, and — critically — identical whether a frame
is processed inside a live stream or during an offline replay.  Stateful
generators cannot give that guarantee, because the draw for (frame t,
layer l, query i) would depend on how many draws happened before it.

Instead every draw is a pure function of integer coordinates, built from
the splitmix64 finalizer.  ``derive_seed(seed, a, b, ...)`` folds the
coordinates into a fresh 64-bit seed; sampling for one query is then
``derive_seed(query_seed, draw_index) % population``.  Draws are with
replacement: duplicates are harmless for a max/mean estimate and keeping
each draw independent is what makes the whole schedule vectorizable.

Both a scalar (pure-int) and a vectorized (uint64 ndarray) evaluation of
the same function are provided; they agree bit for bit.
"""

from __future__ import annotations

import numpy as np

_MASK = 0xFFFFFFFFFFFFFFFF
_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


def splitmix64(value: int) -> int:
    """Finalize a 64-bit integer into a well-mixed 64-bit integer."""
    z = (value + _GAMMA) & _MASK
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK
    return z ^ (z >> 31)


def derive_seed(seed: int, *parts: int) -> int:
    """Fold integer coordinates into ``seed``, producing a new seed.

    The fold is order-sensitive: ``derive_seed(s, a, b)`` differs from
    ``derive_seed(s, b, a)``.
    """
    state = splitmix64(seed & _MASK)
    for part in parts:
        state = splitmix64(state ^ splitmix64(part & _MASK))
    return state


def _splitmix64_vec(values: np.ndarray) -> np.ndarray:
    """Vectorized :func:`splitmix64` over a uint64 array."""
    z = (values + np.uint64(_GAMMA)).astype(np.uint64)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
    return z ^ (z >> np.uint64(31))


def _derive_seed_vec(seed_mix: np.ndarray | int, parts: np.ndarray) -> np.ndarray:
    """Vectorized ``derive_seed`` for a single trailing coordinate.

    ``seed_mix`` must already be ``splitmix64(seed)`` (scalar or array);
    ``parts`` is broadcast against it.
    """
    seed_mix = np.asarray(seed_mix, dtype=np.uint64)
    return _splitmix64_vec(seed_mix ^ _splitmix64_vec(parts.astype(np.uint64)))


def sample_key_indices(
    seed: int,
    num_queries: int,
    num_keys: int,
    draws_per_query: int,
    causal: bool,
) -> tuple[np.ndarray, np.ndarray]:
    """Sample candidate key indices for every query row at once.

    For query ``i`` the admissible population is keys ``[0, i]`` under a
    causal mask and all ``num_keys`` keys otherwise.  When the population
    does not exceed ``draws_per_query`` the query enumerates it exactly
    instead of sampling, so short prefixes degrade gracefully to the dense
    computation.

    Returns ``(indices, valid)`` of shape ``(num_queries, draws_per_query)``:
    ``indices[i, j]`` is an int64 key index and ``valid[i, j]`` marks which
    slots are meaningful.  Draw ``(i, j)`` equals
    ``derive_seed(derive_seed(seed, i), j) % population_i`` — the scalar
    definition the verification oracle re-implements independently.
    """
    if num_queries < 1 or num_keys < 1:
        raise ValueError("sampling needs at least one query and one key")
    if draws_per_query < 1:
        raise ValueError("draws_per_query must be >= 1")

    population = (
        np.arange(1, num_queries + 1, dtype=np.int64)
        if causal
        else np.full(num_queries, num_keys, dtype=np.int64)
    )
    counts = np.minimum(population, draws_per_query)

    rows = np.arange(num_queries, dtype=np.uint64)
    query_mix = _splitmix64_vec(_derive_seed_vec(splitmix64(seed & _MASK), rows))
    draw_ids = np.arange(draws_per_query, dtype=np.uint64)
    raw = _derive_seed_vec(query_mix[:, None], draw_ids[None, :])

    columns = np.arange(draws_per_query, dtype=np.int64)[None, :]
    sampled = (raw % population[:, None].astype(np.uint64)).astype(np.int64)
    full_rows = (population <= draws_per_query)[:, None]
    indices = np.where(full_rows, np.minimum(columns, population[:, None] - 1), sampled)
    valid = columns < counts[:, None]
    return indices, valid

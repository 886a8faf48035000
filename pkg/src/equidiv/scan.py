"""Exhaustive run finding over a window of integers.

Divisor counts for a contiguous block come from a segmented sieve: for each
prime p up to sqrt(hi) the exponent of p is accumulated over the multiples
of p, p^2, ... inside the block, and whatever is left over after all those
primes is a single prime contributing a factor of 2.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from typing import Iterator

import numpy as np

from .records import RunRecord

__all__ = [
    "WindowTooLarge",
    "DEFAULT_BLOCK",
    "MAX_ENTRIES",
    "sieve_tau_block",
    "iter_tau_blocks",
    "find_runs",
    "longest_run",
    "longest_runs",
]

DEFAULT_BLOCK = 1 << 22
MAX_ENTRIES = 10**8
_HI_LIMIT = (1 << 64) - 1


class WindowTooLarge(ValueError):
    pass


def _check_window(lo: int, hi: int) -> None:
    if lo < 1 or hi < lo:
        raise ValueError(f"need 1 <= lo <= hi, got [{lo}, {hi}]")
    if hi > _HI_LIMIT:
        raise ValueError("sieve mode is limited to hi < 2**64")


_CHUNK = 1 << 22
_CACHE_LIMIT = 1 << 26  # keep base primes in memory below this bound


def _small_sieve(limit: int) -> np.ndarray:
    flags = np.ones(limit + 1, dtype=bool)
    flags[:2] = False
    for p in range(2, math.isqrt(limit) + 1):
        if flags[p]:
            flags[p * p :: p] = False
    return np.flatnonzero(flags)


def _prime_chunks(limit: int) -> Iterator[np.ndarray]:
    """Primes up to limit, in ascending chunks (segmented, bounded memory)."""
    if limit < 2:
        return
    root = _small_sieve(math.isqrt(limit))
    for lo in range(0, limit + 1, _CHUNK):
        hi = min(limit, lo + _CHUNK - 1)
        flags = np.ones(hi - lo + 1, dtype=bool)
        if lo == 0:
            flags[: min(2, len(flags))] = False
        for p in root.tolist():
            if p * p > hi:
                break
            start = max(p * p, -(-lo // p) * p)
            flags[start - lo :: p] = False
        yield np.flatnonzero(flags).astype(np.int64) + lo


def _base_primes(limit: int) -> list[np.ndarray] | None:
    """Cached chunk list for moderate limits; None means stream on demand."""
    if limit > _CACHE_LIMIT:
        return None
    return list(_prime_chunks(limit))


def _tau_segment(lo: int, n: int, primes: list[np.ndarray] | None) -> np.ndarray:
    hi = lo + n - 1
    root = math.isqrt(hi)
    chunks = primes if primes is not None else _prime_chunks(root)
    tau = np.ones(n, dtype=np.int32)
    covered = np.ones(n, dtype=np.uint64)  # product of the prime powers found so far
    for chunk in chunks:
        for p in chunk[chunk <= n].tolist():
            if p * p > hi:
                break
            first = -lo % p
            if first >= n:
                continue
            exps = np.ones(len(range(first, n, p)), dtype=np.int32)
            q = p * p
            while q <= hi:
                start = -lo % q
                if start >= n:
                    break
                # multiples of q sit every p-th slot among the multiples of p
                exps[(start - first) // p :: q // p] += 1
                q *= p
            tau[first::p] *= exps + 1
            covered[first::p] *= np.power(np.uint64(p), exps.astype(np.uint64))
        # primes above the block length divide at most one entry each
        big = chunk[(chunk > n) & (chunk <= root)].astype(np.uint64)
        if big.size:
            first = (big - np.uint64(lo) % big) % big
            for i in np.flatnonzero(first < n).tolist():
                p, pos = int(big[i]), int(first[i])
                v, e = (lo + pos) // p, 1
                while v % p == 0:
                    v //= p
                    e += 1
                tau[pos] *= e + 1
                covered[pos] *= np.uint64(p**e)
    values = np.arange(lo, lo + n, dtype=np.uint64)
    tau[values != covered] *= 2
    return tau


def sieve_tau_block(lo: int, hi: int, max_entries: int = MAX_ENTRIES) -> np.ndarray:
    """tau(lo), ..., tau(hi) as an int32 array (no per-element factoring)."""
    _check_window(lo, hi)
    n = hi - lo + 1
    if n > max_entries:
        raise WindowTooLarge(f"window of {n} entries exceeds the budget of {max_entries}")
    return _tau_segment(lo, n, _base_primes(math.isqrt(hi)))


def iter_tau_blocks(lo: int, hi: int, block_size: int = DEFAULT_BLOCK) -> Iterator[tuple[int, np.ndarray]]:
    """Yield (block start, tau array) covering [lo, hi] in order."""
    _check_window(lo, hi)
    primes = _base_primes(math.isqrt(hi))
    start = lo
    while start <= hi:
        n = min(block_size, hi - start + 1)
        yield start, _tau_segment(start, n, primes)
        start += n


def _segments(values: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Run-length encode: (values, start offsets, lengths)."""
    change = np.flatnonzero(np.diff(values)) + 1
    starts = np.concatenate(([0], change))
    lengths = np.diff(np.concatenate((starts, [len(values)])))
    return values[starts], starts, lengths


def _runs_in_range(k: int, lo: int, hi: int, block_size: int) -> list[tuple[int, int]]:
    """Maximal runs of tau == k inside [lo, hi], as (start, length), merged across blocks."""
    runs: list[tuple[int, int]] = []
    open_start = None  # start of a run that reached the end of the previous block
    for base, tau in iter_tau_blocks(lo, hi, block_size):
        edges = np.diff(np.concatenate(([False], tau == k, [False])).astype(np.int8))
        begins = np.flatnonzero(edges == 1).tolist()
        ends = np.flatnonzero(edges == -1).tolist()
        if open_start is not None and (not begins or begins[0] != 0):
            runs.append((open_start, base - open_start))
            open_start = None
        for b, e in zip(begins, ends):
            s = open_start if (b == 0 and open_start is not None) else base + b
            open_start = None
            if e == len(tau):
                open_start = s
            else:
                runs.append((s, base + e - s))
    if open_start is not None:
        runs.append((open_start, hi + 1 - open_start))
    return runs


def _record(k: int, start: int, length: int, lo: int, hi: int) -> RunRecord:
    truncated = (start == lo and lo > 1) or (start + length - 1 == hi)
    return RunRecord(k, start, length, "scan", truncated)


def _split(lo: int, hi: int, parts: int) -> list[tuple[int, int]]:
    step = -(-(hi - lo + 1) // parts)
    return [(s, min(hi, s + step - 1)) for s in range(lo, hi + 1, step)]


def find_runs(
    k: int,
    lo: int,
    hi: int,
    min_length: int = 2,
    block_size: int = DEFAULT_BLOCK,
    workers: int = 1,
) -> list[RunRecord]:
    """All maximal runs of integers with exactly k divisors in [lo, hi].

    Runs touching the window edge are kept and flagged ``truncated`` (the
    left edge only counts when lo > 1, since 0 is not a candidate).
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    _check_window(lo, hi)
    if workers > 1 and hi - lo + 1 > 2 * block_size:
        pieces = _split(lo, hi, workers)
        with ProcessPoolExecutor(workers) as pool:
            parts = list(pool.map(_runs_in_range, [k] * len(pieces), *zip(*pieces), [block_size] * len(pieces)))
        raw: list[tuple[int, int]] = []
        for part in parts:
            for s, n in part:
                if raw and raw[-1][0] + raw[-1][1] == s:
                    raw[-1] = (raw[-1][0], raw[-1][1] + n)
                else:
                    raw.append((s, n))
    else:
        raw = _runs_in_range(k, lo, hi, block_size)
    return [_record(k, s, n, lo, hi) for s, n in raw if n >= min_length]


def longest_run(k: int, lo: int, hi: int, block_size: int = DEFAULT_BLOCK) -> RunRecord | None:
    """Earliest run of maximal length with tau == k in the window, or None."""
    best = None
    for rec in find_runs(k, lo, hi, 1, block_size):
        if best is None or rec.length > best.length:
            best = rec
    return best


def longest_runs(
    lo: int, hi: int, max_k: int | None = None, block_size: int = DEFAULT_BLOCK
) -> dict[int, RunRecord]:
    """Longest (earliest on ties) run for every divisor count seen, in one sweep."""
    _check_window(lo, hi)
    best_len: dict[int, int] = {}
    best_start: dict[int, int] = {}
    carry = None  # (value, start, length) of the run still open at the block edge

    def offer(v, s, n):
        if max_k is not None and v > max_k:
            return
        if n > best_len.get(v, 0):
            best_len[v] = n
            best_start[v] = s

    for base, tau in iter_tau_blocks(lo, hi, block_size):
        vals, starts, lengths = _segments(tau)
        starts = starts + base
        if carry is not None:
            if vals[0] == carry[0]:
                lengths[0] += carry[2]
                starts[0] = carry[1]
            else:
                offer(*carry)
        carry = (int(vals[-1]), int(starts[-1]), int(lengths[-1]))
        vals, starts, lengths = vals[:-1], starts[:-1], lengths[:-1]
        if max_k is not None:
            keep = vals <= max_k
            vals, starts, lengths = vals[keep], starts[keep], lengths[keep]
        if len(vals) == 0:
            continue
        # per value: longest run, earliest among equals
        order = np.lexsort((starts, -lengths, vals))
        v_sorted = vals[order]
        firsts = order[np.concatenate(([True], v_sorted[1:] != v_sorted[:-1]))]
        for v, s, n in zip(vals[firsts].tolist(), starts[firsts].tolist(), lengths[firsts].tolist()):
            offer(v, s, n)
    if carry is not None:
        offer(*carry)
    return {v: _record(v, best_start[v], best_len[v], lo, hi) for v in sorted(best_len)}

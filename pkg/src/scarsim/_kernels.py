"""Numba kernels for basis enumeration and Hamiltonian application.

All kernels are deterministic: row-parallel loops accumulate each output
entry in a fixed (edge-list) order, so results are bit-reproducible for
any thread count.
"""

from __future__ import annotations

import numpy as np
from numba import njit, prange


@njit(cache=True)
def fill_sector_states(N, out):
    """Fill ``out`` with all words of popcount N in increasing order."""
    if N == 0:
        out[0] = 0
        return
    v = np.int64((1 << N) - 1)
    for i in range(out.shape[0]):
        out[i] = v
        c = v & (-v)
        r = v + c
        v = (((r ^ v) >> 2) // c) | r  # Gosper's hack


@njit(cache=True, inline="always")
def rank_word(word, binom, N):
    """Combinadic rank of ``word`` among words of popcount N."""
    r = np.int64(0)
    k = 0
    w = word
    while w != 0:
        low = w & (-w)
        p = 0
        t = low
        while t > 1:
            t >>= 1
            p += 1
        k += 1
        r += binom[p, k]
        w ^= low
    return r


@njit(cache=True)
def rank_many(words, binom, N):
    out = np.empty(words.shape[0], dtype=np.int64)
    for i in range(words.shape[0]):
        out[i] = rank_word(words[i], binom, N)
    return out


@njit(cache=True, parallel=True)
def diag_from_onsite(states, onsite_w, out):
    """out[u] = sum_i onsite_w[i] * n_i(states[u])."""
    L = onsite_w.shape[0]
    for u in prange(states.shape[0]):
        s = states[u]
        acc = 0.0
        for i in range(L):
            if (s >> i) & 1:
                acc += onsite_w[i]
        out[u] = acc


@njit(cache=True, parallel=True)
def matvec_table(states, table, masks, weights, diag, vin, vout):
    """vout = H vin with hop-target lookup through a full word->index table."""
    dim = states.shape[0]
    ne = masks.shape[0]
    for u in prange(dim):
        s = states[u]
        acc = diag[u] * vin[u]
        for e in range(ne):
            m = masks[e]
            x = s & m
            if x != 0 and x != m:  # exactly one of the two edge sites occupied
                acc += weights[e] * vin[table[s ^ m]]
        vout[u] = acc


@njit(cache=True, parallel=True)
def matvec_rank(states, binom, N, masks, weights, diag, vin, vout):
    """vout = H vin with hop targets located by combinadic ranking."""
    dim = states.shape[0]
    ne = masks.shape[0]
    for u in prange(dim):
        s = states[u]
        acc = diag[u] * vin[u]
        for e in range(ne):
            m = masks[e]
            x = s & m
            if x != 0 and x != m:
                acc += weights[e] * vin[rank_word(s ^ m, binom, N)]
        vout[u] = acc


@njit(cache=True)
def count_row_entries(states, masks, counts, with_diag):
    dim = states.shape[0]
    ne = masks.shape[0]
    for u in range(dim):
        c = 1 if with_diag else 0
        s = states[u]
        for e in range(ne):
            m = masks[e]
            x = s & m
            if x != 0 and x != m:
                c += 1
        counts[u] = c


@njit(cache=True)
def fill_csr(states, binom, N, masks, weights, diag, with_diag, indptr, indices, data):
    dim = states.shape[0]
    ne = masks.shape[0]
    for u in range(dim):
        pos = indptr[u]
        s = states[u]
        if with_diag:
            indices[pos] = u
            data[pos] = diag[u]
            pos += 1
        for e in range(ne):
            m = masks[e]
            x = s & m
            if x != 0 and x != m:
                indices[pos] = rank_word(s ^ m, binom, N)
                data[pos] = weights[e]
                pos += 1

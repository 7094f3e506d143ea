"""Compiled inner loop for pair-flip Metropolis updates.

The kernel mirrors the pair-flip math of ``gram_cache.SupportState``
(symmetric permutation of the leaving column to the border, rank-one
downdate, bordered re-extension) but runs over preallocated arrays with no
per-move Python overhead, so a full sweep costs O(N * (K^2 + M*K)) with a
small constant. The caller pre-draws all per-move randomness; the kernel
returns early when the cached inverse needs attention (dead downdate pivot
or scheduled refresh) and is re-entered at the same move after the caller
refactorizes.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

# stop reasons returned by run_moves
DONE = 0
PIVOT_DEGENERATE = 1
REFRESH_DUE = 2


@njit(cache=True, fastmath=True)
def run_moves(at_full, y, col_sq, aty_full,
              c, ones, zeros, at_sel, gram, gram_inv, aty, coeffs,
              energy, mu, i_pos, j_pos, unif,
              start, refresh_allowance, tau_sing,
              track_codes, codes):
    """Attempt moves ``start .. len(i_pos)-1``, mutating the state in place.

    i_pos[m] is a position into ``ones``, j_pos[m] a position into ``zeros``,
    unif[m] the acceptance uniform. Returns
    (energy, accepts, degens, commits, next_move, reason).
    """
    k = ones.shape[0]
    m_dim = y.shape[0]
    n_moves = i_pos.shape[0]
    last = k - 1

    sub = np.empty((k, k))      # downdated inverse, active block (k-1, k-1)
    g1 = np.empty(k)            # border column in the reduced ordering
    w = np.empty(k)
    t1 = np.empty(k)            # reduced aty
    cnew = np.empty(k)          # candidate coefficients
    qv = np.empty(k)            # candidate coefficients in the old ordering

    accepts = 0
    degens = 0
    commits = 0

    for mv in range(start, n_moves):
        p = i_pos[mv]
        jz = j_pos[mv]
        i = ones[p]
        j = zeros[jz]

        pivot = gram_inv[p, p]
        if pivot <= tau_sing:
            return energy, accepts, degens, commits, mv, PIVOT_DEGENERATE

        # downdated inverse: sigma maps reduced index a to old index
        # (identity except p -> last)
        for a in range(last):
            sa = last if a == p else a
            ua = gram_inv[sa, p] / pivot
            for b in range(last):
                sb = last if b == p else b
                sub[a, b] = gram_inv[sa, sb] - ua * gram_inv[sb, p]

        # border of the incoming column in the reduced ordering
        a_j = at_full[j]
        g_full = np.dot(at_sel, a_j)
        for a in range(last):
            g1[a] = g_full[last if a == p else a]
        g_jj = col_sq[j]

        for a in range(last):
            acc = 0.0
            for b in range(last):
                acc += sub[a, b] * g1[b]
            w[a] = acc
        gamma = g_jj
        for a in range(last):
            gamma -= g1[a] * w[a]
        if gamma <= tau_sing:
            degens += 1
            continue

        # candidate coefficients without materializing the bordered inverse:
        # top = sub @ t1 + beta * w, last = -beta,
        # beta = (w . t1 - aty_j) / gamma
        for a in range(last):
            t1[a] = aty[last if a == p else a]
        t_j = aty_full[j]
        wt = 0.0
        for a in range(last):
            wt += w[a] * t1[a]
        beta = (wt - t_j) / gamma
        for a in range(last):
            acc = 0.0
            for b in range(last):
                acc += sub[a, b] * t1[b]
            cnew[a] = acc + beta * w[a]
        cnew[last] = -beta

        # residual energy of the candidate, using the current at_sel rows
        for a in range(k):
            qv[a] = 0.0
        for a in range(last):
            qv[last if a == p else a] = cnew[a]
        fit = np.dot(qv, at_sel)
        c_j = cnew[last]
        e_new = 0.0
        for l in range(m_dim):
            r = y[l] - fit[l] - c_j * a_j[l]
            e_new += r * r
        e_new *= 0.5

        d_e = e_new - energy
        if d_e <= 0.0 or unif[mv] < math.exp(-mu * d_e):
            accepts += 1
            commits += 1
            energy = e_new
            # gram: move the trailing row/col into slot p, then border with j
            if p != last:
                for b in range(k):
                    gram[p, b] = gram[last, b]
                for a in range(k):
                    gram[a, p] = gram[a, last]
                for l in range(m_dim):
                    at_sel[p, l] = at_sel[last, l]
                aty[p] = aty[last]
                ones[p] = ones[last]
            for a in range(last):
                gram[last, a] = g1[a]
                gram[a, last] = g1[a]
            gram[last, last] = g_jj
            for l in range(m_dim):
                at_sel[last, l] = a_j[l]
            aty[last] = t_j
            ones[last] = j
            zeros[jz] = i
            c[i] = 0
            c[j] = 1
            # bordered inverse from the downdated block
            for a in range(last):
                wa = w[a] / gamma
                for b in range(last):
                    gram_inv[a, b] = sub[a, b] + wa * w[b]
                gram_inv[a, last] = -wa
                gram_inv[last, a] = -wa
            gram_inv[last, last] = 1.0 / gamma
            for a in range(k):
                coeffs[a] = cnew[a]
            if refresh_allowance > 0:
                refresh_allowance -= 1
                if refresh_allowance == 0:
                    if track_codes:
                        code = np.int64(0)
                        for a in range(k):
                            code |= np.int64(1) << ones[a]
                        codes[mv] = code
                    return energy, accepts, degens, commits, mv + 1, REFRESH_DUE

        if track_codes:
            code = np.int64(0)
            for a in range(k):
                code |= np.int64(1) << ones[a]
            codes[mv] = code

    return energy, accepts, degens, commits, n_moves, DONE

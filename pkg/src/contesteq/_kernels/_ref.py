"""NumPy reference implementation of the hot kernels.

Semantics contract shared with the compiled backend:

    win_prob_batch(own_n, own_tails, other_n, other_tails, k)[i, j] =
        Pr[ Bin(own_n, own_tails[i]) + Bin(other_n, other_tails[j]) <= k-1 ]

i.e. the probability that fewer than k opponents beat a candidate when
opponents beat independently with the given per-group tail probabilities.
"""

from __future__ import annotations

import numpy as np
from scipy.special import gammaln


def _binom_pmf_matrix(n: int, ps: np.ndarray, bmax: int) -> np.ndarray:
    """pmf[i, b] = Pr[Bin(n, ps[i]) = b] for b = 0..bmax.

    Mass at counts above bmax is intentionally dropped (callers only sum
    the truncated range, where it contributes nothing).
    """
    ps = np.asarray(ps, dtype=np.float64)
    out = np.zeros((ps.size, bmax + 1))
    top = min(bmax, n)
    b = np.arange(top + 1, dtype=np.float64)
    log_comb = gammaln(n + 1.0) - gammaln(b + 1.0) - gammaln(n - b + 1.0)
    interior = (ps > 0.0) & (ps < 1.0)
    if interior.any():
        p = ps[interior][:, None]
        out[interior, : top + 1] = np.exp(
            log_comb + b * np.log(p) + (n - b) * np.log1p(-p)
        )
    out[ps <= 0.0, 0] = 1.0
    if n <= bmax:
        out[ps >= 1.0, n] = 1.0
    return out


def win_prob_batch(own_n, own_tails, other_n, other_tails, k):
    own_tails = np.atleast_1d(np.asarray(own_tails, dtype=np.float64))
    other_tails = np.atleast_1d(np.asarray(other_tails, dtype=np.float64))
    m, d = own_tails.size, other_tails.size
    if k - 1 >= own_n + other_n:
        return np.ones((m, d))
    bmax = min(own_n, k - 1)
    pmf_own = _binom_pmf_matrix(own_n, own_tails, bmax)
    jmax = min(other_n, k - 1)
    cdf_other = np.cumsum(_binom_pmf_matrix(other_n, other_tails, jmax), axis=1)
    if jmax < k - 1:
        pad = np.repeat(cdf_other[:, -1:], (k - 1) - jmax, axis=1)
        cdf_other = np.concatenate([cdf_other, pad], axis=1)
    # P[i, j] = sum_b pmf_own[i, b] * cdf_other[j, k-1-b]
    aligned = cdf_other[:, k - 1 - np.arange(bmax + 1)]
    return np.clip(pmf_own @ aligned.T, 0.0, 1.0)

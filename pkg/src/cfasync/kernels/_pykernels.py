"""NumPy implementations of the hot kernels (fallback when the extension is absent)."""

import numpy as np


def pair_traces(Q, R):
    """out[l, i, k] = Re tr(Q[l, i] @ R[l, k])."""
    return np.einsum("liab,lkba->lik", Q, R).real


def accumulate_inner(G, c, mu, ds, coh, ups1):
    """Accumulate Monte Carlo moments of the per-AP inner products in place.

    ``G[b, l, k, i]`` is h_kl^H v_il for trial ``b`` and ``c[b, l, k, m]`` the
    conjugated delay/oscillator factor times sqrt(mu_l) at instant ``m``, so the
    inner product g_kl^H[n] sqrt(mu_l) v_il equals ``c[b, l, k, m] * G[b, l, k, i]``.

    ds[k, l, m]   += sum_b c G[.., k, k]
    coh[k, i, m]  += sum_b |sum_l c G|^2
    ups1[k, i, l] += sum_b mu_l |G|^2
    """
    K = G.shape[2]
    kk = np.arange(K)
    diag = G[:, :, kk, kk]
    ds += np.einsum("blkm,blk->klm", c, diag)
    S = np.einsum("blkm,blki->bkim", c, G)
    coh += (S.real * S.real + S.imag * S.imag).sum(axis=0)
    ups1 += np.einsum("l,blki->kil", mu, G.real * G.real + G.imag * G.imag)

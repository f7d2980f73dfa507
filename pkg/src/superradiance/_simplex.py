"""Nelder-Mead descent run on many independent problems at once.

Every simplex evolves with elementwise array operations only, so the result
for one problem never depends on which other problems share the batch.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

# Standard coefficients (reflection, expansion, contraction, shrink).
RHO, CHI, PSI, SIGMA = 1.0, 2.0, 0.5, 0.5

BatchObjective = Callable[[np.ndarray, np.ndarray], np.ndarray]


def nelder_mead_batch(
    fun: BatchObjective,
    x0: np.ndarray,
    step: float | np.ndarray,
    *,
    xatol: float = 1e-8,
    fatol: float = 1e-12,
    maxiter: int = 2000,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Minimise ``M`` independent functions of ``n`` variables.

    ``fun(idx, X)`` must return the objective of problem ``idx[k]`` evaluated at
    ``X[k]`` for every row ``k``.  Convergence per problem follows the usual
    rule: all vertices within ``xatol`` of the best one and all values within
    ``fatol`` of the best value.

    Returns ``(x_best, f_best, n_iter)``.
    """
    x0 = np.atleast_2d(np.asarray(x0, dtype=float))
    M, n = x0.shape
    step = np.broadcast_to(np.asarray(step, dtype=float), (n,))

    sim = np.repeat(x0[:, None, :], n + 1, axis=1)
    for k in range(n):
        sim[:, k + 1, k] += step[k]
    idx_all = np.arange(M)
    fsim = fun(np.repeat(idx_all, n + 1), sim.reshape(-1, n)).reshape(M, n + 1)

    n_iter = np.zeros(M, dtype=int)
    active = np.arange(M)
    for _ in range(maxiter):
        if active.size == 0:
            break
        s = sim[active]
        fs = fsim[active]
        order = np.argsort(fs, axis=1, kind="stable")
        s = np.take_along_axis(s, order[:, :, None], axis=1)
        fs = np.take_along_axis(fs, order, axis=1)

        done = (np.max(np.abs(s[:, 1:] - s[:, :1]), axis=(1, 2)) <= xatol) & (
            np.max(np.abs(fs[:, 1:] - fs[:, :1]), axis=1) <= fatol
        )
        sim[active] = s
        fsim[active] = fs
        if done.any():
            keep = ~done
            active, s, fs = active[keep], s[keep], fs[keep]
            if active.size == 0:
                break
        n_iter[active] += 1

        xbar = s[:, :-1].mean(axis=1)
        worst = s[:, -1]
        xr = xbar + RHO * (xbar - worst)
        fr = fun(active, xr)

        f_best, f_second, f_worst = fs[:, 0], fs[:, -2], fs[:, -1]
        new_x = worst.copy()
        new_f = f_worst.copy()
        shrink = np.zeros(active.size, dtype=bool)

        expand = fr < f_best
        if expand.any():
            xe = xbar[expand] + RHO * CHI * (xbar[expand] - worst[expand])
            fe = fun(active[expand], xe)
            better = fe < fr[expand]
            new_x[expand] = np.where(better[:, None], xe, xr[expand])
            new_f[expand] = np.where(better, fe, fr[expand])

        accept_r = ~expand & (fr < f_second)
        new_x[accept_r] = xr[accept_r]
        new_f[accept_r] = fr[accept_r]

        outside = ~expand & ~accept_r & (fr < f_worst)
        if outside.any():
            xc = xbar[outside] + PSI * RHO * (xbar[outside] - worst[outside])
            fc = fun(active[outside], xc)
            ok = fc <= fr[outside]
            sub = np.flatnonzero(outside)
            new_x[sub[ok]] = xc[ok]
            new_f[sub[ok]] = fc[ok]
            shrink[sub[~ok]] = True

        inside = ~expand & ~accept_r & ~outside
        if inside.any():
            xcc = xbar[inside] - PSI * (xbar[inside] - worst[inside])
            fcc = fun(active[inside], xcc)
            ok = fcc < f_worst[inside]
            sub = np.flatnonzero(inside)
            new_x[sub[ok]] = xcc[ok]
            new_f[sub[ok]] = fcc[ok]
            shrink[sub[~ok]] = True

        s[:, -1] = new_x
        fs[:, -1] = new_f
        if shrink.any():
            ss = s[shrink]
            ss[:, 1:] = ss[:, :1] + SIGMA * (ss[:, 1:] - ss[:, :1])
            owners = np.repeat(active[shrink], n)
            fs_shr = fun(owners, ss[:, 1:].reshape(-1, n)).reshape(-1, n)
            s[shrink] = ss
            fsh = fs[shrink]
            fsh[:, 1:] = fs_shr
            fs[shrink] = fsh
        sim[active] = s
        fsim[active] = fs

    best = np.argmin(fsim, axis=1)
    x_best = sim[idx_all, best]
    f_best = fsim[idx_all, best]
    return x_best, f_best, n_iter

"""Pure numpy fallback for the one-sided Jacobi kernel.

Pairs are visited in round-robin (tournament) order so that every round
rotates n/2 disjoint column pairs at once with vectorized numpy calls.
"""
import numpy as np


def _tournament(n):
    # Circle method; -1 marks the bye when n is odd.
    players = list(range(n)) + ([-1] if n % 2 else [])
    size = len(players)
    rounds = []
    for _ in range(size - 1):
        half = size // 2
        left = players[:half]
        right = players[half:][::-1]
        pairs = [(min(p, q), max(p, q)) for p, q in zip(left, right) if p >= 0 and q >= 0]
        if pairs:
            p, q = np.array(pairs).T
            rounds.append((p, q))
        players = [players[0]] + [players[-1]] + players[1:-1]
    return rounds


def jacobi_orthogonalize(a, tol, max_sweeps):
    """Same contract as the compiled kernel: returns ``(w, v, sweeps, converged, off)``."""
    w = np.array(a, dtype=np.float64, copy=True)
    n = w.shape[1]
    v = np.eye(n)
    rounds = _tournament(n)
    # columns below eps * ||a||_F are rounding residue and are left alone
    floor = np.finfo(np.float64).eps ** 2 * float(np.sum(w * w))
    sweep = 0
    converged = False
    off = 0.0
    while sweep < max_sweeps:
        sweep += 1
        rotated = 0
        off = 0.0
        for p, q in rounds:
            wp, wq = w[:, p], w[:, q]
            alpha = np.einsum("ij,ij->j", wp, wp)
            beta = np.einsum("ij,ij->j", wq, wq)
            gamma = np.einsum("ij,ij->j", wp, wq)
            live = (alpha > floor) & (beta > floor)
            ratio = np.zeros_like(gamma)
            ratio[live] = np.abs(gamma[live]) / (np.sqrt(alpha[live]) * np.sqrt(beta[live]))
            if ratio.size:
                off = max(off, float(ratio.max()))
            act = ratio > tol
            if not act.any():
                continue
            rotated += int(act.sum())
            p, q = p[act], q[act]
            alpha, beta, gamma = alpha[act], beta[act], gamma[act]
            zeta = (beta - alpha) / (2.0 * gamma)
            t = np.copysign(1.0, zeta) / (np.abs(zeta) + np.sqrt(1.0 + zeta * zeta))
            c = 1.0 / np.sqrt(1.0 + t * t)
            s = c * t
            wp, wq = w[:, p], w[:, q]
            w[:, p] = c * wp - s * wq
            w[:, q] = s * wp + c * wq
            vp, vq = v[:, p], v[:, q]
            v[:, p] = c * vp - s * vq
            v[:, q] = s * vp + c * vq
        if rotated == 0:
            converged = True
            break
    return w, v, sweep, converged, off

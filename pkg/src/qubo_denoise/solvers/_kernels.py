import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def anneal(Q, x0, betas, flip_idx, flip_u):
    """Single-flip Metropolis over a per-sweep beta schedule.

    ``flip_idx``/``flip_u`` hold ``len(betas) * n`` pre-drawn proposals and
    uniforms. Returns the best state seen (including ``x0``).
    """
    n = Q.shape[0]
    x = x0.copy()
    field = np.zeros(n)
    for i in range(n):
        s = 0.0
        for j in range(n):
            s += Q[i, j] * x[j]
        field[i] = s
    energy = 0.0
    for i in range(n):
        energy += field[i] * x[i]
    best = x.copy()
    best_energy = energy
    k = 0
    for sweep in range(betas.shape[0]):
        beta = betas[sweep]
        for _ in range(n):
            i = flip_idx[k]
            u = flip_u[k]
            k += 1
            qii = Q[i, i]
            if x[i] == 0:
                delta = qii + 2.0 * field[i]
            else:
                delta = -(2.0 * field[i] - qii)
            if delta <= 0.0 or u < np.exp(-beta * delta):
                step = 1.0 if x[i] == 0 else -1.0
                x[i] = 1 - x[i]
                for j in range(n):
                    field[j] += step * Q[j, i]
                energy += delta
                if energy < best_energy:
                    best_energy = energy
                    for j in range(n):
                        best[j] = x[j]
    return best, best_energy

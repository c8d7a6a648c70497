"""Brute-force density-peak reference used by the tests.

Evaluates the clustering definitions literally: raw exponential densities,
per-token separation by scanning all denser tokens, centers by the raw
density x separation product, nearest-center assignment. Kept free of any
package internals so it stays an independent check.
"""

import numpy as np


def reference_dpc(points: np.ndarray, c: int):
    n = len(points)
    dist = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            diff = np.asarray(points[i], dtype=float) - np.asarray(points[j], dtype=float)
            dist[i, j] = np.sqrt((diff * diff).sum())

    rho = np.zeros(n)
    for i in range(n):
        total = 0.0
        for j in range(n):
            total += dist[i, j] ** 2
        rho[i] = np.exp(-total)

    def is_denser(j, i):
        # strict density win; exact ties go to the lower index
        return rho[j] > rho[i] or (rho[j] == rho[i] and j < i)

    delta = np.zeros(n)
    for i in range(n):
        denser = [dist[i, j] for j in range(n) if is_denser(j, i)]
        if denser:
            delta[i] = min(denser)
        elif n > 1:
            delta[i] = max(dist[i, j] for j in range(n))

    gamma = [rho[i] * delta[i] for i in range(n)]
    ranked = sorted(range(n), key=lambda i: (-gamma[i], i))
    centers = ranked[:c]

    member = {t: rank for rank, t in enumerate(centers)}
    for i in range(n):
        if i not in member:
            nearest = min(centers, key=lambda t: (dist[i, t], t))
            member[i] = member[nearest]
    return centers, [member[i] for i in range(n)]

"""Pure numpy versions of the hot loops; reference for the compiled core."""

import numpy as np

NAME = "python"

# germ table columns: x, y, m, a11, a12, a22, kind, beta, rtrunc2
GAUSS, POWER = 0, 1


def _profile(kind, beta, q):
    if kind == GAUSS:
        e = np.exp(-q)
        return e, -e, e
    b = (1.0 + q) ** (-beta)
    return b, -beta * b / (1.0 + q), beta * (beta + 1.0) * b / (1.0 + q) ** 2


def _germ_jets(row, dx, dy):
    x, y, m, a11, a12, a22, kind, beta, _ = row
    ax = a11 * dx + a12 * dy
    ay = a12 * dx + a22 * dy
    q = dx * ax + dy * ay
    G, G1, G2 = _profile(int(kind), beta, q)
    G, G1, G2 = m * G, m * G1, m * G2
    return (
        G,
        2.0 * G1 * ax,
        2.0 * G1 * ay,
        4.0 * G2 * ax * ax + 2.0 * G1 * a11,
        4.0 * G2 * ax * ay + 2.0 * G1 * a12,
        4.0 * G2 * ay * ay + 2.0 * G1 * a22,
    )


def splat_jets(germs, ox, oy, hx, hy, nx, ny):
    """Sum of truncated germ jets on the grid (ox + i hx, oy + j hy); shape (6, nx, ny)."""
    out = np.zeros((6, nx, ny))
    for row in np.asarray(germs, dtype=float):
        x, y = row[0], row[1]
        r2 = row[8]
        r = np.sqrt(r2)
        i0 = max(int(np.ceil((x - r - ox) / hx)), 0)
        i1 = min(int(np.floor((x + r - ox) / hx)), nx - 1)
        j0 = max(int(np.ceil((y - r - oy) / hy)), 0)
        j1 = min(int(np.floor((y + r - oy) / hy)), ny - 1)
        if i0 > i1 or j0 > j1:
            continue
        dx = (ox + hx * np.arange(i0, i1 + 1) - x)[:, None]
        dy = (oy + hy * np.arange(j0, j1 + 1) - y)[None, :]
        inside = dx * dx + dy * dy <= r2
        jets = _germ_jets(row, dx, dy)
        for k in range(6):
            out[k, i0 : i1 + 1, j0 : j1 + 1] += np.where(inside, jets[k], 0.0)
    return out


def probe_jets(germs, px, py):
    """Truncated germ-jet sums at probe points; shape (6, len(px))."""
    px = np.asarray(px, dtype=float)
    py = np.asarray(py, dtype=float)
    out = np.zeros((6, px.size))
    for row in np.asarray(germs, dtype=float):
        dx = px - row[0]
        dy = py - row[1]
        inside = dx * dx + dy * dy <= row[8]
        if not inside.any():
            continue
        jets = _germ_jets(row, dx, dy)
        for k in range(6):
            out[k] += np.where(inside, jets[k], 0.0)
    return out


def cf_sums(g0, ga, gb, gc, w, t, s1, s2, v, chunk=4096):
    """Weighted node sums behind the characteristic-function formulas.

    With phi = t g0 + s1 ga + s2 gb + v gc, returns for every argument k
    S0 = sum w (e^{i phi} - 1), S1 = sum w gc e^{i phi},
    S2 = sum w ga e^{i phi}, S3 = sum w ga^2 e^{i phi}.
    """
    t, s1, s2, v = (np.atleast_1d(np.asarray(a, dtype=float)) for a in (t, s1, s2, v))
    K = t.size
    out = np.zeros((4, K), dtype=complex)
    n = g0.size
    for lo in range(0, n, chunk):
        sl = slice(lo, min(lo + chunk, n))
        phi = (
            np.outer(t, g0[sl]) + np.outer(s1, ga[sl]) + np.outer(s2, gb[sl]) + np.outer(v, gc[sl])
        )
        sn = np.sin(phi)
        em1 = -2.0 * np.sin(0.5 * phi) ** 2 + 1j * sn  # e^{i phi} - 1 without cancellation
        e = em1 + 1.0
        ww = w[sl]
        out[0] += em1 @ ww
        out[1] += e @ (ww * gc[sl])
        out[2] += e @ (ww * ga[sl])
        out[3] += e @ (ww * ga[sl] ** 2)
    return out

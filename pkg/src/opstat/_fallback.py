"""Pure-Python/numpy versions of the compiled kernels in ``_kernels.pyx``.

Floating-point operations are performed in the same order as the compiled
versions so both backends agree bit-for-bit on the Euler-Maruyama and
rasterization kernels.
"""
import numpy as np

BOUNDARY = -1
_DUP_TOL = 1e-14


def euler_maruyama(x0, drift, sqrt_omega, dt, dB):
    x0 = np.ascontiguousarray(x0, dtype=float)
    drift = np.ascontiguousarray(drift, dtype=float)
    dB = np.ascontiguousarray(dB, dtype=float)
    n_paths, n_steps = dB.shape
    out = np.empty((n_paths, n_steps + 1))
    x = x0.copy()
    out[:, 0] = x
    for k in range(n_steps):
        x = x * ((1.0 - drift[k] * dt) + sqrt_omega * dB[:, k])
        out[:, k + 1] = x
    return out


def _clip(px, py, pl, nx, ny, c, label):
    ox, oy, ol = [], [], []
    n = len(px)
    for k in range(n):
        k2 = k + 1 if k + 1 < n else 0
        sa = nx * px[k] + ny * py[k] - c
        sb = nx * px[k2] + ny * py[k2] - c
        if sa <= 0.0:
            ox.append(px[k])
            oy.append(py[k])
            ol.append(pl[k])
            if sb > 0.0:
                t = sa / (sa - sb)
                ox.append(px[k] + t * (px[k2] - px[k]))
                oy.append(py[k] + t * (py[k2] - py[k]))
                ol.append(label)
        elif sb <= 0.0:
            t = sa / (sa - sb)
            ox.append(px[k] + t * (px[k2] - px[k]))
            oy.append(py[k] + t * (py[k2] - py[k]))
            ol.append(pl[k])
    return ox, oy, ol


def _drop_duplicates(px, py, pl):
    n = len(px)
    if n < 2:
        return px, py, pl
    keep = []
    for k in range(n):
        k2 = k + 1 if k + 1 < n else 0
        if abs(px[k] - px[k2]) + abs(py[k] - py[k2]) > _DUP_TOL:
            keep.append(k)
    if not keep:
        keep = [0]
    return [px[k] for k in keep], [py[k] for k in keep], [pl[k] for k in keep]


def clip_cells(sites, indptr, indices):
    """Voronoi cells of ``sites`` clipped to the unit square.

    ``indptr``/``indices`` list candidate neighbours per site (CSR layout).
    Returns ``(vert_ptr, verts, edge_src)``: vertices of cell ``i`` are
    ``verts[vert_ptr[i]:vert_ptr[i+1]]`` in counter-clockwise order, and
    ``edge_src[v]`` names the neighbour whose bisector carries the edge
    leaving vertex ``v`` (``-1`` on the square boundary).
    """
    sites = np.asarray(sites, dtype=float)
    indptr = np.asarray(indptr)
    indices = np.asarray(indices)
    ptr = [0]
    xs, ys, ls = [], [], []
    for i in range(sites.shape[0]):
        xi, yi = float(sites[i, 0]), float(sites[i, 1])
        px, py, pl = [0.0, 1.0, 1.0, 0.0], [0.0, 0.0, 1.0, 1.0], [BOUNDARY] * 4
        for j in indices[indptr[i]:indptr[i + 1]]:
            j = int(j)
            if j == i:
                continue
            xj, yj = float(sites[j, 0]), float(sites[j, 1])
            nx, ny = xj - xi, yj - yi
            c = nx * (0.5 * (xi + xj)) + ny * (0.5 * (yi + yj))
            px, py, pl = _clip(px, py, pl, nx, ny, c, j)
            if not px:
                break
        px, py, pl = _drop_duplicates(px, py, pl)
        xs.extend(px)
        ys.extend(py)
        ls.extend(pl)
        ptr.append(len(xs))
    verts = np.column_stack([np.array(xs, dtype=float), np.array(ys, dtype=float)])
    return np.array(ptr, dtype=np.int64), verts.reshape(-1, 2), np.array(ls, dtype=np.int64)


def rasterize(verts, ptr, resolution):
    """Union of polygons on a ``resolution``-square grid of pixel centres.

    Each polygon is filled with the even-odd rule; pixel ``(r, c)`` has centre
    ``((c + 0.5) / N, (r + 0.5) / N)`` and row index ``r`` runs along y.
    """
    n = int(resolution)
    verts = np.asarray(verts, dtype=float)
    ptr = np.asarray(ptr, dtype=np.int64)
    diff = np.zeros((n, n + 1), dtype=np.int32)
    counts = np.diff(ptr)
    valid = counts >= 3
    if not np.any(valid):
        return np.zeros((n, n), dtype=bool)
    # edges (a -> b) of every polygon, tagged with the polygon id
    poly = np.repeat(np.arange(len(counts)), counts)
    idx = np.arange(len(verts))
    nxt = idx + 1
    last = ptr[1:] - 1
    nxt[last[counts > 0]] = ptr[:-1][counts > 0]
    keep = valid[poly]
    poly, a, b = poly[keep], idx[keep], nxt[keep]
    x0, y0 = verts[a, 0], verts[a, 1]
    x1, y1 = verts[b, 0], verts[b, 1]
    ylo = np.minimum(y0, y1)
    yhi = np.maximum(y0, y1)
    r_lo = np.clip(np.ceil(ylo * n - 0.5), 0, n).astype(np.int64)
    r_hi = np.clip(np.ceil(yhi * n - 0.5), 0, n).astype(np.int64)
    nrows = r_hi - r_lo
    sel = nrows > 0
    poly, x0, y0, x1, y1, r_lo, nrows = (v[sel] for v in (poly, x0, y0, x1, y1, r_lo, nrows))
    edge = np.repeat(np.arange(len(nrows)), nrows)
    offs = np.arange(nrows.sum()) - np.repeat(np.cumsum(nrows) - nrows, nrows)
    rows = r_lo[edge] + offs
    yr = (rows + 0.5) / n
    xe0, ye0, xe1, ye1 = x0[edge], y0[edge], x1[edge], y1[edge]
    xc = xe0 + (yr - ye0) * (xe1 - xe0) / (ye1 - ye0)
    cols = np.clip(np.ceil(xc * n - 0.5), 0, n).astype(np.int64)
    order = np.lexsort((cols, rows, poly[edge]))
    rows, cols = rows[order], cols[order]
    starts, stops = cols[0::2], cols[1::2]
    span_rows = rows[0::2]
    np.add.at(diff, (span_rows, starts), 1)
    np.add.at(diff, (span_rows, stops), -1)
    return np.cumsum(diff, axis=1)[:, :n] > 0


"""Independent reference implementations used as test oracles.

Deliberately naive: explicit pairwise distances, characteristic polynomials,
normal equations and Python set arithmetic. None of them call into the package.
"""

import numpy as np


def pairwise_dist(a, b=None, dims=3):
    a = np.asarray(a, dtype=np.float64)[:, :dims]
    b = a if b is None else np.asarray(b, dtype=np.float64)[:, :dims]
    d2 = np.zeros((len(a), len(b)))
    for k in range(dims):  # one axis at a time avoids an (n, m, dims) temporary
        d2 += (a[:, k, None] - b[None, :, k]) ** 2
    return np.sqrt(d2)


def radius_brute(xyz, q, r, dims, exclude=None):
    d = np.sqrt(((np.asarray(xyz)[:, :dims] - np.asarray(q)[:dims]) ** 2).sum(axis=1))
    ids = [i for i in np.flatnonzero(d <= r) if i != exclude]
    return np.array(ids, dtype=np.int64)


def components_brute(xyz, members, link):
    """Union-find over explicit pairwise distances. Returns a list of frozensets."""
    members = list(members)
    parent = {m: m for m in members}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    pts = np.asarray(xyz)[members]
    for start in range(0, len(pts), 512):  # row blocks keep memory bounded
        d = pairwise_dist(pts[start:start + 512], pts)
        ii, jj = np.nonzero(d <= link)
        for i, j in zip(ii + start, jj):
            if i < j:
                ri, rj = find(members[i]), find(members[j])
                if ri != rj:
                    parent[ri] = rj
    groups = {}
    for m in members:
        groups.setdefault(find(m), set()).add(m)
    return [frozenset(g) for g in groups.values()]


def covariance_textbook(pts):
    pts = np.asarray(pts, dtype=np.float64)
    n = len(pts)
    mean = [sum(p[k] for p in pts) / n for k in range(3)]
    cov = np.zeros((3, 3))
    for p in pts:
        d = np.array([p[k] - mean[k] for k in range(3)])
        cov += np.outer(d, d)
    return cov / n, np.array(mean)


def symmetric_eigvals_charpoly(c):
    """Eigenvalues of a symmetric 3x3 matrix from the trigonometric solution of
    its characteristic cubic, sorted descending."""
    p1 = c[0, 1] ** 2 + c[0, 2] ** 2 + c[1, 2] ** 2
    q = np.trace(c) / 3
    if p1 == 0:
        return np.sort(np.diag(c))[::-1]
    p2 = (c[0, 0] - q) ** 2 + (c[1, 1] - q) ** 2 + (c[2, 2] - q) ** 2 + 2 * p1
    p = np.sqrt(p2 / 6)
    b = (c - q * np.eye(3)) / p
    r = np.clip(np.linalg.det(b) / 2, -1, 1)
    phi = np.arccos(r) / 3
    e1 = q + 2 * p * np.cos(phi)
    e3 = q + 2 * p * np.cos(phi + 2 * np.pi / 3)
    return np.array([e1, 3 * q - e1 - e3, e3])


def null_vector(c, lam):
    """Unit vector spanning the null space of (c - lam I), from the largest
    cross product of its rows."""
    m = c - lam * np.eye(3)
    cands = [np.cross(m[0], m[1]), np.cross(m[0], m[2]), np.cross(m[1], m[2])]
    v = max(cands, key=np.linalg.norm)
    return v / np.linalg.norm(v)


def plane_distance_normal_eq(neighbors, center):
    """Orthogonal distance from ``center`` to the total-least-squares plane
    through ``neighbors``: normal = eigenvector of the smallest eigenvalue,
    found via the characteristic polynomial."""
    cov, mean = covariance_textbook(neighbors)
    lam = symmetric_eigvals_charpoly(cov)
    n = null_vector(cov, lam[2])
    return abs(float(np.dot(np.asarray(center) - mean, n)))


def confusion_by_sets(pred, truth, classes=(1, 2, 3)):
    """(tp, fp, fn) per class from explicit index sets."""
    out = {}
    for c in classes:
        P = {i for i, v in enumerate(pred) if v == c and truth[i] in classes}
        T = {i for i, v in enumerate(truth) if v == c and pred[i] in classes}
        out[c] = (len(P & T), len(P - T), len(T - P))
    return out


def footprint_cells(xy, cell, origin=(0.0, 0.0)):
    return {(int(np.floor((x - origin[0]) / cell)), int(np.floor((y - origin[1]) / cell))) for x, y in xy}


def boundary_cells(cells):
    return {c for c in cells
            if any((c[0] + di, c[1] + dj) not in cells for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)))}


def kabsch_quaternion(src, dst):
    """Horn's closed-form absolute orientation via the quaternion eigenproblem."""
    src, dst = np.asarray(src, float), np.asarray(dst, float)
    ms, md = src.mean(0), dst.mean(0)
    S = (src - ms).T @ (dst - md)
    (sxx, sxy, sxz), (syx, syy, syz), (szx, szy, szz) = S
    N = np.array([
        [sxx + syy + szz, syz - szy, szx - sxz, sxy - syx],
        [syz - szy, sxx - syy - szz, sxy + syx, szx + sxz],
        [szx - sxz, sxy + syx, -sxx + syy - szz, syz + szy],
        [sxy - syx, szx + sxz, syz + szy, -sxx - syy + szz]])
    w, v = np.linalg.eigh(N)
    q0, qx, qy, qz = v[:, -1]
    R = np.array([
        [q0*q0 + qx*qx - qy*qy - qz*qz, 2*(qx*qy - q0*qz), 2*(qx*qz + q0*qy)],
        [2*(qy*qx + q0*qz), q0*q0 - qx*qx + qy*qy - qz*qz, 2*(qy*qz - q0*qx)],
        [2*(qz*qx - q0*qy), 2*(qz*qy + q0*qx), q0*q0 - qx*qx - qy*qy + qz*qz]])
    return R, md - R @ ms

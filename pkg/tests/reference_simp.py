"""Independent minimal SIMP implementation used as an acceptance oracle.

Deliberately written in the classic 99-line style and sharing nothing with
the package internals: hardcoded closed-form element stiffness, column-major
(ely-fastest) node numbering, loop-built filter, scalar OC bisection. Only
the problem definition (settings, material law, clamp bounds, stopping rule)
matches the package so final compliances are comparable.
"""

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.linalg import spsolve


def lk(e=1.0, nu=0.3):
    k = np.array([
        1 / 2 - nu / 6, 1 / 8 + nu / 8, -1 / 4 - nu / 12, -1 / 8 + 3 * nu / 8,
        -1 / 4 + nu / 12, -1 / 8 - nu / 8, nu / 6, 1 / 8 - 3 * nu / 8,
    ])
    ke = e / (1 - nu ** 2) * np.array([
        [k[0], k[1], k[2], k[3], k[4], k[5], k[6], k[7]],
        [k[1], k[0], k[7], k[6], k[5], k[4], k[3], k[2]],
        [k[2], k[7], k[0], k[5], k[6], k[3], k[4], k[1]],
        [k[3], k[6], k[5], k[0], k[7], k[2], k[1], k[4]],
        [k[4], k[5], k[6], k[7], k[0], k[1], k[2], k[3]],
        [k[5], k[4], k[3], k[2], k[1], k[0], k[7], k[6]],
        [k[6], k[3], k[4], k[1], k[2], k[7], k[0], k[5]],
        [k[7], k[2], k[1], k[4], k[3], k[6], k[5], k[0]],
    ])
    return ke


def reference_cantilever(nelx, nely, volfrac, penal, rmin,
                         move=0.2, eta=0.5, change_tol=0.01, max_iters=100,
                         emin=1e-9, e0=1.0):
    """Left edge clamped, unit upward load at right-edge mid-height.

    Returns (density, final_compliance). Density layout: (nely, nelx) with
    row 0 at the top of the domain.
    """
    ke = lk(e0)
    ndof = 2 * (nelx + 1) * (nely + 1)
    x = np.full(nely * nelx, volfrac)

    # classic numbering: node = (nely+1)*elx + ely, ely = 0 at the top
    edof = np.zeros((nelx * nely, 8), dtype=int)
    for elx in range(nelx):
        for ely in range(nely):
            el = ely + elx * nely
            n1 = (nely + 1) * elx + ely
            n2 = (nely + 1) * (elx + 1) + ely
            edof[el] = [2 * n1 + 2, 2 * n1 + 3, 2 * n2 + 2, 2 * n2 + 3,
                        2 * n2, 2 * n2 + 1, 2 * n1, 2 * n1 + 1]

    fixed = np.arange(2 * (nely + 1))  # all dofs of the left node column
    free = np.setdiff1d(np.arange(ndof), fixed)
    f = np.zeros(ndof)
    mid = (nely + 1) * nelx + nely // 2
    f[2 * mid + 1] = 1.0

    def analyse(xphys):
        rows, cols, vals = [], [], []
        for el in range(nelx * nely):
            ee = emin + xphys[el] ** penal * (e0 - emin)
            dofs = edof[el]
            for a in range(8):
                for b in range(8):
                    rows.append(dofs[a])
                    cols.append(dofs[b])
                    vals.append(ee * ke[a, b])
        k = coo_matrix((vals, (rows, cols)), shape=(ndof, ndof)).tocsc()
        u = np.zeros(ndof)
        u[free] = spsolve(k[free, :][:, free], f[free])
        ce = np.einsum("ij,jk,ik->i", u[edof], ke, u[edof])
        comp = float(((emin + xphys ** penal * (e0 - emin)) * ce).sum())
        return ce, comp

    def filt(xv, dc):
        dcn = np.zeros(nely * nelx)
        rint = int(np.floor(rmin))
        for i in range(nelx):
            for j in range(nely):
                total = 0.0
                wsum = 0.0
                for i2 in range(max(i - rint, 0), min(i + rint + 1, nelx)):
                    for j2 in range(max(j - rint, 0), min(j + rint + 1, nely)):
                        w = rmin - np.sqrt((i - i2) ** 2 + (j - j2) ** 2)
                        if w > 0:
                            el2 = j2 + i2 * nely
                            total += w * xv[el2] * dc[el2]
                            wsum += w
                el = j + i * nely
                dcn[el] = total / (max(xv[el], 1e-3) * wsum)
        return dcn

    def oc(xv, dc):
        l1, l2 = 0.0, 2.0 * np.max(-dc)
        while candidate_mean(xv, dc, l2) >= volfrac:
            l2 *= 2.0
        xnew = None
        for _ in range(200):
            lmid = 0.5 * (l2 + l1)
            xnew = np.clip(np.clip(xv * np.sqrt(-dc / lmid) ** (2 * eta),
                                   xv - move, xv + move), 0.0, 1.0)
            if abs(xnew.mean() - volfrac) <= 1e-4:
                break
            if xnew.mean() > volfrac:
                l1 = lmid
            else:
                l2 = lmid
        return xnew

    def candidate_mean(xv, dc, lam):
        return np.clip(np.clip(xv * np.sqrt(-dc / lam) ** (2 * eta),
                               xv - move, xv + move), 0.0, 1.0).mean()

    for _ in range(max_iters):
        ce, _ = analyse(x)
        dc = -penal * x ** (penal - 1) * (e0 - emin) * ce
        dc = filt(x, dc)
        xnew = oc(x, dc)
        change = np.abs(xnew - x).max()
        x = xnew
        if change < change_tol:
            break

    _, comp = analyse(x)
    return x.reshape(nelx, nely).T, comp

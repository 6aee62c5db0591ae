"""Brute-force reference computations shared by the test modules."""

import math

import numpy as np


def polar_grid_projection(sub, zeta, n_angle=72, n_rho=72, stages=3):
    """Brute-force min ||q - zeta||^2 on the constraint surface for M = 2.

    Polar parametrization in the eigenbasis: sweep (angle_1, angle_2, rho_1)
    on a refining grid and solve the remaining real quadratic for rho_2 >= 0.
    Runs the sweep for both orderings of the two coordinates.
    """
    zt = sub.basis.conj().T @ zeta
    best = math.inf
    for flip in (False, True):
        lam = sub.lam[::-1] if flip else sub.lam
        z = zt[::-1] if flip else zt
        b = sub.b_tilde[::-1] if flip else sub.b_tilde
        rho_max = 4.0 * (np.max(np.abs(z)) + np.max(np.abs(b)) + math.sqrt(abs(sub.tau)) + 1.0)
        a_lo, a_hi = 0.0, 2 * math.pi
        a2_lo, a2_hi = 0.0, 2 * math.pi
        r_lo, r_hi = 0.0, rho_max
        for _ in range(stages):
            a1 = np.linspace(a_lo, a_hi, n_angle)
            a2 = np.linspace(a2_lo, a2_hi, n_angle)
            r1 = np.linspace(r_lo, r_hi, n_rho)
            A1, A2, R1 = np.meshgrid(a1, a2, r1, indexing="ij")
            e1 = np.exp(1j * A1)
            e2 = np.exp(1j * A2)
            c2 = lam[1]
            c1 = -2.0 * np.real(np.conj(b[1]) * e2)
            c0 = lam[0] * R1 ** 2 - 2.0 * R1 * np.real(np.conj(b[0]) * e1) - sub.tau
            with np.errstate(invalid="ignore", divide="ignore"):
                if abs(c2) > 1e-14:
                    disc = c1 ** 2 - 4 * c2 * c0
                    sq = np.sqrt(np.maximum(disc, 0.0))
                    roots = [(-c1 + sq) / (2 * c2), (-c1 - sq) / (2 * c2)]
                    valid_mask = disc >= 0
                else:
                    roots = [-c0 / np.where(np.abs(c1) < 1e-300, np.nan, c1)]
                    valid_mask = np.abs(c1) > 1e-300
            found = None
            for rho2 in roots:
                ok = valid_mask & (rho2 >= 0)
                obj = np.where(ok,
                               np.abs(R1 * e1 - z[0]) ** 2 + np.abs(rho2 * e2 - z[1]) ** 2,
                               math.inf)
                i = np.unravel_index(np.argmin(obj), obj.shape)
                if obj[i] < best:
                    best = float(obj[i])
                    found = (A1[i], A2[i], R1[i])
            if found is None:
                break
            da = (a_hi - a_lo) / (n_angle - 1)
            dr = (r_hi - r_lo) / (n_rho - 1)
            a_lo, a_hi = found[0] - 2 * da, found[0] + 2 * da
            a2_lo, a2_hi = found[1] - 2 * da, found[1] + 2 * da
            r_lo, r_hi = max(0.0, found[2] - 2 * dr), found[2] + 2 * dr
    return best

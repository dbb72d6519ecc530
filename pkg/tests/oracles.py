"""Independent reference implementations used by the tests.

Nothing here imports the package; each oracle is written from the physics in
its simplest closed form.
"""
import numpy as np


def su2(vec, t):
    """exp(-i t (v . sigma) / 2) for a real 3-vector ``vec`` (rad/s)."""
    vx, vy, vz = vec
    w = np.sqrt(vx * vx + vy * vy + vz * vz)
    if w == 0:
        return np.eye(2, dtype=complex)
    nx, ny, nz = vx / w, vy / w, vz / w
    c, s = np.cos(w * t / 2), np.sin(w * t / 2)
    return np.array([[c - 1j * s * nz, -1j * s * (nx - 1j * ny)],
                     [-1j * s * (nx + 1j * ny), c + 1j * s * nz]])


def cpmg_ideal_p(n_pulses, tau, larmor, a_par, a_perp):
    """Readout p for ideal-pulse CPMG with one nucleus.

    With the NV starting in |0> the nucleus precesses about ``(0, 0, larmor)``;
    in |1> about ``(a_perp, 0, larmor + a_par)``. Each pi pulse swaps the two
    frames, so each NV branch carries its own product of rotations and the NV
    coherence is the overlap of the two branches.
    """
    r0 = lambda t: su2((0.0, 0.0, larmor), t)
    r1 = lambda t: su2((a_perp, 0.0, larmor + a_par), t)
    cyc0 = r0(tau / 2) @ r1(tau) @ r0(tau / 2)
    cyc1 = r1(tau / 2) @ r0(tau) @ r1(tau / 2)
    u0 = np.eye(2, dtype=complex)
    u1 = np.eye(2, dtype=complex)
    for _ in range(n_pulses // 2):
        u0 = cyc0 @ u0
        u1 = cyc1 @ u1
    return 0.5 * (1 + np.real(np.trace(u1.conj().T @ u0)) / 2)


"""Lead surface Green's functions, self-energies, broadenings and device Green's functions.

Every routine accepts either a scalar complex energy or a 1-D array of them;
batched inputs return stacks of matrices with the energy axis first.
"""

from __future__ import annotations

import numpy as np

from .model import JunctionModel, SpinChannel

DEFAULT_ETA = 1e-6
DECIMATION_TOL = 1e-10
DECIMATION_MAX_ITER = 200
# decimation runs at Im z >= this floor; Newton then moves the result to the true z
DECIMATION_ETA_FLOOR = 1e-6
NEWTON_STEPS = 8
PSD_TOL = 1e-8


class DecimationError(RuntimeError):
    """Surface Green's function iteration failed to converge or blew up."""


class BroadeningError(ArithmeticError):
    """Broadening matrix is not positive semidefinite within tolerance."""


def _batch(z):
    z = np.asarray(z, dtype=complex)
    return z.reshape(-1), z.ndim == 0


def surface_gf(h00, h01, z, tol: float = DECIMATION_TOL, max_iter: int = DECIMATION_MAX_ITER):
    """Surface Green's function of a semi-infinite lead by layer-doubling decimation.

    Solves ``g = [z - h00 - h01 g h01^dag]^-1`` with the Lopez Sancho/Rubio
    recursion: every iteration eliminates every other layer, so the effective
    depth doubles.  Raises :class:`DecimationError` if the renormalised
    hoppings have not vanished after ``max_iter`` iterations or the final
    fixed-point residual exceeds ``tol``.
    """
    zs, scalar = _batch(z)
    if np.any(zs.imag <= 0):
        raise ValueError("surface_gf needs Im(z) > 0 (retarded branch)")
    h00 = np.asarray(h00, dtype=complex)
    h01 = np.asarray(h01, dtype=complex)
    n = h00.shape[0]
    eye = np.eye(n)
    zI = zs[:, None, None] * eye
    z_dec = zs.real + 1j * np.maximum(zs.imag, DECIMATION_ETA_FLOOR)
    zI_dec = z_dec[:, None, None] * eye

    alpha = np.broadcast_to(h01, (zs.size, n, n)).copy()
    beta = np.broadcast_to(h01.conj().T, (zs.size, n, n)).copy()
    eps = np.broadcast_to(h00, (zs.size, n, n)).copy()
    eps_s = eps.copy()

    # converged energies are frozen, so each result is independent of the batch it came in
    active = np.arange(zs.size)
    for _ in range(max_iter):
        a, b, e = alpha[active], beta[active], eps[active]
        g = np.linalg.inv(zI_dec[active] - e)
        g_beta = g @ b
        g_alpha = g @ a
        agb = a @ g_beta
        eps_s[active] += agb
        eps[active] = e + agb + b @ g_alpha
        a = a @ g_alpha
        b = b @ g_beta
        alpha[active], beta[active] = a, b
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(eps[active]))):
            raise DecimationError("decimation produced non-finite values")
        size = np.maximum(np.linalg.norm(a, axis=(1, 2)), np.linalg.norm(b, axis=(1, 2)))
        active = active[size >= tol]
        if active.size == 0:
            break
    else:
        raise DecimationError(
            f"decimation did not converge in {max_iter} iterations "
            f"(min Im z = {zs.imag.min():.3g}); energy too close to a band edge?")

    gs = np.linalg.inv(zI_dec - eps_s)
    gs, resid = _newton_polish(zI - h00, h01, gs, tol, NEWTON_STEPS)
    worst = float(np.max(resid))
    if worst > tol:
        raise DecimationError(f"surface fixed-point residual {worst:.3g} exceeds tol {tol:.3g}")
    return gs[0] if scalar else gs


def _newton_polish(a, h01, gs, tol, steps: int = 3):
    """Newton steps on ``g - (a - h01 g h01^dag)^-1 = 0`` for entries above ``tol``.

    Decimation loses digits when ``z`` sits near an eigenvalue of ``h00`` (the
    first inverse is ~1/eta), and it runs at a floored ``Im z``; a few Newton
    steps restore full precision at the requested energy.
    """
    n = gs.shape[-1]
    h10 = h01.conj().T
    for step in range(steps + 1):
        m_inv = np.linalg.inv(a - h01 @ gs @ h10)
        r = gs - m_inv
        resid = np.linalg.norm(r, axis=(1, 2))
        bad = resid > 0.1 * tol
        if not np.any(bad) or step == steps:
            break
        p = m_inv[bad] @ h01
        q = h10 @ m_inv[bad]
        # row-major vec(P X Q) = kron(P, Q^T) vec(X)
        k = np.einsum("bik,blj->bijkl", p, q).reshape(-1, n * n, n * n)
        lhs = np.eye(n * n) - k
        dg = np.linalg.solve(lhs, -r[bad].reshape(-1, n * n, 1)).reshape(-1, n, n)
        gs = gs.copy()
        gs[bad] += dg
    return gs, resid


def fixed_point_residual(h00, h01, z, gs) -> float:
    """Frobenius norm of ``g - [z - h00 - h01 g h01^dag]^-1``."""
    h00 = np.asarray(h00, dtype=complex)
    h01 = np.asarray(h01, dtype=complex)
    rhs = np.linalg.inv(z * np.eye(h00.shape[0]) - h00 - h01 @ gs @ h01.conj().T)
    return float(np.linalg.norm(gs - rhs))


def self_energy(g_s, v):
    """Lead self-energy ``v^dag g_s v`` in the device basis.

    ``v[a, i]`` couples lead surface orbital ``a`` to device site ``i``, so the
    result is nonzero only on the device sites touched by ``v``.
    """
    v = np.asarray(v, dtype=complex)
    return v.conj().T @ g_s @ v


def broadening(sigma, check: bool = True):
    """``Gamma = i (Sigma - Sigma^dag)``; optionally verified to be PSD."""
    sigma = np.asarray(sigma)
    gamma = 1j * (sigma - np.swapaxes(sigma.conj(), -1, -2))
    gamma = 0.5 * (gamma + np.swapaxes(gamma.conj(), -1, -2))
    if check:
        lo = np.min(np.linalg.eigvalsh(gamma))
        if lo < -PSD_TOL:
            raise BroadeningError(f"broadening has eigenvalue {lo:.3g} < 0; wrong surface GF branch?")
    return gamma


def lead_self_energies(model: JunctionModel, spin: SpinChannel, z,
                       tol: float = DECIMATION_TOL, max_iter: int = DECIMATION_MAX_ITER):
    """Left and right self-energies of ``model`` for one spin at energies ``z``."""
    out = []
    for blocks, v in ((model.lead_left[spin], model.v_left[spin]),
                      (model.lead_right[spin], model.v_right[spin])):
        gs = surface_gf(blocks.h00, blocks.h01, z, tol=tol, max_iter=max_iter)
        out.append(self_energy(gs, v))
    return out[0], out[1]


def device_gf(model: JunctionModel, spin: SpinChannel, z, sigma_l, sigma_r):
    """Retarded device Green's function ``[z - H_eff - Sigma_L - Sigma_R]^-1``."""
    zs, scalar = _batch(z)
    h = model.h_dev_eff[spin]
    a = zs[:, None, None] * np.eye(h.shape[0]) - h - np.reshape(sigma_l, (-1,) + h.shape) \
        - np.reshape(sigma_r, (-1,) + h.shape)
    g = np.linalg.inv(a)
    return g[0] if scalar else g


def advanced(g_r):
    """``G^A = (G^R)^dag``."""
    return np.swapaxes(np.asarray(g_r).conj(), -1, -2)


def retarded(model: JunctionModel, spin: SpinChannel, energy, eta: float = DEFAULT_ETA):
    """Convenience bundle ``(G^R, Sigma_L, Sigma_R)`` on the real axis at ``energy + i eta``."""
    z = np.asarray(energy, dtype=float) + 1j * eta
    sl, sr = lead_self_energies(model, spin, z)
    return device_gf(model, spin, z, sl, sr), sl, sr

"""Surface phase block: quadratic model and two first-order minimizers.

At fixed precoders, filters and weights, the weighted MSE is an exact
quadratic in the reflection vector phi,

    f(phi) = c^H phi + phi^H c + phi^H Xi phi + constant_offset,

assembled link by link in :func:`build_quadratic_form`.  Two minimizers
handle the unit-modulus constraint:

* :func:`ccm_minimize` walks the complex circle manifold: project the
  negative gradient onto the tangent space, retract back to unit modulus,
  backtrack until sufficient decrease holds at the retracted point.
* :func:`sca_minimize` parameterizes phi = exp(j theta) and takes damped
  gradient steps in theta, adapting the damping beta until the decrease
  condition holds.

Both return the full objective trace so callers can assert monotonicity.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channels import ChannelSet
from .network import PhaseState, PrecoderSet, hermitize
from .wmmse import AuxiliarySet

_TINY = 1e-300


@dataclass
class QuadraticForm:
    """f(phi) = 2 Re(c^H phi) + phi^H Xi phi + constant_offset."""

    xi: np.ndarray
    c: np.ndarray
    constant_offset: float = 0.0

    def __post_init__(self) -> None:
        self.xi = np.asarray(self.xi, dtype=complex)
        self.c = np.asarray(self.c, dtype=complex).ravel()
        if self.xi.shape != (self.c.size, self.c.size):
            raise ValueError("Xi must be square and match the length of c")

    @property
    def size(self) -> int:
        return self.c.size

    def value(self, phi: np.ndarray) -> float:
        quad = np.vdot(phi, self.xi @ phi)
        lin = np.vdot(self.c, phi)
        return float(2.0 * lin.real + quad.real + self.constant_offset)


@dataclass
class LineSearchConfig:
    """Backtracking parameters shared by both minimizers."""

    armijo_tau: float = 0.3
    initial_step: float = 1.0
    shrink_factor: float = 0.5
    max_backtracks: int = 50

    def __post_init__(self) -> None:
        if not 0.0 < self.armijo_tau < 0.5:
            raise ValueError("armijo_tau must lie in (0, 0.5)")
        if not self.initial_step > 0:
            raise ValueError("initial_step must be positive")
        if not 0.0 < self.shrink_factor < 1.0:
            raise ValueError("shrink_factor must lie in (0, 1)")
        if self.max_backtracks < 1:
            raise ValueError("max_backtracks must be >= 1")


@dataclass
class PhaseOptResult:
    """Outcome of one inner phase minimization."""

    theta: np.ndarray
    f_final: float
    trace: list
    reason: str  # converged | max_iters | stalled
    iterations: int

    @property
    def phi(self) -> np.ndarray:
        return np.exp(1j * self.theta)


def _diag_of_product(x: np.ndarray, t: np.ndarray) -> np.ndarray:
    # diag(x @ t^H) without forming the full product
    return np.einsum("mn,mn->m", x, t.conj())


def build_quadratic_form(ch: ChannelSet, prec: PrecoderSet,
                         aux: AuxiliarySet) -> QuadraticForm:
    """Exact quadratic model of sum_k tr(W_k E_k) in the reflection vector.

    The accumulation walks every (receiver, transmitter) pair once.  For a
    receiver with surface arrival G, weight kernel B and a transmitter with
    surface departure T, direct link D and transmit covariance P:

      Xi     += a * (G^H B G) hadamard (T P T^H)^T
      c      += a * diag(G^H B D P T^H)
      offset += a * Re tr(B D P D^H)

    with a the residual self-interference factor on a base station's own
    loopback term and 1 elsewhere.  The desired-signal cross terms and the
    noise and identity traces complete c and the offset, so ``value`` on the
    result reproduces the weighted MSE exactly, not just up to a constant.
    """
    nl, kd, ku = ch.num_cells, ch.users_dl, ch.users_ul
    m = ch.ris_elements
    rho_inv = ch.sic_linear_inv()

    # transmitter-side caches
    p_bs = np.zeros((nl, ch.bs_tx, ch.bs_tx), dtype=complex)
    for j in range(nl):
        for i in range(kd):
            f = prec.f_dl[j, i]
            p_bs[j] += f @ f.conj().T
    tpt_bs = np.einsum("jmt,jts,jns->jmn", ch.g_rb, p_bs, ch.g_rb.conj())
    p_ul = np.einsum("jitb,jisb->jits", prec.f_ul, prec.f_ul.conj())
    tpt_ul = np.einsum("jimt,jits,jins->jimn", ch.g_ru, p_ul, ch.g_ru.conj())

    xi = np.zeros((m, m), dtype=complex)
    c = np.zeros(m, dtype=complex)
    offset = 0.0

    def receiver_terms(b_rx: np.ndarray, g: np.ndarray, rx_bs: int | None,
                       d_bs_row, d_ul_row) -> None:
        """Accumulate one receiver against every transmitter.

        rx_bs is the receiving BS index when the self-interference factor
        applies, None for user receivers.  d_bs_row[j] and d_ul_row[j][i]
        give the direct links from BS j and uplink user (j, i).
        """
        nonlocal xi, c, offset
        gb = g.conj().T @ b_rx            # (M, N_rx)
        gbg = gb @ g                      # (M, M)
        for j in range(nl):
            a = rho_inv if rx_bs == j else 1.0
            d = d_bs_row[j]
            xi += a * gbg * tpt_bs[j].T
            c += a * _diag_of_product(gb @ d @ p_bs[j], ch.g_rb[j])
            offset += a * float(np.trace(b_rx @ d @ p_bs[j] @ d.conj().T).real)
            for i in range(ku):
                d = d_ul_row[j][i]
                xi += gbg * tpt_ul[j, i].T
                c += _diag_of_product(gb @ d @ p_ul[j, i], ch.g_ru[j, i])
                offset += float(np.trace(b_rx @ d @ p_ul[j, i]
                                         @ d.conj().T).real)

    for l in range(nl):
        b_rx = np.zeros((ch.bs_rx, ch.bs_rx), dtype=complex)
        for k in range(ku):
            u, w = aux.u_ul[l, k], aux.w_ul[l, k]
            b_rx += u @ w @ u.conj().T
        receiver_terms(b_rx, ch.g_br[l], l,
                       [ch.h_bb[l, j] for j in range(nl)],
                       [[ch.h_bu[l, j, i] for i in range(ku)] for j in range(nl)])
        for k in range(ku):
            u, w = aux.u_ul[l, k], aux.w_ul[l, k]
            offset += ch.noise_bs_watt * float(
                np.trace(w @ u.conj().T @ u).real)
    for l in range(nl):
        for k in range(kd):
            u, w = aux.u_dl[l, k], aux.w_dl[l, k]
            receiver_terms(u @ w @ u.conj().T, ch.g_dr[l, k], None,
                           [ch.h_db[l, k, j] for j in range(nl)],
                           [[ch.h_du[l, k, j, i] for i in range(ku)]
                            for j in range(nl)])
            offset += ch.noise_ue_watt * float(
                np.trace(w @ u.conj().T @ u).real)

    # desired-signal cross terms and the identity trace, per user
    for l in range(nl):
        for k in range(ku):
            u, w, f = aux.u_ul[l, k], aux.w_ul[l, k], prec.f_ul[l, k]
            d, t, g = ch.h_bu[l, l, k], ch.g_ru[l, k], ch.g_br[l]
            offset -= 2.0 * float(np.trace(w @ u.conj().T @ d @ f).real)
            c -= _diag_of_product(g.conj().T @ u @ w @ f.conj().T, t)
            offset += float(np.trace(w).real)
        for k in range(kd):
            u, w, f = aux.u_dl[l, k], aux.w_dl[l, k], prec.f_dl[l, k]
            d, t, g = ch.h_db[l, k, l], ch.g_rb[l], ch.g_dr[l, k]
            offset -= 2.0 * float(np.trace(w @ u.conj().T @ d @ f).real)
            c -= _diag_of_product(g.conj().T @ u @ w @ f.conj().T, t)
            offset += float(np.trace(w).real)

    return QuadraticForm(xi=hermitize(xi), c=c, constant_offset=offset)


def euclidean_gradient_phi(qf: QuadraticForm, phi: np.ndarray) -> np.ndarray:
    """Gradient of f with respect to phi in the ambient complex space."""
    return 2.0 * (qf.xi @ phi + qf.c)


def riemannian_project(eta: np.ndarray, phi: np.ndarray) -> np.ndarray:
    """Project an ambient direction onto the tangent space of the circles."""
    return eta - np.real(eta.conj() * phi) * phi


def retract(phi_bar: np.ndarray) -> np.ndarray:
    """Normalize each entry back to unit modulus; zero entries are an error."""
    mag = np.abs(phi_bar)
    if np.any(mag == 0.0):
        raise ValueError("cannot retract a vector with zero entries")
    return phi_bar / mag


def ccm_minimize(qf: QuadraticForm, phi0: np.ndarray,
                 ls: LineSearchConfig | None = None, tol: float = 1e-5,
                 max_iter: int = 500) -> PhaseOptResult:
    """Projected-gradient descent on the product of unit circles.

    Sufficient decrease is tested at the retracted candidate, which is the
    point actually accepted, so the f trace is monotone by construction.
    """
    ls = ls or LineSearchConfig()
    phi = np.asarray(phi0, dtype=complex).ravel().copy()
    if qf.size != phi.size:
        raise ValueError("phi length does not match the quadratic form")
    phi = retract(phi)
    f = qf.value(phi)
    trace = [(0, f, 0.0)]
    reason = "max_iters"
    steps = 0
    for t in range(1, max_iter + 1):
        direction = riemannian_project(-euclidean_gradient_phi(qf, phi), phi)
        dn2 = float(np.real(np.vdot(direction, direction)))
        if dn2 == 0.0:
            reason = "converged"
            break
        step = ls.initial_step
        accepted = False
        for _ in range(ls.max_backtracks):
            cand_bar = phi + step * direction
            if np.any(np.abs(cand_bar) == 0.0):
                step *= ls.shrink_factor
                continue
            cand = retract(cand_bar)
            f_cand = qf.value(cand)
            if f_cand - f <= -ls.armijo_tau * step * dn2:
                accepted = True
                break
            step *= ls.shrink_factor
        if not accepted:
            reason = "stalled"
            break
        df = f - f_cand
        phi, f = cand, f_cand
        steps = t
        trace.append((t, f, step))
        if abs(df) <= tol * max(abs(f), _TINY):
            reason = "converged"
            break
    theta = np.mod(np.angle(phi), 2.0 * np.pi)
    return PhaseOptResult(theta=theta, f_final=f, trace=trace,
                          reason=reason, iterations=steps)


def sca_gradient_theta(qf: QuadraticForm, theta: np.ndarray) -> np.ndarray:
    """Gradient of f(exp(j theta)) with respect to the phase angles."""
    phi = np.exp(1j * np.asarray(theta, dtype=float))
    return 2.0 * np.real(-1j * phi.conj() * (qf.xi @ phi + qf.c))


def sca_minimize(qf: QuadraticForm, theta0: np.ndarray,
                 ls: LineSearchConfig | None = None, tol: float = 1e-5,
                 max_iter: int = 500,
                 beta_cap: float = 1e12) -> PhaseOptResult:
    """Damped gradient descent in the phase angles.

    Each iteration reuses the previously accepted damping beta, doubles it
    until the decrease condition holds, then halves it back as long as the
    condition keeps holding, so the step adapts in both directions.
    """
    ls = ls or LineSearchConfig()
    theta = np.mod(np.asarray(theta0, dtype=float).ravel(), 2.0 * np.pi)
    if qf.size != theta.size:
        raise ValueError("theta length does not match the quadratic form")
    f = qf.value(np.exp(1j * theta))
    trace = [(0, f, 0.0)]
    reason = "max_iters"
    steps = 0
    beta = 1.0 / ls.initial_step
    for t in range(1, max_iter + 1):
        g = sca_gradient_theta(qf, theta)
        gn2 = float(g @ g)
        if gn2 == 0.0:
            reason = "converged"
            break

        def attempt(b: float) -> tuple[np.ndarray, float, bool]:
            cand = np.mod(theta - g / b, 2.0 * np.pi)
            f_cand = qf.value(np.exp(1j * cand))
            return cand, f_cand, f_cand - f <= -ls.armijo_tau * gn2 / b

        cand, f_cand, ok = attempt(beta)
        while not ok:
            beta *= 2.0
            if beta > beta_cap:
                break
            cand, f_cand, ok = attempt(beta)
        if not ok:
            reason = "stalled"
            break
        for _ in range(60):
            if beta * ls.shrink_factor <= 0.0:
                break
            cand2, f_cand2, ok2 = attempt(beta * ls.shrink_factor)
            if not ok2:
                break
            beta *= ls.shrink_factor
            cand, f_cand = cand2, f_cand2
        df = f - f_cand
        theta, f = cand, f_cand
        steps = t
        trace.append((t, f, 1.0 / beta))
        if abs(df) <= tol * max(abs(f), _TINY):
            reason = "converged"
            break
    return PhaseOptResult(theta=theta, f_final=f, trace=trace,
                          reason=reason, iterations=steps)

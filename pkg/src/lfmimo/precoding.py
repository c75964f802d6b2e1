"""Base-station design: error-aware SMSE precoding and power allocation.

The precoder is computed in the virtual uplink.  With quantized unit-norm
effective channels ``F`` (columns ``f_i``), uplink powers ``q`` and an
assumed per-vector quantization error variance ``sigma_E^2`` the regularized
covariance is

    J = F diag(q) F^H + sigma^2 I + (sigma_E^2 / M) (sum q_i) I,

stream ``i`` is beamformed along ``J^{-1} f_i`` (normalized), and the sum
MSE has the closed form ``L - M + (sigma^2 + sigma_E^2 sum(q)/M) tr(J^{-1})``.
Power allocation minimizes that expression over the simplex
``{q >= 0, sum q = P_max}`` by projected gradient descent; downlink powers
equal the uplink ones at the optimum, so ``p = q`` throughout.

``sigma_E^2`` may be a scalar or one value per stream; per-stream values
enter ``J`` through the power-weighted average, which reduces to the scalar
form when all streams share one value.
"""

from dataclasses import dataclass

import numpy as np

from .combining import mmse_data_decoder
from .errors import ConvergenceError, DimensionError, RankDeficient

__all__ = [
    "EffectiveChannelSet",
    "PowerAllocation",
    "PrecoderSolution",
    "build_J",
    "precoder_from_powers",
    "allocate_power",
    "power_kkt_residual",
    "smse_closed_form",
    "smse_design",
    "naive_smse_design",
    "zf_precoder",
    "full_csi_iterative",
    "sigma_e_schedule",
]

_RANK_RTOL = 1e-10


@dataclass(frozen=True)
class EffectiveChannelSet:
    """Quantized effective channels of all streams, in global stream order."""

    F_hat: np.ndarray  # (M, L), unit-norm columns
    stream_user: tuple

    def __post_init__(self):
        F = np.asarray(self.F_hat, dtype=complex)
        object.__setattr__(self, "F_hat", F)
        if F.ndim != 2 or F.shape[1] != len(self.stream_user):
            raise DimensionError("need one stream-user entry per column")
        if np.any(np.abs(np.linalg.norm(F, axis=0) - 1.0) > 1e-12):
            raise DimensionError("effective channels must be unit norm")

    @classmethod
    def from_reports(cls, config, reports, codebooks):
        """Stack every user's reported codewords into the global matrix."""
        cols = []
        for k, report in enumerate(reports):
            for idx in report.indices:
                cols.append(codebooks[k].vectors[idx])
        return cls(np.column_stack(cols), config.stream_user)


@dataclass(frozen=True)
class PowerAllocation:
    """Virtual-uplink powers ``q`` and the (equal) downlink powers ``p``."""

    q: np.ndarray
    p: np.ndarray


@dataclass(frozen=True)
class PrecoderSolution:
    """Unit-norm precoder columns plus the powers and design bookkeeping."""

    U: np.ndarray
    q: np.ndarray
    p: np.ndarray
    sigma2: float
    sigma2_E: object = None  # scalar or per-stream array; None for ZF designs
    J: np.ndarray = None
    smse: float = None


def _sigma_e_vector(sigma2_E, L):
    se = np.asarray(sigma2_E, dtype=float)
    if se.ndim == 0:
        se = np.full(L, float(se))
    if se.shape != (L,):
        raise DimensionError(f"sigma2_E must be scalar or length {L}")
    if np.any(se < 0):
        raise DimensionError("sigma2_E must be non-negative")
    return se


def _loading(q, sigma2, se_vec, M):
    """Isotropic part of J: sigma^2 + (power-weighted error variance)/M."""
    return sigma2 + float(se_vec @ q) / M


def build_J(F_hat, q, sigma2, sigma2_E):
    """Regularized uplink covariance ``F Q F^H + (sigma^2 + err-load) I``."""
    F = np.asarray(F_hat, dtype=complex)
    q = np.asarray(q, dtype=float)
    if np.any(q < 0):
        raise DimensionError("uplink powers must be non-negative")
    M, L = F.shape
    se = _sigma_e_vector(sigma2_E, L)
    return (F * q) @ F.conj().T + _loading(q, sigma2, se, M) * np.eye(M)


def precoder_from_powers(F_hat, q, sigma2, sigma2_E):
    """Unit-norm precoder columns ``J^{-1} f_i`` for the given powers."""
    F = np.asarray(F_hat, dtype=complex)
    J = build_J(F, q, sigma2, sigma2_E)
    X = np.linalg.solve(J, F)
    norms = np.linalg.norm(X, axis=0)
    assert np.all(norms > 0), "J is positive definite, directions cannot vanish"
    return X / norms


def smse_closed_form(F_hat, q, sigma2, sigma2_E):
    """Uplink sum MSE ``L - M + (sigma^2 + err-load) tr(J^{-1})``."""
    F = np.asarray(F_hat, dtype=complex)
    M, L = F.shape
    se = _sigma_e_vector(sigma2_E, L)
    q = np.asarray(q, dtype=float)
    J = build_J(F, q, sigma2, se)
    trace_inv = float(np.real(np.trace(np.linalg.inv(J))))
    return L - M + _loading(q, sigma2, se, M) * trace_inv


def _project_simplex(v, total):
    """Euclidean projection onto ``{x >= 0, sum x = total}``."""
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - total
    rho = np.nonzero(u * np.arange(1, len(v) + 1) > css)[0][-1]
    theta = css[rho] / (rho + 1.0)
    return np.maximum(v - theta, 0.0)


def _power_objective_grad(F, q, sigma2, se_vec):
    """Objective ``c(q) tr(J^{-1})`` and its gradient on the open orthant."""
    M = F.shape[0]
    J = build_J(F, q, sigma2, se_vec)
    Jinv = np.linalg.inv(J)
    trace_inv = float(np.real(np.trace(Jinv)))
    trace_inv2 = float(np.real(np.sum(Jinv * Jinv.conj())))
    c = _loading(q, sigma2, se_vec, M)
    s = np.sum(np.abs(Jinv @ F) ** 2, axis=0)  # ||J^{-1} f_i||^2
    grad = (se_vec / M) * trace_inv - c * (s + (se_vec / M) * trace_inv2)
    return c * trace_inv, grad


def power_kkt_residual(F_hat, q, sigma2, sigma2_E, P_max):
    """Relative first-order optimality residual of a candidate allocation.

    At the optimum every stream with positive power shares one gradient
    value and the remaining streams have gradients that do not reward extra
    power; the residual measures the worst violation of either condition.
    """
    F = np.asarray(F_hat, dtype=complex)
    q = np.asarray(q, dtype=float)
    se = _sigma_e_vector(sigma2_E, F.shape[1])
    _, grad = _power_objective_grad(F, q, sigma2, se)
    active = q > 1e-9 * P_max
    lam = float(np.mean(grad[active]))
    scale = max(float(np.max(np.abs(grad))), abs(lam), 1e-30)
    resid = float(np.max(np.abs(grad[active] - lam)))
    if np.any(~active):
        resid = max(resid, float(np.max(np.maximum(lam - grad[~active], 0.0))))
    return resid / scale


def allocate_power(F_hat, P_max, sigma2, sigma2_E, tol=1e-6, max_iters=5000,
                   q0=None):
    """Minimize the closed-form SMSE over ``{q >= 0, sum q = P_max}``.

    Projected gradient descent with a spectral (Barzilai-Borwein) step and
    Armijo backtracking; stops once the relative KKT residual drops below
    ``tol``.  Raises :class:`ConvergenceError` at the iteration cap.
    """
    F = np.asarray(F_hat, dtype=complex)
    M, L = F.shape
    if P_max <= 0 or sigma2 <= 0:
        raise DimensionError("P_max and sigma2 must be positive")
    se = _sigma_e_vector(sigma2_E, L)
    if L == 1:
        q = np.array([float(P_max)])
        return PowerAllocation(q=q, p=q.copy())

    if q0 is not None and np.all(np.asarray(q0) >= 0) and np.sum(q0) > 0:
        q = np.asarray(q0, dtype=float) * (P_max / np.sum(q0))
    else:
        q = np.full(L, P_max / L)
    obj, grad = _power_objective_grad(F, q, sigma2, se)
    step = 0.1 * P_max / max(float(np.max(np.abs(grad - np.mean(grad)))), 1e-30)

    for _ in range(max_iters):
        active = q > 1e-9 * P_max
        lam = float(np.mean(grad[active]))
        scale = max(float(np.max(np.abs(grad))), abs(lam), 1e-30)
        resid = float(np.max(np.abs(grad[active] - lam)))
        if np.any(~active):
            resid = max(resid, float(np.max(np.maximum(lam - grad[~active], 0.0))))
        if resid / scale <= tol:
            q *= P_max / np.sum(q)
            return PowerAllocation(q=q, p=q.copy())

        # Near the optimum the attainable decrease per step drops below the
        # floating-point resolution of the objective while the gradient is
        # still informative, so the descent test carries a noise allowance.
        noise = 1e-12 * (1.0 + abs(obj))
        alpha = step
        for _ in range(60):
            q_new = _project_simplex(q - alpha * grad, P_max)
            delta = q_new - q
            sq_step = float(delta @ delta)
            if sq_step == 0.0:
                break
            obj_new, grad_new = _power_objective_grad(F, q_new, sigma2, se)
            if obj_new <= obj - 1e-4 * sq_step / alpha + noise:
                break
            alpha *= 0.5
        if sq_step == 0.0:
            # A vanishing projected step means the current step size is far
            # too small to resolve any remaining descent; reset it.
            step = 0.1 * P_max / max(float(np.max(np.abs(grad - np.mean(grad)))), 1e-30)
            continue
        dgrad = grad_new - grad
        denom = float(delta @ dgrad)
        step = sq_step / denom if denom > 0 else alpha * 2.0
        q, obj, grad = q_new, obj_new, grad_new

    raise ConvergenceError(
        f"power allocation not optimal after {max_iters} iterations"
    )


def smse_design(F_hat, P_max, sigma2, sigma2_E, q0=None):
    """Full error-aware design: power allocation, precoder, closed-form SMSE."""
    F = np.asarray(F_hat, dtype=complex)
    alloc = allocate_power(F, P_max, sigma2, sigma2_E, q0=q0)
    U = precoder_from_powers(F, alloc.q, sigma2, sigma2_E)
    return PrecoderSolution(
        U=U, q=alloc.q, p=alloc.p, sigma2=sigma2, sigma2_E=sigma2_E,
        J=build_J(F, alloc.q, sigma2, sigma2_E),
        smse=smse_closed_form(F, alloc.q, sigma2, sigma2_E),
    )


def naive_smse_design(F_hat, P_max, sigma2, q0=None):
    """The traditional design that ignores quantization error entirely."""
    return smse_design(F_hat, P_max, sigma2, 0.0, q0=q0)


def zf_precoder(F_hat, P_max):
    """Zero-forcing columns of ``F (F^H F)^{-1}`` with equal stream powers."""
    F = np.asarray(F_hat, dtype=complex)
    _, L = F.shape
    s = np.linalg.svd(F, compute_uv=False)
    if s[-1] <= s[0] * _RANK_RTOL:
        raise RankDeficient("effective channel matrix is not full column rank")
    X = F @ np.linalg.inv(F.conj().T @ F)
    U = X / np.linalg.norm(X, axis=0)
    p = np.full(L, P_max / L)
    return PrecoderSolution(U=U, q=p.copy(), p=p, sigma2=np.nan)


def full_csi_iterative(channel, L_list, P_max, sigma2, max_iters=4000, tol=1e-6):
    """Alternating transceiver optimization with perfect channel knowledge.

    Iterates between (a) power allocation + precoder for the current
    effective channels ``f_i = H_k v_i`` and (b) per-stream MMSE decoder
    updates, tracking the closed-form SMSE.  Returns the best solution, the
    per-user decoders and the (non-increasing) SMSE trace.
    """
    stream_user = [k for k, l in enumerate(L_list) for _ in range(l)]
    within = [i for l in L_list for i in range(l)]
    decoders = []
    for k, l in enumerate(L_list):
        H = channel.user(k)
        _, s, vh = np.linalg.svd(H)
        rank = int(np.sum(s > (s[0] if s.size else 0.0) * _RANK_RTOL))
        if rank < l:
            raise RankDeficient(f"user {k}: channel rank {rank} below L_k={l}")
        decoders.append(vh[:l].conj().T.copy())

    def effective(decs):
        cols = [channel.user(k) @ decs[k][:, i] for k, i in zip(stream_user, within)]
        return np.column_stack(cols)

    trace = []
    best = None  # (smse, F, q, decoders)
    warm = None
    converged = False
    for _ in range(max_iters):
        F = effective(decoders)
        alloc = allocate_power(F, P_max, sigma2, 0.0, q0=warm)
        warm = alloc.q
        smse = smse_closed_form(F, alloc.q, sigma2, 0.0)
        if best is not None and smse > best[0] + 1e-12:
            converged = True  # alternation stalled; keep the best iterate
            break
        trace.append(smse)
        best = (smse, F, alloc.q, [d.copy() for d in decoders])
        if len(trace) > 1 and trace[-2] - trace[-1] < tol * max(trace[-2], 1e-12):
            converged = True
            break
        U = precoder_from_powers(F, alloc.q, sigma2, 0.0)
        for stream, (k, i) in enumerate(zip(stream_user, within)):
            decoders[k][:, i] = mmse_data_decoder(
                channel.user(k), U, alloc.q, sigma2, stream
            )
    if not converged:
        raise ConvergenceError(f"no monotone stall within {max_iters} alternations")

    smse, F, q, decoders = best
    U = precoder_from_powers(F, q, sigma2, 0.0)
    solution = PrecoderSolution(
        U=U, q=q, p=q.copy(), sigma2=sigma2, sigma2_E=0.0,
        J=build_J(F, q, sigma2, 0.0), smse=smse,
    )
    return solution, decoders, tuple(trace)


def sigma_e_schedule(snr_db, B, M, N_k, stream_index=1, interpolation="db"):
    """Assumed quantization-error variance at a given operating SNR.

    Anchored at ``2^(-B/(M-1))`` for SNR <= 0 dB and at
    ``i * 2^(-B/(M-N_k))`` (stream ``i`` of an ``N_k``-antenna user) for
    SNR >= 30 dB, interpolating linearly in dB (or in watts with
    ``interpolation="watt"``) between the anchors.  Single-antenna users have
    no combining freedom, so the value is the low-SNR constant throughout.
    """
    if stream_index < 1:
        raise DimensionError("stream_index is 1-based")
    if M < 2:
        raise DimensionError("schedule requires M >= 2")
    low = 2.0 ** (-B / (M - 1))
    if N_k == 1:
        return low
    if M <= N_k:
        raise DimensionError("high-SNR anchor requires M > N_k")
    high = stream_index * 2.0 ** (-B / (M - N_k))
    if snr_db <= 0.0:
        return low
    if snr_db >= 30.0:
        return high
    if interpolation == "db":
        frac = snr_db / 30.0
    elif interpolation == "watt":
        frac = (10.0 ** (snr_db / 10.0) - 1.0) / (10.0**3 - 1.0)
    else:
        raise ValueError(f"unknown interpolation {interpolation!r}")
    return low + (high - low) * frac

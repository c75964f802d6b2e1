"""Receiver-side algorithms: quantization-time combining and data decoding.

At quantization time each user converts its MIMO channel into one effective
MISO direction per data stream and reports the codebook index of each
direction.  The proposed selection maximizes the expected downlink SINR of
each stream (one stream at a time), predicting the base-station precoder from
the user's own reported directions while treating every other user's
direction as orthogonal.  MET, QBC and eigen-direction combining are provided
as baselines.  For actual data detection every user applies an MMSE decoder
built from the final precoder and power allocation.
"""

from dataclasses import dataclass

import numpy as np

from .codebook import quantize_direction
from .errors import DimensionError, RankDeficient

__all__ = [
    "ReceiverAssumptions",
    "FeedbackReport",
    "expected_precoder",
    "stream_sinr",
    "mesc_combine_user",
    "met_combine",
    "qbc_combine",
    "eigen_combine",
    "mmse_data_decoder",
    "mmse_decoder_block",
]

_RANK_RTOL = 1e-10


@dataclass(frozen=True)
class ReceiverAssumptions:
    """Quantities every user assumes known when predicting its SINR.

    ``P`` is the total downlink power, split equally over all ``L`` streams
    for the purpose of receive combining; ``sigma2_E`` is the quantization
    error variance the base station will assume (broadcast to the users).
    """

    P: float
    L: int
    M: int
    sigma2: float
    sigma2_E: float = 0.0

    def __post_init__(self):
        if self.P <= 0 or self.sigma2 <= 0 or self.sigma2_E < 0:
            raise DimensionError("powers and variances must be positive")
        if self.L < 1 or self.M < 1:
            raise DimensionError("L and M must be at least 1")

    @property
    def stream_power(self):
        return self.P / self.L

    @property
    def regularizer(self):
        """Diagonal loading of the predicted precoder: sigma^2 + sigma_E^2 P / M."""
        return self.sigma2 + self.sigma2_E * self.P / self.M


@dataclass(frozen=True)
class FeedbackReport:
    """Per-stream feedback of one user: codeword indices plus receiver state."""

    indices: tuple
    combiners: np.ndarray  # (N_k, L_k), unit-norm columns
    sin2_theta: tuple
    predicted_sinr: tuple = None
    sinr_evaluations: int = 0

    def __post_init__(self):
        v = np.asarray(self.combiners, dtype=complex)
        object.__setattr__(self, "combiners", v)
        if v.ndim != 2 or v.shape[1] != len(self.indices):
            raise DimensionError("need one combiner column per reported stream")
        norms = np.linalg.norm(v, axis=0)
        if np.any(np.abs(norms - 1.0) > 1e-12):
            raise DimensionError("combiners must be unit norm")

    @property
    def n_streams(self):
        return len(self.indices)


def _as_columns(vectors, M):
    if not vectors:
        return np.zeros((M, 0), dtype=complex)
    return np.column_stack([np.asarray(v, dtype=complex).reshape(-1) for v in vectors])


def expected_precoder(own_quantized, stream, assumptions):
    """Receiver-side prediction of the precoder for one of its own streams.

    ``own_quantized`` holds the user's reported unit-norm directions as
    columns; all other users' directions are assumed orthogonal to them, so
    they drop out of the matrix-inversion-lemma expansion and only the
    diagonal loading ``sigma^2 + sigma_E^2 P / M`` survives.  Powers are the
    equal split ``P / L``.  The returned vector is unit norm.
    """
    F = np.asarray(own_quantized, dtype=complex)
    if F.ndim != 2:
        raise DimensionError("own_quantized must be an M x L_k matrix")
    M, n_own = F.shape
    if not 0 <= stream < n_own:
        raise DimensionError(f"stream {stream} out of range for {n_own} reported streams")
    c = assumptions.regularizer
    rho = assumptions.stream_power
    f = F[:, stream]
    # Woodbury expansion of (rho F F^H + c I)^{-1} f.
    gram = F.conj().T @ F
    inner = np.eye(n_own) / rho + gram / c
    u = f / c - (F @ np.linalg.solve(inner, F.conj().T @ f)) / c**2
    return u / np.linalg.norm(u)


def _interference_matrix(H, candidate, earlier_precoders, n_orth, assumptions):
    """The candidate's expected interference covariance (before noise)."""
    M, _ = H.shape
    rho = assumptions.stream_power
    inner = np.zeros((M, M), dtype=complex)
    for u in earlier_precoders:
        u = np.asarray(u, dtype=complex).reshape(-1)
        inner += np.outer(u, u.conj())
    if n_orth:
        if M < 2:
            raise DimensionError("orthogonal interference requires M >= 2")
        coeff = n_orth / (M - 1)
        inner += coeff * (np.eye(M) - np.outer(candidate, candidate.conj()))
    return rho * (H.conj().T @ inner @ H)


def stream_sinr(H_k, candidate, earlier_quantized, earlier_precoders, n_orth,
                assumptions):
    """Expected downlink SINR of a candidate codeword for the current stream.

    ``earlier_quantized``/``earlier_precoders`` are the already-chosen
    directions and their (fixed) predicted precoders for this user's earlier
    streams; ``n_orth`` counts the streams still assumed orthogonal, each
    contributing ``1/(M-1)`` of the residual-error interference.  The inner
    maximization over the unit-norm combiner is the MMSE detector, giving

        SINR = (P/L) u^H H (sigma^2 I + B)^{-1} H^H u.
    """
    H = np.asarray(H_k, dtype=complex)
    w = np.asarray(candidate, dtype=complex).reshape(-1)
    if H.ndim != 2 or w.shape[0] != H.shape[0]:
        raise DimensionError("candidate dimension must match transmit antennas")
    own = _as_columns(list(earlier_quantized) + [w], H.shape[0])
    u = expected_precoder(own, own.shape[1] - 1, assumptions)
    B = _interference_matrix(H, w, earlier_precoders, n_orth, assumptions)
    A = assumptions.sigma2 * np.eye(H.shape[1]) + B
    b = H.conj().T @ u
    return float(assumptions.stream_power * np.real(b.conj() @ np.linalg.solve(A, b)))


def _mesc_step(H, W, earlier_quantized, earlier_precoders, n_orth, assumptions):
    """Vectorized SINR of every candidate codeword at one sequential step.

    Returns ``(sinrs, u_candidates)`` with one row per codeword.  Uses the
    fact that the candidate only enters the predicted-precoder matrix through
    a rank-one term, so a single base solve plus Sherman-Morrison per
    candidate covers the whole codebook.
    """
    M, N = H.shape
    rho = assumptions.stream_power
    c = assumptions.regularizer
    E = _as_columns(earlier_quantized, M)
    Ue = _as_columns(earlier_precoders, M)

    base = c * np.eye(M) + rho * (E @ E.conj().T)
    u_raw = np.linalg.solve(base, W.T).T  # J_own^{-1} w up to a positive scalar
    u_cand = u_raw / np.linalg.norm(u_raw, axis=1, keepdims=True)

    G = H.conj().T @ H
    D = assumptions.sigma2 * np.eye(N) + rho * ((H.conj().T @ Ue) @ (Ue.conj().T @ H))
    coeff = 0.0
    if n_orth:
        if M < 2:
            raise DimensionError("orthogonal interference requires M >= 2")
        coeff = n_orth / (M - 1)
        D = D + rho * coeff * G
    Z = np.linalg.inv(D)

    A = H.conj().T @ W.T  # (N, n_cand): effective candidate channels
    Bv = H.conj().T @ u_cand.T
    ZA = Z @ A
    ZB = Z @ Bv
    sbb = np.real(np.sum(Bv.conj() * ZB, axis=0))
    if coeff:
        saa = np.real(np.sum(A.conj() * ZA, axis=0))
        sab = np.sum(A.conj() * ZB, axis=0)
        denom = np.maximum(1.0 - rho * coeff * saa, 1e-300)
        sinrs = rho * (sbb + rho * coeff * np.abs(sab) ** 2 / denom)
    else:
        sinrs = rho * sbb
    return sinrs, u_cand


def mesc_combine_user(H_k, codebook, L_k, assumptions):
    """Sequential max-expected-SINR selection of ``L_k`` codewords for one user.

    Stream ``t`` scans the full codebook with the ``t-1`` earlier predicted
    precoders held fixed and ``L - t`` streams still assumed orthogonal, for
    exactly ``L_k * 2^B`` SINR evaluations in total.  The report carries, per
    stream, the chosen index, the MMSE combiner and predicted SINR under the
    final interference matrix (all own-stream precoders fixed, coefficient
    ``(L - L_k)/(M - 1)``), and the resulting quantization angle.
    """
    H = np.asarray(H_k, dtype=complex)
    M, N = H.shape
    if L_k > N:
        raise DimensionError(f"L_k={L_k} exceeds receive antennas N_k={N}")
    if L_k < 1:
        raise DimensionError("L_k must be at least 1")
    W = codebook.vectors

    chosen = []
    chosen_w = []
    fixed_u = []
    evaluations = 0
    for t in range(1, L_k + 1):
        sinrs, u_cand = _mesc_step(H, W, chosen_w, fixed_u, assumptions.L - t,
                                   assumptions)
        evaluations += len(codebook)
        best = int(np.argmax(sinrs))
        chosen.append(best)
        chosen_w.append(W[best])
        fixed_u.append(u_cand[best])

    indices = tuple(chosen)
    combiners = np.zeros((N, L_k), dtype=complex)
    sinr_final = []
    sin2 = []
    rho = assumptions.stream_power
    n_orth_final = assumptions.L - L_k
    for i in range(L_k):
        others = [fixed_u[j] for j in range(L_k) if j != i]
        B = _interference_matrix(H, chosen_w[i], others, n_orth_final, assumptions)
        A = assumptions.sigma2 * np.eye(N) + B
        b = H.conj().T @ fixed_u[i]
        sol = np.linalg.solve(A, b)
        sinr_final.append(float(rho * np.real(b.conj() @ sol)))
        v = sol / np.linalg.norm(sol)
        combiners[:, i] = v
        f_eff = H @ v
        cos = np.abs(f_eff.conj() @ chosen_w[i]) / np.linalg.norm(f_eff)
        sin2.append(max(1.0 - min(float(cos), 1.0) ** 2, 0.0))

    return FeedbackReport(indices=indices, combiners=combiners,
                          sin2_theta=tuple(sin2), predicted_sinr=tuple(sinr_final),
                          sinr_evaluations=evaluations)


def met_combine(H_k, codebook, L_k=1):
    """Combine along the channel's dominant singular direction (single stream)."""
    if L_k != 1:
        raise DimensionError("MET combining is defined for a single stream")
    H = np.asarray(H_k, dtype=complex)
    _, _, vh = np.linalg.svd(H)
    v = vh[0].conj()
    result = quantize_direction(H @ v, codebook)
    return FeedbackReport(indices=(result.index,), combiners=v[:, None],
                          sin2_theta=(result.sin2_theta,))


def qbc_combine(H_k, codebook, L_k):
    """Pick the ``L_k`` codewords with least quantization error in the channel.

    The error of a codeword is its squared chordal distance to the column
    space of ``H_k``; stream ``i`` takes the codeword with the ``i``-th
    smallest error and steers the effective channel onto the codeword's
    projection via a least-squares combiner.
    """
    H = np.asarray(H_k, dtype=complex)
    u_svd, s, _ = np.linalg.svd(H)
    rank = int(np.sum(s > (s[0] if s.size else 0.0) * _RANK_RTOL))
    if rank < L_k:
        raise RankDeficient(f"channel rank {rank} below L_k={L_k}")
    basis = u_svd[:, :rank]
    gains = np.sum(np.abs(codebook.vectors @ basis.conj()) ** 2, axis=1)
    errs = np.maximum(1.0 - gains, 0.0)
    order = np.argsort(errs, kind="stable")[:L_k]

    Hp = np.linalg.pinv(H)
    combiners = np.zeros((H.shape[1], L_k), dtype=complex)
    for i, n in enumerate(order):
        v = Hp @ codebook.vectors[n]
        combiners[:, i] = v / np.linalg.norm(v)
    return FeedbackReport(indices=tuple(int(n) for n in order), combiners=combiners,
                          sin2_theta=tuple(float(errs[n]) for n in order))


def eigen_combine(H_k, codebook, L_k):
    """Project onto the ``L_k`` dominant singular directions, quantize each."""
    H = np.asarray(H_k, dtype=complex)
    _, s, vh = np.linalg.svd(H)
    rank = int(np.sum(s > (s[0] if s.size else 0.0) * _RANK_RTOL))
    if rank < L_k:
        raise RankDeficient(f"channel rank {rank} below L_k={L_k}")
    indices = []
    sin2 = []
    combiners = np.zeros((H.shape[1], L_k), dtype=complex)
    for i in range(L_k):
        v = vh[i].conj()
        combiners[:, i] = v
        result = quantize_direction(H @ v, codebook)
        indices.append(result.index)
        sin2.append(result.sin2_theta)
    return FeedbackReport(indices=tuple(indices), combiners=combiners,
                          sin2_theta=tuple(sin2))


def mmse_data_decoder(H_k, U, p, sigma2, stream):
    """Unit-norm MMSE decoding direction for one stream at data time.

    Solves ``(H^H U P U^H H + sigma^2 I) v = H^H u_i``; the per-stream
    amplitude ``sqrt(p_i)`` only scales the solution and is removed by the
    normalization.
    """
    H = np.asarray(H_k, dtype=complex)
    G = mmse_decoder_block(H, U, p, sigma2, [stream], unit_scale=True)
    v = G[:, 0]
    norm = np.linalg.norm(v)
    if norm == 0.0:
        # Degenerate stream (u_i orthogonal to the channel); any direction works.
        v = np.zeros(H.shape[1], dtype=complex)
        v[0] = 1.0
        return v
    return v / norm


def mmse_decoder_block(H_k, U, p, sigma2, streams, unit_scale=False):
    """MMSE decoders (columns) for several streams, keeping the MMSE amplitude.

    With ``unit_scale`` the ``sqrt(p_i)`` factors are dropped, which leaves
    the directions untouched but avoids collapsing zero-power streams.
    """
    H = np.asarray(H_k, dtype=complex)
    U = np.asarray(U, dtype=complex)
    p = np.asarray(p, dtype=float)
    if np.any(p < 0):
        raise DimensionError("stream powers must be non-negative")
    He = H.conj().T @ U  # (N_k, L) effective downlink channel per stream
    R = (He * p) @ He.conj().T + sigma2 * np.eye(H.shape[1])
    rhs = He[:, list(streams)]
    if not unit_scale:
        rhs = rhs * np.sqrt(p[list(streams)])
    return np.linalg.solve(R, rhs)

"""Direction-quantization codebooks trained on the mean squared inner product.

A codebook holds ``2^B`` unit-norm complex ``M``-vectors.  Training is a
Lloyd alternation on a large set of random unit directions: vectors are
partitioned by the codeword with the largest squared inner product, then each
codeword moves to the principal eigenvector of its cell's outer-product sum.
Both steps can only grow the empirical mean squared inner product, so the
recorded per-iteration trace is non-decreasing.

Quantization of a direction picks the codeword with the smallest chordal
distance ``sin^2(angle)``, equivalently the largest ``|<f, w>|``; the result
is invariant to any complex scaling of the input.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, FormatError, InsufficientTraining, ZeroVector

__all__ = [
    "Codebook",
    "QuantizationResult",
    "train_msip_codebook",
    "quantize_direction",
    "msip_error_bound",
    "write_codebook",
    "read_codebook",
]

_NORM_TOL = 1e-12
_MIN_TRAIN_FACTOR = 100
_DEFAULT_TRAIN_FACTOR = 1000


@dataclass(frozen=True)
class Codebook:
    """``2^B`` unit-norm codewords in dimension ``M``, stored row-wise."""

    M: int
    B: int
    vectors: np.ndarray  # (2**B, M) complex
    msip_trace: tuple = ()  # empirical MSIP after each training iteration

    def __post_init__(self):
        vecs = np.asarray(self.vectors, dtype=complex)
        object.__setattr__(self, "vectors", vecs)
        if vecs.ndim != 2 or vecs.shape != (2**self.B, self.M):
            raise DimensionError(
                f"expected {2**self.B} codewords of dimension {self.M}, got shape {vecs.shape}"
            )
        norms = np.linalg.norm(vecs, axis=1)
        if np.any(np.abs(norms - 1.0) > _NORM_TOL):
            raise DimensionError("codewords must be unit norm")

    def __len__(self):
        return self.vectors.shape[0]


@dataclass(frozen=True)
class QuantizationResult:
    """Chosen codeword index plus the quantization angle of the input."""

    index: int
    cos_theta: float
    sin2_theta: float


def _best_match(directions, codewords, block=4096):
    """Index and squared inner product of the best codeword per direction.

    Works in row blocks so the (count x 2^B) gain matrix never materializes
    in full for large codebooks.
    """
    count = directions.shape[0]
    best_idx = np.empty(count, dtype=np.int64)
    best_gain = np.empty(count)
    wh = codewords.conj().T
    for start in range(0, count, block):
        stop = min(start + block, count)
        z = directions[start:stop] @ wh
        gains = z.real**2 + z.imag**2  # |<f, w>|^2 without the sqrt round trip
        best_idx[start:stop] = np.argmax(gains, axis=1)
        best_gain[start:stop] = np.take_along_axis(
            gains, best_idx[start:stop, None], axis=1
        )[:, 0]
    return best_idx, best_gain


def _cell_principal_vectors(directions, labels, n_cells, M):
    """Principal eigenvector of each cell's sum of outer products f f^H."""
    order = np.argsort(labels, kind="stable")
    sorted_dirs = directions[order]
    counts = np.bincount(labels, minlength=n_cells)
    bounds = np.concatenate(([0], np.cumsum(counts)))
    principal = np.zeros((n_cells, M), dtype=complex)
    for n in range(n_cells):
        lo, hi = bounds[n], bounds[n + 1]
        if lo == hi:
            continue
        cell = sorted_dirs[lo:hi]
        cov = cell.T @ cell.conj()  # sum of f f^H over the cell
        _, eigvecs = np.linalg.eigh(cov)
        vec = eigvecs[:, -1]
        principal[n] = vec / np.linalg.norm(vec)
    return principal, counts


def train_msip_codebook(M, B, training_count=None, max_iterations=200,
                        tolerance=1e-6, rng=None):
    """Train a ``2^B``-codeword MSIP codebook in dimension ``M``.

    Parameters
    ----------
    training_count : number of random unit training directions; defaults to
        ``1000 * 2^B`` and must be at least ``100 * 2^B``.
    max_iterations : Lloyd iteration cap.
    tolerance : stop once the relative MSIP improvement drops below this.
    rng : :class:`~lfmimo.system.SeededRng` supplying the training set and
        the initial codewords.
    """
    if M < 1:
        raise DimensionError("codeword dimension M must be at least 1")
    if B < 0:
        raise DimensionError("feedback bits B must be non-negative")
    if rng is None:
        raise ValueError("an explicit rng is required for reproducible training")
    n_codes = 2**B
    if training_count is None:
        training_count = _DEFAULT_TRAIN_FACTOR * n_codes
    if training_count < _MIN_TRAIN_FACTOR * n_codes:
        raise InsufficientTraining(
            f"training_count={training_count} below {_MIN_TRAIN_FACTOR}*2^B={_MIN_TRAIN_FACTOR * n_codes}"
        )

    train = rng.unit_directions(training_count, M)
    # Initialize from a random subset of the training set.
    init_idx = rng.generator.choice(training_count, size=n_codes, replace=False)
    codewords = train[init_idx].copy()

    trace = []
    for _ in range(max_iterations):
        labels, gains = _best_match(train, codewords)
        trace.append(float(np.mean(gains)))
        if len(trace) > 1:
            improvement = (trace[-1] - trace[-2]) / max(trace[-2], 1e-300)
            if improvement < tolerance:
                break
        updated, counts = _cell_principal_vectors(train, labels, n_codes, M)
        keep = counts > 0
        codewords[keep] = updated[keep]
        empty = np.flatnonzero(~keep)
        if empty.size:
            # Reseed empty cells with the worst-served training vectors.
            worst = np.argsort(gains)[: empty.size]
            codewords[empty] = train[worst]

    return Codebook(M=M, B=B, vectors=codewords, msip_trace=tuple(trace))


def quantize_direction(f, codebook):
    """Quantize a nonzero direction by minimum chordal distance.

    Ties are broken toward the lowest codeword index.  The selected index,
    ``cos(theta)`` and ``sin^2(theta)`` are returned; theta is the angle
    between the input direction and the chosen codeword.
    """
    f = np.asarray(f, dtype=complex).reshape(-1)
    norm = np.linalg.norm(f)
    if norm == 0.0:
        raise ZeroVector("cannot quantize the zero vector")
    if f.shape[0] != codebook.M:
        raise DimensionError(f"direction has dimension {f.shape[0]}, codebook {codebook.M}")
    fbar = f / norm
    gains = np.abs(codebook.vectors @ fbar.conj())
    index = int(np.argmax(gains))  # argmax returns the first (lowest) index on ties
    cos_theta = min(float(gains[index]), 1.0)
    return QuantizationResult(index=index, cos_theta=cos_theta,
                              sin2_theta=max(1.0 - cos_theta**2, 0.0))


def msip_error_bound(M, B):
    """Upper bound ``2^(-B/(M-1))`` on the expected quantization error."""
    if M < 2:
        raise DimensionError("error bound requires M >= 2")
    return 2.0 ** (-B / (M - 1))


def write_codebook(codebook, path):
    """Write a codebook as line-oriented text (see :func:`read_codebook`)."""
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(f"MSIPCB 1 {codebook.M} {codebook.B}\n")
        for row in codebook.vectors:
            parts = []
            for z in row:
                parts.append(f"{z.real:.17g}")
                parts.append(f"{z.imag:.17g}")
            fh.write(" ".join(parts) + "\n")


def read_codebook(path):
    """Read a codebook written by :func:`write_codebook`.

    Format: header line ``MSIPCB 1 <M> <B>`` followed by ``2^B`` lines of
    ``2M`` decimal floats, the real and imaginary parts interleaved.
    """
    with open(path, "r", encoding="ascii") as fh:
        header = fh.readline().split()
        if len(header) != 4 or header[0] != "MSIPCB" or header[1] != "1":
            raise FormatError(f"{path}: bad codebook header")
        try:
            M, B = int(header[2]), int(header[3])
        except ValueError as exc:
            raise FormatError(f"{path}: non-integer dimensions in header") from exc
        if M < 1 or B < 0:
            raise FormatError(f"{path}: invalid dimensions in header")
        rows = []
        for line in fh:
            if not line.strip():
                continue
            try:
                values = [float(tok) for tok in line.split()]
            except ValueError as exc:
                raise FormatError(f"{path}: non-numeric codeword entry") from exc
            if len(values) != 2 * M:
                raise FormatError(
                    f"{path}: row has {len(values)} values, expected {2 * M}"
                )
            flat = np.asarray(values)
            rows.append(flat[0::2] + 1j * flat[1::2])
    if len(rows) != 2**B:
        raise FormatError(f"{path}: found {len(rows)} codewords, expected {2**B}")
    return Codebook(M=M, B=B, vectors=np.asarray(rows))

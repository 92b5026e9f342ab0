"""Matrix stand-ins for unitaries in a tracial von Neumann algebra.

Unitaries are plain complex ``ndarray`` objects; :func:`check_unitary` is the
validation gate. The trace is always the normalized trace ``tr(A) / N``.

Random streams
--------------
Every random draw comes from :func:`derive_rng`, which maps a 64-bit master
seed and a path of small integers to an independent ``numpy`` generator via
``SeedSequence(entropy=seed, spawn_key=path)``. The first path entry names the
consumer (see ``STREAMS``); later entries are counters such as the stage index
and retry number. Replaying any piece of an experiment only needs the master
seed and the path.
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np
import scipy.linalg as sla

from .circle_measure import CircleMeasure, normalize_angles

__all__ = [
    "STREAMS",
    "SpectralError",
    "HermitianGenerator",
    "check_seed",
    "derive_rng",
    "check_unitary",
    "reunitarize",
    "sample_haar_unitary",
    "unitary_eig",
    "eigen_angles",
    "spectral_measure",
    "functional_calculus",
    "principal_log_generator",
    "two_norm",
    "normalized_trace",
    "diag_unitary",
    "save_matrix",
    "load_matrix",
]

STREAMS = {
    "haar": 1,
    "ladder": 2,
    "sampler": 3,
    "probe": 4,
    "instance": 5,
}

UNITARY_TOL = 1e-10
_DRIFT_TOL = 1e-12
_MAGIC = b"UCMX"
_FORMAT_VERSION = 1


class SpectralError(ArithmeticError):
    """Eigensolver failure, carrying the unitarity defect of the input."""

    def __init__(self, message: str, unitarity_defect: float):
        super().__init__(f"{message} (max |U*U - I| = {unitarity_defect:.3e})")
        self.unitarity_defect = unitarity_defect


def check_seed(seed) -> int:
    seed = int(seed)
    if not 0 <= seed < 2**64:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return seed


def derive_rng(seed: int, stream: str, *counters: int) -> np.random.Generator:
    """Independent generator for ``(seed, stream, *counters)``."""
    key = (STREAMS[stream],) + tuple(int(c) for c in counters)
    return np.random.default_rng(np.random.SeedSequence(entropy=check_seed(seed), spawn_key=key))


def _unitarity_defect(U: np.ndarray) -> float:
    n = U.shape[0]
    return float(np.max(np.abs(U.conj().T @ U - np.eye(n))))


def check_unitary(U, tol: float = UNITARY_TOL) -> np.ndarray:
    """Validate a square complex matrix with ``max|U*U - I| <= tol``."""
    U = np.asarray(U)
    if U.ndim != 2 or U.shape[0] != U.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {U.shape}")
    U = U.astype(complex, copy=False)
    defect = _unitarity_defect(U)
    if defect > tol:
        raise ValueError(f"matrix is not unitary: max |U*U - I| = {defect:.3e}")
    return U


def reunitarize(U: np.ndarray, force: bool = False) -> np.ndarray:
    """Project onto the nearest unitary (polar factor) if drift exceeds 1e-12."""
    if not force and _unitarity_defect(U) <= _DRIFT_TOL:
        return U
    W, _, Vh = np.linalg.svd(U)
    return W @ Vh


def sample_haar_unitary(N: int, seed: int, *counters: int, stream: str = "haar") -> np.ndarray:
    """Haar-distributed ``N x N`` unitary, deterministic per ``(N, seed, stream, counters)``.

    QR of a complex Ginibre matrix, with the phases of R's diagonal moved into
    Q so that R has positive real diagonal.
    """
    N = int(N)
    if N < 1:
        raise ValueError("N must be >= 1")
    rng = derive_rng(seed, stream, N, *counters)
    Z = (rng.standard_normal((N, N)) + 1j * rng.standard_normal((N, N))) / np.sqrt(2.0)
    Q, R = np.linalg.qr(Z)
    d = np.diag(R)
    return Q * (d / np.abs(d))


def unitary_eig(U: np.ndarray):
    """Angles (turns) and a unitary eigenbasis of a normal matrix.

    Uses the complex Schur form, which stays orthonormal for repeated
    eigenvalues where a general eigensolver would not.
    """
    try:
        T, Z = sla.schur(U, output="complex")
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise SpectralError(f"Schur decomposition failed: {exc}", _unitarity_defect(U)) from exc
    lam = np.diag(T)
    if not np.all(np.isfinite(lam)):
        raise SpectralError("non-finite eigenvalues", _unitarity_defect(U))
    return normalize_angles(np.angle(lam) / (2 * np.pi)), Z


def eigen_angles(U: np.ndarray) -> np.ndarray:
    """Eigenvalue angles in turns, with multiplicity (no eigenvectors)."""
    try:
        lam = np.linalg.eigvals(U)
    except np.linalg.LinAlgError as exc:
        raise SpectralError(f"eigenvalue computation failed: {exc}", _unitarity_defect(U)) from exc
    if not np.all(np.isfinite(lam)):
        raise SpectralError("non-finite eigenvalues", _unitarity_defect(U))
    return normalize_angles(np.angle(lam) / (2 * np.pi))


def spectral_measure(U: np.ndarray) -> CircleMeasure:
    """Empirical eigenvalue distribution, one atom of mass 1/N per eigenvalue."""
    return CircleMeasure(eigen_angles(U))


def diag_unitary(angles) -> np.ndarray:
    return np.diag(np.exp(2j * np.pi * np.asarray(angles, dtype=float)))


def _rebuild(Z: np.ndarray, angles: np.ndarray) -> np.ndarray:
    out = (Z * np.exp(2j * np.pi * angles)) @ Z.conj().T
    return reunitarize(out)


def functional_calculus(U: np.ndarray, fmap: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    """Apply a circle map (acting on angles in turns) to a unitary."""
    theta, Z = unitary_eig(U)
    return _rebuild(Z, np.asarray(fmap(theta), dtype=float))


@dataclass(frozen=True, eq=False)
class HermitianGenerator:
    """Self-adjoint ``X`` with ``||X|| <= 1``, kept in diagonal form ``Z diag(lam) Z*``."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def __post_init__(self):
        lam = np.asarray(self.eigenvalues, dtype=float)
        if np.max(np.abs(lam), initial=0.0) > 1 + 1e-10:
            raise ValueError("generator operator norm exceeds 1")
        lam.setflags(write=False)
        object.__setattr__(self, "eigenvalues", lam)

    @property
    def dim(self) -> int:
        return self.eigenvalues.size

    @property
    def matrix(self) -> np.ndarray:
        Z = self.eigenvectors
        X = (Z * self.eigenvalues) @ Z.conj().T
        return (X + X.conj().T) / 2

    def exp_pi_i(self, s: float = 1.0) -> np.ndarray:
        """``exp(pi i s X)``."""
        Z = self.eigenvectors
        return (Z * np.exp(1j * np.pi * s * self.eigenvalues)) @ Z.conj().T


def principal_log_generator(V: np.ndarray) -> HermitianGenerator:
    """``X`` with ``exp(pi i X) = V`` on the principal branch.

    An eigenphase of ``theta`` turns, theta in (-1/2, 1/2], becomes the
    eigenvalue ``2 theta`` of X; in particular -1 maps to +1.
    """
    theta, Z = unitary_eig(V)
    return HermitianGenerator(2.0 * theta, Z)


def normalized_trace(A: np.ndarray) -> complex:
    return complex(np.trace(A)) / A.shape[0]


def two_norm(A: np.ndarray) -> float:
    """``tau(A* A) ** 0.5`` for the normalized trace."""
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("two_norm needs a square matrix")
    return float(np.linalg.norm(A) / np.sqrt(A.shape[0]))


def save_matrix(path, A: np.ndarray, lineage: dict | None = None) -> None:
    """Write ``A`` as a binary container plus a ``.json`` sidecar.

    Layout: 4-byte magic ``UCMX``, uint32 version, two uint64 dimensions, then
    row-major (real, imag) pairs as little-endian float64.
    """
    path = Path(path)
    A = np.ascontiguousarray(A, dtype="<c16")
    rows, cols = A.shape
    with open(path, "wb") as fh:
        fh.write(_MAGIC + struct.pack("<IQQ", _FORMAT_VERSION, rows, cols))
        fh.write(A.tobytes(order="C"))
    sidecar = {"format": "UCMX", "version": _FORMAT_VERSION, "shape": [rows, cols], "lineage": lineage or {}}
    path.with_suffix(path.suffix + ".json").write_text(json.dumps(sidecar, indent=2, sort_keys=True))


def load_matrix(path):
    """Inverse of :func:`save_matrix`; returns ``(matrix, lineage)``."""
    path = Path(path)
    raw = path.read_bytes()
    if raw[:4] != _MAGIC:
        raise ValueError(f"{path} is not a UCMX matrix file")
    version, rows, cols = struct.unpack("<IQQ", raw[4:24])
    if version != _FORMAT_VERSION:
        raise ValueError(f"unsupported UCMX version {version}")
    data = np.frombuffer(raw[24:], dtype="<c16")
    if data.size != rows * cols:
        raise ValueError("truncated matrix payload")
    sidecar = path.with_suffix(path.suffix + ".json")
    lineage = json.loads(sidecar.read_text())["lineage"] if sidecar.exists() else {}
    return data.reshape(rows, cols).astype(complex), lineage

"""Finite-dimensional operator algebra on tensor-product Hilbert spaces.

Everything here is a plain complex matrix tagged with the space it acts on.
Operators pick a sparse (CSR) or dense representation automatically based on
how many entries are nonzero; the two representations are semantically
identical and tests never depend on which one is in use.  All objects are
immutable after construction and safe to share between threads.
"""

from __future__ import annotations

from typing import Iterable, Mapping, Sequence, Union

import numpy as np
import scipy.sparse as sp

__all__ = [
    "HilbertSpace",
    "Operator",
    "DensityMatrix",
    "annihilation",
    "transition",
    "projector",
    "embed",
    "expectation",
    "partial_trace",
]

MatrixLike = Union[np.ndarray, sp.spmatrix]

# Operators denser than this fraction of nonzeros are stored dense.
_SPARSE_DENSITY_CUTOFF = 0.25
_SPARSE_MIN_DIM = 8


class HilbertSpace:
    """An ordered tensor product of finite-dimensional factors.

    Parameters
    ----------
    factors : iterable of (label, dim)
        Factor labels must be unique and every dimension must be >= 2.
        The order given here fixes the Kronecker-product convention for
        every operator on the space.
    """

    __slots__ = ("_factors", "_dim")

    def __init__(self, factors: Iterable[tuple[str, int]]):
        factors = tuple((str(lab), int(dim)) for lab, dim in factors)
        if not factors:
            raise ValueError("a HilbertSpace needs at least one factor")
        labels = [lab for lab, _ in factors]
        if len(set(labels)) != len(labels):
            raise ValueError(f"factor labels must be unique, got {labels}")
        for lab, dim in factors:
            if dim < 2:
                raise ValueError(f"factor {lab!r} has dim {dim}, need >= 2")
        self._factors = factors
        dim = 1
        for _, d in factors:
            dim *= d
        self._dim = dim

    @classmethod
    def single(cls, label: str, dim: int) -> "HilbertSpace":
        return cls([(label, dim)])

    @property
    def factors(self) -> tuple[tuple[str, int], ...]:
        return self._factors

    @property
    def dim(self) -> int:
        """Total dimension (product of factor dims)."""
        return self._dim

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(lab for lab, _ in self._factors)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(d for _, d in self._factors)

    def axis(self, label: str) -> int:
        for i, (lab, _) in enumerate(self._factors):
            if lab == label:
                return i
        raise KeyError(f"no factor labeled {label!r} in {self.labels}")

    def factor_dim(self, label: str) -> int:
        return self._factors[self.axis(label)][1]

    def __eq__(self, other) -> bool:
        return isinstance(other, HilbertSpace) and self._factors == other._factors

    def __hash__(self) -> int:
        return hash(self._factors)

    def __repr__(self) -> str:
        body = " * ".join(f"{lab}({d})" for lab, d in self._factors)
        return f"HilbertSpace[{body}]"


def _as_csr(m: MatrixLike) -> sp.csr_matrix:
    if sp.issparse(m):
        return m.tocsr().astype(complex)
    return sp.csr_matrix(np.asarray(m, dtype=complex))


def _choose_repr(m: MatrixLike) -> MatrixLike:
    """Pick CSR or dense storage by nonzero density."""
    if sp.issparse(m):
        m = m.tocsr()
        m.eliminate_zeros()
        n = m.shape[0]
        if n < _SPARSE_MIN_DIM or m.nnz > _SPARSE_DENSITY_CUTOFF * n * n:
            return np.asarray(m.todense(), dtype=complex)
        m.sort_indices()
        return m.astype(complex)
    m = np.asarray(m, dtype=complex)
    n = m.shape[0]
    if n >= _SPARSE_MIN_DIM:
        nnz = np.count_nonzero(m)
        if nnz <= _SPARSE_DENSITY_CUTOFF * n * n:
            return sp.csr_matrix(m)
    return m


class Operator:
    """A linear operator on a :class:`HilbertSpace`.

    Hermiticity and unitarity are checkable predicates (with explicit
    tolerances), never stored flags.
    """

    __slots__ = ("_space", "_m")

    def __init__(self, space: HilbertSpace, matrix: MatrixLike):
        m = _choose_repr(matrix)
        if m.shape != (space.dim, space.dim):
            raise ValueError(
                f"matrix shape {m.shape} does not match space dim {space.dim}")
        self._space = space
        self._m = m

    @classmethod
    def identity(cls, space: HilbertSpace) -> "Operator":
        return cls(space, sp.identity(space.dim, dtype=complex, format="csr"))

    @classmethod
    def zero(cls, space: HilbertSpace) -> "Operator":
        return cls(space, sp.csr_matrix((space.dim, space.dim), dtype=complex))

    @property
    def space(self) -> HilbertSpace:
        return self._space

    @property
    def dim(self) -> int:
        return self._space.dim

    def dense(self) -> np.ndarray:
        if sp.issparse(self._m):
            return np.asarray(self._m.todense())
        return self._m.copy()

    def csr(self) -> sp.csr_matrix:
        return _as_csr(self._m)

    @property
    def is_sparse(self) -> bool:
        return sp.issparse(self._m)

    def _check_space(self, other: "Operator"):
        if self._space != other._space:
            raise ValueError(
                f"operator space mismatch: {self._space} vs {other._space}")

    def __add__(self, other: "Operator") -> "Operator":
        self._check_space(other)
        return Operator(self._space, self.csr() + other.csr())

    def __sub__(self, other: "Operator") -> "Operator":
        self._check_space(other)
        return Operator(self._space, self.csr() - other.csr())

    def __neg__(self) -> "Operator":
        return Operator(self._space, -self.csr())

    def __mul__(self, scalar: complex) -> "Operator":
        if isinstance(scalar, Operator):
            raise TypeError("use @ for operator products")
        return Operator(self._space, self.csr() * complex(scalar))

    __rmul__ = __mul__

    def __truediv__(self, scalar: complex) -> "Operator":
        return self * (1.0 / complex(scalar))

    def __matmul__(self, other: "Operator") -> "Operator":
        self._check_space(other)
        return Operator(self._space, self.csr() @ other.csr())

    def dag(self) -> "Operator":
        return Operator(self._space, self.csr().conj().T)

    def shift(self, scalar: complex) -> "Operator":
        """self + scalar * identity."""
        return Operator(
            self._space,
            self.csr() + complex(scalar) * sp.identity(self.dim, dtype=complex, format="csr"),
        )

    def max_abs(self) -> float:
        m = self._m
        if sp.issparse(m):
            return 0.0 if m.nnz == 0 else float(np.abs(m.data).max())
        return float(np.abs(m).max()) if m.size else 0.0

    def hermiticity_defect(self) -> float:
        d = self.csr() - self.csr().conj().T
        return 0.0 if d.nnz == 0 else float(np.abs(d.data).max())

    def is_hermitian(self, tol: float = 1e-12) -> bool:
        return self.hermiticity_defect() <= tol

    def is_unitary(self, tol: float = 1e-12) -> bool:
        d = (self.csr().conj().T @ self.csr()
             - sp.identity(self.dim, dtype=complex, format="csr"))
        defect = 0.0 if d.nnz == 0 else float(np.abs(d.data).max())
        return defect <= tol

    def allclose(self, other: "Operator", tol: float = 1e-12) -> bool:
        self._check_space(other)
        d = self.csr() - other.csr()
        return d.nnz == 0 or float(np.abs(d.data).max()) <= tol

    def __repr__(self) -> str:
        kind = "sparse" if self.is_sparse else "dense"
        return f"Operator({self._space!r}, {kind}, dim={self.dim})"


class DensityMatrix:
    """A quantum state: Hermitian, unit-trace, positive matrix on a space.

    Stored dense; states are what the integrator propagates and they fill in
    almost completely under dissipative dynamics.
    """

    __slots__ = ("_space", "_m")

    def __init__(self, space: HilbertSpace, matrix: MatrixLike, validate: bool = True):
        m = np.array(np.asarray(matrix.todense()) if sp.issparse(matrix) else matrix,
                     dtype=complex)
        if m.shape != (space.dim, space.dim):
            raise ValueError(
                f"matrix shape {m.shape} does not match space dim {space.dim}")
        self._space = space
        self._m = m
        if validate:
            self.validate()

    @classmethod
    def pure(cls, space: HilbertSpace, ket: np.ndarray) -> "DensityMatrix":
        ket = np.asarray(ket, dtype=complex).reshape(-1)
        if ket.size != space.dim:
            raise ValueError(f"ket length {ket.size} != space dim {space.dim}")
        nrm = np.linalg.norm(ket)
        if nrm == 0:
            raise ValueError("zero ket")
        ket = ket / nrm
        return cls(space, np.outer(ket, ket.conj()))

    @classmethod
    def basis(cls, space: HilbertSpace, occupations: Mapping[str, int]) -> "DensityMatrix":
        """Product basis state; factors not mentioned sit in index 0."""
        idx = 0
        for lab, d in space.factors:
            k = int(occupations.get(lab, 0))
            if not 0 <= k < d:
                raise ValueError(f"index {k} out of range for factor {lab!r} (dim {d})")
            idx = idx * d + k
        ket = np.zeros(space.dim, dtype=complex)
        ket[idx] = 1.0
        return cls(space, np.outer(ket, ket.conj()))

    @property
    def space(self) -> HilbertSpace:
        return self._space

    @property
    def matrix(self) -> np.ndarray:
        return self._m

    def trace(self) -> complex:
        return complex(np.trace(self._m))

    def hermiticity_defect(self) -> float:
        return float(np.abs(self._m - self._m.conj().T).max())

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(0.5 * (self._m + self._m.conj().T)).min())

    def validate(self, trace_tol: float = 1e-8, herm_tol: float = 1e-10,
                 eig_floor: float = -1e-8) -> "DensityMatrix":
        if self.hermiticity_defect() > herm_tol:
            raise ValueError(
                f"not Hermitian: defect {self.hermiticity_defect():.3e} > {herm_tol:.1e}")
        if abs(self.trace() - 1.0) > trace_tol:
            raise ValueError(f"trace {self.trace():.12f} deviates from 1 by "
                             f"more than {trace_tol:.1e}")
        lo = self.min_eigenvalue()
        if lo < eig_floor:
            raise ValueError(f"negative eigenvalue {lo:.3e} below floor {eig_floor:.1e}")
        return self

    def __repr__(self) -> str:
        return f"DensityMatrix({self._space!r})"


def annihilation(n_trunc: int, label: str = "mode") -> Operator:
    """Truncated bosonic annihilation operator on a single Fock factor.

    Entry (n, n+1) is sqrt(n+1) for 0 <= n <= n_trunc - 2.  The truncated
    commutator identity [a, a+] = 1 - n_trunc |n_trunc-1><n_trunc-1| holds
    exactly.
    """
    if n_trunc < 2:
        raise ValueError(f"Fock truncation must be >= 2, got {n_trunc}")
    space = HilbertSpace.single(label, n_trunc)
    m = np.diag(np.sqrt(np.arange(1, n_trunc, dtype=float)), 1).astype(complex)
    return Operator(space, m)


def transition(dim: int, from_index: int, to_index: int, label: str = "atom") -> Operator:
    """Single-factor transition operator |to><from| (a projector when equal)."""
    if not (0 <= from_index < dim and 0 <= to_index < dim):
        raise ValueError(
            f"indices ({from_index}, {to_index}) out of range for dim {dim}")
    space = HilbertSpace.single(label, dim)
    m = np.zeros((dim, dim), dtype=complex)
    m[to_index, from_index] = 1.0
    return Operator(space, m)


def projector(dim: int, index: int, label: str = "atom") -> Operator:
    return transition(dim, index, index, label=label)


def embed(op: Operator, label: str, space: HilbertSpace) -> Operator:
    """Lift a single-factor operator to `space`, acting as identity elsewhere.

    The Kronecker ordering follows the factor list of `space`.
    """
    axis = space.axis(label)
    d = space.factor_dim(label)
    if op.dim != d:
        raise ValueError(
            f"operator dim {op.dim} does not match factor {label!r} dim {d}")
    left = 1
    for _, fd in space.factors[:axis]:
        left *= fd
    right = 1
    for _, fd in space.factors[axis + 1:]:
        right *= fd
    m = sp.kron(sp.identity(left, dtype=complex, format="csr"), op.csr(), format="csr")
    m = sp.kron(m, sp.identity(right, dtype=complex, format="csr"), format="csr")
    return Operator(space, m)


def expectation(rho: DensityMatrix, op: Operator) -> complex:
    """Tr(rho @ op)."""
    if rho.space != op.space:
        raise ValueError(f"space mismatch: {rho.space} vs {op.space}")
    if op.is_sparse:
        return complex(op.csr().multiply(rho.matrix.T).sum())
    return complex(np.sum(op.dense() * rho.matrix.T))


def partial_trace(rho: DensityMatrix, keep: Sequence[str]) -> DensityMatrix:
    """Reduced state on the kept factors (original factor order preserved)."""
    space = rho.space
    keep = list(keep)
    for lab in keep:
        space.axis(lab)  # raises KeyError for unknown labels
    keep_axes = sorted(space.axis(lab) for lab in set(keep))
    if len(keep_axes) != len(keep):
        raise ValueError(f"duplicate labels in keep={keep}")
    dims = space.dims
    n = len(dims)
    t = rho.matrix.reshape(dims + dims)
    # trace out every axis not kept, starting from the highest axis index
    traced = [ax for ax in range(n) if ax not in keep_axes]
    for ax in sorted(traced, reverse=True):
        t = np.trace(t, axis1=ax, axis2=ax + t.ndim // 2)
    kept_factors = [space.factors[ax] for ax in keep_axes]
    new_space = HilbertSpace(kept_factors)
    m = t.reshape(new_space.dim, new_space.dim)
    return DensityMatrix(new_space, m, validate=False)

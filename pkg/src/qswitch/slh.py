"""The (S, L, H) input-output model type and its composition algebra.

An n-port component is described by an n x n operator-valued scattering
matrix S, a length-n coupling vector L, and an internal Hamiltonian H, all
on one declared Hilbert space.  Composition never auto-embeds: callers lift
everything to the common space first, which keeps tensor-factor bookkeeping
explicit and auditable.

Conventions fixed here (and relied on by every test):

* Im{X} for operators means (X - X.dag()) / 2i.
* ``series(g2, g1)`` feeds g1's outputs into g2's inputs.
* Displacing a model can shift H by a real multiple of the identity
  relative to an equivalent series composition; the shift has no dynamical
  effect and is deliberately not normalized away.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .opalg import HilbertSpace, Operator

__all__ = [
    "SLHModel",
    "im_operator",
    "series",
    "concat",
    "displace",
    "permute_outputs",
    "permute_inputs",
    "generator",
    "identity_model",
    "source_model",
]

_H_HERMITICITY_TOL = 1e-12


def im_operator(x: Operator) -> Operator:
    """Operator imaginary part, (X - X.dag()) / 2i."""
    return (x - x.dag()) * (1.0 / 2.0j)


class SLHModel:
    """An n-port open quantum component on a fixed Hilbert space.

    S is given as a nested sequence (rows of ports) of Operators, L as a
    sequence of Operators, H as one Operator; all must live on `space`.
    H must be Hermitian within 1e-12.  Scattering-matrix unitarity is a
    checkable predicate, see :meth:`unitarity_defect`.
    """

    __slots__ = ("_space", "_S", "_L", "_H")

    def __init__(self, space: HilbertSpace, S: Sequence[Sequence[Operator]],
                 L: Sequence[Operator], H: Operator):
        n = len(L)
        S = tuple(tuple(row) for row in S)
        if len(S) != n or any(len(row) != n for row in S):
            raise ValueError(f"S must be {n}x{n} to match {n} coupling operators")
        for row in S:
            for op in row:
                if op.space != space:
                    raise ValueError("every S entry must live on the model space")
        for op in L:
            if op.space != space:
                raise ValueError("every L entry must live on the model space")
        if H.space != space:
            raise ValueError("H must live on the model space")
        defect = H.hermiticity_defect()
        if defect > _H_HERMITICITY_TOL:
            raise ValueError(f"H not Hermitian: defect {defect:.3e}")
        self._space = space
        self._S = S
        self._L = tuple(L)
        self._H = H

    @property
    def space(self) -> HilbertSpace:
        return self._space

    @property
    def n_ports(self) -> int:
        return len(self._L)

    @property
    def S(self) -> tuple[tuple[Operator, ...], ...]:
        return self._S

    @property
    def L(self) -> tuple[Operator, ...]:
        return self._L

    @property
    def H(self) -> Operator:
        return self._H

    def unitarity_defect(self) -> float:
        """max_ij || sum_k S(k,i)+ S(k,j) - delta_ij I ||_max on the full space."""
        n = self.n_ports
        eye = Operator.identity(self._space)
        worst = 0.0
        for i in range(n):
            for j in range(i, n):
                acc = Operator.zero(self._space)
                for k in range(n):
                    acc = acc + (self._S[k][i].dag() @ self._S[k][j])
                if i == j:
                    acc = acc - eye
                worst = max(worst, acc.max_abs())
        return worst

    def is_unitary(self, tol: float = 1e-10) -> bool:
        return self.unitarity_defect() <= tol

    def __repr__(self) -> str:
        return f"SLHModel(n_ports={self.n_ports}, space={self._space!r})"


def identity_model(space: HilbertSpace, n_ports: int) -> SLHModel:
    """The trivial passthrough component (S = I, L = 0, H = 0)."""
    eye = Operator.identity(space)
    zero = Operator.zero(space)
    S = [[eye if i == j else zero for j in range(n_ports)] for i in range(n_ports)]
    return SLHModel(space, S, [zero] * n_ports, zero)


def source_model(space: HilbertSpace, amplitudes: Sequence[complex]) -> SLHModel:
    """A coherent source: S = I, L_i = d_i * I, H = 0."""
    eye = Operator.identity(space)
    zero = Operator.zero(space)
    n = len(amplitudes)
    S = [[eye if i == j else zero for j in range(n)] for i in range(n)]
    L = [complex(d) * eye for d in amplitudes]
    return SLHModel(space, S, L, zero)


def _check_composable(g2: SLHModel, g1: SLHModel):
    if g1.space != g2.space:
        raise ValueError(f"space mismatch: {g1.space} vs {g2.space} "
                         "(embed both models on a common space first)")


def series(g2: SLHModel, g1: SLHModel) -> SLHModel:
    """Feed g1's outputs into g2's inputs.

    S = S2 S1,  L = L2 + S2 L1,  H = H1 + H2 + Im{L2+ S2 L1}.
    """
    _check_composable(g2, g1)
    if g1.n_ports != g2.n_ports:
        raise ValueError(
            f"port-count mismatch: {g2.n_ports} vs {g1.n_ports}")
    n = g1.n_ports
    space = g1.space
    zero = Operator.zero(space)

    S = [[zero] * n for _ in range(n)]
    for i in range(n):
        for j in range(n):
            acc = zero
            for k in range(n):
                acc = acc + (g2.S[i][k] @ g1.S[k][j])
            S[i][j] = acc

    s2l1 = []
    for i in range(n):
        acc = zero
        for k in range(n):
            acc = acc + (g2.S[i][k] @ g1.L[k])
        s2l1.append(acc)
    L = [g2.L[i] + s2l1[i] for i in range(n)]

    cross = zero
    for i in range(n):
        cross = cross + (g2.L[i].dag() @ s2l1[i])
    H = g1.H + g2.H + im_operator(cross)
    return SLHModel(space, S, L, H)


def concat(g1: SLHModel, g2: SLHModel) -> SLHModel:
    """Side-by-side composition: block-diagonal S, stacked L, H1 + H2.

    Port order is g1's ports followed by g2's.
    """
    _check_composable(g2, g1)
    space = g1.space
    zero = Operator.zero(space)
    n1, n2 = g1.n_ports, g2.n_ports
    n = n1 + n2
    S = [[zero] * n for _ in range(n)]
    for i in range(n1):
        for j in range(n1):
            S[i][j] = g1.S[i][j]
    for i in range(n2):
        for j in range(n2):
            S[n1 + i][n1 + j] = g2.S[i][j]
    L = list(g1.L) + list(g2.L)
    return SLHModel(space, S, L, g1.H + g2.H)


def displace(g: SLHModel, drive: Sequence[complex]) -> SLHModel:
    """Replace vacuum inputs by coherent amplitudes.

    L -> L + S d and H -> H + Im{L+ S d}, with the Im term built from the
    pre-modification L.  S is unchanged.
    """
    d = [complex(x) for x in drive]
    if len(d) != g.n_ports:
        raise ValueError(f"drive length {len(d)} != n_ports {g.n_ports}")
    space = g.space
    zero = Operator.zero(space)
    sd = []
    for i in range(g.n_ports):
        acc = zero
        for j in range(g.n_ports):
            if d[j] != 0:
                acc = acc + (g.S[i][j] * d[j])
        sd.append(acc)
    cross = zero
    for i in range(g.n_ports):
        cross = cross + (g.L[i].dag() @ sd[i])
    H = g.H + im_operator(cross)
    L = [g.L[i] + sd[i] for i in range(g.n_ports)]
    return SLHModel(space, g.S, L, H)


def _check_permutation(perm: Sequence[int], n: int) -> tuple[int, ...]:
    perm = tuple(int(p) for p in perm)
    if sorted(perm) != list(range(n)):
        raise ValueError(f"{perm} is not a permutation of 0..{n - 1}")
    return perm


def permute_outputs(g: SLHModel, perm: Sequence[int]) -> SLHModel:
    """Relabel output ports: new output i is old output perm[i].

    Rows of S and entries of L are reordered together.
    """
    perm = _check_permutation(perm, g.n_ports)
    S = [g.S[p] for p in perm]
    L = [g.L[p] for p in perm]
    return SLHModel(g.space, S, L, g.H)


def permute_inputs(g: SLHModel, perm: Sequence[int]) -> SLHModel:
    """Relabel input ports: new input j is old input perm[j].

    Only columns of S are reordered; L and H describe the component itself
    and are unchanged.
    """
    perm = _check_permutation(perm, g.n_ports)
    S = [[row[p] for p in perm] for row in g.S]
    return SLHModel(g.space, S, list(g.L), g.H)


def generator(g: SLHModel) -> tuple[Operator, tuple[Operator, ...]]:
    """The (H, L) pair consumed by the Lindblad integrator; S drops out."""
    return g.H, g.L

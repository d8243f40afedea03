"""Truncated Fock-space realization of the market operator algebra.

Each market quantity lives on its own bosonic register (trader shares ``a``,
trader cash ``c``, price ``p``, and per reservoir site ``A``, ``C``, ``o``).
Operators are stored as scipy sparse matrices over the tensor-product number
basis; the ordering is row-major, so the vacuum is basis index 0.

Truncation breaks the canonical commutation relations at the top level of a
register, so CCR-type checks go through :func:`interior_mask`.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .fpl import DomainError, Expectations, InitialState, ModelParams

LABELS = ("a", "c", "p", "A", "C", "o")
RESERVOIR_LABELS = ("A", "C", "o")
PRICE = "p"

# dense algebra (matrix exponentials, model verification) is capped here
DIMENSION_CAP = 5000


class FockConfigError(ValueError):
    pass


class BoundaryError(FockConfigError):
    """A cutoff is too small for the operators applied to a state."""


@dataclass(frozen=True)
class RegisterSpec:
    label: str
    cutoff: int
    index: int | None = None

    def __post_init__(self):
        if self.label not in LABELS:
            raise FockConfigError(f"unknown register label {self.label!r}")
        if int(self.cutoff) != self.cutoff or self.cutoff < 0:
            raise FockConfigError(f"cutoff must be an integer >= 0, got {self.cutoff}")
        if (self.label in RESERVOIR_LABELS) != (self.index is not None):
            raise FockConfigError(
                f"register {self.label!r}: reservoir registers need an index, others must not have one"
            )

    @property
    def key(self) -> str:
        return self.label if self.index is None else f"{self.label}{self.index}"


class FockSpace:
    """Ordered tensor product of truncated registers."""

    def __init__(self, registers: Sequence[RegisterSpec], max_dimension: int | None = DIMENSION_CAP):
        registers = tuple(registers)
        if not registers:
            raise FockConfigError("a Fock space needs at least one register")
        keys = [r.key for r in registers]
        if len(set(keys)) != len(keys):
            raise FockConfigError(f"duplicate registers in {keys}")
        self.registers = registers
        self.shape = tuple(r.cutoff + 1 for r in registers)
        self.dimension = int(np.prod(self.shape))
        if max_dimension is not None and self.dimension > max_dimension:
            cut = ", ".join(f"{r.key}<={r.cutoff}" for r in registers)
            raise FockConfigError(
                f"dimension {self.dimension} exceeds cap {max_dimension} (cutoffs: {cut})"
            )
        self._pos = {k: i for i, k in enumerate(keys)}

    def __repr__(self):
        regs = ", ".join(f"{r.key}:{r.cutoff}" for r in self.registers)
        return f"FockSpace({regs}; dim={self.dimension})"

    def position(self, key: str) -> int:
        try:
            return self._pos[key]
        except KeyError:
            raise FockConfigError(f"register {key!r} not in {list(self._pos)}") from None

    def register(self, key: str) -> RegisterSpec:
        return self.registers[self.position(key)]

    def index(self, occupations: Sequence[int]) -> int:
        occ = tuple(int(x) for x in occupations)
        if len(occ) != len(self.shape) or any(not 0 <= o < s for o, s in zip(occ, self.shape)):
            raise FockConfigError(f"occupation tuple {occ} outside {self.shape}")
        return int(np.ravel_multi_index(occ, self.shape))

    def occupation(self, index: int) -> tuple[int, ...]:
        return tuple(int(x) for x in np.unravel_index(index, self.shape))

    @cached_property
    def occupations(self) -> np.ndarray:
        """(dimension, n_registers) table of occupation numbers."""
        grids = np.indices(self.shape).reshape(len(self.shape), -1)
        return grids.T.copy()

    def basis_vector(self, occupations) -> np.ndarray:
        v = np.zeros(self.dimension, dtype=complex)
        v[self.index(occupations)] = 1.0
        return v

    def number_state(self, **numbers: int) -> np.ndarray:
        """Basis vector with the given occupations by register key; others 0."""
        occ = [0] * len(self.registers)
        for key, val in numbers.items():
            occ[self.position(key)] = val
        return self.basis_vector(occ)


def build_space(registers: Sequence[RegisterSpec], max_dimension: int | None = DIMENSION_CAP) -> FockSpace:
    return FockSpace(registers, max_dimension=max_dimension)


class FockOperator:
    """Sparse matrix bound to a :class:`FockSpace`."""

    __array_priority__ = 100

    def __init__(self, space: FockSpace, matrix):
        m = sp.csr_matrix(matrix, dtype=complex)
        if m.shape != (space.dimension, space.dimension):
            raise FockConfigError(f"matrix shape {m.shape} does not match dimension {space.dimension}")
        self.space = space
        self.matrix = m

    def _check(self, other: "FockOperator"):
        if other.space is not self.space:
            raise FockConfigError("operators live on different Fock spaces")

    def __add__(self, other):
        if isinstance(other, FockOperator):
            self._check(other)
            return FockOperator(self.space, self.matrix + other.matrix)
        return NotImplemented

    def __sub__(self, other):
        if isinstance(other, FockOperator):
            self._check(other)
            return FockOperator(self.space, self.matrix - other.matrix)
        return NotImplemented

    def __neg__(self):
        return FockOperator(self.space, -self.matrix)

    def __mul__(self, scalar):
        if isinstance(scalar, FockOperator):
            return NotImplemented
        return FockOperator(self.space, self.matrix * complex(scalar))

    __rmul__ = __mul__

    def __matmul__(self, other):
        if isinstance(other, FockOperator):
            self._check(other)
            return FockOperator(self.space, self.matrix @ other.matrix)
        return self.matrix @ np.asarray(other)

    def __pow__(self, m: int):
        out = identity(self.space)
        for _ in range(int(m)):
            out = out @ self
        return out

    @property
    def dag(self) -> "FockOperator":
        return FockOperator(self.space, self.matrix.conj().T)

    def dense(self) -> np.ndarray:
        return self.matrix.toarray()

    def expect(self, vector) -> complex:
        v = np.asarray(vector)
        return complex(np.vdot(v, self.matrix @ v))

    def is_hermitian(self, atol: float = 1e-12) -> bool:
        diff = self.matrix - self.matrix.conj().T
        return diff.nnz == 0 or np.abs(diff.data).max() <= atol


def _embed(space: FockSpace, key: str, local) -> sp.csr_matrix:
    pos = space.position(key)
    left = int(np.prod(space.shape[:pos]))
    right = int(np.prod(space.shape[pos + 1 :]))
    return sp.kron(sp.kron(sp.identity(left), local), sp.identity(right), format="csr")


def _lowering(cutoff: int) -> sp.csr_matrix:
    return sp.diags(np.sqrt(np.arange(1, cutoff + 1, dtype=float)), 1, shape=(cutoff + 1, cutoff + 1), format="csr")


def identity(space: FockSpace) -> FockOperator:
    return FockOperator(space, sp.identity(space.dimension, format="csr"))


def lower(space: FockSpace, key: str) -> FockOperator:
    return FockOperator(space, _embed(space, key, _lowering(space.register(key).cutoff)))


def raise_(space: FockSpace, key: str) -> FockOperator:
    return lower(space, key).dag


def number(space: FockSpace, key: str) -> FockOperator:
    occ = space.occupations[:, space.position(key)]
    return FockOperator(space, sp.diags(occ.astype(float), format="csr"))


def conditional_power(base: FockOperator, exponent: str = PRICE) -> FockOperator:
    """``base ** P`` with ``P`` the number operator of the price register.

    Built block-wise as ``sum_m |m><m|_p (x) base**m``.  Only the price
    register may serve as the exponent.
    """
    space = base.space
    if exponent != PRICE:
        raise FockConfigError(f"conditional powers take the price register as exponent, got {exponent!r}")
    occ = space.occupations[:, space.position(PRICE)]
    total = sp.csr_matrix((space.dimension, space.dimension), dtype=complex)
    power = sp.identity(space.dimension, format="csr", dtype=complex)
    for m in range(space.register(PRICE).cutoff + 1):
        proj = sp.diags((occ == m).astype(float), format="csr")
        total = total + proj @ power
        power = power @ base.matrix
    return FockOperator(space, total)


_ATOMS = {"lower": lower, "raise": raise_, "number": number}


def build_operator(space: FockSpace, kind: str, key: str | None = None, *, power_of_price: bool = False, exponent: str = PRICE) -> FockOperator:
    """Single-register atom: ``lower``, ``raise``, ``number`` or ``identity``.

    With ``power_of_price=True`` a ladder atom is raised to the price
    operator. Compose atoms with ``+``, ``-``, ``@``, scalar ``*`` and ``.dag``.
    """
    if kind == "identity":
        return identity(space)
    if kind not in _ATOMS:
        raise FockConfigError(f"unknown operator kind {kind!r}")
    op = _ATOMS[kind](space, key)
    if power_of_price:
        if kind == "number":
            raise FockConfigError("conditional powers apply to ladder operators only")
        op = conditional_power(op, exponent)
    return op


def interior_mask(space: FockSpace, keys: Iterable[str] | None = None, margin: int = 1) -> np.ndarray:
    """Basis states at least ``margin`` quanta below the cutoff of each listed register."""
    keys = [r.key for r in space.registers] if keys is None else list(keys)
    mask = np.ones(space.dimension, dtype=bool)
    for key in keys:
        pos = space.position(key)
        mask &= space.occupations[:, pos] <= space.registers[pos].cutoff - margin
    return mask


def commutator(A: FockOperator, B: FockOperator) -> FockOperator:
    return A @ B - B @ A


def commutator_residual(A: FockOperator, B: FockOperator, interior=None, expected: FockOperator | None = None) -> float:
    """Max-norm of ``[A, B] - expected`` restricted to the interior subspace."""
    A._check(B)
    C = commutator(A, B)
    if expected is not None:
        A._check(expected)
        C = C - expected
    m = C.matrix
    if interior is not None:
        idx = np.flatnonzero(interior)
        m = m[idx][:, idx]
    return float(np.abs(m.data).max()) if m.nnz else 0.0


# -- market model ---------------------------------------------------------


@dataclass(frozen=True)
class OracleModelSpec:
    params: ModelParams
    omega_p: float = 1.0
    Omega_O: float = 1.0
    f1: complex | None = None
    g1: complex = 1.0
    L: int = 1

    def __post_init__(self):
        if self.L < 1:
            raise FockConfigError("reservoir size L must be >= 1")
        for v in (self.omega_p, self.Omega_O, self.g1):
            if not np.isfinite(v):
                raise FockConfigError("oracle frequencies and amplitudes must be finite")

    @property
    def f(self) -> complex:
        return self.params.f1 if self.f1 is None else self.f1


def market_space(cutoffs: dict, L: int = 1, max_dimension: int | None = DIMENSION_CAP) -> FockSpace:
    """Registers ``a, c, p`` plus ``A_k, C_k, o_k`` for ``k = 1..L``.

    ``cutoffs`` maps ``a, c, p, A, C, o`` to cutoffs shared across sites;
    a missing ``o`` entry drops the supply registers.
    """
    regs = [RegisterSpec(x, cutoffs[x]) for x in ("a", "c", "p")]
    for j in range(1, L + 1):
        for x in RESERVOIR_LABELS:
            if x in cutoffs:
                regs.append(RegisterSpec(x, cutoffs[x], j))
    return build_space(regs, max_dimension=max_dimension)


def _sites(space: FockSpace, label: str) -> list[int]:
    return [r.index for r in space.registers if r.label == label]


def selling(space: FockSpace) -> FockOperator:
    """``z = a (c^+)^P``."""
    return lower(space, "a") @ conditional_power(raise_(space, "c"))


def smeared_field(space: FockSpace, f=1.0) -> FockOperator:
    """``Z(f) = sum_k f(k) A_k (C_k^+)^P``; a scalar ``f`` is used at every site."""
    out = FockOperator(space, sp.csr_matrix((space.dimension, space.dimension)))
    for j in _sites(space, "A"):
        fj = f(j) if callable(f) else f
        out = out + fj * (lower(space, f"A{j}") @ conditional_power(raise_(space, f"C{j}")))
    return out


def conserved_charges(space: FockSpace) -> dict[str, FockOperator]:
    """Total shares, total cash and price plus supply."""
    N = number(space, "a")
    K = number(space, "c")
    G = number(space, "p")
    for j in _sites(space, "A"):
        N = N + number(space, f"A{j}")
        K = K + number(space, f"C{j}")
    for j in _sites(space, "o"):
        G = G + number(space, f"o{j}")
    return {"N": N, "K": K, "Gamma": G}


def hamiltonian(space: FockSpace, model: OracleModelSpec) -> FockOperator:
    """Free part plus ``lam`` times share/cash exchange and price/supply exchange."""
    p = model.params
    H = (
        p.omega_a * number(space, "a")
        + p.omega_c * number(space, "c")
        + model.omega_p * number(space, "p")
    )
    for j in _sites(space, "A"):
        H = H + p.Omega_A * number(space, f"A{j}") + p.Omega_C * number(space, f"C{j}")
    for j in _sites(space, "o"):
        H = H + model.Omega_O * number(space, f"o{j}")
    z = selling(space)
    Z = smeared_field(space, model.f)
    HI = z.dag @ Z + z @ Z.dag
    for j in _sites(space, "o"):
        po = model.g1 * (raise_(space, "p") @ lower(space, f"o{j}"))
        HI = HI + po + po.dag
    return H + p.lam * HI


def omega12_bruteforce(init: InitialState, f1: complex, cutoffs: dict | None = None, max_dimension: int | None = 2_000_000) -> Expectations:
    """``omega(z z^+ [Z^+, Z])`` and ``omega(Z Z^+ [z^+, z])`` for one reservoir trader.

    By default the cutoffs are the smallest that keep every intermediate
    vector off the truncation boundary, so the result is exact.  Explicit
    ``cutoffs`` (labels ``a, c, p, A, C``) below those minima are rejected.
    The sparse products never touch more than a few vectors, hence the
    larger dimension allowance than the dense cap.
    """
    n, k, nr, kr, M = init.n, init.k, init.n_res, init.k_res, init.M
    if k < M or kr < M:
        raise DomainError(f"need k >= M and k' >= M (k={k}, k'={kr}, M={M})")
    need = {"a": n + 1, "c": k + M, "p": M, "A": nr + 1, "C": kr + M}
    cut = dict(need)
    if cutoffs:
        cut.update({key: val for key, val in cutoffs.items() if key in need})
        short = {key: (cut[key], need[key]) for key in need if cut[key] < need[key]}
        if short:
            detail = ", ".join(f"{key}={have} < {want}" for key, (have, want) in short.items())
            raise BoundaryError(f"cutoffs reach the truncation boundary: {detail}")
    space = market_space(cut, L=1, max_dimension=max_dimension)
    phi = space.number_state(a=n, c=k, p=M, A1=nr, C1=kr)
    z = selling(space)
    Z = smeared_field(space, f1)
    # apply right to left on the vector; never form the full products
    def chain(*ops):
        v = phi
        for op in reversed(ops):
            v = op.matrix @ v
        return complex(np.vdot(phi, v))

    omega1 = chain(z, z.dag, Z.dag, Z) - chain(z, z.dag, Z, Z.dag)
    omega2 = chain(Z, Z.dag, z.dag, z) - chain(Z, Z.dag, z, z.dag)
    return Expectations(omega1, omega2)


def evolve_expectation(H: FockOperator, X: FockOperator, state, t: float, tol: float = 1e-10) -> complex:
    """``<phi, e^{iHt} X e^{-iHt} phi>`` for a number state ``phi``.

    ``e^{-iHt} phi`` is built from ``s`` equal sub-steps, each a Taylor
    series truncated once the next term drops below ``tol / s``.
    """
    H._check(X)
    space = H.space
    if space.dimension > DIMENSION_CAP:
        raise FockConfigError(f"dimension {space.dimension} exceeds cap {DIMENSION_CAP}")
    if not H.is_hermitian():
        raise FockConfigError("Hamiltonian is not Hermitian")
    if t < 0:
        raise ValueError("t must be >= 0")
    phi = space.basis_vector(state) if not isinstance(state, np.ndarray) else state.astype(complex)
    psi = phi
    if t > 0:
        norm = abs(H.matrix).sum(axis=0).max() * t
        steps = max(1, int(np.ceil(norm)))
        dt = t / steps
        A = (-1j * dt) * H.matrix
        for _ in range(steps):
            term, acc, j = psi, psi.copy(), 1
            while True:
                term = (A @ term) / j
                acc += term
                j += 1
                if np.linalg.norm(term) <= tol / steps:
                    break
            psi = acc
    return complex(np.vdot(psi, X.matrix @ psi))

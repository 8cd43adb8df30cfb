# Quantum state backends for the money lab.
#
# Every bill and every attacker-held state in this protocol is a product
# state or a short linear combination of product states, so the scalable
# backend stores states as a sum of product terms instead of a 2^n
# amplitude vector.  A dense statevector backend (numpy) is kept as a
# cross-validation oracle for small n.

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

# Norm / probability tolerance: values within ATOL of 0 or 1 are exact.
ATOL = 1e-9
# Terms with coefficient magnitude below this are dropped.
PRUNE_TOL = 1e-12
# Dense backend is a desk-scale oracle only.
DENSE_MAX_QUBITS = 20

_INV_SQRT2 = 1.0 / math.sqrt(2.0)


class Basis(Enum):
    Z = "Z"
    X = "X"


class QubitSymbol(Enum):
    """The four conjugate-coding states: the alphabet of bills."""

    ZERO = "0"
    ONE = "1"
    PLUS = "+"
    MINUS = "-"

    @property
    def basis(self) -> Basis:
        return Basis.Z if self in (QubitSymbol.ZERO, QubitSymbol.ONE) else Basis.X

    @property
    def bit(self) -> int:
        return 0 if self in (QubitSymbol.ZERO, QubitSymbol.PLUS) else 1


SYMBOL_ALPHABET = "01+-"

_AMPLITUDES = {
    QubitSymbol.ZERO: (1.0 + 0.0j, 0.0 + 0.0j),
    QubitSymbol.ONE: (0.0 + 0.0j, 1.0 + 0.0j),
    QubitSymbol.PLUS: (_INV_SQRT2 + 0.0j, _INV_SQRT2 + 0.0j),
    QubitSymbol.MINUS: (_INV_SQRT2 + 0.0j, -_INV_SQRT2 + 0.0j),
}

_BASIS_VECTORS = {
    Basis.Z: ((1.0 + 0.0j, 0.0 + 0.0j), (0.0 + 0.0j, 1.0 + 0.0j)),
    Basis.X: (
        (_INV_SQRT2 + 0.0j, _INV_SQRT2 + 0.0j),
        (_INV_SQRT2 + 0.0j, -_INV_SQRT2 + 0.0j),
    ),
}

_SYMBOL_FOR = {
    (Basis.Z, 0): QubitSymbol.ZERO,
    (Basis.Z, 1): QubitSymbol.ONE,
    (Basis.X, 0): QubitSymbol.PLUS,
    (Basis.X, 1): QubitSymbol.MINUS,
}


for _sym in QubitSymbol:
    # cached on the members; attribute access beats dict hashing in hot loops
    _sym.amplitudes = _AMPLITUDES[_sym]


def symbol_amplitudes(sym: QubitSymbol) -> tuple[complex, complex]:
    """Canonical (a0, a1) amplitude pair for a conjugate-coding symbol."""
    return sym.amplitudes


def basis_vector(basis: Basis, bit: int) -> tuple[complex, complex]:
    return _BASIS_VECTORS[basis][bit]


def symbol_for(basis: Basis, bit: int) -> QubitSymbol:
    return _SYMBOL_FOR[(basis, bit)]


def symbols_from_string(text: str) -> tuple[QubitSymbol, ...]:
    """Parse a symbol string over the alphabet 01+-."""
    out = []
    for ch in text:
        if ch not in SYMBOL_ALPHABET:
            raise ValueError(f"invalid symbol character {ch!r}; alphabet is {SYMBOL_ALPHABET!r}")
        out.append(QubitSymbol(ch))
    return tuple(out)


def symbols_to_string(symbols) -> str:
    return "".join(s.value for s in symbols)


class VerifyOutcome(Enum):
    VALID = "VALID"
    INVALID = "INVALID"


class NonUnitaryError(ValueError):
    """Raised when a supplied 2x2 matrix is not unitary."""


def _dot(u, v) -> complex:
    # <u|v> for 2-vectors stored as tuples
    return u[0].conjugate() * v[0] + u[1].conjugate() * v[1]


def clamp_probability(p: float) -> float:
    """Snap probabilities within ATOL of 0 or 1 to the exact value."""
    if p < ATOL:
        return 0.0
    if p > 1.0 - ATOL:
        return 1.0
    return p


def check_unitary(u) -> tuple[tuple[complex, complex], tuple[complex, complex]]:
    """Validate a 2x2 matrix (rows of pairs) is unitary; return it as tuples."""
    try:
        (a, b), (c, d) = (
            (complex(u[0][0]), complex(u[0][1])),
            (complex(u[1][0]), complex(u[1][1])),
        )
    except (TypeError, ValueError, IndexError) as exc:
        raise NonUnitaryError(f"not a 2x2 complex matrix: {u!r}") from exc
    col0 = abs(a) ** 2 + abs(c) ** 2
    col1 = abs(b) ** 2 + abs(d) ** 2
    cross = a.conjugate() * b + c.conjugate() * d
    if abs(col0 - 1.0) > ATOL or abs(col1 - 1.0) > ATOL or abs(cross) > ATOL:
        raise NonUnitaryError("matrix is not unitary within tolerance")
    return ((a, b), (c, d))


PAULI_X = ((0.0 + 0.0j, 1.0 + 0.0j), (1.0 + 0.0j, 0.0 + 0.0j))
HADAMARD = (
    (_INV_SQRT2 + 0.0j, _INV_SQRT2 + 0.0j),
    (_INV_SQRT2 + 0.0j, -_INV_SQRT2 + 0.0j),
)


@dataclass(frozen=True)
class ProductTerm:
    """One product term: a complex coefficient times n unit-norm factors."""

    coeff: complex
    factors: tuple[tuple[complex, complex], ...]


class SumOfProductsState:
    """A normalized n-qubit state stored as a sum of product terms.

    Operations return new states; callers replace their reference.  Term
    count only grows on projector measurements (at most one extra term
    per measurement).
    """

    __slots__ = ("n", "terms")

    def __init__(self, n: int, terms, check: bool = True):
        if n < 1:
            raise ValueError("qubit count must be >= 1")
        if not terms:
            raise ValueError("state needs at least one term")
        self.n = n
        self.terms = terms
        if check:
            self.terms = terms = [
                t if isinstance(t, ProductTerm) else ProductTerm(complex(t.coeff), tuple(t.factors))
                for t in terms
            ]
            for t in terms:
                if len(t.factors) != n:
                    raise ValueError("term factor count does not match qubit count")
            nrm = self.norm_sq()
            if abs(nrm - 1.0) > ATOL:
                raise ValueError(f"state is not normalized: <psi|psi> = {nrm}")

    @classmethod
    def from_symbols(cls, symbols) -> "SumOfProductsState":
        symbols = tuple(symbols)
        if not symbols:
            raise ValueError("symbol sequence must be nonempty")
        factors = tuple(s.amplitudes for s in symbols)
        return cls(len(symbols), [ProductTerm(1.0 + 0.0j, factors)], check=False)

    @classmethod
    def from_string(cls, text: str) -> "SumOfProductsState":
        return cls.from_symbols(symbols_from_string(text))

    def _check_index(self, i: int) -> None:
        if not 0 <= i < self.n:
            raise IndexError(f"qubit index {i} out of range for n={self.n}")

    def norm_sq(self) -> float:
        total = 0.0 + 0.0j
        for j, tj in enumerate(self.terms):
            total += abs(tj.coeff) ** 2
            for tk in self.terms[j + 1 :]:
                ov = tj.coeff.conjugate() * tk.coeff
                for fj, fk in zip(tj.factors, tk.factors):
                    ov *= _dot(fj, fk)
                    if ov == 0:
                        break
                total += 2 * ov.real
        return total.real

    def inner_with_symbols(self, target) -> complex:
        """<target|psi> where target is a symbol sequence."""
        target = tuple(target)
        if len(target) != self.n:
            raise ValueError(f"dimension mismatch: state n={self.n}, target length {len(target)}")
        tfactors = [s.amplitudes for s in target]
        total = 0.0 + 0.0j
        for t in self.terms:
            amp = t.coeff
            for tv, fv in zip(tfactors, t.factors):
                amp *= _dot(tv, fv)
                if amp == 0:
                    break
            total += amp
        return total

    def inner_with(self, other: "SumOfProductsState") -> complex:
        """<self|other>."""
        if self.n != other.n:
            raise ValueError("dimension mismatch")
        total = 0.0 + 0.0j
        for tj in self.terms:
            for tk in other.terms:
                amp = tj.coeff.conjugate() * tk.coeff
                for fj, fk in zip(tj.factors, tk.factors):
                    amp *= _dot(fj, fk)
                    if amp == 0:
                        break
                total += amp
        return total

    def apply_pauli_x(self, i: int) -> "SumOfProductsState":
        self._check_index(i)
        new_terms = []
        for t in self.terms:
            f = t.factors[i]
            new_terms.append(
                ProductTerm(t.coeff, t.factors[:i] + ((f[1], f[0]),) + t.factors[i + 1 :])
            )
        return SumOfProductsState(self.n, new_terms, check=False)

    def apply_unitary(self, i: int, u) -> "SumOfProductsState":
        self._check_index(i)
        (a, b), (c, d) = check_unitary(u)
        new_terms = []
        for t in self.terms:
            f0, f1 = t.factors[i]
            nf = (a * f0 + b * f1, c * f0 + d * f1)
            new_terms.append(ProductTerm(t.coeff, t.factors[:i] + (nf,) + t.factors[i + 1 :]))
        return SumOfProductsState(self.n, new_terms, check=False)

    def _projected(self, i: int, bvec) -> list[ProductTerm]:
        out = []
        for t in self.terms:
            amp = _dot(bvec, t.factors[i])
            out.append(ProductTerm(t.coeff * amp, t.factors[:i] + (bvec,) + t.factors[i + 1 :]))
        return out

    def _branch_norm_sq(self, terms: list[ProductTerm]) -> float:
        if not terms:
            return 0.0
        total = 0.0 + 0.0j
        for j, tj in enumerate(terms):
            total += abs(tj.coeff) ** 2
            for tk in terms[j + 1 :]:
                ov = tj.coeff.conjugate() * tk.coeff
                for fj, fk in zip(tj.factors, tk.factors):
                    ov *= _dot(fj, fk)
                    if ov == 0:
                        break
                total += 2 * ov.real
        return total.real

    def measure_qubit(self, i: int, basis: Basis, draw: float) -> tuple[int, "SumOfProductsState"]:
        """Born-rule measurement of qubit i; consumes exactly one draw."""
        self._check_index(i)
        b0, b1 = _BASIS_VECTORS[basis]
        if len(self.terms) == 1:
            # fast path: a single product term collapses in place
            t = self.terms[0]
            f = t.factors[i]
            amp0 = b0[0].conjugate() * f[0] + b0[1].conjugate() * f[1]
            p0 = clamp_probability((abs(t.coeff) * abs(amp0)) ** 2)
            if draw < p0:
                bit, bvec, amp, p = 0, b0, amp0, p0
            else:
                amp1 = b1[0].conjugate() * f[0] + b1[1].conjugate() * f[1]
                bit, bvec, amp, p = 1, b1, amp1, 1.0 - p0
            coeff = t.coeff * amp / math.sqrt(p)
            term = ProductTerm(coeff, t.factors[:i] + (bvec,) + t.factors[i + 1 :])
            return bit, SumOfProductsState(self.n, [term], check=False)
        proj0 = self._projected(i, b0)
        p0 = clamp_probability(self._branch_norm_sq(proj0))
        if draw < p0:
            bit, branch, p = 0, proj0, p0
        else:
            bit, branch, p = 1, self._projected(i, b1), 1.0 - p0
        scale = 1.0 / math.sqrt(p)
        new_terms = [
            ProductTerm(t.coeff * scale, t.factors)
            for t in branch
            if abs(t.coeff) >= PRUNE_TOL
        ]
        return bit, SumOfProductsState(self.n, new_terms, check=False)

    def measure_projector(self, target, draw: float) -> tuple[VerifyOutcome, "SumOfProductsState"]:
        """Project onto the product state of `target`; consumes one draw.

        VALID post-state is the clean target product state (global phase
        discarded); INVALID post-state is the renormalized residue.
        """
        outcome, post, _ = self.measure_projector_detail(target, draw)
        return outcome, post

    def measure_projector_detail(
        self, target, draw: float
    ) -> tuple[VerifyOutcome, "SumOfProductsState", float]:
        """As measure_projector, but also reports the clamped probability
        of the VALID branch."""
        target = tuple(target)
        c = self.inner_with_symbols(target)
        p = clamp_probability(abs(c) ** 2)
        if draw < p:
            return VerifyOutcome.VALID, SumOfProductsState.from_symbols(target), p
        tfactors = tuple(s.amplitudes for s in target)
        scale = 1.0 / math.sqrt(1.0 - p)
        new_terms = [ProductTerm(t.coeff * scale, t.factors) for t in self.terms]
        if abs(c) >= PRUNE_TOL:
            new_terms.append(ProductTerm(-c * scale, tfactors))
        post = SumOfProductsState(self.n, new_terms, check=False).compress()
        return VerifyOutcome.INVALID, post, p

    def compress(self) -> "SumOfProductsState":
        """Drop negligible terms, merge colinear ones, renormalize."""
        merged: list[ProductTerm] = []
        for t in self.terms:
            if abs(t.coeff) < PRUNE_TOL:
                continue
            for k, m in enumerate(merged):
                phase = 1.0 + 0.0j
                colinear = True
                for fm, ft in zip(m.factors, t.factors):
                    ov = _dot(fm, ft)
                    if abs(ov) < 1.0 - ATOL:
                        colinear = False
                        break
                    phase *= ov
                if colinear:
                    merged[k] = ProductTerm(m.coeff + t.coeff * phase, m.factors)
                    break
            else:
                merged.append(t)
        merged = [t for t in merged if abs(t.coeff) >= PRUNE_TOL]
        if not merged:
            raise ValueError("compression eliminated all terms; state had zero norm")
        state = SumOfProductsState(self.n, merged, check=False)
        scale = 1.0 / math.sqrt(state.norm_sq())
        return SumOfProductsState(
            self.n, [ProductTerm(t.coeff * scale, t.factors) for t in merged], check=False
        )

    def to_dense(self) -> "DenseState":
        if self.n > DENSE_MAX_QUBITS:
            raise ValueError(f"dense expansion capped at n={DENSE_MAX_QUBITS}")
        amps = np.zeros(2**self.n, dtype=complex)
        for t in self.terms:
            v = np.array([t.coeff], dtype=complex)
            for f in t.factors:
                v = np.kron(v, np.array(f, dtype=complex))
            amps += v
        return DenseState(self.n, amps)


def fidelity(a: SumOfProductsState, b: SumOfProductsState) -> float:
    """|<a|b>|^2; compares states up to global phase."""
    return min(1.0, abs(a.inner_with(b)) ** 2)


def fidelity_to_symbols(state: SumOfProductsState, symbols) -> float:
    return min(1.0, abs(state.inner_with_symbols(symbols)) ** 2)


class DenseState:
    """Reference 2^n statevector backend (qubit 0 is the leftmost factor)."""

    __slots__ = ("n", "amps")

    def __init__(self, n: int, amps):
        if n < 1:
            raise ValueError("qubit count must be >= 1")
        if n > DENSE_MAX_QUBITS:
            raise ValueError(f"dense backend capped at n={DENSE_MAX_QUBITS}")
        amps = np.asarray(amps, dtype=complex)
        if amps.shape != (2**n,):
            raise ValueError("amplitude vector length must be 2^n")
        self.n = n
        self.amps = amps

    @classmethod
    def from_symbols(cls, symbols) -> "DenseState":
        symbols = tuple(symbols)
        if not symbols:
            raise ValueError("symbol sequence must be nonempty")
        v = np.array([1.0 + 0.0j])
        for s in symbols:
            v = np.kron(v, np.array(symbol_amplitudes(s), dtype=complex))
        return cls(len(symbols), v)

    @classmethod
    def from_string(cls, text: str) -> "DenseState":
        return cls.from_symbols(symbols_from_string(text))

    def _check_index(self, i: int) -> None:
        if not 0 <= i < self.n:
            raise IndexError(f"qubit index {i} out of range for n={self.n}")

    def _tensor(self):
        return self.amps.reshape((2,) * self.n)

    def apply_unitary(self, i: int, u) -> "DenseState":
        self._check_index(i)
        rows = check_unitary(u)
        mat = np.array(rows, dtype=complex)
        t = np.tensordot(mat, self._tensor(), axes=([1], [i]))
        t = np.moveaxis(t, 0, i)
        return DenseState(self.n, t.reshape(-1))

    def apply_pauli_x(self, i: int) -> "DenseState":
        return self.apply_unitary(i, PAULI_X)

    def measure_qubit(self, i: int, basis: Basis, draw: float) -> tuple[int, "DenseState"]:
        self._check_index(i)
        b0 = np.array(_BASIS_VECTORS[basis][0], dtype=complex)
        b1 = np.array(_BASIS_VECTORS[basis][1], dtype=complex)
        t = self._tensor()
        amp0 = np.tensordot(b0.conjugate(), t, axes=([0], [i]))
        p0 = clamp_probability(float(np.vdot(amp0, amp0).real))
        if draw < p0:
            bit, bvec, amp, p = 0, b0, amp0, p0
        else:
            amp1 = np.tensordot(b1.conjugate(), t, axes=([0], [i]))
            bit, bvec, amp, p = 1, b1, amp1, 1.0 - p0
        post = np.moveaxis(np.multiply.outer(bvec, amp), 0, i) / math.sqrt(p)
        return bit, DenseState(self.n, post.reshape(-1))

    def measure_projector(self, target, draw: float) -> tuple[VerifyOutcome, "DenseState"]:
        target = tuple(target)
        if len(target) != self.n:
            raise ValueError("dimension mismatch")
        tvec = DenseState.from_symbols(target).amps
        c = complex(np.vdot(tvec, self.amps))
        p = clamp_probability(abs(c) ** 2)
        if draw < p:
            return VerifyOutcome.VALID, DenseState(self.n, tvec.copy())
        post = (self.amps - c * tvec) / math.sqrt(1.0 - p)
        return VerifyOutcome.INVALID, DenseState(self.n, post)

    def fidelity(self, other: "DenseState") -> float:
        return min(1.0, abs(complex(np.vdot(self.amps, other.amps))) ** 2)

    def norm_sq(self) -> float:
        return float(np.vdot(self.amps, self.amps).real)


def dense_fidelity(sop: SumOfProductsState, dense: DenseState) -> float:
    """Cross-backend fidelity |<dense|sop>|^2."""
    return sop.to_dense().fidelity(dense)

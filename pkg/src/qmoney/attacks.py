# Counterfeiting strategies.
#
# The star of the show is the adaptive oracle attack: against a mint that
# returns post-measurement states even on INVALID, the full secret of an
# n-qubit bill is extracted in exactly n verification queries.  Two
# no-oracle baselines (random guessing and measure-and-copy) are included
# to exhibit the exponential security the protocol has when the oracle is
# closed off.

from __future__ import annotations

import random
from dataclasses import dataclass, field
from enum import Enum

from .mint import Mint, MintPolicy, StateHandle, StateRegistry
from .qstate import (
    Basis,
    QubitSymbol,
    SumOfProductsState,
    VerifyOutcome,
    symbol_amplitudes,
    symbol_for,
    symbols_to_string,
)


class StrategyKind(Enum):
    ADAPTIVE_ORACLE = "adaptive"
    GUESS_RANDOM_SYMBOLS = "guess"
    MEASURE_RANDOM_BASIS_COPY = "measure-copy"


class AttackConsistencyError(RuntimeError):
    """The simulator produced a probabilistic branch where the attack's
    correctness argument requires a deterministic one."""


@dataclass(frozen=True)
class AttackRecord:
    qubit: int
    outcome: VerifyOutcome
    # None only for the round on which a destroying mint ate the bill.
    symbol: QubitSymbol | None


@dataclass
class AttackTranscript:
    serial: str
    records: list[AttackRecord] = field(default_factory=list)
    queries_used: int = 0
    learned: list[QubitSymbol] = field(default_factory=list)
    bill_recovered: bool = False

    def learned_string(self) -> str:
        return symbols_to_string(self.learned)

    def to_dict(self) -> dict:
        return {
            "serial": self.serial,
            "records": [
                {
                    "qubit": r.qubit,
                    "outcome": r.outcome.value,
                    "symbol": r.symbol.value if r.symbol is not None else None,
                }
                for r in self.records
            ],
            "queries_used": self.queries_used,
            "learned": self.learned_string(),
            "bill_recovered": self.bill_recovered,
        }


class LocalSession:
    """Capability adapter giving an attacker verify access plus local
    gate/measure access against an in-process mint."""

    def __init__(self, mint: Mint, policy: str = MintPolicy.RETURN_ALWAYS,
                 rng: random.Random | None = None):
        self.mint = mint
        self.policy = MintPolicy.check(policy)
        self.rng = rng if rng is not None else random.Random()

    def verify(self, serial: str, handle: StateHandle):
        res = self.mint.verify(serial, handle, self.policy, self.rng)
        return res.outcome, res.handle, res.deterministic

    def apply_x(self, handle: StateHandle, i: int) -> StateHandle:
        self.mint.registry.apply_pauli_x(handle, i)
        return handle

    def apply_unitary(self, handle: StateHandle, i: int, u) -> StateHandle:
        self.mint.registry.apply_unitary(handle, i, u)
        return handle

    def measure(self, handle: StateHandle, i: int, basis: Basis) -> tuple[int, StateHandle]:
        bit = self.mint.registry.measure(handle, i, basis, self.rng)
        return bit, handle


def adaptive_attack(session, serial: str, handle, n: int, order=None):
    """Learn a bill's secret one qubit per verification query.

    Round i: flip qubit i, submit for verification.  INVALID means the
    symbol is a Z eigenstate: flip back and read it out in Z.  VALID
    means it is an X eigenstate (the flip was unobservable): read it out
    in X, which leaves the qubit collapsed onto the secret symbol, so the
    bill survives intact for the remaining rounds.

    Returns (transcript, final_handle); final_handle is None when a
    destroying mint ate the bill mid-attack.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    transcript = AttackTranscript(serial=serial)
    learned_by_qubit: dict[int, QubitSymbol] = {}
    rounds = list(order) if order is not None else list(range(n))
    if sorted(rounds) != list(range(n)):
        raise ValueError("order must visit each qubit exactly once")

    for i in rounds:
        handle = session.apply_x(handle, i)
        outcome, returned, deterministic = session.verify(serial, handle)
        transcript.queries_used += 1
        if deterministic is False:
            raise AttackConsistencyError(
                f"verification query {transcript.queries_used} hit a probabilistic branch"
            )
        if outcome is VerifyOutcome.INVALID and returned is None:
            # destroying mint: the bill is gone, the attack is over
            transcript.records.append(AttackRecord(i, outcome, None))
            transcript.learned = [learned_by_qubit[q] for q in sorted(learned_by_qubit)]
            transcript.bill_recovered = False
            return transcript, None
        handle = returned
        if outcome is VerifyOutcome.INVALID:
            # Z eigenstate: undo the flip, then read the bit in Z
            handle = session.apply_x(handle, i)
            bit, handle = session.measure(handle, i, Basis.Z)
            sym = symbol_for(Basis.Z, bit)
        else:
            # X eigenstate: the bill came back undamaged; read the sign
            bit, handle = session.measure(handle, i, Basis.X)
            sym = symbol_for(Basis.X, bit)
            # re-preparation in `sym` is a no-op: the measurement already
            # collapsed the qubit onto the secret symbol
        transcript.records.append(AttackRecord(i, outcome, sym))
        learned_by_qubit[i] = sym

    transcript.learned = [learned_by_qubit[q] for q in sorted(learned_by_qubit)]
    transcript.bill_recovered = len(transcript.learned) == n
    return transcript, handle


def forge_copies(registry: StateRegistry, learned, count: int) -> list[StateHandle]:
    """Prepare `count` fresh copies of the learned symbol sequence."""
    learned = tuple(learned)
    if not learned:
        raise ValueError("learned symbol sequence is empty")
    if count < 0:
        raise ValueError("count must be >= 0")
    return [
        registry.register(SumOfProductsState.from_symbols(learned)) for _ in range(count)
    ]


def baseline_attack(
    kind: StrategyKind,
    registry: StateRegistry,
    handle: StateHandle | None,
    n: int,
    rng: random.Random,
) -> tuple[StateHandle, StateHandle | None]:
    """Produce a counterfeit without querying the mint.

    Returns (counterfeit handle, damaged original handle or None).  The
    counterfeit is the canonical submission; the damaged original is
    exposed for completeness but not used in the headline statistics.
    """
    if kind is StrategyKind.GUESS_RANDOM_SYMBOLS:
        symbols = [_uniform_symbol(rng) for _ in range(n)]
        copy = registry.register(SumOfProductsState.from_symbols(symbols))
        return copy, handle
    if kind is StrategyKind.MEASURE_RANDOM_BASIS_COPY:
        if handle is None:
            raise ValueError("measure-copy needs the genuine bill")
        observed = []
        for i in range(n):
            basis = Basis.Z if rng.random() < 0.5 else Basis.X
            bit = registry.measure(handle, i, basis, rng)
            observed.append(symbol_for(basis, bit))
        copy = registry.register(SumOfProductsState.from_symbols(observed))
        return copy, handle
    raise ValueError(f"{kind} is not a baseline strategy")


_SYMBOL_ORDER = (QubitSymbol.ZERO, QubitSymbol.ONE, QubitSymbol.PLUS, QubitSymbol.MINUS)


def _uniform_symbol(rng: random.Random) -> QubitSymbol:
    return _SYMBOL_ORDER[int(rng.random() * 4)]


def analytic_pass_prob(kind: StrategyKind, n: int) -> float:
    """Closed-form pass probability of a baseline counterfeit, obtained
    by exhaustive per-qubit enumeration and raised to the n-th power."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if kind is StrategyKind.GUESS_RANDOM_SYMBOLS:
        rate = _enumerate_guess_rate()
    elif kind is StrategyKind.MEASURE_RANDOM_BASIS_COPY:
        rate = _enumerate_measure_copy_rate()
    else:
        raise ValueError("adaptive attack success is not a per-qubit power law")
    return rate**n


def _overlap_sq(a: QubitSymbol, b: QubitSymbol) -> float:
    ua, ub = symbol_amplitudes(a), symbol_amplitudes(b)
    ip = ua[0].conjugate() * ub[0] + ua[1].conjugate() * ub[1]
    return abs(ip) ** 2


def _enumerate_guess_rate() -> float:
    # uniform true symbol x uniform guess
    total = 0.0
    for true in QubitSymbol:
        for guess in QubitSymbol:
            total += _overlap_sq(true, guess)
    return total / 16.0


def _enumerate_measure_copy_rate() -> float:
    # uniform true symbol x uniform measurement basis x Born outcome
    total = 0.0
    for true in QubitSymbol:
        for basis in Basis:
            for bit in (0, 1):
                outcome_sym = symbol_for(basis, bit)
                p_outcome = _overlap_sq(outcome_sym, true)
                total += 0.5 * p_outcome * _overlap_sq(true, outcome_sym)
    return total / 4.0

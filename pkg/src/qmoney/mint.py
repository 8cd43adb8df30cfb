# The mint: bill issuance, the secret database, and the verification
# oracle.  Quantum states live in a registry behind linearly-owned
# handles; a handle is consumed exactly once and never duplicated, which
# is how the simulation honors no-cloning at the API boundary.

from __future__ import annotations

import json
import random
import re
import threading
from dataclasses import dataclass

from .qstate import (
    QubitSymbol,
    SumOfProductsState,
    VerifyOutcome,
    symbols_from_string,
    symbols_to_string,
)

SERIAL_PATTERN = re.compile(r"^WQM-[0-9a-f]{32}$")
DB_VERSION = 1


class MintError(Exception):
    """Base class for mint/registry failures; carries a stable code."""

    code = "MINT_ERROR"


class UnknownSerialError(MintError):
    code = "UNKNOWN_SERIAL"


class UnknownHandleError(MintError):
    code = "UNKNOWN_HANDLE"


class HandleConsumedError(MintError):
    code = "HANDLE_CONSUMED"


class DimensionMismatchError(MintError):
    code = "DIMENSION_MISMATCH"


class NoCloningError(MintError):
    code = "NO_CLONING"


class DatabaseFormatError(ValueError):
    """Secret database file could not be parsed."""


@dataclass(frozen=True)
class StateHandle:
    """Opaque id into a state registry; live until consumed, never copied."""

    id: int


@dataclass(frozen=True)
class BillSecret:
    serial: str
    symbols: tuple[QubitSymbol, ...]
    denomination: str = "$20"

    @property
    def n(self) -> int:
        return len(self.symbols)


@dataclass
class QueryStats:
    total: int = 0
    valid: int = 0
    invalid: int = 0


class MintPolicy:
    RETURN_ALWAYS = "return-always"
    DESTROY_ON_INVALID = "destroy-on-invalid"
    ALL = (RETURN_ALWAYS, DESTROY_ON_INVALID)

    @staticmethod
    def check(policy: str) -> str:
        if policy not in MintPolicy.ALL:
            raise ValueError(f"unknown policy {policy!r}; expected one of {MintPolicy.ALL}")
        return policy


@dataclass(frozen=True)
class VerifyResult:
    outcome: VerifyOutcome
    handle: StateHandle | None
    # True when the projector probability was exactly 0 or 1; used by the
    # adaptive attack's consistency guard.  None when unobservable
    # (remote sessions).
    deterministic: bool | None = True


class StateRegistry:
    """Holds the actual quantum states; callers only ever see handles.

    All mutations take the registry lock, and consume-then-act is atomic,
    so concurrent callers can never obtain two live handles to one state.
    """

    def __init__(self):
        self._lock = threading.RLock()
        self._states: dict[int, SumOfProductsState] = {}
        self._consumed: set[int] = set()
        self._next_id = 1

    def register(self, state: SumOfProductsState) -> StateHandle:
        with self._lock:
            hid = self._next_id
            self._next_id += 1
            self._states[hid] = state
            return StateHandle(hid)

    def _live_state(self, handle: StateHandle) -> SumOfProductsState:
        # caller holds the lock
        if handle.id in self._consumed:
            raise HandleConsumedError(f"handle {handle.id} was already consumed")
        try:
            return self._states[handle.id]
        except KeyError:
            raise UnknownHandleError(f"unknown handle {handle.id}") from None

    def is_live(self, handle: StateHandle) -> bool:
        with self._lock:
            return handle.id in self._states and handle.id not in self._consumed

    def consume(self, handle: StateHandle, expected_n: int | None = None) -> SumOfProductsState:
        """Atomically take ownership of the state; the handle dies here.

        A dimension mismatch leaves the handle live.
        """
        with self._lock:
            state = self._live_state(handle)
            if expected_n is not None and state.n != expected_n:
                raise DimensionMismatchError(
                    f"handle {handle.id} holds {state.n} qubits, expected {expected_n}"
                )
            del self._states[handle.id]
            self._consumed.add(handle.id)
            return state

    def release(self, handle: StateHandle) -> None:
        self.consume(handle)

    def apply_pauli_x(self, handle: StateHandle, i: int) -> None:
        with self._lock:
            state = self._live_state(handle)
            self._states[handle.id] = state.apply_pauli_x(i)

    def apply_unitary(self, handle: StateHandle, i: int, u) -> None:
        with self._lock:
            state = self._live_state(handle)
            self._states[handle.id] = state.apply_unitary(i, u)

    def measure(self, handle: StateHandle, i: int, basis, rng: random.Random) -> int:
        with self._lock:
            state = self._live_state(handle)
            bit, post = state.measure_qubit(i, basis, rng.random())
            self._states[handle.id] = post
            return bit

    def inspect(self, handle: StateHandle) -> SumOfProductsState:
        """Read-only peek for tests and diagnostics; not part of the
        attacker-facing surface."""
        with self._lock:
            return self._live_state(handle)

    def duplicate_attempt(self, handle: StateHandle) -> None:
        """Named negative path: cloning a live state always fails."""
        with self._lock:
            self._live_state(handle)
            raise NoCloningError(
                f"handle {handle.id} holds an unknown quantum state; it cannot be copied"
            )

    def live_count(self) -> int:
        with self._lock:
            return len(self._states)


_SYMBOL_ORDER = (QubitSymbol.ZERO, QubitSymbol.ONE, QubitSymbol.PLUS, QubitSymbol.MINUS)


def _draw_symbol(rng: random.Random) -> QubitSymbol:
    # one uniform draw per qubit
    return _SYMBOL_ORDER[int(rng.random() * 4)]


class Mint:
    """Issues bills, keeps the secret database, and verifies submissions."""

    def __init__(self, registry: StateRegistry | None = None, rng: random.Random | None = None):
        self.registry = registry if registry is not None else StateRegistry()
        self._rng = rng if rng is not None else random.Random()
        self._lock = threading.RLock()
        self._bills: dict[str, BillSecret] = {}
        self._stats: dict[str, QueryStats] = {}

    # -- issuance ---------------------------------------------------------

    def _fresh_serial(self, rng: random.Random) -> str:
        for _ in range(3):
            serial = "WQM-" + format(rng.getrandbits(128), "032x")
            if serial not in self._bills:
                return serial
        raise MintError("serial collision persisted after 3 attempts")

    def mint_bill(
        self, n: int, denomination: str = "$20", rng: random.Random | None = None
    ) -> tuple[BillSecret, StateHandle]:
        if n < 1:
            raise ValueError("bill size n must be >= 1")
        rng = rng if rng is not None else self._rng
        with self._lock:
            serial = self._fresh_serial(rng)
            symbols = tuple(_draw_symbol(rng) for _ in range(n))
            secret = BillSecret(serial=serial, symbols=symbols, denomination=denomination)
            self._bills[serial] = secret
            self._stats[serial] = QueryStats()
        handle = self.registry.register(SumOfProductsState.from_symbols(symbols))
        return secret, handle

    def add_bill(
        self, symbols, denomination: str = "$20", rng: random.Random | None = None
    ) -> tuple[BillSecret, StateHandle]:
        """Insert a bill with chosen symbols (lab use; issuance normally
        draws them uniformly via mint_bill)."""
        symbols = tuple(symbols)
        if not symbols:
            raise ValueError("bill needs at least one symbol")
        rng = rng if rng is not None else self._rng
        with self._lock:
            serial = self._fresh_serial(rng)
            secret = BillSecret(serial=serial, symbols=symbols, denomination=denomination)
            self._bills[serial] = secret
            self._stats[serial] = QueryStats()
        handle = self.registry.register(SumOfProductsState.from_symbols(symbols))
        return secret, handle

    def issue_bill_state(self, serial: str) -> StateHandle:
        """Hand out a fresh genuine copy of a stored bill's state.

        Lab convenience: models the attacker starting with a legitimate
        bill in hand.
        """
        secret = self.secret(serial)
        return self.registry.register(SumOfProductsState.from_symbols(secret.symbols))

    def secret(self, serial: str) -> BillSecret:
        with self._lock:
            try:
                return self._bills[serial]
            except KeyError:
                raise UnknownSerialError(f"no bill with serial {serial}") from None

    def serials(self) -> list[str]:
        with self._lock:
            return list(self._bills)

    def stats(self, serial: str) -> QueryStats:
        with self._lock:
            try:
                return self._stats[serial]
            except KeyError:
                raise UnknownSerialError(f"no bill with serial {serial}") from None

    # -- verification -----------------------------------------------------

    def verify(
        self,
        serial: str,
        handle: StateHandle,
        policy: str = MintPolicy.RETURN_ALWAYS,
        rng: random.Random | None = None,
    ) -> VerifyResult:
        MintPolicy.check(policy)
        rng = rng if rng is not None else self._rng
        secret = self.secret(serial)
        state = self.registry.consume(handle, expected_n=secret.n)
        outcome, post, p = state.measure_projector_detail(secret.symbols, rng.random())
        deterministic = p == 0.0 or p == 1.0
        with self._lock:
            st = self._stats[serial]
            st.total += 1
            if outcome is VerifyOutcome.VALID:
                st.valid += 1
            else:
                st.invalid += 1
        if outcome is VerifyOutcome.VALID or policy == MintPolicy.RETURN_ALWAYS:
            return VerifyResult(outcome, self.registry.register(post), deterministic)
        return VerifyResult(outcome, None, deterministic)

    def duplicate_handle_attempt(self, handle: StateHandle) -> None:
        self.registry.duplicate_attempt(handle)

    # -- persistence ------------------------------------------------------

    def save_db(self, path) -> None:
        with self._lock:
            payload = {
                "version": DB_VERSION,
                "bills": [
                    {
                        "serial": b.serial,
                        "denomination": b.denomination,
                        "symbols": symbols_to_string(b.symbols),
                    }
                    for b in self._bills.values()
                ],
            }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2)
            fh.write("\n")

    @classmethod
    def load_db(
        cls, path, registry: StateRegistry | None = None, rng: random.Random | None = None
    ) -> "Mint":
        with open(path, "r", encoding="utf-8") as fh:
            try:
                payload = json.load(fh)
            except json.JSONDecodeError as exc:
                raise DatabaseFormatError(f"{path}: not valid JSON: {exc}") from exc
        if not isinstance(payload, dict):
            raise DatabaseFormatError(f"{path}: top level must be an object")
        version = payload.get("version")
        if version != DB_VERSION:
            raise DatabaseFormatError(
                f"{path}: unsupported database version {version!r}; expected {DB_VERSION}"
            )
        bills = payload.get("bills")
        if not isinstance(bills, list):
            raise DatabaseFormatError(f"{path}: field 'bills' must be a list")
        mint = cls(registry=registry, rng=rng)
        for idx, entry in enumerate(bills):
            if not isinstance(entry, dict):
                raise DatabaseFormatError(f"{path}: bills[{idx}] must be an object")
            try:
                serial = entry["serial"]
                symbols_text = entry["symbols"]
            except KeyError as exc:
                raise DatabaseFormatError(f"{path}: bills[{idx}] missing field {exc}") from None
            denomination = entry.get("denomination", "$20")
            if not isinstance(serial, str) or not SERIAL_PATTERN.match(serial):
                raise DatabaseFormatError(f"{path}: bills[{idx}].serial {serial!r} is malformed")
            try:
                symbols = symbols_from_string(symbols_text)
            except ValueError as exc:
                raise DatabaseFormatError(f"{path}: bills[{idx}].symbols: {exc}") from exc
            if not symbols:
                raise DatabaseFormatError(f"{path}: bills[{idx}].symbols is empty")
            if serial in mint._bills:
                raise DatabaseFormatError(f"{path}: duplicate serial {serial}")
            mint._bills[serial] = BillSecret(serial, symbols, denomination)
            mint._stats[serial] = QueryStats()
        return mint

    def bills_equal(self, other: "Mint") -> bool:
        return self._bills == other._bills

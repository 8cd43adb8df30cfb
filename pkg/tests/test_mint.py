import json
import random
import threading
from collections import Counter

import pytest

from qmoney.mint import (
    SERIAL_PATTERN,
    DatabaseFormatError,
    DimensionMismatchError,
    HandleConsumedError,
    Mint,
    MintPolicy,
    NoCloningError,
    StateHandle,
    StateRegistry,
    UnknownHandleError,
    UnknownSerialError,
)
from qmoney.qstate import (
    QubitSymbol,
    SumOfProductsState,
    VerifyOutcome,
    fidelity_to_symbols,
    symbols_from_string,
)


@pytest.fixture
def mint():
    return Mint(rng=random.Random(42))


class TestMintBill:
    def test_basic_issue(self, mint):
        secret, handle = mint.mint_bill(4)
        assert SERIAL_PATTERN.match(secret.serial)
        assert len(secret.symbols) == 4
        state = mint.registry.inspect(handle)
        assert fidelity_to_symbols(state, secret.symbols) == pytest.approx(1, abs=1e-9)

    def test_n_zero_rejected(self, mint):
        with pytest.raises(ValueError):
            mint.mint_bill(0)

    def test_symbol_frequencies_uniform(self, mint):
        counts = Counter()
        for _ in range(5000):
            secret, handle = mint.mint_bill(8)
            counts.update(secret.symbols)
            mint.registry.release(handle)
        total = sum(counts.values())
        assert total == 40000
        for sym in QubitSymbol:
            assert 0.24 <= counts[sym] / total <= 0.26

    def test_serials_unique(self, mint):
        serials = {mint.mint_bill(1)[0].serial for _ in range(200)}
        assert len(serials) == 200

    def test_denomination_is_inert(self, mint):
        secret, _ = mint.mint_bill(2, denomination="$1000000")
        assert secret.denomination == "$1000000"


class TestVerify:
    @pytest.mark.parametrize("policy", MintPolicy.ALL)
    def test_genuine_bill_always_valid(self, mint, policy):
        secret, handle = mint.mint_bill(6)
        res = mint.verify(secret.serial, handle, policy)
        assert res.outcome is VerifyOutcome.VALID
        assert res.deterministic
        state = mint.registry.inspect(res.handle)
        assert fidelity_to_symbols(state, secret.symbols) == pytest.approx(1, abs=1e-9)

    def test_flipped_z_qubit_returned_unchanged(self, mint):
        secret, handle = mint.add_bill(symbols_from_string("0+"))
        mint.registry.apply_pauli_x(handle, 0)
        res = mint.verify(secret.serial, handle, MintPolicy.RETURN_ALWAYS)
        assert res.outcome is VerifyOutcome.INVALID
        assert res.deterministic
        state = mint.registry.inspect(res.handle)
        assert fidelity_to_symbols(state, symbols_from_string("1+")) == pytest.approx(1, abs=1e-9)

    def test_destroy_policy_eats_the_bill(self, mint):
        secret, handle = mint.add_bill(symbols_from_string("0+"))
        mint.registry.apply_pauli_x(handle, 0)
        before = mint.registry.live_count()
        res = mint.verify(secret.serial, handle, MintPolicy.DESTROY_ON_INVALID)
        assert res.outcome is VerifyOutcome.INVALID
        assert res.handle is None
        assert mint.registry.live_count() == before - 1
        with pytest.raises(HandleConsumedError):
            mint.registry.apply_pauli_x(handle, 0)

    def test_database_row_survives_destruction(self, mint):
        secret, handle = mint.add_bill(symbols_from_string("1"))
        mint.registry.apply_pauli_x(handle, 0)
        mint.verify(secret.serial, handle, MintPolicy.DESTROY_ON_INVALID)
        # a fresh counterfeit can still be submitted against the serial
        fresh = mint.registry.register(SumOfProductsState.from_string("1"))
        res = mint.verify(secret.serial, fresh, MintPolicy.DESTROY_ON_INVALID)
        assert res.outcome is VerifyOutcome.VALID

    def test_handle_consumed_and_reissued(self, mint):
        secret, handle = mint.mint_bill(2)
        res = mint.verify(secret.serial, handle, MintPolicy.RETURN_ALWAYS)
        assert res.handle != handle
        with pytest.raises(HandleConsumedError):
            mint.verify(secret.serial, handle, MintPolicy.RETURN_ALWAYS)

    def test_unknown_serial_leaves_handle_live(self, mint):
        _, handle = mint.mint_bill(2)
        with pytest.raises(UnknownSerialError):
            mint.verify("WQM-" + "0" * 32, handle)
        assert mint.registry.is_live(handle)

    def test_dimension_mismatch_leaves_handle_live(self, mint):
        secret, _ = mint.mint_bill(4)
        wrong = mint.registry.register(SumOfProductsState.from_string("0"))
        with pytest.raises(DimensionMismatchError):
            mint.verify(secret.serial, wrong)
        assert mint.registry.is_live(wrong)

    def test_query_stats(self, mint):
        secret, handle = mint.mint_bill(3)
        for _ in range(4):
            res = mint.verify(secret.serial, handle, MintPolicy.RETURN_ALWAYS)
            handle = res.handle
        st = mint.stats(secret.serial)
        assert st.total == 4
        assert st.total == st.valid + st.invalid

    def test_verify_atomic_under_races(self, mint):
        secret, handle = mint.mint_bill(2)
        wins, errors = [], []

        def racer():
            try:
                wins.append(mint.verify(secret.serial, handle, MintPolicy.RETURN_ALWAYS))
            except HandleConsumedError:
                errors.append(1)

        threads = [threading.Thread(target=racer) for _ in range(16)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert len(wins) == 1
        assert len(errors) == 15


class TestNoCloning:
    def test_live_handle_cannot_be_duplicated(self, mint):
        _, handle = mint.mint_bill(2)
        with pytest.raises(NoCloningError):
            mint.duplicate_handle_attempt(handle)
        assert mint.registry.is_live(handle)

    def test_consumed_handle(self, mint):
        secret, handle = mint.mint_bill(2)
        mint.verify(secret.serial, handle)
        with pytest.raises(HandleConsumedError):
            mint.duplicate_handle_attempt(handle)

    def test_unknown_handle(self, mint):
        with pytest.raises(UnknownHandleError):
            mint.duplicate_handle_attempt(StateHandle(999999))


class TestRegistryLinearity:
    def test_consume_once(self):
        reg = StateRegistry()
        h = reg.register(SumOfProductsState.from_string("0"))
        reg.consume(h)
        with pytest.raises(HandleConsumedError):
            reg.consume(h)
        with pytest.raises(HandleConsumedError):
            reg.measure(h, 0, None, random.Random(0))

    def test_fresh_ids_never_reused(self):
        reg = StateRegistry()
        seen = set()
        for _ in range(50):
            h = reg.register(SumOfProductsState.from_string("0"))
            assert h.id not in seen
            seen.add(h.id)
            reg.release(h)


class TestPersistence:
    def test_empty_round_trip(self, tmp_path, mint):
        path = tmp_path / "db.json"
        mint.save_db(path)
        payload = json.loads(path.read_text())
        assert payload == {"version": 1, "bills": []}
        loaded = Mint.load_db(path)
        assert loaded.bills_equal(mint)

    def test_one_bill_round_trip(self, tmp_path, mint):
        secret, _ = mint.add_bill(symbols_from_string("01+-"))
        path = tmp_path / "db.json"
        mint.save_db(path)
        assert '"symbols": "01+-"' in path.read_text()
        loaded = Mint.load_db(path)
        assert loaded.secret(secret.serial) == secret

    def test_bad_symbol_character(self, tmp_path):
        path = tmp_path / "db.json"
        path.write_text(json.dumps({
            "version": 1,
            "bills": [{"serial": "WQM-" + "a" * 32, "denomination": "$20", "symbols": "0120"}],
        }))
        with pytest.raises(DatabaseFormatError, match="'2'"):
            Mint.load_db(path)

    def test_version_mismatch(self, tmp_path):
        path = tmp_path / "db.json"
        path.write_text(json.dumps({"version": 2, "bills": []}))
        with pytest.raises(DatabaseFormatError, match="version"):
            Mint.load_db(path)

    def test_not_json(self, tmp_path):
        path = tmp_path / "db.json"
        path.write_text("not json {")
        with pytest.raises(DatabaseFormatError, match="JSON"):
            Mint.load_db(path)

    def test_malformed_serial(self, tmp_path):
        path = tmp_path / "db.json"
        path.write_text(json.dumps({
            "version": 1,
            "bills": [{"serial": "nope", "symbols": "01"}],
        }))
        with pytest.raises(DatabaseFormatError, match="serial"):
            Mint.load_db(path)

    def test_large_bills_round_trip(self, tmp_path):
        mint = Mint(rng=random.Random(9))
        for _ in range(5):
            secret, handle = mint.mint_bill(1024)
            mint.registry.release(handle)
        path = tmp_path / "db.json"
        mint.save_db(path)
        assert Mint.load_db(path).bills_equal(mint)

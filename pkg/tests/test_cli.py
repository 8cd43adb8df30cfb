import json
import random
import re

import pytest

from qmoney.cli import EXIT_ATTACK_FAILED, EXIT_FAILURE, EXIT_OK, EXIT_USAGE, main
from qmoney.mint import Mint, MintPolicy
from qmoney.qstate import symbols_from_string
from qmoney.wire import MintServer


def run_cli(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def extract_serial(out):
    match = re.search(r"WQM-[0-9a-f]{32}", out)
    assert match, f"no serial in output:\n{out}"
    return match.group(0)


class TestMintNew:
    def test_creates_database(self, capsys, tmp_path):
        db = tmp_path / "m.json"
        code, out, _ = run_cli(capsys, "mint", "new", "--n", "8", "--count", "2",
                               "--db", str(db), "--seed", "7")
        assert code == EXIT_OK
        serials = re.findall(r"WQM-[0-9a-f]{32}", out)
        assert len(serials) == 2
        payload = json.loads(db.read_text())
        assert payload["version"] == 1
        assert len(payload["bills"]) == 2
        assert all(len(b["symbols"]) == 8 for b in payload["bills"])

    def test_seeded_is_reproducible(self, capsys, tmp_path):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        run_cli(capsys, "mint", "new", "--n", "4", "--db", str(a), "--seed", "9")
        run_cli(capsys, "mint", "new", "--n", "4", "--db", str(b), "--seed", "9")
        assert a.read_bytes() == b.read_bytes()

    def test_bad_n(self, capsys, tmp_path):
        code, _, err = run_cli(capsys, "mint", "new", "--n", "0", "--db", str(tmp_path / "x"))
        assert code == EXIT_USAGE
        assert "error" in err


class TestAttackAdaptive:
    def test_mint_then_attack(self, capsys, tmp_path):
        db = tmp_path / "m.json"
        code, out, _ = run_cli(capsys, "mint", "new", "--n", "8", "--count", "1",
                               "--db", str(db), "--seed", "7")
        serial = extract_serial(out)
        code, out, _ = run_cli(capsys, "attack", "adaptive", "--db", str(db),
                               "--serial", serial, "--seed", "7")
        assert code == EXIT_OK
        assert "queries used  : 8" in out
        assert "bill recovered: yes" in out

    def test_transcript_file(self, capsys, tmp_path):
        db = tmp_path / "m.json"
        _, out, _ = run_cli(capsys, "mint", "new", "--n", "4", "--db", str(db), "--seed", "3")
        serial = extract_serial(out)
        tpath = tmp_path / "t.json"
        code, _, _ = run_cli(capsys, "attack", "adaptive", "--db", str(db), "--serial", serial,
                             "--seed", "3", "--transcript", str(tpath))
        assert code == EXIT_OK
        payload = json.loads(tpath.read_text())
        assert set(payload) == {"serial", "records", "queries_used", "learned", "bill_recovered"}
        assert payload["queries_used"] == 4
        assert payload["bill_recovered"] is True

    def test_destroying_mint_gives_exit_3(self, capsys, tmp_path):
        # plant a bill that must contain a Z-basis symbol
        db = tmp_path / "m.json"
        mint = Mint(rng=random.Random(1))
        secret, _ = mint.add_bill(symbols_from_string("01+-"))
        mint.save_db(db)
        code, out, _ = run_cli(capsys, "attack", "adaptive", "--db", str(db),
                               "--serial", secret.serial, "--policy", "destroy-on-invalid",
                               "--seed", "1")
        assert code == EXIT_ATTACK_FAILED
        assert "bill recovered: no" in out

    def test_unknown_serial(self, capsys, tmp_path):
        db = tmp_path / "m.json"
        run_cli(capsys, "mint", "new", "--n", "2", "--db", str(db), "--seed", "1")
        code, _, err = run_cli(capsys, "attack", "adaptive", "--db", str(db),
                               "--serial", "WQM-" + "0" * 32)
        assert code == EXIT_FAILURE
        assert "error" in err


class TestAttackBaseline:
    def test_prints_rates(self, capsys):
        code, out, _ = run_cli(capsys, "attack", "baseline", "--strategy", "measure-copy",
                               "--n", "2", "--trials", "500", "--seed", "5")
        assert code == EXIT_OK
        assert "empirical" in out and "analytic" in out
        analytic = float(out.split("analytic :")[1].strip())
        assert analytic == pytest.approx(0.5625, abs=1e-12)


class TestExperimentSweep:
    def test_byte_identical_reruns(self, capsys, tmp_path):
        out1, out2 = tmp_path / "r1.csv", tmp_path / "r2.csv"
        for path in (out1, out2):
            code, _, _ = run_cli(capsys, "experiment", "sweep", "--strategy", "guess",
                                 "--n", "1,2,4", "--trials", "500", "--seed", "1",
                                 "--out", str(path))
            assert code == EXIT_OK
        assert out1.read_bytes() == out2.read_bytes()

    def test_bad_n_list(self, capsys, tmp_path):
        code, _, err = run_cli(capsys, "experiment", "sweep", "--strategy", "guess",
                               "--n", "1,two", "--trials", "10", "--seed", "1",
                               "--out", str(tmp_path / "r.csv"))
        assert code == EXIT_USAGE

    def test_unknown_flag_exits_2(self, tmp_path):
        with pytest.raises(SystemExit) as exc:
            main(["experiment", "sweep", "--bogus"])
        assert exc.value.code == EXIT_USAGE


class TestAttackRemote:
    def test_against_live_server(self, capsys):
        server = MintServer("127.0.0.1", 0, Mint(rng=random.Random(2)),
                            MintPolicy.RETURN_ALWAYS, random.Random(2))
        server.start()
        try:
            host, port = server.address
            code, out, _ = run_cli(capsys, "attack", "remote", "--addr", f"{host}:{port}",
                                   "--n", "8")
            assert code == EXIT_OK
            assert "queries used  : 8" in out
        finally:
            server.stop()

    def test_no_server(self, capsys):
        code, _, err = run_cli(capsys, "attack", "remote", "--addr", "127.0.0.1:1", "--n", "2")
        assert code == EXIT_FAILURE
        assert "error" in err

    def test_needs_serial_or_n(self, capsys):
        code, _, err = run_cli(capsys, "attack", "remote", "--addr", "127.0.0.1:9")
        assert code == EXIT_USAGE

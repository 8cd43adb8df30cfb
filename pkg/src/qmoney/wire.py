# Networked mint: line-delimited JSON over TCP.
#
# The server owns every quantum state and the secret database; clients
# hold nothing but handle ids, scoped to their session.  That keeps the
# information available to a remote attacker exactly what a physical
# counterfeiter would have: classical answers plus possession of bills.

from __future__ import annotations

import json
import random
import socket
import socketserver
import threading
from collections import Counter

from .attacks import adaptive_attack
from .mint import (
    DimensionMismatchError,
    HandleConsumedError,
    Mint,
    MintPolicy,
    StateHandle,
    UnknownHandleError,
    UnknownSerialError,
)
from .qstate import Basis, NonUnitaryError, VerifyOutcome

PROTOCOL_VERSION = 1


class ProtocolError(Exception):
    """Error response from the server (or raised while forming one)."""

    def __init__(self, code: str, detail: str = ""):
        super().__init__(f"{code}: {detail}" if detail else code)
        self.code = code
        self.detail = detail


class TransportError(Exception):
    """Socket-level failure, distinct from protocol errors."""


def _error(code: str, detail: str = "") -> dict:
    return {"type": "error", "code": code, "detail": detail}


def _parse_handle(msg: dict) -> int:
    hid = msg.get("handle")
    if not isinstance(hid, int):
        raise ProtocolError("BAD_REQUEST", "field 'handle' must be an integer")
    return hid


def _parse_unitary(raw):
    if (
        not isinstance(raw, list)
        or len(raw) != 4
        or not all(isinstance(e, list) and len(e) == 2 for e in raw)
    ):
        raise ProtocolError("BAD_REQUEST", "field 'u' must be four [re, im] pairs, row-major")
    vals = [complex(e[0], e[1]) for e in raw]
    return ((vals[0], vals[1]), (vals[2], vals[3]))


class _Handler(socketserver.StreamRequestHandler):
    def handle(self):
        server: "MintServer" = self.server.owner  # type: ignore[attr-defined]
        owned: set[int] = set()
        try:
            for raw in self.rfile:
                try:
                    line = raw.decode("utf-8").strip()
                except UnicodeDecodeError:
                    self._send(_error("BAD_REQUEST", "line is not valid UTF-8"))
                    continue
                if not line:
                    continue
                self._send(server.handle_message(line, owned))
        except (ConnectionError, BrokenPipeError, OSError):
            pass
        finally:
            server.drop_session(owned)

    def _send(self, obj: dict) -> None:
        self.wfile.write((json.dumps(obj) + "\n").encode("utf-8"))


class _TCPServer(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True


class MintServer:
    """Serves the mint over line-delimited JSON; one connection per session."""

    def __init__(self, host: str, port: int, mint: Mint | None = None,
                 policy: str = MintPolicy.RETURN_ALWAYS, rng: random.Random | None = None):
        self.mint = mint if mint is not None else Mint()
        self.policy = MintPolicy.check(policy)
        self._rng = rng if rng is not None else random.Random()
        self._lock = threading.Lock()
        self._tcp = _TCPServer((host, port), _Handler)
        self._tcp.owner = self  # type: ignore[attr-defined]
        self._thread: threading.Thread | None = None

    @property
    def address(self) -> tuple[str, int]:
        return self._tcp.server_address[:2]

    def start(self) -> None:
        self._thread = threading.Thread(target=self._tcp.serve_forever, daemon=True)
        self._thread.start()

    def serve_forever(self) -> None:
        self._tcp.serve_forever()

    def stop(self) -> None:
        self._tcp.shutdown()
        self._tcp.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5)

    # -- session bookkeeping ---------------------------------------------

    def _own(self, owned: set[int], hid: int) -> None:
        with self._lock:
            owned.add(hid)

    def _check_owned(self, owned: set[int], hid: int) -> None:
        with self._lock:
            if hid not in owned:
                raise ProtocolError("HANDLE_NOT_OWNED", f"handle {hid} is not owned by this session")

    def _disown(self, owned: set[int], hid: int) -> None:
        with self._lock:
            owned.discard(hid)

    def drop_session(self, owned: set[int]) -> None:
        for hid in list(owned):
            try:
                self.mint.registry.release(StateHandle(hid))
            except (HandleConsumedError, UnknownHandleError):
                pass

    # -- dispatch ---------------------------------------------------------

    def handle_message(self, line: str, owned: set[int]) -> dict:
        try:
            msg = json.loads(line)
        except json.JSONDecodeError:
            return _error("BAD_REQUEST", "line is not a JSON object")
        if not isinstance(msg, dict):
            return _error("BAD_REQUEST", "message must be a JSON object")
        version = msg.get("v")
        if version is None:
            return _error("BAD_REQUEST", "missing protocol version field 'v'")
        if version != PROTOCOL_VERSION:
            return _error("UNSUPPORTED_VERSION", f"this server speaks version {PROTOCOL_VERSION}")
        mtype = msg.get("type")
        try:
            if mtype == "mint":
                return self._do_mint(msg, owned)
            if mtype == "claim":
                return self._do_claim(msg, owned)
            if mtype == "verify":
                return self._do_verify(msg, owned)
            if mtype == "apply_x":
                return self._do_apply_x(msg, owned)
            if mtype == "apply_u":
                return self._do_apply_u(msg, owned)
            if mtype == "measure":
                return self._do_measure(msg, owned)
            if mtype == "release":
                return self._do_release(msg, owned)
            return _error("BAD_REQUEST", f"unknown message type {mtype!r}")
        except ProtocolError as exc:
            return _error(exc.code, exc.detail)
        except UnknownSerialError as exc:
            return _error("UNKNOWN_SERIAL", str(exc))
        except HandleConsumedError as exc:
            return _error("HANDLE_CONSUMED", str(exc))
        except DimensionMismatchError as exc:
            return _error("DIMENSION_MISMATCH", str(exc))
        except NonUnitaryError as exc:
            return _error("NON_UNITARY", str(exc))
        except (IndexError, ValueError) as exc:
            return _error("BAD_REQUEST", str(exc))

    def _do_mint(self, msg: dict, owned: set[int]) -> dict:
        n = msg.get("n")
        if not isinstance(n, int) or n < 1:
            raise ProtocolError("BAD_REQUEST", "field 'n' must be a positive integer")
        secret, handle = self.mint.mint_bill(n, rng=self._rng)
        self._own(owned, handle.id)
        return {"type": "minted", "serial": secret.serial, "handle": handle.id}

    def _do_claim(self, msg: dict, owned: set[int]) -> dict:
        # lab extension: hand out a genuine copy of an existing bill so a
        # remote attacker can start with a bill in hand
        serial = msg.get("serial")
        if not isinstance(serial, str):
            raise ProtocolError("BAD_REQUEST", "field 'serial' must be a string")
        handle = self.mint.issue_bill_state(serial)
        self._own(owned, handle.id)
        return {
            "type": "claimed",
            "serial": serial,
            "handle": handle.id,
            "n": self.mint.secret(serial).n,
        }

    def _do_verify(self, msg: dict, owned: set[int]) -> dict:
        serial = msg.get("serial")
        if not isinstance(serial, str):
            raise ProtocolError("BAD_REQUEST", "field 'serial' must be a string")
        hid = _parse_handle(msg)
        self._check_owned(owned, hid)
        res = self.mint.verify(serial, StateHandle(hid), self.policy, self._rng)
        self._disown(owned, hid)
        new_hid = None
        if res.handle is not None:
            new_hid = res.handle.id
            self._own(owned, new_hid)
        return {"type": "verified", "result": res.outcome.value, "handle": new_hid}

    def _qubit(self, msg: dict) -> int:
        i = msg.get("qubit")
        if not isinstance(i, int):
            raise ProtocolError("BAD_REQUEST", "field 'qubit' must be an integer")
        return i

    def _do_apply_x(self, msg: dict, owned: set[int]) -> dict:
        hid = _parse_handle(msg)
        self._check_owned(owned, hid)
        self.mint.registry.apply_pauli_x(StateHandle(hid), self._qubit(msg))
        return {"type": "ok", "handle": hid}

    def _do_apply_u(self, msg: dict, owned: set[int]) -> dict:
        hid = _parse_handle(msg)
        self._check_owned(owned, hid)
        u = _parse_unitary(msg.get("u"))
        self.mint.registry.apply_unitary(StateHandle(hid), self._qubit(msg), u)
        return {"type": "ok", "handle": hid}

    def _do_measure(self, msg: dict, owned: set[int]) -> dict:
        hid = _parse_handle(msg)
        self._check_owned(owned, hid)
        basis_name = msg.get("basis")
        if basis_name not in ("Z", "X"):
            raise ProtocolError("BAD_REQUEST", "field 'basis' must be \"Z\" or \"X\"")
        bit = self.mint.registry.measure(
            StateHandle(hid), self._qubit(msg), Basis(basis_name), self._rng
        )
        return {"type": "measured", "bit": bit, "handle": hid}

    def _do_release(self, msg: dict, owned: set[int]) -> dict:
        hid = _parse_handle(msg)
        self._check_owned(owned, hid)
        self.mint.registry.release(StateHandle(hid))
        self._disown(owned, hid)
        return {"type": "ok", "handle": hid}


class RemoteMint:
    """Client session; doubles as the capability object for the adaptive
    attack so the same attack logic runs locally and over the wire."""

    def __init__(self, host: str, port: int, timeout: float = 10.0):
        try:
            self._sock = socket.create_connection((host, port), timeout=timeout)
        except OSError as exc:
            raise TransportError(f"cannot connect to {host}:{port}: {exc}") from exc
        self._file = self._sock.makefile("rw", encoding="utf-8", newline="\n")
        self.sent_counts: Counter[str] = Counter()

    def close(self) -> None:
        try:
            self._file.close()
            self._sock.close()
        except OSError:
            pass

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def request(self, msg: dict) -> dict:
        msg = {"v": PROTOCOL_VERSION, **msg}
        self.sent_counts[msg.get("type", "?")] += 1
        try:
            self._file.write(json.dumps(msg) + "\n")
            self._file.flush()
            line = self._file.readline()
        except OSError as exc:
            raise TransportError(f"connection failed: {exc}") from exc
        if not line:
            raise TransportError("server closed the connection")
        resp = json.loads(line)
        if resp.get("type") == "error":
            raise ProtocolError(resp.get("code", "UNKNOWN"), resp.get("detail", ""))
        return resp

    # -- protocol operations ---------------------------------------------

    def mint_bill(self, n: int) -> tuple[str, int]:
        resp = self.request({"type": "mint", "n": n})
        return resp["serial"], resp["handle"]

    def claim(self, serial: str) -> tuple[int, int]:
        resp = self.request({"type": "claim", "serial": serial})
        return resp["handle"], resp["n"]

    def verify(self, serial: str, handle: int):
        resp = self.request({"type": "verify", "serial": serial, "handle": handle})
        # branch determinism is server-internal; unobservable remotely
        return VerifyOutcome(resp["result"]), resp["handle"], None

    def apply_x(self, handle: int, i: int) -> int:
        return self.request({"type": "apply_x", "handle": handle, "qubit": i})["handle"]

    def apply_unitary(self, handle: int, i: int, u) -> int:
        flat = [[complex(z).real, complex(z).imag] for row in u for z in row]
        return self.request({"type": "apply_u", "handle": handle, "qubit": i, "u": flat})["handle"]

    def measure(self, handle: int, i: int, basis: Basis) -> tuple[int, int]:
        resp = self.request(
            {"type": "measure", "handle": handle, "qubit": i, "basis": basis.value}
        )
        return resp["bit"], resp["handle"]

    def release(self, handle: int) -> None:
        self.request({"type": "release", "handle": handle})


def remote_adaptive_attack(host: str, port: int, serial: str | None = None, n: int | None = None):
    """Run the adaptive attack purely through wire messages.

    Either attack an existing bill by serial (the server hands over a
    genuine copy) or mint a fresh n-qubit bill to attack.  Returns
    (transcript, client); the caller owns closing the client.
    """
    client = RemoteMint(host, port)
    try:
        if serial is not None:
            handle, n = client.claim(serial)
        else:
            if n is None:
                raise ValueError("either a serial or a bill size n is required")
            serial, handle = client.mint_bill(n)
        transcript, _ = adaptive_attack(client, serial, handle, n)
        return transcript, client
    except BaseException:
        client.close()
        raise

"""Master/worker execution over TCP with newline-delimited JSON messages.

Worker -> master::

    {"t": "hello", "worker": id, "slots": k}
    {"t": "need_payload", "hash": h}
    {"t": "pull"}
    {"t": "result", "lo": int, "hi": int, "re": float, "im": float, "secs": float}
    {"t": "error", "lo": int, "hi": int, "why": str}
    {"t": "bye"}

Master -> worker::

    {"t": "payload", "hash": h, "body": base64}
    {"t": "batch", "lo": int, "hi": int, "hash": h}
    {"t": "drain"}
    {"t": "abort", "why": str}

Workers pull batches; the batch names the payload hash so a worker fetches
the (network, cut, plan) payload once and caches it. A batch whose worker
disconnects, or stays silent for ``timeout_secs``, goes back on the queue
and is recomputed by whoever pulls next. Workers never talk to each other.
"""

from __future__ import annotations

import base64
import hashlib
import json
import logging
import os
import socket
import threading
import time
from collections import deque
from dataclasses import dataclass

from qcut.contraction import ContractionPlan
from qcut.cutting import DEFAULT_MAX_JOBS, CutSet
from qcut.executor import (
    RunReport,
    WorkerResult,
    aggregate,
    check_guard,
    check_job_limit,
    contract_range,
    make_batches,
    rounds_needed,
)
from qcut.network import TensorNetwork

log = logging.getLogger(__name__)


class ProtocolError(RuntimeError):
    pass


class NoWorkersError(RuntimeError):
    pass


class PayloadMismatch(ProtocolError):
    pass


class RunAborted(RuntimeError):
    pass


def encode_payload(
    tn: TensorNetwork, cut: CutSet, plan: ContractionPlan, max_rank: int | None = None
) -> tuple[str, str]:
    """Return ``(sha256 hex, base64 body)`` for the job payload."""
    raw = json.dumps(
        {
            "network": tn.to_json(),
            "cut": list(cut.edge_ids),
            "plan": plan.to_json(),
            "max_rank": max_rank,
        },
        separators=(",", ":"),
    ).encode()
    return hashlib.sha256(raw).hexdigest(), base64.b64encode(raw).decode("ascii")


def decode_payload(body: str, expected_hash: str):
    raw = base64.b64decode(body)
    got = hashlib.sha256(raw).hexdigest()
    if got != expected_hash:
        raise PayloadMismatch(f"payload hash {got[:12]} does not match {expected_hash[:12]}")
    obj = json.loads(raw)
    return (
        TensorNetwork.from_json(obj["network"]),
        CutSet(tuple(obj["cut"])),
        ContractionPlan.from_json(obj["plan"]),
        obj.get("max_rank"),
    )


class _Channel:
    """One socket speaking newline-delimited JSON."""

    def __init__(self, sock: socket.socket):
        self.sock = sock
        self.rfile = sock.makefile("rb")
        self._wlock = threading.Lock()

    def send(self, msg: dict) -> None:
        data = (json.dumps(msg, separators=(",", ":")) + "\n").encode()
        with self._wlock:
            self.sock.sendall(data)

    def recv(self) -> dict | None:
        line = self.rfile.readline()
        if not line:
            return None
        try:
            msg = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ProtocolError(f"bad message {line[:80]!r}") from exc
        if not isinstance(msg, dict) or "t" not in msg:
            raise ProtocolError(f"message without type: {msg!r}")
        return msg

    def close(self) -> None:
        for closer in (self.rfile.close, lambda: self.sock.shutdown(socket.SHUT_RDWR), self.sock.close):
            try:
                closer()
            except OSError:
                pass


@dataclass
class MasterConfig:
    host: str = "127.0.0.1"
    port: int = 0
    workers: int = 1  # expected worker slots; sizes the default batches
    batch_size: int | None = None
    timeout_secs: float = 300.0
    connect_timeout: float = 60.0
    max_jobs: int = DEFAULT_MAX_JOBS
    max_rank: int | None = None

    @classmethod
    def from_listen(cls, listen: str, **kw) -> "MasterConfig":
        host, _, port = listen.rpartition(":")
        return cls(host=host or "127.0.0.1", port=int(port), **kw)


class Master:
    """Queue of assignment ranges served to pulling workers.

    Each range moves queued -> outstanding -> done under one lock. Results
    are aggregated in range order once every range is done.
    """

    def __init__(self, config: MasterConfig, tn: TensorNetwork, cut: CutSet, plan: ContractionPlan):
        self.config = config
        self.jobs = check_job_limit(cut, config.max_jobs)
        check_guard(plan, config.max_rank)
        self.hash, self.body = encode_payload(tn, cut, plan, config.max_rank)
        self.batches = make_batches(self.jobs, config.workers, config.batch_size)
        self._known = set(self.batches)
        self._cond = threading.Condition()
        self._queue: deque[tuple[int, int]] = deque(self.batches)
        self._outstanding: dict[tuple[int, int], int] = {}
        self._done: dict[tuple[int, int], WorkerResult] = {}
        self._channels: dict[int, _Channel] = {}
        self._workers_seen: set[str] = set()
        self._live = 0
        self._last_live = time.monotonic()
        self._failure: str | None = None
        self.recomputed = 0
        self.duplicates = 0
        self._server: socket.socket | None = None
        self._next_conn = 0
        self._stopping = False

    # -- lifecycle ---------------------------------------------------------

    def start(self) -> tuple[str, int]:
        srv = socket.create_server((self.config.host, self.config.port), reuse_port=False)
        srv.settimeout(0.2)
        self._server = srv
        threading.Thread(target=self._accept_loop, name="qcut-accept", daemon=True).start()
        addr = srv.getsockname()
        log.info("master listening on %s:%d (%d batches)", addr[0], addr[1], len(self.batches))
        return addr[0], addr[1]

    def wait(self) -> RunReport:
        t0 = time.monotonic()
        try:
            with self._cond:
                while len(self._done) < len(self.batches) and self._failure is None:
                    idle = self._live == 0 and time.monotonic() - self._last_live
                    if idle and idle > self.config.connect_timeout:
                        self._failure = (
                            f"no workers connected within {self.config.connect_timeout}s"
                        )
                        break
                    self._cond.wait(0.2)
                failure = self._failure
                self._cond.notify_all()
            if failure is not None:
                self._broadcast({"t": "abort", "why": failure})
                if failure.startswith("no workers"):
                    raise NoWorkersError(failure)
                raise RunAborted(failure)
            results = list(self._done.values())
            amplitude = aggregate(results, self.jobs)
            # let pulling workers see the drain before the server goes away
            self._drain_wait(2.0)
        finally:
            self.stop()
        per_worker: dict[str, list[float]] = {}
        for r in sorted(results, key=lambda r: r.lo):
            per_worker.setdefault(r.worker, []).append(r.wall_time)
        n_workers = max(1, len(self._workers_seen))
        return RunReport(
            amplitude=amplitude,
            rounds=rounds_needed(self.jobs, n_workers),
            workers=n_workers,
            jobs=self.jobs,
            batches=len(self.batches),
            per_worker=per_worker,
            recomputed_batches=self.recomputed,
            wall_time=time.monotonic() - t0,
            backend="distributed",
        )

    def stop(self) -> None:
        self._stopping = True
        if self._server is not None:
            try:
                self._server.close()
            except OSError:
                pass
        for ch in list(self._channels.values()):
            ch.close()

    def _drain_wait(self, secs: float) -> None:
        deadline = time.monotonic() + secs
        with self._cond:
            while self._live and time.monotonic() < deadline:
                self._cond.wait(0.05)

    def _broadcast(self, msg: dict) -> None:
        for ch in list(self._channels.values()):
            try:
                ch.send(msg)
            except OSError:
                pass

    # -- connections -------------------------------------------------------

    def _accept_loop(self) -> None:
        assert self._server is not None
        while not self._stopping:
            try:
                sock, addr = self._server.accept()
            except socket.timeout:
                continue
            except OSError:
                return
            sock.settimeout(self.config.timeout_secs)
            with self._cond:
                cid = self._next_conn
                self._next_conn += 1
                ch = _Channel(sock)
                self._channels[cid] = ch
                self._live += 1
                self._cond.notify_all()
            threading.Thread(
                target=self._serve, args=(cid, ch, addr), name=f"qcut-conn{cid}", daemon=True
            ).start()

    def _serve(self, cid: int, ch: _Channel, addr) -> None:
        name = f"{addr[0]}:{addr[1]}"
        try:
            while True:
                try:
                    msg = ch.recv()
                except socket.timeout:
                    with self._cond:
                        held = [r for r, c in self._outstanding.items() if c == cid]
                    if held:
                        log.warning("worker %s silent for %ss holding %s", name, self.config.timeout_secs, held)
                        return
                    continue
                if msg is None:
                    return
                kind = msg["t"]
                if kind == "hello":
                    name = str(msg.get("worker", name))
                    with self._cond:
                        self._workers_seen.add(name)
                elif kind == "need_payload":
                    if msg.get("hash") != self.hash:
                        ch.send({"t": "abort", "why": "unknown payload hash"})
                        return
                    ch.send({"t": "payload", "hash": self.hash, "body": self.body})
                elif kind == "pull":
                    reply = self._next_batch(cid)
                    ch.send(reply)
                    if reply["t"] != "batch":
                        return
                elif kind == "result":
                    self._accept_result(cid, name, msg)
                elif kind == "error":
                    with self._cond:
                        self._failure = (
                            f"worker {name} failed on [{msg.get('lo')}, {msg.get('hi')}): "
                            f"{msg.get('why')}"
                        )
                        self._cond.notify_all()
                    return
                elif kind == "bye":
                    return
                else:
                    raise ProtocolError(f"unexpected message type {kind!r}")
        except (OSError, ProtocolError) as exc:
            log.warning("connection %s dropped: %s", name, exc)
        finally:
            self._release(cid)
            ch.close()

    def _next_batch(self, cid: int) -> dict:
        with self._cond:
            while True:
                if self._failure is not None:
                    return {"t": "abort", "why": self._failure}
                if self._queue:
                    rng = self._queue.popleft()
                    self._outstanding[rng] = cid
                    return {"t": "batch", "lo": rng[0], "hi": rng[1], "hash": self.hash}
                if len(self._done) == len(self.batches) or self._stopping:
                    return {"t": "drain"}
                self._cond.wait(0.5)

    def _accept_result(self, cid: int, name: str, msg: dict) -> None:
        rng = (int(msg["lo"]), int(msg["hi"]))
        value = complex(float(msg["re"]), float(msg["im"]))
        with self._cond:
            if rng not in self._known:
                raise ProtocolError(f"result for unknown range {rng}")
            if rng in self._done:
                self.duplicates += 1
                log.warning("duplicate result for %s from %s ignored", rng, name)
            else:
                self._done[rng] = WorkerResult(rng[0], rng[1], value, float(msg.get("secs", 0.0)), name)
                if rng in self._queue:
                    # requeued after a timeout but the original answer arrived
                    self._queue.remove(rng)
            if self._outstanding.get(rng) == cid:
                del self._outstanding[rng]
            self._cond.notify_all()

    def _release(self, cid: int) -> None:
        with self._cond:
            lost = [r for r, c in self._outstanding.items() if c == cid]
            for rng in lost:
                del self._outstanding[rng]
                if rng not in self._done:
                    self._queue.appendleft(rng)
                    self.recomputed += 1
                    log.warning("re-queued batch %s after losing its worker", rng)
            self._channels.pop(cid, None)
            self._live -= 1
            self._last_live = time.monotonic()
            self._cond.notify_all()


def run_distributed(
    config: MasterConfig,
    tn: TensorNetwork,
    cut: CutSet,
    plan: ContractionPlan,
    on_listening=None,
) -> RunReport:
    """Serve the job to connecting workers and return the aggregated report.

    ``on_listening(host, port)`` is called once the socket is bound, which
    is where callers start local workers.
    """
    master = Master(config, tn, cut, plan)
    host, port = master.start()
    if on_listening is not None:
        on_listening(host, port)
    return master.wait()


# -- worker side -------------------------------------------------------------


class _WorkerCrash(Exception):
    pass


def _worker_session(host: str, port: int, ident: str, slots: int, cache: dict, crash_after: int | None):
    sock = socket.create_connection((host, port))
    ch = _Channel(sock)
    batches = 0
    try:
        ch.send({"t": "hello", "worker": ident, "slots": slots})
        while True:
            ch.send({"t": "pull"})
            msg = ch.recv()
            if msg is None:
                raise ConnectionError("master closed the connection")
            kind = msg["t"]
            if kind == "drain":
                try:
                    ch.send({"t": "bye"})
                except OSError:
                    pass
                return 0
            if kind == "abort":
                log.error("worker %s aborted: %s", ident, msg.get("why"))
                return 1
            if kind != "batch":
                raise ProtocolError(f"expected a batch, got {kind!r}")
            lo, hi, h = int(msg["lo"]), int(msg["hi"]), msg["hash"]
            if h not in cache:
                ch.send({"t": "need_payload", "hash": h})
                reply = ch.recv()
                if reply is None or reply["t"] != "payload":
                    raise ProtocolError(f"expected payload, got {reply!r}")
                cache[h] = decode_payload(reply["body"], h)
            batches += 1
            if crash_after is not None and batches > crash_after:
                raise _WorkerCrash(f"injected crash holding [{lo}, {hi})")
            tn, cut, plan, max_rank = cache[h]
            t0 = time.perf_counter()
            try:
                value = contract_range(tn, cut, plan, lo, hi, max_rank)
            except Exception as exc:
                log.error("worker %s failed on [%d, %d): %s", ident, lo, hi, exc)
                ch.send({"t": "error", "lo": lo, "hi": hi, "why": str(exc)})
                return 1
            ch.send(
                {
                    "t": "result",
                    "lo": lo,
                    "hi": hi,
                    "re": value.real,
                    "im": value.imag,
                    "secs": time.perf_counter() - t0,
                }
            )
    finally:
        ch.close()


def run_worker(
    host: str,
    port: int,
    worker_id: str | None = None,
    slots: int = 1,
    reconnects: int = 0,
    crash_after: int | None = None,
    retry_delay: float = 0.2,
) -> int:
    """Serve batches until the master drains (0) or aborts (nonzero).

    ``slots`` independent connections run in parallel threads and share the
    payload cache. ``reconnects`` bounds how often a dropped connection is
    re-established. ``crash_after`` is a fault-injection hook: the
    connection drops without answering once that many batches were taken,
    then counts as a dropped connection.
    """
    ident = worker_id or f"{socket.gethostname()}-{os.getpid()}"
    cache: dict = {}
    codes = [0] * slots

    def slot(i: int) -> None:
        name = ident if slots == 1 else f"{ident}/{i}"
        left = reconnects
        crash = crash_after
        while True:
            try:
                codes[i] = _worker_session(host, port, name, slots, cache, crash)
                return
            except PayloadMismatch as exc:
                log.error("worker %s rejected payload: %s", name, exc)
                codes[i] = 3
                return
            except (OSError, ConnectionError, ProtocolError, _WorkerCrash) as exc:
                log.warning("worker %s lost its connection: %s", name, exc)
                crash = None
                if left <= 0:
                    codes[i] = 2
                    return
                left -= 1
                time.sleep(retry_delay)

    threads = [threading.Thread(target=slot, args=(i,), daemon=True) for i in range(slots)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    return max(codes)

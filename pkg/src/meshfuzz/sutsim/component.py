"""The simulated target components.

The entry component speaks the framed TLV protocol with the fuzzer, keeps
per-session state, and consults three downstream services over the same
framing: every SETUP is checked against the session manager, and
SERVICE_REQUEST messages drive the registry (discovery) and the config store
(configuration). Downstream replies are folded into the session flags, and
the SETUP handler then walks a validate / error-path / corner-path / default
cascade over those flags.

Components record an edge id (see edges.py) at every branch site into their
shared coverage region and bump the region generation at message boundaries.
All behavior is a deterministic function of the session's message history
and downstream replies.
"""

import os
import re
import socket
import threading
import time
from dataclasses import dataclass, field

from meshfuzz.mccm.region import Region
from meshfuzz.sutsim import edges as E
from meshfuzz.sutsim import tlv
from meshfuzz.sutsim.defects import ALL_DEFECTS

PHASE_IDLE = 0
PHASE_REGISTERED = 1
PHASE_ACTIVE = 2

DOWNSTREAM_DEADLINE_S = 0.1
IDENTITY_MAX = 8
TLV_LEN_CAP = 4096

_TOKEN_SAFE = re.compile(r"[^A-Za-z0-9_.-]")


class SimulatedCrash(Exception):
    """Raised instead of exiting when a component runs embedded in a test."""

    def __init__(self, site_id: int):
        super().__init__(f"crash site {site_id}")
        self.site_id = site_id


@dataclass
class SessionState:
    phase: int = PHASE_IDLE
    smf_session: int = tlv.FLAG_UNSET
    nrf_discovery: int = tlv.FLAG_UNSET
    upf_config: int = tlv.FLAG_UNSET
    counters: dict = field(default_factory=dict)

    def reset(self) -> None:
        self.phase = PHASE_IDLE
        self.smf_session = tlv.FLAG_UNSET
        self.nrf_discovery = tlv.FLAG_UNSET
        self.upf_config = tlv.FLAG_UNSET
        self.counters.clear()


class SocketLink:
    """Persistent client connection from the entry to one downstream."""

    def __init__(self, host: str, port: int, deadline_s: float = DOWNSTREAM_DEADLINE_S):
        self.host = host
        self.port = port
        self.deadline_s = deadline_s
        self._sock: socket.socket | None = None

    def _connect(self) -> socket.socket:
        if self._sock is None:
            self._sock = socket.create_connection((self.host, self.port),
                                                  timeout=self.deadline_s)
            self._sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        return self._sock

    def _close(self) -> None:
        if self._sock is not None:
            try:
                self._sock.close()
            except OSError:
                pass
            self._sock = None

    def request(self, msg_type: int, payload: bytes) -> int:
        """One sub-request round trip; FLAG_UNAVAILABLE on any failure."""
        for attempt in range(2):
            try:
                sock = self._connect()
                tlv.send_frame(sock, tlv.pack_tlv(msg_type, payload))
                reply = tlv.recv_frame(sock, time.monotonic() + self.deadline_s)
                if reply is None or len(reply) < 4:
                    raise ConnectionError("bad downstream reply")
                return reply[3]
            except (TimeoutError, ConnectionError, OSError):
                self._close()
                if attempt == 1:
                    return tlv.FLAG_UNAVAILABLE
        return tlv.FLAG_UNAVAILABLE

    def close(self) -> None:
        self._close()


class InProcessLink:
    """Link that calls another component directly (embedded test harness)."""

    def __init__(self, target: "Component"):
        self.target = target

    def request(self, msg_type: int, payload: bytes) -> int:
        reply = self.target.handle(tlv.pack_tlv(msg_type, payload))
        return reply[3] if len(reply) >= 4 else tlv.FLAG_UNAVAILABLE

    def close(self) -> None:
        pass


class Component:
    """Base: edge recording, crash plumbing, and the serve loop."""

    name = "component"

    def __init__(self, region: Region, defects: frozenset = frozenset(),
                 crash_log: str | None = None, crash_mode: str = "exit"):
        self.region = region
        self.defects = defects
        self.crash_log = crash_log
        self.crash_mode = crash_mode
        self.token = "-"

    # -- instrumentation ------------------------------------------------------

    def record(self, edge_id: int) -> None:
        self.region.record_edge(edge_id)

    def crash(self, site_id: int) -> None:
        if self.crash_log:
            with open(self.crash_log, "a", encoding="utf-8") as fh:
                fh.write(f"CRASH {self.name} {site_id} {self.token}\n")
                fh.flush()
                os.fsync(fh.fileno())
        if self.crash_mode == "raise":
            raise SimulatedCrash(site_id)
        os._exit(77)

    def set_token(self, raw: bytes) -> None:
        text = raw[:16].decode("ascii", errors="replace")
        self.token = _TOKEN_SAFE.sub("_", text) or "-"

    # -- message processing ----------------------------------------------------

    def handle(self, data: bytes) -> bytes:
        reply = self.process(data)
        self.region.bump_generation()
        return reply

    def process(self, data: bytes) -> bytes:
        raise NotImplementedError

    # -- serving ----------------------------------------------------------------

    def serve_forever(self, host: str, port: int,
                      stop: threading.Event | None = None,
                      ready: threading.Event | None = None) -> None:
        listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        listener.bind((host, port))
        listener.listen(4)
        listener.settimeout(0.2)
        if ready is not None:
            ready.set()
        try:
            while stop is None or not stop.is_set():
                try:
                    conn, _ = listener.accept()
                except socket.timeout:
                    continue
                conn.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
                try:
                    self._serve_connection(conn, stop)
                finally:
                    conn.close()
        finally:
            listener.close()

    def _serve_connection(self, conn: socket.socket,
                          stop: threading.Event | None) -> None:
        while stop is None or not stop.is_set():
            try:
                data = tlv.recv_frame(conn, time.monotonic() + 0.5)
            except TimeoutError:
                continue
            except (ConnectionError, OSError):
                return
            if data is None:
                return
            try:
                tlv.send_frame(conn, self.handle(data))
            except (ConnectionError, OSError):
                return

    # -- shared TLV parse -------------------------------------------------------

    def parse_tlv(self, data: bytes) -> tuple[int, bytes, bool, bool]:
        """Returns (msg_type, payload, truncated, huge); payload already
        trimmed to the declared length when the frame carries extra bytes."""
        msg_type = data[0]
        declared = data[1] | (data[2] << 8)
        body = data[3:]
        huge = declared > TLV_LEN_CAP
        if huge:
            return msg_type, body, False, True
        if declared > len(body):
            return msg_type, body, True, False
        return msg_type, body[:declared], False, False


class EntryComponent(Component):
    """Entry point of the simulated deployment (channel 0)."""

    name = "entry"

    def __init__(self, region: Region, links: dict,
                 defects: frozenset = frozenset(),
                 crash_log: str | None = None, crash_mode: str = "exit"):
        super().__init__(region, defects, crash_log, crash_mode)
        self.links = links
        self.session = SessionState()

    def process(self, data: bytes) -> bytes:
        self.record(E.E_LOOP)
        if len(data) < 3:
            self.record(E.E_HDR_SHORT)
            return tlv.reply_tlv(0x00, tlv.ST_MALFORMED)
        msg_type, payload, truncated, huge = self.parse_tlv(data)
        if huge:
            self.record(E.E_LEN_HUGE)
            return tlv.reply_tlv(msg_type, tlv.ST_MALFORMED)
        if truncated:
            self.record(E.E_LEN_OVERRUN)
        elif len(data) - 3 > len(payload):
            self.record(E.E_LEN_UNDERRUN)
        else:
            self.record(E.E_LEN_EXACT)
        self.session.counters[msg_type] = self.session.counters.get(msg_type, 0) + 1

        if msg_type == tlv.MSG_REGISTER:
            self.record(E.E_DISPATCH_REGISTER)
            return self._register(payload, truncated)
        if msg_type == tlv.MSG_SETUP:
            self.record(E.E_DISPATCH_SETUP)
            return self._setup(payload)
        if msg_type == tlv.MSG_SERVICE:
            self.record(E.E_DISPATCH_SERVICE)
            return self._service(payload)
        if msg_type == tlv.MSG_SESSION_RESET:
            self.record(E.E_DISPATCH_RESET)
            return self._session_reset(payload)
        self.record(E.E_DISPATCH_UNKNOWN)
        return tlv.reply_tlv(msg_type, tlv.ST_UNKNOWN_TYPE)

    # -- handlers -------------------------------------------------------------

    def _register(self, payload: bytes, truncated: bool) -> bytes:
        if not payload:
            self.record(E.E_REG_EMPTY)
            return tlv.reply_tlv(tlv.MSG_REGISTER, tlv.ST_MALFORMED)
        reg_type = payload[0]
        if reg_type == 0x01:
            self.record(E.E_REG_TYPE_NORMAL)
        elif reg_type == 0x02:
            self.record(E.E_REG_TYPE_EMERGENCY)
        elif reg_type == 0x7F:
            self.record(E.E_REG_TYPE_RESERVED)
            # Reserved type reads past the delivered buffer when the declared
            # length lies about it.
            if truncated and "D1" in self.defects:
                self.crash(ALL_DEFECTS["D1"].crash_site_id)
            return tlv.reply_tlv(tlv.MSG_REGISTER, tlv.ST_REJECTED)
        else:
            self.record(E.E_REG_TYPE_OTHER)
            return tlv.reply_tlv(tlv.MSG_REGISTER, tlv.ST_REJECTED)
        identity = payload[1:]
        if not identity:
            self.record(E.E_REG_IDENT_EMPTY)
            return tlv.reply_tlv(tlv.MSG_REGISTER, tlv.ST_REJECTED)
        if len(identity) <= IDENTITY_MAX:
            self.record(E.E_REG_IDENT_OK)
        else:
            self.record(E.E_REG_IDENT_LONG)
        if self.session.phase == PHASE_IDLE:
            self.record(E.E_REG_NEW)
            self.session.phase = PHASE_REGISTERED
        else:
            self.record(E.E_REG_AGAIN)
        return tlv.reply_tlv(tlv.MSG_REGISTER, tlv.ST_OK)

    def _setup(self, payload: bytes) -> bytes:
        if self.session.phase == PHASE_IDLE:
            self.record(E.E_SETUP_IDLE)
            return tlv.reply_tlv(tlv.MSG_SETUP, tlv.ST_BAD_STATE)
        self.record(E.E_SETUP_PHASE_OK)
        if len(payload) < 4:
            self.record(E.E_SETUP_SHORT)
        session_type = payload[0] if len(payload) >= 1 else 0
        hint_hi = payload[1] if len(payload) >= 2 else 0
        hint_lo = payload[2] if len(payload) >= 3 else 0
        qos = payload[3] if len(payload) >= 4 else 0
        if session_type == 0x01:
            self.record(E.E_SETUP_TYPE_IPV4)
        elif session_type == 0x02:
            self.record(E.E_SETUP_TYPE_IPV6)
        elif session_type == 0x03:
            self.record(E.E_SETUP_TYPE_ETHER)
        else:
            self.record(E.E_SETUP_TYPE_OTHER)

        query = bytes([session_type, hint_hi, hint_lo, qos,
                       self.session.nrf_discovery, self.session.upf_config])
        status = self.links["a"].request(tlv.A_QUERY, query)
        if status == tlv.FLAG_UNAVAILABLE:
            self.record(E.E_SETUP_QUERY_FAIL)
        else:
            self.record(E.E_SETUP_QUERY_OK)
        self.session.smf_session = status

        valid = len(payload) >= 4 and session_type in (0x01, 0x02, 0x03)
        if valid:
            self.record(E.E_PATH1)
            if self.session.phase != PHASE_ACTIVE:
                self.record(E.E_PATH1_ACTIVATED)
                self.session.phase = PHASE_ACTIVE
            else:
                self.record(E.E_PATH1_REACTIVATED)
            return tlv.reply_tlv(tlv.MSG_SETUP, tlv.ST_OK)

        self.record(E.E_SETUP_INVALID)
        if self.session.smf_session != tlv.SMF_ACTIVE:
            self.record(E.E_PATH2)
            if self.session.smf_session == tlv.SMF_INACTIVE:
                self.record(E.E_PATH2_INACTIVE)
                if "D2" in self.defects:
                    self.crash(ALL_DEFECTS["D2"].crash_site_id)
            elif self.session.smf_session == tlv.FLAG_UNAVAILABLE:
                self.record(E.E_PATH2_UNAVAILABLE)
            else:
                self.record(E.E_PATH2_OTHER)
            return tlv.reply_tlv(tlv.MSG_SETUP, tlv.ST_DOWNSTREAM_ERROR)

        if (self.session.nrf_discovery == tlv.NRF_LIMITED and session_type == 0x03
                and self.session.upf_config == tlv.UPF_PARTIAL):
            self.record(E.E_PATH3)
            if "D3" in self.defects:
                self.crash(ALL_DEFECTS["D3"].crash_site_id)
            self.record(E.E_PATH3_HANDLED)
            return tlv.reply_tlv(tlv.MSG_SETUP, tlv.ST_OK)

        self.record(E.E_DEFAULT_CASE)
        return tlv.reply_tlv(tlv.MSG_SETUP, tlv.ST_REJECTED)

    def _service(self, payload: bytes) -> bytes:
        if self.session.phase == PHASE_IDLE:
            self.record(E.E_SVC_IDLE)
            return tlv.reply_tlv(tlv.MSG_SERVICE, tlv.ST_BAD_STATE)
        if len(payload) < 2:
            self.record(E.E_SVC_SHORT)
            return tlv.reply_tlv(tlv.MSG_SERVICE, tlv.ST_MALFORMED)
        kind, param = payload[0], payload[1]
        if kind == 0x01:
            self.record(E.E_SVC_DISCOVERY)
            status = self.links["b"].request(tlv.B_DISCOVER, bytes([param]))
            if status == tlv.FLAG_UNAVAILABLE:
                self.record(E.E_SVC_B_FAIL)
            self.session.nrf_discovery = status
            return tlv.reply_tlv(tlv.MSG_SERVICE, tlv.ST_OK)
        if kind == 0x02:
            self.record(E.E_SVC_CONFIG)
            status = self.links["c"].request(
                tlv.C_CONFIGURE, bytes([param, self.session.nrf_discovery]))
            if status == tlv.FLAG_UNAVAILABLE:
                self.record(E.E_SVC_C_FAIL)
            self.session.upf_config = status
            return tlv.reply_tlv(tlv.MSG_SERVICE, tlv.ST_OK)
        if kind == 0x03:
            self.record(E.E_SVC_KEEPALIVE)
            return tlv.reply_tlv(tlv.MSG_SERVICE, tlv.ST_OK)
        self.record(E.E_SVC_OTHER)
        return tlv.reply_tlv(tlv.MSG_SERVICE, tlv.ST_REJECTED)

    def _session_reset(self, payload: bytes) -> bytes:
        self.record(E.E_RESET)
        self.set_token(payload)
        self.session.reset()
        fanout_ok = True
        for name, reset_type in (("a", tlv.A_RESET), ("b", tlv.B_RESET),
                                 ("c", tlv.C_RESET)):
            status = self.links[name].request(reset_type, payload[:16])
            if status == tlv.FLAG_UNAVAILABLE:
                fanout_ok = False
        if not fanout_ok:
            self.record(E.E_RESET_FANOUT_FAIL)
        return tlv.reply_tlv(tlv.MSG_SESSION_RESET, tlv.ST_OK)


class SessionManager(Component):
    """Downstream A (channel 1): session status authority."""

    name = "manager"

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self.degraded = False

    def process(self, data: bytes) -> bytes:
        self.record(E.A_LOOP)
        if len(data) < 3:
            self.record(E.A_HDR_SHORT)
            return tlv.reply_tlv(0x00, tlv.ST_MALFORMED)
        msg_type, payload, _, _ = self.parse_tlv(data)
        if msg_type == tlv.A_QUERY:
            return self._query(payload)
        if msg_type == tlv.A_RESET:
            self.record(E.A_RESET_EDGE)
            self.degraded = False
            self.set_token(payload)
            return tlv.reply_tlv(tlv.A_RESET, tlv.ST_OK)
        self.record(E.A_UNKNOWN_TYPE)
        return tlv.reply_tlv(msg_type, tlv.ST_UNKNOWN_TYPE)

    def _query(self, payload: bytes) -> bytes:
        self.record(E.A_QUERY_HANDLED)
        if len(payload) < 6:
            self.record(E.A_QUERY_SHORT)
            payload = payload + b"\x00" * (6 - len(payload))
        session_type, hint_hi, hint_lo, qos, nrf, upf = payload[:6]

        if session_type == 0x01:
            self.record(E.A_TYPE_IPV4)
        elif session_type == 0x02:
            self.record(E.A_TYPE_IPV6)
        elif session_type == 0x03:
            self.record(E.A_TYPE_ETHER)
        else:
            self.record(E.A_TYPE_OTHER)

        if hint_hi == 0:
            self.record(E.A_HINT_HI_ZERO)
            if hint_lo == 0:
                self.record(E.A_HINT_LO_ZERO)
            elif hint_lo <= 0x7F:
                self.record(E.A_HINT_LO_LOW)
            elif hint_lo <= 0xDF:
                self.record(E.A_HINT_LO_MID)
            elif hint_lo <= 0xEF:
                self.record(E.A_HINT_LO_ECLASS)
                if hint_lo == 0xEE:
                    self.record(E.A_HINT_LO_EXACT)
            else:
                self.record(E.A_HINT_LO_HIGH)
        else:
            self.record(E.A_HINT_HI_SET)

        if qos == 0:
            self.record(E.A_QOS_ZERO)
        elif qos <= 0x2F:
            self.record(E.A_QOS_LOW)
        elif qos <= 0x3F:
            self.record(E.A_QOS_MCLASS)
        elif qos <= 0x7F:
            self.record(E.A_QOS_MID)
        else:
            self.record(E.A_QOS_HIGH)

        if hint_hi == 0 and hint_lo == 0xEE:
            if not self.degraded:
                self.record(E.A_DEGRADE_ENTER)
                self.degraded = True
            else:
                self.record(E.A_DEGRADE_AGAIN)

        if nrf == tlv.NRF_LIMITED and upf == tlv.UPF_PARTIAL:
            self.record(E.A_CTX)
            if session_type == 0x01:
                self.record(E.A_CTX_TYPE_IPV4)
            elif session_type == 0x02:
                self.record(E.A_CTX_TYPE_IPV6)
            elif session_type == 0x03:
                self.record(E.A_CTX_TYPE_ETHER)
            else:
                self.record(E.A_CTX_TYPE_OTHER)

        if self.degraded:
            self.record(E.A_REPLY_INACTIVE)
            return tlv.reply_tlv(tlv.A_QUERY, tlv.SMF_INACTIVE)
        self.record(E.A_REPLY_ACTIVE)
        return tlv.reply_tlv(tlv.A_QUERY, tlv.SMF_ACTIVE)


class Registry(Component):
    """Downstream B (channel 2): discovery authority."""

    name = "registry"

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self.limited = False

    def process(self, data: bytes) -> bytes:
        self.record(E.B_LOOP)
        if len(data) < 3:
            self.record(E.B_HDR_SHORT)
            return tlv.reply_tlv(0x00, tlv.ST_MALFORMED)
        msg_type, payload, _, _ = self.parse_tlv(data)
        if msg_type == tlv.B_DISCOVER:
            return self._discover(payload)
        if msg_type == tlv.B_RESET:
            self.record(E.B_RESET_EDGE)
            self.limited = False
            self.set_token(payload)
            return tlv.reply_tlv(tlv.B_RESET, tlv.ST_OK)
        self.record(E.B_UNKNOWN_TYPE)
        return tlv.reply_tlv(msg_type, tlv.ST_UNKNOWN_TYPE)

    def _discover(self, payload: bytes) -> bytes:
        self.record(E.B_DISCOVER_HANDLED)
        if payload:
            mode = payload[0]
        else:
            self.record(E.B_DISCOVER_EMPTY)
            mode = 0
        if mode == 0x00:
            self.record(E.B_MODE_ZERO)
        elif mode == 0x01:
            self.record(E.B_MODE_ONE)
        elif mode == 0x02:
            self.record(E.B_MODE_LIMITED)
        elif mode <= 0x0F:
            self.record(E.B_MODE_SMALL)
        elif mode <= 0x7F:
            self.record(E.B_MODE_MID)
        else:
            self.record(E.B_MODE_HIGH)
        if mode == 0x02:
            if not self.limited:
                self.record(E.B_LIMITED_ENTER)
                self.limited = True
            else:
                self.record(E.B_LIMITED_AGAIN)
        if self.limited:
            self.record(E.B_REPLY_LIMITED)
            return tlv.reply_tlv(tlv.B_DISCOVER, tlv.NRF_LIMITED)
        self.record(E.B_REPLY_FULL)
        return tlv.reply_tlv(tlv.B_DISCOVER, tlv.NRF_FULL)


class ConfigStore(Component):
    """Downstream C (channel 3): configuration authority."""

    name = "config"

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self.partial = False

    def process(self, data: bytes) -> bytes:
        self.record(E.C_LOOP)
        if len(data) < 3:
            self.record(E.C_HDR_SHORT)
            return tlv.reply_tlv(0x00, tlv.ST_MALFORMED)
        msg_type, payload, _, _ = self.parse_tlv(data)
        if msg_type == tlv.C_CONFIGURE:
            return self._configure(payload)
        if msg_type == tlv.C_RESET:
            self.record(E.C_RESET_EDGE)
            self.partial = False
            self.set_token(payload)
            return tlv.reply_tlv(tlv.C_RESET, tlv.ST_OK)
        self.record(E.C_UNKNOWN_TYPE)
        return tlv.reply_tlv(msg_type, tlv.ST_UNKNOWN_TYPE)

    def _configure(self, payload: bytes) -> bytes:
        self.record(E.C_CONFIGURE_HANDLED)
        if payload:
            mode = payload[0]
        else:
            self.record(E.C_CONFIGURE_EMPTY)
            mode = 0
        nrf = payload[1] if len(payload) > 1 else 0
        if mode == 0x00:
            self.record(E.C_MODE_ZERO)
        elif mode == 0x01:
            self.record(E.C_MODE_PARTIAL)
        elif mode <= 0x0F:
            self.record(E.C_MODE_SMALL)
        elif mode <= 0x7F:
            self.record(E.C_MODE_MID)
        else:
            self.record(E.C_MODE_HIGH)
        if mode == 0x01:
            if not self.partial:
                self.record(E.C_PARTIAL_ENTER)
                self.partial = True
            else:
                self.record(E.C_PARTIAL_AGAIN)
            if nrf == tlv.NRF_LIMITED:
                self.record(E.C_CTX_LIMITED)
        if self.partial:
            self.record(E.C_REPLY_PARTIAL)
            return tlv.reply_tlv(tlv.C_CONFIGURE, tlv.UPF_PARTIAL)
        self.record(E.C_REPLY_COMPLETE)
        return tlv.reply_tlv(tlv.C_CONFIGURE, tlv.UPF_COMPLETE)


ROLE_CLASSES = {
    "entry": EntryComponent,
    "manager": SessionManager,
    "registry": Registry,
    "config": ConfigStore,
}

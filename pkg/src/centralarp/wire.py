"""Link-layer frame codec for the central secure ARP protocol.

Every frame shares one outer shape::

    dest(6) | src(6) | ethertype(2) | ... | fcs(4)

Protocol messages use the experimental EtherType 0x88B5 followed by a
one-byte message type, the message body and an authentication section::

    msg_type(1) | body | auth_kind(1) | auth material

Plain ARP uses EtherType 0x0806 with the 28-byte RFC 826 payload and no
message type or auth section.  The simulator's DHCP carrier uses 0x88B6
(see :class:`DhcpMessage`).

Bodies (field order and widths)::

    IpSend        ip(4) host_mac(6)
    IpReply       ip(4) host_mac(6) ack(1)      ack in bit 0, bits 1-7 zero
    ArpCheck      "ACH"(3) ip(4)
    ArpNoChange   "ANC"(3) ip(4)
    ArpAck        "ACK"(3) ip(4)
    SignedArpReply  RFC 826 reply payload(28)

Auth material::

    kind 0x00  nothing
    kind 0x01  tag(32)
    kind 0x02  signature(64) cert_len(2, big-endian) cert(cert_len)

The FCS is the CRC-32 (IEEE 802.3) of every preceding byte, written
big-endian.  Frames are not padded to the Ethernet minimum.
"""

from __future__ import annotations

import binascii
import enum
import functools
import ipaddress
import re
import struct
from dataclasses import dataclass, field
from typing import ClassVar, Union

IPv4Address = ipaddress.IPv4Address

ETHERTYPE_ARP = 0x0806
ETHERTYPE_SARP = 0x88B5
ETHERTYPE_DHCP = 0x88B6

HEADER_LEN = 14
FCS_LEN = 4
TAG_LEN = 32
SIGNATURE_LEN = 64
MAX_CERT_LEN = 0xFFFF

_ARP_FIXED = struct.Struct("!HHBBH")  # htype, ptype, hlen, plen, oper
_ARP_HTYPE_ETHERNET = 1
_ARP_PTYPE_IPV4 = 0x0800


# -- errors -----------------------------------------------------------------


class WireError(ValueError):
    pass


class DecodeError(WireError):
    """Raised when bytes do not form a valid frame.

    ``offset`` is the byte position at which decoding gave up.
    """

    def __init__(self, message: str, offset: int):
        super().__init__(message)
        self.offset = offset

    def __str__(self) -> str:
        return f"{type(self).__name__} at offset {self.offset}: {self.args[0]}"


class TruncatedFrame(DecodeError):
    pass


class BadFcs(DecodeError):
    pass


class BadMarker(DecodeError):
    pass


class UnknownMsgType(DecodeError):
    pass


class BadEtherType(DecodeError):
    pass


class MalformedField(DecodeError):
    """A field is present but holds a value the layout forbids."""


class HexError(WireError):
    pass


class BadHexDigit(HexError):
    pass


class OddLength(HexError):
    pass


# -- addresses --------------------------------------------------------------


@dataclass(frozen=True, order=True)
class MacAddr:
    octets: bytes

    def __post_init__(self):
        if not isinstance(self.octets, bytes) or len(self.octets) != 6:
            raise ValueError(f"MAC address needs 6 octets, got {self.octets!r}")

    @classmethod
    def parse(cls, text: str) -> MacAddr:
        parts = re.split(r"[:-]", text.strip())
        if len(parts) != 6 or not all(re.fullmatch(r"[0-9a-fA-F]{2}", p) for p in parts):
            raise ValueError(f"not a MAC address: {text!r}")
        return cls(bytes(int(p, 16) for p in parts))

    @classmethod
    def from_int(cls, value: int) -> MacAddr:
        return cls(value.to_bytes(6, "big"))

    @property
    def is_broadcast(self) -> bool:
        return self.octets == b"\xff" * 6

    def __str__(self) -> str:
        return ":".join(f"{b:02X}" for b in self.octets)

    def __repr__(self) -> str:
        return f"MacAddr('{self}')"


BROADCAST = MacAddr(b"\xff" * 6)
ZERO_MAC = MacAddr(b"\x00" * 6)
ZERO_IP = IPv4Address(0)


def as_mac(value: MacAddr | str | bytes) -> MacAddr:
    if isinstance(value, MacAddr):
        return value
    if isinstance(value, bytes):
        return MacAddr(value)
    return MacAddr.parse(value)


def as_ip(value: IPv4Address | str | int) -> IPv4Address:
    if isinstance(value, IPv4Address):
        return value
    return IPv4Address(value)


# -- message bodies ---------------------------------------------------------


class MsgType(enum.IntEnum):
    IP_SEND = 0x01
    IP_REPLY = 0x02
    ARP_CHECK = 0x03
    ARP_NO_CHANGE = 0x04
    ARP_ACK = 0x05
    SIGNED_ARP_REPLY = 0x06


class ArpOp(enum.IntEnum):
    REQUEST = 1
    REPLY = 2


class DhcpOp(enum.IntEnum):
    DISCOVER = 1
    OFFER = 2
    REQUEST = 3
    ACK = 4


@dataclass(frozen=True)
class IpSend:
    ip: IPv4Address
    mac: MacAddr
    msg_type: ClassVar[MsgType] = MsgType.IP_SEND


@dataclass(frozen=True)
class IpReply:
    ip: IPv4Address
    mac: MacAddr
    ack: bool = True
    msg_type: ClassVar[MsgType] = MsgType.IP_REPLY


@dataclass(frozen=True)
class ArpCheck:
    ip: IPv4Address
    msg_type: ClassVar[MsgType] = MsgType.ARP_CHECK
    marker: ClassVar[bytes] = b"ACH"


@dataclass(frozen=True)
class ArpNoChange:
    ip: IPv4Address
    msg_type: ClassVar[MsgType] = MsgType.ARP_NO_CHANGE
    marker: ClassVar[bytes] = b"ANC"


@dataclass(frozen=True)
class ArpAck:
    ip: IPv4Address
    msg_type: ClassVar[MsgType] = MsgType.ARP_ACK
    marker: ClassVar[bytes] = b"ACK"


@dataclass(frozen=True)
class StdArp:
    op: ArpOp
    sender_mac: MacAddr
    sender_ip: IPv4Address
    target_mac: MacAddr
    target_ip: IPv4Address


@dataclass(frozen=True)
class SignedArpReply:
    inner: StdArp
    msg_type: ClassVar[MsgType] = MsgType.SIGNED_ARP_REPLY

    def __post_init__(self):
        if self.inner.op != ArpOp.REPLY:
            raise ValueError("SignedArpReply must wrap an ARP reply")


@dataclass(frozen=True)
class DhcpMessage:
    """Minimal DHCP carrier for the simulator (no option encoding).

    Layout after the header: op(1) xid(4) client_mac(6) your_ip(4)
    central_mac(6).  ``central_mac`` is how a joining host learns where
    the Central Server lives; it is all-zero outside secure mode.
    """

    op: DhcpOp
    xid: int
    client_mac: MacAddr
    your_ip: IPv4Address = ZERO_IP
    central_mac: MacAddr = ZERO_MAC


MarkedBody = Union[ArpCheck, ArpNoChange, ArpAck]
Body = Union[IpSend, IpReply, ArpCheck, ArpNoChange, ArpAck, StdArp, SignedArpReply, DhcpMessage]

_MARKED = {cls.msg_type: cls for cls in (ArpCheck, ArpNoChange, ArpAck)}


# -- auth section -----------------------------------------------------------


class AuthKind(enum.IntEnum):
    NONE = 0x00
    KEYED_TAG = 0x01
    SIGNATURE = 0x02


@dataclass(frozen=True)
class AuthSection:
    kind: AuthKind = AuthKind.NONE
    tag: bytes = b""
    signature: bytes = b""
    cert: bytes = b""

    def __post_init__(self):
        if self.kind == AuthKind.NONE:
            ok = not (self.tag or self.signature or self.cert)
        elif self.kind == AuthKind.KEYED_TAG:
            ok = len(self.tag) == TAG_LEN and not (self.signature or self.cert)
        else:
            ok = (
                len(self.signature) == SIGNATURE_LEN
                and len(self.cert) <= MAX_CERT_LEN
                and not self.tag
            )
        if not ok:
            raise ValueError(f"inconsistent auth section for kind {self.kind.name}")

    @classmethod
    def keyed(cls, tag: bytes) -> AuthSection:
        return cls(AuthKind.KEYED_TAG, tag=bytes(tag))

    @classmethod
    def signed(cls, signature: bytes, cert: bytes) -> AuthSection:
        return cls(AuthKind.SIGNATURE, signature=bytes(signature), cert=bytes(cert))


NO_AUTH = AuthSection()


def required_auth_kind(body: Body) -> AuthKind:
    if isinstance(body, (IpSend, IpReply)):
        return AuthKind.KEYED_TAG
    if isinstance(body, (ArpCheck, ArpNoChange, ArpAck, SignedArpReply)):
        return AuthKind.SIGNATURE
    return AuthKind.NONE


# -- frame ------------------------------------------------------------------


@dataclass(frozen=True)
class Frame:
    dest: MacAddr
    src: MacAddr
    body: Body
    auth: AuthSection = field(default=NO_AUTH)

    def __post_init__(self):
        if self.src.is_broadcast:
            raise ValueError("broadcast address cannot be a frame source")
        want = required_auth_kind(self.body)
        if self.auth.kind != want:
            raise ValueError(
                f"{type(self.body).__name__} requires auth kind {want.name}, "
                f"got {self.auth.kind.name}"
            )

    @property
    def kind(self) -> str:
        return body_kind(self.body)

    def with_auth(self, auth: AuthSection) -> Frame:
        return Frame(self.dest, self.src, self.body, auth)


def body_kind(body: Body) -> str:
    if isinstance(body, StdArp):
        return f"ARP_{body.op.name}"
    if isinstance(body, DhcpMessage):
        return f"DHCP_{body.op.name}"
    return body.msg_type.name


def ethertype_of(body: Body) -> int:
    if isinstance(body, StdArp):
        return ETHERTYPE_ARP
    if isinstance(body, DhcpMessage):
        return ETHERTYPE_DHCP
    return ETHERTYPE_SARP


# -- encoding ---------------------------------------------------------------


def compute_fcs(data: bytes) -> bytes:
    """CRC-32 (IEEE 802.3, reflected, init/xor-out 0xFFFFFFFF), big-endian."""
    return (binascii.crc32(data) & 0xFFFFFFFF).to_bytes(4, "big")


def _arp_payload_fields(arp: StdArp, prefix: str = "") -> list[tuple[str, bytes]]:
    return [
        (prefix + "htype", _ARP_HTYPE_ETHERNET.to_bytes(2, "big")),
        (prefix + "ptype", _ARP_PTYPE_IPV4.to_bytes(2, "big")),
        (prefix + "hlen", b"\x06"),
        (prefix + "plen", b"\x04"),
        (prefix + "oper", int(arp.op).to_bytes(2, "big")),
        (prefix + "sender_mac", arp.sender_mac.octets),
        (prefix + "sender_ip", arp.sender_ip.packed),
        (prefix + "target_mac", arp.target_mac.octets),
        (prefix + "target_ip", arp.target_ip.packed),
    ]


def _body_fields(body: Body) -> list[tuple[str, bytes]]:
    if isinstance(body, StdArp):
        return _arp_payload_fields(body)
    if isinstance(body, DhcpMessage):
        return [
            ("dhcp_op", bytes([body.op])),
            ("xid", body.xid.to_bytes(4, "big")),
            ("client_mac", body.client_mac.octets),
            ("your_ip", body.your_ip.packed),
            ("central_mac", body.central_mac.octets),
        ]
    fields = [("msg_type", bytes([body.msg_type]))]
    if isinstance(body, IpSend):
        fields += [("ip", body.ip.packed), ("host_mac", body.mac.octets)]
    elif isinstance(body, IpReply):
        fields += [
            ("ip", body.ip.packed),
            ("host_mac", body.mac.octets),
            ("ack", b"\x01" if body.ack else b"\x00"),
        ]
    elif isinstance(body, SignedArpReply):
        fields += _arp_payload_fields(body.inner, prefix="arp.")
    else:
        fields += [("marker", body.marker), ("ip", body.ip.packed)]
    return fields


def _auth_fields(body: Body, auth: AuthSection) -> list[tuple[str, bytes]]:
    if isinstance(body, (StdArp, DhcpMessage)):
        return []
    fields = [("auth_kind", bytes([auth.kind]))]
    if auth.kind == AuthKind.KEYED_TAG:
        fields.append(("tag", auth.tag))
    elif auth.kind == AuthKind.SIGNATURE:
        fields += [
            ("signature", auth.signature),
            ("cert_len", len(auth.cert).to_bytes(2, "big")),
            ("cert", auth.cert),
        ]
    return fields


def _header_fields(frame: Frame) -> list[tuple[str, bytes]]:
    return [
        ("dest", frame.dest.octets),
        ("src", frame.src.octets),
        ("ethertype", ethertype_of(frame.body).to_bytes(2, "big")),
    ]


def signed_bytes(dest: MacAddr, src: MacAddr, body: Body) -> bytes:
    """Bytes covered by tags and signatures: dest through the end of the body."""
    head = dest.octets + src.octets + ethertype_of(body).to_bytes(2, "big")
    return head + b"".join(v for _, v in _body_fields(body))


def signed_portion(frame: Frame) -> bytes:
    return signed_bytes(frame.dest, frame.src, frame.body)


def encode_frame(frame: Frame) -> bytes:
    parts = _header_fields(frame) + _body_fields(frame.body) + _auth_fields(frame.body, frame.auth)
    prefix = b"".join(v for _, v in parts)
    return prefix + compute_fcs(prefix)


@dataclass(frozen=True)
class FieldInfo:
    name: str
    offset: int
    width: int
    raw: bytes


def field_layout(frame: Frame) -> list[FieldInfo]:
    """Field names, offsets and widths of ``frame`` as laid out by encode_frame."""
    parts = _header_fields(frame) + _body_fields(frame.body) + _auth_fields(frame.body, frame.auth)
    out, offset = [], 0
    for name, raw in parts:
        out.append(FieldInfo(name, offset, len(raw), raw))
        offset += len(raw)
    prefix = b"".join(p for _, p in parts)
    out.append(FieldInfo("fcs", offset, FCS_LEN, compute_fcs(prefix)))
    return out


# -- decoding ---------------------------------------------------------------


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.data):
            raise TruncatedFrame(
                f"need {n} bytes for {what}, {len(self.data) - self.pos} left", self.pos
            )
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def mac(self, what: str) -> MacAddr:
        return MacAddr(self.take(6, what))

    def ip(self, what: str) -> IPv4Address:
        return IPv4Address(self.take(4, what))

    def u8(self, what: str) -> int:
        return self.take(1, what)[0]

    def u16(self, what: str) -> int:
        return int.from_bytes(self.take(2, what), "big")


def _read_arp(r: _Reader) -> StdArp:
    start = r.pos
    htype, ptype, hlen, plen, oper = _ARP_FIXED.unpack(r.take(_ARP_FIXED.size, "ARP header"))
    if (htype, ptype, hlen, plen) != (_ARP_HTYPE_ETHERNET, _ARP_PTYPE_IPV4, 6, 4):
        raise MalformedField("ARP payload is not Ethernet/IPv4", start)
    if oper not in (ArpOp.REQUEST, ArpOp.REPLY):
        raise MalformedField(f"unknown ARP operation {oper}", start + 6)
    return StdArp(
        ArpOp(oper),
        r.mac("sender MAC"),
        r.ip("sender IP"),
        r.mac("target MAC"),
        r.ip("target IP"),
    )


def _read_auth(r: _Reader, body: Body) -> AuthSection:
    at = r.pos
    kind = r.u8("auth kind")
    want = required_auth_kind(body)
    if kind != want:
        raise MalformedField(
            f"auth kind 0x{kind:02x} not allowed on {type(body).__name__}", at
        )
    if kind == AuthKind.KEYED_TAG:
        return AuthSection.keyed(r.take(TAG_LEN, "tag"))
    signature = r.take(SIGNATURE_LEN, "signature")
    cert_len = r.u16("cert length")
    return AuthSection.signed(signature, r.take(cert_len, "certificate"))


def _read_sarp_body(r: _Reader) -> Body:
    at = r.pos
    code = r.u8("message type")
    try:
        msg_type = MsgType(code)
    except ValueError:
        raise UnknownMsgType(f"message type 0x{code:02x}", at) from None
    if msg_type == MsgType.IP_SEND:
        return IpSend(r.ip("IP address"), r.mac("host MAC"))
    if msg_type == MsgType.IP_REPLY:
        ip, mac = r.ip("IP address"), r.mac("host MAC")
        ack_at = r.pos
        ack = r.u8("ACK")
        if ack & 0xFE:
            raise MalformedField(f"ACK byte 0x{ack:02x} has reserved bits set", ack_at)
        return IpReply(ip, mac, bool(ack))
    if msg_type == MsgType.SIGNED_ARP_REPLY:
        inner_at = r.pos
        inner = _read_arp(r)
        if inner.op != ArpOp.REPLY:
            raise MalformedField("signed ARP payload is not a reply", inner_at + 6)
        return SignedArpReply(inner)
    cls = _MARKED[msg_type]
    marker_at = r.pos
    marker = r.take(3, "marker")
    if marker != cls.marker:
        raise BadMarker(f"expected {cls.marker.decode()!r}, got {marker!r}", marker_at)
    return cls(r.ip("IP address"))


def _read_dhcp(r: _Reader) -> DhcpMessage:
    at = r.pos
    op = r.u8("DHCP op")
    if op not in DhcpOp._value2member_map_:
        raise MalformedField(f"unknown DHCP op {op}", at)
    return DhcpMessage(
        DhcpOp(op),
        int.from_bytes(r.take(4, "xid"), "big"),
        r.mac("client MAC"),
        r.ip("your IP"),
        r.mac("central MAC"),
    )


def decode_frame(data: bytes) -> Frame:
    """Parse and validate one frame; raises a :class:`DecodeError` subclass."""
    data = bytes(data)
    r = _Reader(data)
    dest = r.mac("destination")
    src_at = r.pos
    src = r.mac("source")
    if src.is_broadcast:
        raise MalformedField("broadcast source address", src_at)
    et_at = r.pos
    ethertype = r.u16("ethertype")
    if ethertype == ETHERTYPE_ARP:
        body: Body = _read_arp(r)
        auth = NO_AUTH
    elif ethertype == ETHERTYPE_DHCP:
        body = _read_dhcp(r)
        auth = NO_AUTH
    elif ethertype == ETHERTYPE_SARP:
        body = _read_sarp_body(r)
        auth = _read_auth(r, body)
    else:
        raise BadEtherType(f"ethertype 0x{ethertype:04x}", et_at)

    fcs_at = r.pos
    fcs = r.take(FCS_LEN, "FCS")
    if r.pos != len(data):
        raise MalformedField(f"{len(data) - r.pos} trailing bytes after FCS", r.pos)
    if fcs != compute_fcs(data[:fcs_at]):
        raise BadFcs(f"FCS {fcs.hex()} != computed {compute_fcs(data[:fcs_at]).hex()}", fcs_at)
    return Frame(dest, src, body, auth)


@functools.lru_cache(maxsize=4096)
def decode_cached(data: bytes) -> Frame:
    """Memoized :func:`decode_frame` for hot simulator paths; frames are immutable."""
    return decode_frame(data)


def peek_dest(data: bytes) -> MacAddr | None:
    """Destination MAC of raw bytes without validating the rest."""
    if len(data) < 6:
        return None
    return MacAddr(bytes(data[:6]))


def peek_kind(data: bytes) -> str:
    """Best-effort message kind label for tracing; never raises."""
    if len(data) < HEADER_LEN + 1:
        return "MALFORMED"
    return _kind_of_header(bytes(data[12:22]))


@functools.lru_cache(maxsize=256)
def _kind_of_header(data: bytes) -> str:
    # ``data`` is frame[12:22]: ethertype onward
    data = bytes(12) + data
    ethertype = int.from_bytes(data[12:14], "big")
    if ethertype == ETHERTYPE_ARP:
        if len(data) >= 22:
            op = int.from_bytes(data[20:22], "big")
            if op in ArpOp._value2member_map_:
                return f"ARP_{ArpOp(op).name}"
        return "MALFORMED"
    if ethertype == ETHERTYPE_DHCP:
        op = data[14]
        return f"DHCP_{DhcpOp(op).name}" if op in DhcpOp._value2member_map_ else "MALFORMED"
    if ethertype == ETHERTYPE_SARP:
        code = data[14]
        return MsgType(code).name if code in MsgType._value2member_map_ else "MALFORMED"
    return "MALFORMED"


# -- hex interchange --------------------------------------------------------

_WS = re.compile(r"\s+")
_NOT_HEX = re.compile(r"[^0-9a-fA-F]")


def frame_hex(frame: Frame | bytes) -> str:
    data = encode_frame(frame) if isinstance(frame, Frame) else bytes(frame)
    return data.hex()


def parse_hex(text: str) -> bytes:
    compact = _WS.sub("", text)
    bad = _NOT_HEX.search(compact)
    if bad:
        raise BadHexDigit(f"invalid hex digit {bad.group()!r} at position {bad.start()}")
    if len(compact) % 2:
        raise OddLength(f"hex text has odd length {len(compact)}")
    return bytes.fromhex(compact)

import random
import zlib

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from centralarp import wire
from centralarp.wire import (
    ArpCheck,
    AuthSection,
    Frame,
    IpReply,
    IPv4Address,
    MacAddr,
    decode_frame,
    encode_frame,
)
from factories import KINDS, LAYOUTS, golden_frames, random_frame
from oracles import crc32_bitwise

CHECK_DEST = MacAddr.parse("02:00:00:00:00:0B")
CHECK_SRC = MacAddr.parse("02:00:00:00:00:01")


def check_frame(cert_len=40):
    return Frame(
        CHECK_DEST,
        CHECK_SRC,
        ArpCheck(IPv4Address("10.0.0.7")),
        AuthSection.signed(bytes(64), bytes(cert_len)),
    )


# -- FCS --------------------------------------------------------------------


def test_oracle_agrees_with_zlib():
    rng = random.Random(1)
    for n in range(0, 300, 7):
        data = rng.randbytes(n)
        assert crc32_bitwise(data) == zlib.crc32(data)


def test_fcs_golden_vectors():
    assert wire.compute_fcs(b"") == bytes(4)
    assert crc32_bitwise(b"123456789") == 0xCBF43926
    assert wire.compute_fcs(b"123456789") == bytes.fromhex("cbf43926")


@pytest.mark.parametrize("kind", KINDS)
def test_fcs_matches_oracle_on_every_type(kind):
    rng = random.Random(kind)
    for _ in range(50):
        data = encode_frame(random_frame(rng, kind))
        assert int.from_bytes(data[-4:], "big") == crc32_bitwise(data[:-4])


# -- layout -----------------------------------------------------------------


@pytest.mark.parametrize("kind", KINDS)
def test_field_layout_matches_table(kind):
    frame = golden_frames()[kind]
    expected, offset = [], 0
    for name, width in LAYOUTS[kind] + [("fcs", 4)]:
        expected.append((name, offset, width))
        offset += width
    got = [(f.name, f.offset, f.width) for f in wire.field_layout(frame)]
    assert got == expected
    assert len(encode_frame(frame)) == offset


def test_arp_check_example_length_and_marker():
    data = encode_frame(check_frame())
    assert len(data) == 6 + 6 + 2 + 1 + 3 + 4 + 1 + 64 + 2 + 40 + 4 == 133
    assert data[15:18] == b"ACH"
    assert data[12:14] == b"\x88\xb5"
    assert data[22] == 0x02


def test_std_arp_uses_arp_ethertype_and_rfc826_payload():
    data = encode_frame(golden_frames()["StdArp"])
    assert data[12:14] == b"\x08\x06"
    assert len(data) == 14 + 28 + 4
    assert data[14:22] == bytes.fromhex("0001080006040001")


def test_ack_byte_is_lsb():
    for ack, byte in ((True, 0x01), (False, 0x00)):
        frame = Frame(CHECK_DEST, CHECK_SRC, IpReply(IPv4Address("10.0.0.7"), CHECK_DEST, ack), AuthSection.keyed(bytes(32)))
        assert encode_frame(frame)[25] == byte


def test_ack_reserved_bits_rejected():
    frame = Frame(CHECK_DEST, CHECK_SRC, IpReply(IPv4Address("10.0.0.7"), CHECK_DEST), AuthSection.keyed(bytes(32)))
    data = bytearray(encode_frame(frame)[:-4])
    data[25] = 0x03
    with pytest.raises(wire.MalformedField):
        decode_frame(bytes(data) + wire.compute_fcs(bytes(data)))


def test_markers():
    assert [cls.marker for cls in (wire.ArpCheck, wire.ArpNoChange, wire.ArpAck)] == [b"ACH", b"ANC", b"ACK"]


# -- round trips ------------------------------------------------------------


@pytest.mark.parametrize("kind", KINDS)
def test_round_trip_random(kind):
    rng = random.Random(f"rt-{kind}")
    for _ in range(300):
        frame = random_frame(rng, kind)
        data = encode_frame(frame)
        assert decode_frame(data) == frame
        assert encode_frame(decode_frame(data)) == data


@settings(max_examples=200, deadline=None)
@given(seed=st.integers(min_value=0, max_value=2**32), kind=st.sampled_from(KINDS))
def test_round_trip_property(seed, kind):
    frame = random_frame(random.Random(seed), kind)
    assert decode_frame(encode_frame(frame)) == frame


@settings(max_examples=300, deadline=None)
@given(st.binary(max_size=200))
def test_decode_garbage_raises_only_decode_errors(data):
    try:
        frame = decode_frame(data)
    except wire.DecodeError:
        return
    assert encode_frame(frame) == data


# -- corruption -------------------------------------------------------------


@pytest.mark.parametrize("kind", KINDS)
def test_single_byte_flip_rejected(kind):
    data = encode_frame(golden_frames()[kind])
    for pos in range(len(data)):
        for mask in (0x01, 0x80, 0xFF):
            corrupt = bytearray(data)
            corrupt[pos] ^= mask
            with pytest.raises(wire.DecodeError):
                decode_frame(bytes(corrupt))


def test_flip_in_ip_gives_bad_fcs():
    data = bytearray(encode_frame(check_frame()))
    data[19] ^= 0x01
    with pytest.raises(wire.BadFcs):
        decode_frame(bytes(data))


def test_bad_marker_with_valid_fcs():
    prefix = bytearray(encode_frame(check_frame())[:-4])
    prefix[15:18] = b"ACX"
    data = bytes(prefix) + wire.compute_fcs(bytes(prefix))
    with pytest.raises(wire.BadMarker) as info:
        decode_frame(data)
    assert info.value.offset == 15


def test_truncated_frame_reports_offset():
    data = encode_frame(check_frame())
    with pytest.raises(wire.TruncatedFrame) as info:
        decode_frame(data[:20])
    assert info.value.offset == 18
    assert str(info.value).startswith("TruncatedFrame at offset 18")


def test_unknown_msg_type_and_ethertype():
    prefix = bytearray(encode_frame(check_frame())[:-4])
    prefix[14] = 0x7F
    with pytest.raises(wire.UnknownMsgType):
        decode_frame(bytes(prefix) + wire.compute_fcs(bytes(prefix)))
    prefix[12:14] = b"\x08\x00"
    with pytest.raises(wire.BadEtherType):
        decode_frame(bytes(prefix) + wire.compute_fcs(bytes(prefix)))


def test_trailing_bytes_rejected():
    data = encode_frame(check_frame())
    with pytest.raises(wire.DecodeError):
        decode_frame(data + b"\x00")


def test_wrong_auth_kind_rejected():
    prefix = bytearray(encode_frame(check_frame())[:-4])
    prefix[22] = 0x01
    with pytest.raises(wire.MalformedField):
        decode_frame(bytes(prefix) + wire.compute_fcs(bytes(prefix)))


def test_frame_rejects_mismatched_auth():
    with pytest.raises(ValueError):
        Frame(CHECK_DEST, CHECK_SRC, ArpCheck(IPv4Address("10.0.0.7")), AuthSection.keyed(bytes(32)))


def test_signed_portion_stops_before_auth():
    frame = check_frame()
    data = encode_frame(frame)
    assert wire.signed_portion(frame) == data[:22]


# -- addresses and hex ------------------------------------------------------


def test_mac_parse_and_format():
    mac = MacAddr.parse("02-00-00-00-00-0b")
    assert str(mac) == "02:00:00:00:00:0B"
    assert MacAddr.from_int(0x02000000000B) == mac
    assert wire.BROADCAST.is_broadcast
    with pytest.raises(ValueError):
        MacAddr.parse("02:00:00:00:00")


def test_parse_hex():
    assert wire.parse_hex("0a0B") == b"\x0a\x0b"
    assert wire.parse_hex(" 0a 0b\n") == b"\x0a\x0b"
    with pytest.raises(wire.OddLength):
        wire.parse_hex("0a0")
    with pytest.raises(wire.BadHexDigit):
        wire.parse_hex("0g")


def test_hex_round_trip():
    frame = check_frame()
    assert decode_frame(wire.parse_hex(wire.frame_hex(frame))) == frame


def test_peek_helpers():
    data = encode_frame(check_frame())
    assert wire.peek_dest(data) == CHECK_DEST
    assert wire.peek_kind(data) == "ARP_CHECK"
    assert wire.peek_kind(b"\x00") == "MALFORMED"

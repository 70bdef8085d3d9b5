"""Bit-exact TLV wire codec for Interest and Data packets.

Every element is ``type (1 byte) | length (2 bytes, big-endian) | value``.
Sub-elements appear in ascending type order and optional ones are omitted.
"""

from __future__ import annotations

import struct
from typing import Iterator

from .errors import EncodingError, MalformedPacket
from .names import Name
from .packets import Data, Interest, Packet

T_INTEREST = 0x01
T_DATA = 0x02
T_NAME = 0x10
T_COMPONENT = 0x11
T_NONCE = 0x12
T_LIFETIME = 0x13
T_HOP_LIMIT = 0x14
T_FORWARDING_HINT = 0x15
T_CONTEXT_ENTRY = 0x16
T_STRING = 0x17
T_PAYLOAD = 0x20
T_FRESHNESS = 0x21
T_KEY_ID = 0x22
T_SIGNATURE_TAG = 0x23

MAX_LENGTH = 0xFFFF


def tlv(type_: int, value: bytes) -> bytes:
    if len(value) > MAX_LENGTH:
        raise EncodingError(f"TLV 0x{type_:02x} value of {len(value)} bytes exceeds {MAX_LENGTH}")
    return struct.pack(">BH", type_, len(value)) + value


def iter_tlvs(buf: bytes) -> Iterator[tuple[int, bytes]]:
    """Split ``buf`` into consecutive TLVs; the whole buffer must be consumed."""
    pos = 0
    end = len(buf)
    while pos < end:
        if end - pos < 3:
            raise MalformedPacket(f"truncated TLV header at offset {pos}")
        type_, length = struct.unpack_from(">BH", buf, pos)
        pos += 3
        if end - pos < length:
            raise MalformedPacket(f"TLV 0x{type_:02x} claims {length} bytes, {end - pos} left")
        yield type_, bytes(buf[pos:pos + length])
        pos += length


def encode_name(name: Name) -> bytes:
    return tlv(T_NAME, b"".join(tlv(T_COMPONENT, c.encode("utf-8")) for c in name.components))


def decode_name(value: bytes) -> Name:
    comps = []
    for type_, raw in iter_tlvs(value):
        if type_ != T_COMPONENT:
            raise MalformedPacket(f"unexpected TLV 0x{type_:02x} inside Name")
        try:
            comps.append(raw.decode("utf-8"))
        except UnicodeDecodeError as exc:
            raise MalformedPacket("name component is not UTF-8") from exc
    try:
        return Name(tuple(comps))
    except ValueError as exc:
        raise MalformedPacket(str(exc)) from exc


def decode_nested_name(value: bytes) -> Name:
    elements = list(iter_tlvs(value))
    if len(elements) != 1 or elements[0][0] != T_NAME:
        raise MalformedPacket("expected exactly one nested Name TLV")
    return decode_name(elements[0][1])


def _encode_interest(i: Interest) -> bytes:
    body = [
        encode_name(i.name),
        tlv(T_NONCE, struct.pack(">I", i.nonce)),
        tlv(T_LIFETIME, struct.pack(">Q", i.lifetime)),
        tlv(T_HOP_LIMIT, struct.pack(">B", i.hop_limit)),
    ]
    if i.forwarding_hint is not None:
        body.append(tlv(T_FORWARDING_HINT, encode_name(i.forwarding_hint)))
    for key, value in i.context:
        body.append(tlv(T_CONTEXT_ENTRY, tlv(T_STRING, key.encode("utf-8")) + tlv(T_STRING, value.encode("utf-8"))))
    return tlv(T_INTEREST, b"".join(body))


def _encode_data(d: Data) -> bytes:
    body = [
        encode_name(d.name),
        tlv(T_PAYLOAD, d.payload),
        tlv(T_FRESHNESS, struct.pack(">Q", d.freshness)),
        tlv(T_KEY_ID, encode_name(d.key_id)),
        tlv(T_SIGNATURE_TAG, d.signature_tag),
    ]
    return tlv(T_DATA, b"".join(body))


def encode(packet: Packet) -> bytes:
    if isinstance(packet, Interest):
        return _encode_interest(packet)
    if isinstance(packet, Data):
        return _encode_data(packet)
    raise TypeError(f"not a packet: {packet!r}")


def _fixed(value: bytes, fmt: str, what: str) -> int:
    if len(value) != struct.calcsize(fmt):
        raise MalformedPacket(f"{what} has wrong length {len(value)}")
    return struct.unpack(fmt, value)[0]


def _ordered(elements: list[tuple[int, bytes]], repeatable: set[int]) -> None:
    prev = -1
    for type_, _ in elements:
        if type_ < prev or (type_ == prev and type_ not in repeatable):
            raise MalformedPacket(f"TLV 0x{type_:02x} out of order or duplicated")
        prev = type_


def _decode_interest(value: bytes) -> Interest:
    elements = list(iter_tlvs(value))
    _ordered(elements, {T_CONTEXT_ENTRY})
    fields: dict[int, bytes] = {}
    context = []
    for type_, raw in elements:
        if type_ == T_CONTEXT_ENTRY:
            strings = list(iter_tlvs(raw))
            if len(strings) != 2 or any(t != T_STRING for t, _ in strings):
                raise MalformedPacket("context entry needs exactly two strings")
            try:
                context.append((strings[0][1].decode("utf-8"), strings[1][1].decode("utf-8")))
            except UnicodeDecodeError as exc:
                raise MalformedPacket("context string is not UTF-8") from exc
        elif type_ in (T_NAME, T_NONCE, T_LIFETIME, T_HOP_LIMIT, T_FORWARDING_HINT):
            fields[type_] = raw
        else:
            raise MalformedPacket(f"unexpected TLV 0x{type_:02x} in Interest")
    for required in (T_NAME, T_NONCE, T_LIFETIME, T_HOP_LIMIT):
        if required not in fields:
            raise MalformedPacket(f"Interest missing TLV 0x{required:02x}")
    hint = fields.get(T_FORWARDING_HINT)
    try:
        return Interest(
            name=decode_name(fields[T_NAME]),
            nonce=_fixed(fields[T_NONCE], ">I", "nonce"),
            lifetime=_fixed(fields[T_LIFETIME], ">Q", "lifetime"),
            hop_limit=_fixed(fields[T_HOP_LIMIT], ">B", "hop limit"),
            forwarding_hint=None if hint is None else decode_nested_name(hint),
            context=tuple(context),
        )
    except ValueError as exc:
        raise MalformedPacket(str(exc)) from exc


def _decode_data(value: bytes) -> Data:
    elements = list(iter_tlvs(value))
    _ordered(elements, set())
    fields = dict(elements)
    expected = [T_NAME, T_PAYLOAD, T_FRESHNESS, T_KEY_ID, T_SIGNATURE_TAG]
    if [t for t, _ in elements] != expected:
        raise MalformedPacket("Data must carry Name, Payload, Freshness, KeyId, SignatureTag")
    return Data(
        name=decode_name(fields[T_NAME]),
        payload=fields[T_PAYLOAD],
        freshness=_fixed(fields[T_FRESHNESS], ">Q", "freshness"),
        key_id=decode_nested_name(fields[T_KEY_ID]),
        signature_tag=fields[T_SIGNATURE_TAG],
    )


def decode(buf: bytes) -> Packet:
    elements = list(iter_tlvs(buf))
    if len(elements) != 1:
        raise MalformedPacket("expected exactly one top-level TLV" if elements else "empty input")
    type_, value = elements[0]
    if type_ == T_INTEREST:
        return _decode_interest(value)
    if type_ == T_DATA:
        return _decode_data(value)
    raise MalformedPacket(f"unknown top-level type 0x{type_:02x}")


def encoded_size(packet: Packet) -> int:
    return len(encode(packet))

"""Minimal reader for classic pcap files (Ethernet, IPv4, TCP/UDP/ICMP)."""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Dict, Iterator, Optional

from ..core import ConnKey, Packet, Proto, canonicalize
from ..errors import TraceFormatError, TraceOrderError, TruncatedCaptureError
from .trace import ENCRYPTED_PORTS

MAGIC_US = 0xA1B2C3D4
MAGIC_NS = 0xA1B23C4D
LINKTYPE_ETHERNET = 1

ETH_IPV4 = 0x0800
ETH_VLAN = (0x8100, 0x88A8)


@dataclass
class PcapStats:
    records: int = 0
    packets: int = 0
    skipped_non_ipv4: int = 0
    skipped_short: int = 0


def _endian(magic_bytes: bytes):
    for endian in ("<", ">"):
        (m,) = struct.unpack(endian + "I", magic_bytes)
        if m == MAGIC_US:
            return endian, 1e-6
        if m == MAGIC_NS:
            return endian, 1e-9
    return None, None


def _parse_frame(data: bytes):
    """Return ``(ConnKey, ports_known)`` or ``None`` for frames that are not IPv4."""
    if len(data) < 14:
        return None
    off = 12
    (etype,) = struct.unpack_from("!H", data, off)
    off += 2
    while etype in ETH_VLAN:
        if len(data) < off + 4:
            return None
        (etype,) = struct.unpack_from("!H", data, off + 2)
        off += 4
    if etype != ETH_IPV4 or len(data) < off + 20:
        return None
    vihl, _, _, _, frag, _, proto, _, src, dst = struct.unpack_from("!BBHHHBBHII", data, off)
    if vihl >> 4 != 4:
        return None
    ihl = (vihl & 0x0F) * 4
    l4 = off + ihl
    sport = dport = 0
    p = Proto.from_ip(proto)
    if p in (Proto.TCP, Proto.UDP) and (frag & 0x1FFF) == 0 and len(data) >= l4 + 4:
        sport, dport = struct.unpack_from("!HH", data, l4)
    return ConnKey(src, dst, sport, dport, p)


def load_pcap(path, stats: Optional[PcapStats] = None) -> Iterator[Packet]:
    """Stream packets from ``path``; timestamps are relative to the first record.

    ``encrypted`` is guessed from well-known TLS/SSH ports.  Frames that are
    not IPv4 are counted in ``stats`` and skipped.
    """
    stats = stats if stats is not None else PcapStats()
    with open(path, "rb") as fh:
        head = fh.read(24)
        if len(head) < 24:
            raise TruncatedCaptureError("short global header", offset=0)
        endian, scale = _endian(head[:4])
        if endian is None:
            raise TraceFormatError(f"bad magic 0x{head[:4].hex()}", offset=0)
        _, _, _, _, _, _, link = struct.unpack(endian + "IHHiIII", head)
        if link != LINKTYPE_ETHERNET:
            raise TraceFormatError(f"unsupported link type {link}", offset=20)
        rec = struct.Struct(endian + "IIII")
        offset = 24
        t0 = None
        last = 0.0
        seqs: Dict[ConnKey, int] = {}
        while True:
            hdr = fh.read(16)
            if not hdr:
                return
            if len(hdr) < 16:
                raise TruncatedCaptureError("short record header", offset=offset)
            sec, frac, incl, orig = rec.unpack(hdr)
            data = fh.read(incl)
            if len(data) < incl:
                raise TruncatedCaptureError(f"record needs {incl} bytes, {len(data)} left", offset=offset)
            stats.records += 1
            ts_abs = sec + frac * scale
            if t0 is None:
                t0 = ts_abs
            ts = round(ts_abs - t0, 9)
            if ts < last:
                raise TraceOrderError("timestamps go backwards", offset=offset)
            offset += 16 + incl
            key = _parse_frame(data)
            if key is None:
                stats.skipped_non_ipv4 += 1
                continue
            last = ts
            ck = canonicalize(key)
            seq = seqs.get(ck, 0)
            seqs[ck] = seq + 1
            enc = key.src_port in ENCRYPTED_PORTS or key.dst_port in ENCRYPTED_PORTS
            stats.packets += 1
            yield Packet(ts, key, max(orig, 1), seq, enc)


def build_pcap(frames, link: int = LINKTYPE_ETHERNET, endian: str = "<") -> bytes:
    """Assemble a classic pcap image from ``(ts_s, frame_bytes)`` pairs (test helper)."""
    out = [struct.pack(endian + "IHHiIII", MAGIC_US, 2, 4, 0, 0, 65535, link)]
    for ts, frame in frames:
        sec = int(ts)
        usec = int(round((ts - sec) * 1e6))
        out.append(struct.pack(endian + "IIII", sec, usec, len(frame), len(frame)))
        out.append(frame)
    return b"".join(out)


def ipv4_frame(src: int, dst: int, proto: int, sport: int = 0, dport: int = 0, payload: bytes = b"") -> bytes:
    """Ethernet + IPv4 (+ 8-byte L4 stub) frame with the given addressing (test helper)."""
    l4 = struct.pack("!HHI", sport, dport, 0) if proto in (6, 17) else struct.pack("!BBHI", 8, 0, 0, 0)
    body = l4 + payload
    ip = struct.pack("!BBHHHBBHII", 0x45, 0, 20 + len(body), 0, 0, 64, proto, 0, src, dst)
    eth = b"\x00\x11\x22\x33\x44\x55" + b"\x66\x77\x88\x99\xaa\xbb" + struct.pack("!H", ETH_IPV4)
    return eth + ip + body

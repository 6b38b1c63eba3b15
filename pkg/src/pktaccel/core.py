"""Shared domain types and hashing used across the packet path."""

from __future__ import annotations

import enum
import hashlib
import ipaddress
from dataclasses import dataclass
from typing import Union

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
SEED_CONN = 0x243F6A8885A308D3
# must match _atomics.h
SEED_SLOT = 0x13198A2E03707344
SEED_CHECK = 0xA4093822299F31D0
SEED_FP = 0x082EFA98EC4E6C89

_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB


class Proto(enum.IntEnum):
    TCP = 6
    UDP = 17
    ICMP = 1
    OTHER = 0

    @classmethod
    def parse(cls, text: str) -> "Proto":
        try:
            return cls[text.strip().upper()]
        except KeyError:
            raise ValueError(f"unknown protocol {text!r}") from None

    @classmethod
    def from_ip(cls, number: int) -> "Proto":
        try:
            return cls(number)
        except ValueError:
            return cls.OTHER


def mix64(z: int) -> int:
    """splitmix64 finalizer over a 64-bit word."""
    z = (z + GOLDEN) & MASK64
    z = ((z ^ (z >> 30)) * _M1) & MASK64
    z = ((z ^ (z >> 27)) * _M2) & MASK64
    return z ^ (z >> 31)


def mix64_np(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=np.uint64) + np.uint64(GOLDEN)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_M1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_M2)
    return z ^ (z >> np.uint64(31))


@dataclass(frozen=True, order=True)
class ConnKey:
    src_addr: int
    dst_addr: int
    src_port: int
    dst_port: int
    proto: Proto = Proto.TCP

    def __post_init__(self):
        if not (0 <= self.src_addr <= 0xFFFFFFFF and 0 <= self.dst_addr <= 0xFFFFFFFF):
            raise ValueError("addresses must be 32-bit")
        if not (0 <= self.src_port <= 0xFFFF and 0 <= self.dst_port <= 0xFFFF):
            raise ValueError("ports must be 16-bit")
        if not isinstance(self.proto, Proto):
            object.__setattr__(self, "proto", Proto(self.proto))

    @classmethod
    def from_strings(cls, src: str, dst: str, sport: int, dport: int, proto: Union[str, Proto] = Proto.TCP) -> "ConnKey":
        if isinstance(proto, str):
            proto = Proto.parse(proto)
        return cls(int(ipaddress.IPv4Address(src)), int(ipaddress.IPv4Address(dst)), int(sport), int(dport), proto)

    def reversed(self) -> "ConnKey":
        return ConnKey(self.dst_addr, self.src_addr, self.dst_port, self.src_port, self.proto)

    @property
    def src(self) -> str:
        return str(ipaddress.IPv4Address(self.src_addr))

    @property
    def dst(self) -> str:
        return str(ipaddress.IPv4Address(self.dst_addr))

    def __str__(self):
        return f"{self.src}:{self.src_port} -> {self.dst}:{self.dst_port} {self.proto.name.lower()}"


def canonicalize(key: ConnKey) -> ConnKey:
    """Order the endpoints so both directions of a flow share one key."""
    if (key.src_addr, key.src_port) <= (key.dst_addr, key.dst_port):
        return key
    return key.reversed()


def hash64(key: ConnKey) -> int:
    c = canonicalize(key)
    h = mix64(((c.src_addr << 32) | c.dst_addr) ^ SEED_CONN)
    return mix64(h ^ ((c.src_port << 32) | (c.dst_port << 16) | int(c.proto)))


def hash64_arrays(src, dst, sport, dport, proto) -> np.ndarray:
    """Vectorised :func:`hash64` over column arrays (canonicalises internally)."""
    src = np.asarray(src, dtype=np.uint64)
    dst = np.asarray(dst, dtype=np.uint64)
    sport = np.asarray(sport, dtype=np.uint64)
    dport = np.asarray(dport, dtype=np.uint64)
    proto = np.asarray(proto, dtype=np.uint64)
    swap = (src > dst) | ((src == dst) & (sport > dport))
    a = np.where(swap, dst, src)
    b = np.where(swap, src, dst)
    pa = np.where(swap, dport, sport)
    pb = np.where(swap, sport, dport)
    h = mix64_np(((a << np.uint64(32)) | b) ^ np.uint64(SEED_CONN))
    return mix64_np(h ^ ((pa << np.uint64(32)) | (pb << np.uint64(16)) | proto))


def hash_mod(key: ConnKey, modulus: int) -> int:
    if modulus < 1:
        raise ValueError("modulus must be >= 1")
    return hash64(key) % modulus


def key64(key) -> int:
    """Reduce an arbitrary key (int, bytes, str, ConnKey) to a 64-bit word."""
    if isinstance(key, ConnKey):
        return hash64(key)
    if isinstance(key, bool):
        raise TypeError("bool is not a valid key")
    if isinstance(key, int):
        return key & MASK64
    if isinstance(key, str):
        key = key.encode()
    if isinstance(key, (bytes, bytearray, memoryview)):
        return int.from_bytes(hashlib.blake2b(bytes(key), digest_size=8).digest(), "little")
    raise TypeError(f"unsupported key type {type(key).__name__}")


def fingerprint32(k: int) -> int:
    return mix64(k ^ SEED_FP) >> 32


@dataclass(frozen=True)
class Packet:
    ts: float
    key: ConnKey
    size_bytes: int
    seq_in_conn: int
    encrypted: bool = False

    def __post_init__(self):
        if self.ts < 0:
            raise ValueError("timestamp must be non-negative")
        if self.size_bytes <= 0:
            raise ValueError("size must be positive")
        if self.seq_in_conn < 0:
            raise ValueError("seq_in_conn must be >= 0")


@dataclass(frozen=True)
class PacketDescriptor:
    packet_id: int
    length: int
    tuple_hash: int

    @classmethod
    def of(cls, packet_id: int, pkt: Packet) -> "PacketDescriptor":
        return cls(packet_id, pkt.size_bytes, hash64(pkt.key))


def processing_budget(s_lsr_bytes: int, lambda_max_bps: float) -> float:
    """Longest per-packet processing time (s) a ring of ``s_lsr_bytes`` absorbs at ``lambda_max_bps``."""
    if s_lsr_bytes <= 0 or lambda_max_bps <= 0:
        raise ValueError("ring size and line rate must be positive")
    return s_lsr_bytes * 8 / lambda_max_bps

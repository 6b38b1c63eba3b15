"""Synthetic traffic traces and the CSV trace format.

One row per packet::

    ts_s,src,dst,sport,dport,proto,size,seq,encrypted

Rows are sorted by ``ts_s``; ``seq`` is the 0-based index of the packet in
its connection, counted over both directions.
"""

from __future__ import annotations

import csv
import ipaddress
import math
from dataclasses import asdict, dataclass, fields
from typing import Dict, Iterable, Iterator, List, Optional

import numpy as np

from ..core import ConnKey, Packet, Proto, canonicalize
from ..errors import TraceFormatError, TraceOrderError

HEADER = ("ts_s", "src", "dst", "sport", "dport", "proto", "size", "seq", "encrypted")

# Reference mix; the last share is read as 0.04 % and the four are rescaled to sum to one.
_RAW_MIX = (92.34, 7.5, 0.02, 0.04)
_RAW_SUM = sum(_RAW_MIX)
DEFAULT_MIX = tuple(x / _RAW_SUM for x in _RAW_MIX)
DEFAULT_AVG_PKT = 510.25
DEFAULT_AVG_CONN_KB = 7050.16

# bimodal packet sizes: small control frames and near-MTU data frames
SMALL = (40, 100)
LARGE = (1400, 1500)

ENCRYPTED_PORTS = (443, 22, 993, 995, 465)


@dataclass
class TrafficMixConfig:
    tcp_frac: float = DEFAULT_MIX[0]
    udp_frac: float = DEFAULT_MIX[1]
    icmp_frac: float = DEFAULT_MIX[2]
    other_frac: float = DEFAULT_MIX[3]
    avg_pkt_size_bytes: float = DEFAULT_AVG_PKT
    avg_conn_size_kb: float = DEFAULT_AVG_CONN_KB
    encrypted_conn_frac: float = 0.3
    rate_bps: float = 50e6
    duration_s: float = 1.0
    seed: int = 0
    max_packets: Optional[int] = None
    active_conns: int = 64
    conn_size_sigma: float = 1.5
    # fixed connection size in packets (overrides the random draw)
    fixed_conn_pkts: Optional[int] = None
    servers: int = 0

    def validate(self) -> None:
        fr = (self.tcp_frac, self.udp_frac, self.icmp_frac, self.other_frac)
        if any(f < 0 for f in fr) or abs(sum(fr) - 1.0) > 1e-9:
            raise ValueError("protocol fractions must be non-negative and sum to 1")
        if not 0 <= self.encrypted_conn_frac <= 1:
            raise ValueError("encrypted_conn_frac must be a probability")
        if not (SMALL[0] + SMALL[1]) / 2 < self.avg_pkt_size_bytes < (LARGE[0] + LARGE[1]) / 2:
            raise ValueError("avg_pkt_size_bytes outside the supported size mix")
        if self.avg_conn_size_kb <= 0 or self.rate_bps <= 0 or self.duration_s < 0:
            raise ValueError("sizes and rates must be positive, duration non-negative")
        if self.active_conns < 1:
            raise ValueError("active_conns must be >= 1")
        if self.fixed_conn_pkts is not None and self.fixed_conn_pkts < 1:
            raise ValueError("fixed_conn_pkts must be >= 1")

    @property
    def packet_rate(self) -> float:
        return self.rate_bps / (8 * self.avg_pkt_size_bytes)

    def as_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrafficMixConfig":
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise ValueError(f"unknown trace parameters: {sorted(extra)}")
        return cls(**d)


def httperf_preset(packet_rate: float, duration_s: float = 5.0, seed: int = 0,
                   concurrent: int = 25, **kw) -> TrafficMixConfig:
    """Clients downloading a 1 MB file from 25 web servers, all TCP, no encryption.

    ``concurrent`` downloads run at once (one per server by default); each
    finished download is replaced by a new connection.
    """
    avg = 1000.0
    conn_pkts = math.ceil(1_000_000 / 1460 * 1.5)
    return TrafficMixConfig(
        tcp_frac=1.0, udp_frac=0.0, icmp_frac=0.0, other_frac=0.0,
        avg_pkt_size_bytes=avg, avg_conn_size_kb=conn_pkts * avg / 1000, encrypted_conn_frac=0.0,
        rate_bps=packet_rate * avg * 8, duration_s=duration_s, seed=seed,
        active_conns=concurrent, fixed_conn_pkts=conn_pkts, servers=25, **kw)


class _Conn:
    __slots__ = ("key", "left", "seq", "encrypted", "total")

    def __init__(self, key, left, encrypted):
        self.key = key
        self.left = left
        self.total = left
        self.seq = 0
        self.encrypted = encrypted


class _Generator:
    def __init__(self, cfg: TrafficMixConfig):
        self.cfg = cfg
        self.rng = np.random.default_rng(cfg.seed)
        self.used = set()
        self.protos = [p for p, f in zip((Proto.TCP, Proto.UDP, Proto.ICMP, Proto.OTHER),
                                         (cfg.tcp_frac, cfg.udp_frac, cfg.icmp_frac, cfg.other_frac)) if f > 0]
        self.weights = np.array([f for f in (cfg.tcp_frac, cfg.udp_frac, cfg.icmp_frac, cfg.other_frac) if f > 0])
        self.weights = self.weights / self.weights.sum()
        mids_small = sum(SMALL) / 2
        mids_large = sum(LARGE) / 2
        self.p_small = (mids_large - cfg.avg_pkt_size_bytes) / (mids_large - mids_small)
        sigma = cfg.conn_size_sigma
        self.mu = math.log(cfg.avg_conn_size_kb * 1000 / cfg.avg_pkt_size_bytes) - sigma * sigma / 2
        # pool sizes follow the mix so rare protocols keep a small pool
        self.pools: Dict[Proto, List[_Conn]] = {}
        for p, w in zip(self.protos, self.weights):
            self.pools[p] = [self._new_conn(p) for _ in range(max(1, round(cfg.active_conns * w)))]

    def _new_conn(self, proto: Proto) -> _Conn:
        cfg, rng = self.cfg, self.rng
        enc = bool(rng.random() < cfg.encrypted_conn_frac)
        if cfg.fixed_conn_pkts is not None:
            n = cfg.fixed_conn_pkts
        else:
            n = max(1, int(round(rng.lognormal(self.mu, cfg.conn_size_sigma))))
        while True:
            client = int(ipaddress.IPv4Address("10.0.0.0")) + int(rng.integers(1, 1 << 16))
            if cfg.servers:
                server = int(ipaddress.IPv4Address("192.168.1.0")) + int(rng.integers(1, cfg.servers + 1))
            else:
                server = int(ipaddress.IPv4Address("172.16.0.0")) + int(rng.integers(1, 1 << 20))
            if proto in (Proto.TCP, Proto.UDP):
                sport = int(rng.integers(1024, 65536))
                if proto is Proto.TCP:
                    dport = int(ENCRYPTED_PORTS[0] if enc else 80)
                else:
                    dport = 4500 if enc else 53
            else:
                sport = dport = 0
            key = canonicalize(ConnKey(client, server, sport, dport, proto))
            if key not in self.used:
                self.used.add(key)
                return _Conn(key, n, enc)

    def packets(self) -> Iterator[Packet]:
        cfg, rng = self.cfg, self.rng
        rate = cfg.packet_rate
        limit = cfg.max_packets
        t = 0.0
        count = 0
        batch = 4096
        while True:
            gaps = rng.exponential(1.0 / rate, batch)
            pick = rng.choice(len(self.protos), size=batch, p=self.weights)
            small = rng.random(batch) < self.p_small
            u = rng.random(batch)
            flip = rng.random(batch) < 0.5
            slot = rng.random(batch)
            for i in range(batch):
                t += gaps[i]
                if limit is not None:
                    if count >= limit:
                        return
                elif t >= cfg.duration_s:
                    return
                proto = self.protos[pick[i]]
                pool = self.pools[proto]
                j = int(slot[i] * len(pool))
                c = pool[j]
                lo, hi = SMALL if small[i] else LARGE
                size = lo + int(u[i] * (hi - lo + 1))
                key = c.key.reversed() if flip[i] else c.key
                ts = float(f"{t:.9f}")
                yield Packet(ts, key, size, c.seq, c.encrypted)
                count += 1
                c.seq += 1
                c.left -= 1
                if c.left == 0:
                    pool[j] = self._new_conn(proto)


def generate_packets(cfg: TrafficMixConfig) -> Iterator[Packet]:
    cfg.validate()
    if cfg.max_packets is None and cfg.duration_s == 0:
        return iter(())
    return _Generator(cfg).packets()


def format_row(p: Packet) -> list:
    k = p.key
    return [f"{p.ts:.9f}", k.src, k.dst, k.src_port, k.dst_port, k.proto.name.lower(),
            p.size_bytes, p.seq_in_conn, int(p.encrypted)]


def write_trace(packets: Iterable[Packet], out_path) -> int:
    n = 0
    with open(out_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(HEADER)
        for p in packets:
            w.writerow(format_row(p))
            n += 1
    return n


def gen_trace(cfg: TrafficMixConfig, out_path) -> int:
    """Write a synthetic trace; returns the number of packets."""
    return write_trace(generate_packets(cfg), out_path)


def _port(text: str) -> int:
    v = int(text)
    if not 0 <= v <= 0xFFFF:
        raise ValueError(f"port {v} out of range")
    return v


def _parse_row(row: List[str], line: int) -> Packet:
    col = None
    try:
        col = "ts_s"
        ts = float(row[0])
        if not math.isfinite(ts) or ts < 0:
            raise ValueError("timestamp must be finite and non-negative")
        col = "src"
        src = int(ipaddress.IPv4Address(row[1]))
        col = "dst"
        dst = int(ipaddress.IPv4Address(row[2]))
        col = "sport"
        sport = _port(row[3])
        col = "dport"
        dport = _port(row[4])
        col = "proto"
        proto = Proto.parse(row[5])
        col = "size"
        size = int(row[6])
        if size <= 0:
            raise ValueError("size must be positive")
        col = "seq"
        seq = int(row[7])
        if seq < 0:
            raise ValueError("seq must be non-negative")
        col = "encrypted"
        if row[8] not in ("0", "1"):
            raise ValueError("encrypted must be 0 or 1")
        enc = row[8] == "1"
        col = None
        return Packet(ts, ConnKey(src, dst, sport, dport, proto), size, seq, enc)
    except (ValueError, ipaddress.AddressValueError) as exc:
        raise TraceFormatError(str(exc), row=line, column=col) from None


def load_trace(path) -> Iterator[Packet]:
    """Stream packets from a CSV trace, checking order and per-connection numbering."""
    with open(path, newline="") as fh:
        rd = csv.reader(fh)
        header = next(rd, None)
        if header is None or tuple(h.strip() for h in header) != HEADER:
            raise TraceFormatError("missing or wrong header", row=1)
        last = 0.0
        next_seq: Dict[ConnKey, int] = {}
        for line, row in enumerate(rd, start=2):
            if not row:
                continue
            if len(row) != len(HEADER):
                raise TraceFormatError(f"expected {len(HEADER)} fields, got {len(row)}", row=line)
            p = _parse_row(row, line)
            if p.ts < last:
                raise TraceOrderError("timestamps go backwards", row=line, column="ts_s")
            last = p.ts
            ck = canonicalize(p.key)
            want = next_seq.get(ck, 0)
            if p.seq_in_conn != want:
                raise TraceFormatError(f"seq {p.seq_in_conn} but expected {want}", row=line, column="seq")
            next_seq[ck] = want + 1
            yield p


def mix_summary(packets: Iterable[Packet]) -> dict:
    """Empirical protocol shares, mean size and encrypted share of a packet stream."""
    n = 0
    by_proto = {p: 0 for p in Proto}
    size = 0
    enc = 0
    for p in packets:
        n += 1
        by_proto[p.key.proto] += 1
        size += p.size_bytes
        enc += p.encrypted
    if n == 0:
        return {"packets": 0}
    out = {"packets": n, "mean_size": size / n, "encrypted_pkt_frac": enc / n}
    for p, c in by_proto.items():
        out[f"{p.name.lower()}_frac"] = c / n
    return out

"""Downlink queues at every access node and the telemetry they produce.

Bytes are integers throughout so conservation can be checked exactly::

    injected == served + dropped + queued
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .steering import WATS, SteeringDecision, SteeringMode, Wat

NodeKey = tuple[Wat, int]


def serve_rate_bps(sinr_db: float, bandwidth_hz: float, efficiency: float = 0.6,
                   max_rate_bps: float | None = None) -> float:
    """Shannon rate scaled by an implementation efficiency, optionally capped."""
    if not bandwidth_hz > 0:
        raise ValueError(f"bandwidth must be > 0, got {bandwidth_hz}")
    if not 0 < efficiency <= 1:
        raise ValueError(f"efficiency must lie in (0, 1], got {efficiency}")
    if sinr_db == -math.inf:
        return 0.0
    rate = efficiency * bandwidth_hz * math.log2(1.0 + 10.0 ** (sinr_db / 10.0))
    if max_rate_bps is not None:
        rate = min(rate, max_rate_bps)
    return rate


def split_bytes(weights: Mapping[Wat, float], nbytes: int) -> dict[Wat, int]:
    """Integer split of ``nbytes`` proportional to ``weights`` (largest remainder)."""
    total = sum(max(weights.get(w, 0.0), 0.0) for w in WATS)
    if total <= 0 or nbytes == 0:
        return {w: 0 for w in WATS}
    exact = {w: max(weights.get(w, 0.0), 0.0) / total * nbytes for w in WATS}
    out = {w: math.floor(v) for w, v in exact.items()}
    short = nbytes - sum(out.values())
    for w in sorted(WATS, key=lambda w: (-(exact[w] - out[w]), WATS.index(w)))[:short]:
        out[w] += 1
    return out


@dataclass(frozen=True)
class Routing:
    """Where a user's new bytes go: a proportional split or a duplicate set."""

    mode: SteeringMode
    shares: Mapping[Wat, float]  # LB: percent weights; SD: 100 for selected WATs

    @classmethod
    def from_decision(cls, d: SteeringDecision) -> "Routing":
        if d.mode is SteeringMode.LOAD_BALANCING:
            return cls(d.mode, dict(d.lb_weights))
        return cls(d.mode, {w: 100.0 if sel else 0.0 for w, sel in d.sd_selection.items()})

    @classmethod
    def single(cls, mode: SteeringMode, wat: Wat) -> "Routing":
        return cls(mode, {w: 100.0 if w is wat else 0.0 for w in WATS})

    @property
    def empty(self) -> bool:
        return not any(v > 0 for v in self.shares.values())


@dataclass
class NodeQueue:
    key: NodeKey
    capacity_bytes: int
    per_user: dict[int, deque] = field(default_factory=dict)  # user -> deque[[file_key, bytes]]
    user_bytes: dict[int, int] = field(default_factory=dict)
    total_queued_bytes: int = 0
    enqueued_bytes: int = 0
    forwarded_in: int = 0
    forwarded_out: int = 0
    served_bytes: int = 0
    dropped_bytes: int = 0  # overflow + coverage loss
    flushed_bytes: int = 0  # stale duplicate copies removed after delivery

    @property
    def buffer_pct(self) -> float:
        return 100.0 * self.total_queued_bytes / self.capacity_bytes

    @property
    def free_bytes(self) -> int:
        return self.capacity_bytes - self.total_queued_bytes

    def push(self, user: int, file_key: int, nbytes: int) -> None:
        if nbytes <= 0:
            return
        q = self.per_user.setdefault(user, deque())
        if q and q[-1][0] == file_key:
            q[-1][1] += nbytes
        else:
            q.append([file_key, nbytes])
        self.user_bytes[user] = self.user_bytes.get(user, 0) + nbytes
        self.total_queued_bytes += nbytes

    def take_user(self, user: int) -> deque:
        """Remove and return all of ``user``'s segments."""
        q = self.per_user.pop(user, deque())
        self.total_queued_bytes -= self.user_bytes.pop(user, 0)
        return q

    def remove_file(self, user: int, file_key: int) -> int:
        q = self.per_user.get(user)
        if not q:
            return 0
        removed = sum(seg[1] for seg in q if seg[0] == file_key)
        if removed:
            kept = deque(seg for seg in q if seg[0] != file_key)
            self._set_user(user, kept, self.user_bytes[user] - removed)
            self.total_queued_bytes -= removed
        return removed

    def _set_user(self, user, q, nbytes):
        if nbytes:
            self.per_user[user] = q
            self.user_bytes[user] = nbytes
        else:
            self.per_user.pop(user, None)
            self.user_bytes.pop(user, None)


@dataclass
class FileProgress:
    key: int
    user_id: int
    file_id: int
    size_bytes: int
    arrival_s: float
    traffic_type: str
    mode: SteeringMode
    outstanding: dict[Wat, int] = field(default_factory=dict)
    lost: dict[Wat, int] = field(default_factory=dict)
    completed_s: float | None = None
    intact: bool = False

    @property
    def done(self) -> bool:
        return self.completed_s is not None


@dataclass
class FlowState:
    """Snapshot of one user's traffic in the network."""

    user_id: int
    pending_files: list[tuple[int, int]]  # (file key, remaining bytes)
    decision: SteeringDecision | None
    in_flight: dict[Wat, int]


class NetworkState:
    """All node queues plus per-file delivery bookkeeping for one run."""

    def __init__(self, capacity_bytes: Mapping[NodeKey, int]):
        self.queues: dict[NodeKey, NodeQueue] = {k: NodeQueue(k, int(c)) for k, c in capacity_bytes.items()}
        self.serving: dict[int, dict[Wat, NodeKey | None]] = {}
        self.files: dict[int, FileProgress] = {}
        self._open: dict[int, dict[int, None]] = {}  # user -> ordered set of open file keys
        self._next_key = 0
        self._backlogged: set[NodeKey] = set()
        self.injected_bytes = 0

    # ------------------------------------------------------------ topology

    def set_serving(self, user: int, wat: Wat, node: NodeKey | None) -> None:
        """Attach ``user`` to ``node`` on ``wat``, forwarding any queued bytes.

        Losing coverage on a WAT drops whatever was queued there.
        """
        per = self.serving.setdefault(user, {w: None for w in WATS})
        old = per[wat]
        per[wat] = node
        if old is None or old == node:
            return
        src = self.queues[old]
        segs = src.take_user(user)
        moved = sum(s[1] for s in segs)
        if not moved:
            return
        if node is None:
            src.dropped_bytes += moved
            for fkey, n in segs:
                self._lose(fkey, wat, n)
            return
        src.forwarded_out += moved
        dst = self.queues[node]
        dst.forwarded_in += moved
        for fkey, n in segs:
            keep = min(n, dst.free_bytes)
            dst.push(user, fkey, keep)
            if n > keep:
                dst.dropped_bytes += n - keep
                self._lose(fkey, wat, n - keep)
        if dst.total_queued_bytes:
            self._backlogged.add(node)

    # -------------------------------------------------------------- arrival

    def enqueue(self, user: int, routing: Routing, nbytes: int, now: float,
                file_id: int = 0, traffic_type: str = "eMBB") -> FileProgress:
        """Admit a new file for ``user``.

        LB splits the bytes across WATs by weight; SD puts a full copy on
        every selected WAT.  Bytes that do not fit in a node buffer are
        dropped and counted.
        """
        key = self._next_key
        self._next_key += 1
        fp = FileProgress(key, user, file_id, int(nbytes), now, traffic_type, routing.mode)
        self.files[key] = fp
        self._open.setdefault(user, {})[key] = None
        if routing.mode is SteeringMode.LOAD_BALANCING:
            parts = split_bytes(routing.shares, nbytes)
        else:
            parts = {w: (nbytes if routing.shares.get(w, 0) > 0 else 0) for w in WATS}
        per = self.serving.get(user, {})
        for wat, n in parts.items():
            if n <= 0:
                continue
            fp.outstanding[wat] = 0
            fp.lost[wat] = 0
            self.injected_bytes += n
            node = per.get(wat)
            if node is None:
                fp.lost[wat] += n
                continue
            q = self.queues[node]
            q.enqueued_bytes += n
            keep = min(n, q.free_bytes)
            q.push(user, key, keep)
            q.dropped_bytes += n - keep
            fp.outstanding[wat] += keep
            fp.lost[wat] += n - keep
            if keep:
                self._backlogged.add(node)
        self._check_complete(fp, now)
        return fp

    # -------------------------------------------------------------- service

    def advance(self, dt_s: float, rates_bps: Mapping[tuple[int, Wat], float], now: float) -> dict[tuple[int, Wat], int]:
        """Serve every backlogged node for ``dt_s`` seconds.

        Backlogged users of a node share its time equally; a user with link
        rate r gets ``floor(r * dt / n / 8)`` bytes at most.  ``now`` is the
        time at the end of the step and stamps completed files.
        """
        if not dt_s > 0:
            raise ValueError(f"dt must be > 0, got {dt_s}")
        served: dict[tuple[int, Wat], int] = {}
        for node in sorted(self._backlogged, key=lambda k: (WATS.index(k[0]), k[1])):
            q = self.queues[node]
            wat = node[0]
            users = sorted(q.per_user)
            n = len(users)
            for user in users:
                budget = int(rates_bps.get((user, wat), 0.0) * dt_s / n / 8)
                if budget <= 0:
                    continue
                got = self._serve_user(q, user, budget, now)
                if got:
                    served[(user, wat)] = got
            if not q.total_queued_bytes:
                self._backlogged.discard(node)
        return served

    def _serve_user(self, q: NodeQueue, user: int, budget: int, now: float) -> int:
        segs = q.per_user[user]
        wat = q.key[0]
        got = 0
        while segs and budget > 0:
            seg = segs[0]
            take = min(seg[1], budget)
            seg[1] -= take
            budget -= take
            got += take
            fp = self.files[seg[0]]
            fp.outstanding[wat] -= take
            if seg[1] == 0:
                segs.popleft()
            if fp.outstanding[wat] == 0:
                self._served_portion(fp, wat, now)
        q.user_bytes[user] = q.user_bytes.get(user, 0) - got
        q.total_queued_bytes -= got
        q.served_bytes += got
        if q.user_bytes.get(user, 0) <= 0:
            q.per_user.pop(user, None)
            q.user_bytes.pop(user, None)
        return got

    def _served_portion(self, fp: FileProgress, wat: Wat, now: float) -> None:
        if fp.mode is SteeringMode.SPLIT_DUPLICATE and not fp.done and fp.lost.get(wat, 0) == 0:
            fp.completed_s = now
            fp.intact = True
            self._close(fp)
            for other, left in fp.outstanding.items():
                if other is wat or left <= 0:
                    continue
                node = self.serving[fp.user_id][other]
                q = self.queues[node]
                removed = q.remove_file(fp.user_id, fp.key)
                q.flushed_bytes += removed
                fp.outstanding[other] -= removed
            return
        self._check_complete(fp, now)

    def _lose(self, fkey: int, wat: Wat, n: int) -> None:
        fp = self.files[fkey]
        fp.outstanding[wat] -= n
        fp.lost[wat] = fp.lost.get(wat, 0) + n
        self._check_complete(fp, None)

    def _check_complete(self, fp: FileProgress, now: float | None) -> None:
        if fp.done or any(v > 0 for v in fp.outstanding.values()):
            return
        fp.completed_s = now if now is not None else fp.arrival_s
        if fp.mode is SteeringMode.LOAD_BALANCING:
            fp.intact = not any(fp.lost.values())
        else:
            fp.intact = any(fp.lost.get(w, 0) == 0 for w in fp.outstanding)
        self._close(fp)

    def _close(self, fp: FileProgress) -> None:
        self._open.get(fp.user_id, {}).pop(fp.key, None)

    # ------------------------------------------------------------ telemetry

    def buffer_pct(self, node: NodeKey) -> float:
        return self.queues[node].buffer_pct

    def user_delay_ms(self, user: int, wat: Wat, rates_bps: Mapping[tuple[int, Wat], float],
                      cap_ms: float = 100.0) -> float | None:
        """Estimated time (ms) to drain ``user``'s backlog at its serving node.

        Under equal time sharing every other backlogged user v is served
        for min(t_v, t_u) while u drains, where t = queued bits / link rate.
        ``None`` means no coverage on ``wat``.
        """
        node = self.serving.get(user, {}).get(wat)
        if node is None:
            return None
        q = self.queues[node]
        mine = q.user_bytes.get(user, 0)
        if mine == 0:
            return 0.0
        r_u = rates_bps.get((user, wat), 0.0)
        if r_u <= 0:
            return float(cap_ms)
        t_u = mine * 8 / r_u
        total = 0.0
        for v, nb in q.user_bytes.items():
            r_v = rates_bps.get((v, wat), 0.0)
            t_v = nb * 8 / r_v if r_v > 0 else math.inf
            total += min(t_v, t_u)
        return min(total * 1000.0, float(cap_ms))

    # ------------------------------------------------------------ accounting

    def flow_state(self, user: int, decision: SteeringDecision | None = None) -> FlowState:
        pending = []
        for key in self._open.get(user, {}):
            fp = self.files[key]
            pending.append((key, sum(v for v in fp.outstanding.values() if v > 0)))
        in_flight = {}
        for wat in WATS:
            node = self.serving.get(user, {}).get(wat)
            in_flight[wat] = self.queues[node].user_bytes.get(user, 0) if node else 0
        return FlowState(user, pending, decision, in_flight)

    def pending_bytes(self, user: int) -> int:
        return sum(self.flow_state(user).in_flight.values())

    def totals(self) -> dict[str, int]:
        qs = self.queues.values()
        return {
            "injected": self.injected_bytes,
            "served": sum(q.served_bytes for q in qs),
            "dropped": sum(q.dropped_bytes + q.flushed_bytes for q in qs) + self._unrouted(),
            "flushed": sum(q.flushed_bytes for q in qs),
            "queued": sum(q.total_queued_bytes for q in qs),
        }

    def _unrouted(self) -> int:
        # bytes steered to a WAT the user had no node on
        enq = sum(q.enqueued_bytes for q in self.queues.values())
        return self.injected_bytes - enq

    def conservation_error(self) -> int:
        t = self.totals()
        return t["injected"] - (t["served"] + t["dropped"] + t["queued"])

    def iter_files(self) -> Iterable[FileProgress]:
        return self.files.values()

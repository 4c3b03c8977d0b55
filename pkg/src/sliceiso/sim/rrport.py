"""Round-robin multi-queue link port (pure Python reference kernel).

A port serves a fixed set of FIFO queues round-robin at the link rate.
Autonomous sources (Poisson floods, constant-rate background load) feed
the queues; foreground packets are not enqueued but priced against a
snapshot of the port (see :meth:`RRPort.fg_delay_ns`).

All times are integer nanoseconds. The random stream is splitmix64 so the
compiled kernel reproduces it bit for bit.
"""
from __future__ import annotations

import math

MASK64 = (1 << 64) - 1
NEVER = (1 << 62)


def splitmix64(state: int) -> tuple[int, int]:
    state = (state + 0x9E3779B97F4A7C15) & MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return state, z ^ (z >> 31)


class RRPort:
    def __init__(self, n_queues: int, capacity_bps: float, buffer_pkts: int, seed: int,
                 window_ns: int = 100_000_000, bin_ns: int = 1_000_000):
        if capacity_bps <= 0:
            raise ValueError("port capacity must be positive")
        self.n_queues = n_queues
        self.capacity_bps = float(capacity_bps)
        self.buffer_pkts = buffer_pkts
        self.rng = seed & MASK64
        self.now = 0
        self.count = [0] * n_queues
        self.pkt_bits = [0] * n_queues
        self.arrived = [0] * n_queues
        self.dropped = [0] * n_queues
        self.served = [0] * n_queues
        self.busy_until = NEVER
        self.serving = -1
        self.serve_start = 0
        self.ptr = n_queues - 1
        self.bin_ns = bin_ns
        self.n_bins = max(1, window_ns // bin_ns)
        self.bin_bits = [0] * self.n_bins
        self.bin_id = [-1] * self.n_bins
        # sources: queue, mean gap, poisson flag, next arrival, stop
        self.src_queue: list[int] = []
        self.src_gap: list[float] = []
        self.src_poisson: list[bool] = []
        self.src_next: list[int] = []
        self.src_stop: list[int] = []

    # -- setup -------------------------------------------------------------

    def tx_ns(self, bits: int) -> int:
        return int(bits * 1e9 / self.capacity_bps + 0.5)

    def _uniform(self) -> float:
        self.rng, z = splitmix64(self.rng)
        return (z >> 11) * (1.0 / 9007199254740992.0)

    def _gap(self, i: int) -> int:
        mean = self.src_gap[i]
        if self.src_poisson[i]:
            g = -math.log(1.0 - self._uniform()) * mean
        else:
            g = mean
        return max(1, int(g + 0.5))

    def add_source(self, queue: int, rate_bps: float, pkt_bits: int, start_ns: int,
                   stop_ns: int, poisson: bool = True) -> None:
        if self.pkt_bits[queue] not in (0, pkt_bits):
            raise ValueError("one packet size per queue")
        self.pkt_bits[queue] = pkt_bits
        self.src_queue.append(queue)
        self.src_gap.append(pkt_bits * 1e9 / rate_bps)
        self.src_poisson.append(poisson)
        self.src_stop.append(stop_ns)
        self.src_next.append(start_ns)
        i = len(self.src_queue) - 1
        self.src_next[i] = start_ns + self._gap(i)
        if self.src_next[i] >= stop_ns:
            self.src_next[i] = NEVER

    # -- dynamics ------------------------------------------------------------

    def _start_next(self, t: int) -> None:
        n = self.n_queues
        for step in range(1, n + 1):
            q = (self.ptr + step) % n
            if self.count[q] > 0:
                self.count[q] -= 1
                self.serving = q
                self.serve_start = t
                self.busy_until = t + self.tx_ns(self.pkt_bits[q])
                self.ptr = q
                return
        self.serving = -1
        self.busy_until = NEVER

    def _record(self, t: int, bits: int) -> None:
        b = t // self.bin_ns
        slot = b % self.n_bins
        if self.bin_id[slot] != b:
            self.bin_id[slot] = b
            self.bin_bits[slot] = 0
        self.bin_bits[slot] += bits

    def advance(self, t: int) -> None:
        """Process every source arrival and service completion up to time ``t``."""
        n_src = len(self.src_queue)
        while True:
            arr_t, arr_i = NEVER, -1
            for i in range(n_src):
                if self.src_next[i] < arr_t:
                    arr_t, arr_i = self.src_next[i], i
            dep_t = self.busy_until
            if dep_t <= arr_t:
                if dep_t > t:
                    break
                q = self.serving
                self.served[q] += 1
                self._record(dep_t, self.pkt_bits[q])
                self._start_next(dep_t)
            else:
                if arr_t > t:
                    break
                q = self.src_queue[arr_i]
                self.arrived[q] += 1
                if self.count[q] < self.buffer_pkts:
                    self.count[q] += 1
                else:
                    self.dropped[q] += 1
                nxt = arr_t + self._gap(arr_i)
                self.src_next[arr_i] = nxt if nxt < self.src_stop[arr_i] else NEVER
                if self.serving < 0:
                    self._start_next(arr_t)
        if t > self.now:
            self.now = t

    # -- foreground pricing ---------------------------------------------------

    def fg_delay_ns(self, queue: int, bits: int) -> int:
        """Time until a foreground packet arriving now in ``queue`` finishes
        transmission: residual service, one round-robin turn per backlogged
        queue ahead of it (repeated per packet already waiting in its own
        queue), then its own transmission."""
        wait = 0
        if self.serving >= 0:
            wait = self.busy_until - self.now
        n = self.n_queues
        own = self.count[queue]
        turn = 0
        ahead = 0
        for step in range(1, n + 1):
            q = (self.ptr + step) % n
            if self.count[q] > 0 and q != queue:
                tx = self.tx_ns(self.pkt_bits[q])
                turn += tx
                if not _passed(self.ptr, q, queue, n):
                    ahead += tx
        wait += ahead + own * (turn + self.tx_ns(self.pkt_bits[queue]))
        return wait + self.tx_ns(bits)

    def throughput_bps(self, t: int | None = None) -> float:
        """Served bits over the sliding window ending at ``t`` (default: now)."""
        t = self.now if t is None else t
        last = t // self.bin_ns
        total = 0
        for slot in range(self.n_bins):
            b = self.bin_id[slot]
            if last - self.n_bins < b <= last:
                total += self.bin_bits[slot]
        return total * 1e9 / (self.n_bins * self.bin_ns)

    def backlog(self, queue: int) -> int:
        return self.count[queue]

    def stats(self) -> dict:
        return {"arrived": list(self.arrived), "dropped": list(self.dropped),
                "served": list(self.served), "queued": list(self.count),
                "in_service": self.serving}


def _passed(ptr: int, q: int, target: int, n: int) -> bool:
    """True when RR order starting after ``ptr`` reaches ``target`` before ``q``."""
    return (target - ptr - 1) % n < (q - ptr - 1) % n

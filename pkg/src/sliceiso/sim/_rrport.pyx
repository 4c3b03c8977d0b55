# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled round-robin port; mirrors ``rrport.RRPort`` operation for operation."""
from libc.math cimport log
from libc.stdint cimport int64_t, uint64_t
from libc.stdlib cimport calloc, free, realloc

cdef int64_t NEVER = 4611686018427387904  # 1 << 62


cdef inline uint64_t _mix(uint64_t *state) nogil:
    state[0] += <uint64_t>0x9E3779B97F4A7C15
    cdef uint64_t z = state[0]
    z = (z ^ (z >> 30)) * <uint64_t>0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * <uint64_t>0x94D049BB133111EB
    return z ^ (z >> 31)


cdef class RRPort:
    cdef public int n_queues
    cdef public double capacity_bps
    cdef public int64_t buffer_pkts
    cdef uint64_t rng
    cdef public int64_t now
    cdef int64_t *count
    cdef int64_t *pkt_bits
    cdef int64_t *arrived
    cdef int64_t *dropped
    cdef int64_t *served
    cdef public int64_t busy_until
    cdef public int serving
    cdef public int64_t serve_start
    cdef public int ptr
    cdef public int64_t bin_ns
    cdef public int64_t n_bins
    cdef int64_t *bin_bits
    cdef int64_t *bin_id
    cdef int n_src
    cdef int *src_queue
    cdef double *src_gap
    cdef int *src_poisson
    cdef int64_t *src_next
    cdef int64_t *src_stop

    def __cinit__(self, int n_queues, double capacity_bps, int64_t buffer_pkts, seed,
                  int64_t window_ns=100_000_000, int64_t bin_ns=1_000_000):
        if capacity_bps <= 0:
            raise ValueError("port capacity must be positive")
        self.n_queues = n_queues
        self.capacity_bps = capacity_bps
        self.buffer_pkts = buffer_pkts
        self.rng = <uint64_t>(int(seed) & 0xFFFFFFFFFFFFFFFF)
        self.now = 0
        self.count = <int64_t *>calloc(n_queues, sizeof(int64_t))
        self.pkt_bits = <int64_t *>calloc(n_queues, sizeof(int64_t))
        self.arrived = <int64_t *>calloc(n_queues, sizeof(int64_t))
        self.dropped = <int64_t *>calloc(n_queues, sizeof(int64_t))
        self.served = <int64_t *>calloc(n_queues, sizeof(int64_t))
        self.busy_until = NEVER
        self.serving = -1
        self.serve_start = 0
        self.ptr = n_queues - 1
        self.bin_ns = bin_ns
        self.n_bins = max(1, window_ns // bin_ns)
        self.bin_bits = <int64_t *>calloc(self.n_bins, sizeof(int64_t))
        self.bin_id = <int64_t *>calloc(self.n_bins, sizeof(int64_t))
        cdef int64_t k
        for k in range(self.n_bins):
            self.bin_id[k] = -1
        self.n_src = 0
        self.src_queue = NULL
        self.src_gap = NULL
        self.src_poisson = NULL
        self.src_next = NULL
        self.src_stop = NULL
        if (self.count == NULL or self.pkt_bits == NULL or self.arrived == NULL
                or self.dropped == NULL or self.served == NULL
                or self.bin_bits == NULL or self.bin_id == NULL):
            raise MemoryError()

    def __dealloc__(self):
        free(self.count); free(self.pkt_bits); free(self.arrived)
        free(self.dropped); free(self.served)
        free(self.bin_bits); free(self.bin_id)
        free(self.src_queue); free(self.src_gap); free(self.src_poisson)
        free(self.src_next); free(self.src_stop)

    cpdef int64_t tx_ns(self, int64_t bits):
        return <int64_t>(<double>bits * 1e9 / self.capacity_bps + 0.5)

    cdef inline int64_t _gap(self, int i):
        cdef double g
        cdef double u
        if self.src_poisson[i]:
            u = <double>(_mix(&self.rng) >> 11) * (1.0 / 9007199254740992.0)
            g = -log(1.0 - u) * self.src_gap[i]
        else:
            g = self.src_gap[i]
        cdef int64_t r = <int64_t>(g + 0.5)
        return r if r > 1 else 1

    def add_source(self, int queue, double rate_bps, int64_t pkt_bits, int64_t start_ns,
                   int64_t stop_ns, poisson=True):
        if self.pkt_bits[queue] != 0 and self.pkt_bits[queue] != pkt_bits:
            raise ValueError("one packet size per queue")
        self.pkt_bits[queue] = pkt_bits
        cdef int n = self.n_src + 1
        self.src_queue = <int *>realloc(self.src_queue, n * sizeof(int))
        self.src_gap = <double *>realloc(self.src_gap, n * sizeof(double))
        self.src_poisson = <int *>realloc(self.src_poisson, n * sizeof(int))
        self.src_next = <int64_t *>realloc(self.src_next, n * sizeof(int64_t))
        self.src_stop = <int64_t *>realloc(self.src_stop, n * sizeof(int64_t))
        if (self.src_queue == NULL or self.src_gap == NULL or self.src_poisson == NULL
                or self.src_next == NULL or self.src_stop == NULL):
            raise MemoryError()
        cdef int i = self.n_src
        self.n_src = n
        self.src_queue[i] = queue
        self.src_gap[i] = <double>pkt_bits * 1e9 / rate_bps
        self.src_poisson[i] = 1 if poisson else 0
        self.src_stop[i] = stop_ns
        self.src_next[i] = start_ns + self._gap(i)
        if self.src_next[i] >= stop_ns:
            self.src_next[i] = NEVER

    cdef inline void _start_next(self, int64_t t):
        cdef int n = self.n_queues
        cdef int step, q
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

    cdef inline void _record(self, int64_t t, int64_t bits):
        cdef int64_t b = t // self.bin_ns
        cdef int64_t slot = b % self.n_bins
        if self.bin_id[slot] != b:
            self.bin_id[slot] = b
            self.bin_bits[slot] = 0
        self.bin_bits[slot] += bits

    cpdef void advance(self, int64_t t):
        cdef int64_t arr_t, dep_t, nxt
        cdef int arr_i, i, q
        while True:
            arr_t = NEVER
            arr_i = -1
            for i in range(self.n_src):
                if self.src_next[i] < arr_t:
                    arr_t = self.src_next[i]
                    arr_i = i
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

    cpdef int64_t fg_delay_ns(self, int queue, int64_t bits):
        cdef int64_t wait = 0
        if self.serving >= 0:
            wait = self.busy_until - self.now
        cdef int n = self.n_queues
        cdef int64_t own = self.count[queue]
        cdef int64_t turn = 0, ahead = 0, tx
        cdef int step, q
        for step in range(1, n + 1):
            q = (self.ptr + step) % n
            if self.count[q] > 0 and q != queue:
                tx = self.tx_ns(self.pkt_bits[q])
                turn += tx
                # RR order after ptr reaches q before the target queue
                if (q - self.ptr - 1 + n) % n < (queue - self.ptr - 1 + n) % n:
                    ahead += tx
        wait += ahead + own * (turn + self.tx_ns(self.pkt_bits[queue]))
        return wait + self.tx_ns(bits)

    def throughput_bps(self, t=None):
        cdef int64_t tt = self.now if t is None else t
        cdef int64_t last = tt // self.bin_ns
        cdef int64_t total = 0, b, slot
        for slot in range(self.n_bins):
            b = self.bin_id[slot]
            if last - self.n_bins < b <= last:
                total += self.bin_bits[slot]
        return total * 1e9 / (self.n_bins * self.bin_ns)

    def backlog(self, int queue):
        return self.count[queue]

    def stats(self):
        return {"arrived": [self.arrived[i] for i in range(self.n_queues)],
                "dropped": [self.dropped[i] for i in range(self.n_queues)],
                "served": [self.served[i] for i in range(self.n_queues)],
                "queued": [self.count[i] for i in range(self.n_queues)],
                "in_service": self.serving}

# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled engine: per-record simulation kernels.

Mirrors ``waymemo._pykernels`` operation for operation; the equivalence
tests hold both engines to byte-identical output arrays, counters and
violation lists.  Keep the two in sync when changing lane semantics.
"""

import numpy as np

ctypedef long long i64
ctypedef unsigned char u8

cdef int VIOLATION_CAP = 1000


cdef struct Pred:
    int in_range
    i64 base_tag
    int carry
    int neg
    i64 pred_index
    i64 pred_offset
    i64 effective_tag


cdef struct Outcome:
    int hit
    int way          # -1 = none (store miss without allocation)
    i64 victim_tag   # -1 = no victim
    i64 victim_index


cdef class Geom:
    cdef public int address_bits, offset_bits, index_bits, tag_bits, ways, stride, k
    cdef public i64 address_mask, offset_mask, index_mask, tag_mask, low_mask
    cdef public i64 sets

    def __cinit__(self, int address_bits, int offset_bits, int index_bits,
                  int ways, int stride):
        self.address_bits = address_bits
        self.offset_bits = offset_bits
        self.index_bits = index_bits
        self.tag_bits = address_bits - offset_bits - index_bits
        self.ways = ways
        self.stride = stride
        self.k = offset_bits + index_bits
        self.address_mask = (<i64>1 << address_bits) - 1
        self.offset_mask = (<i64>1 << offset_bits) - 1
        self.index_mask = (<i64>1 << index_bits) - 1
        self.tag_mask = (<i64>1 << self.tag_bits) - 1
        self.low_mask = (<i64>1 << self.k) - 1
        self.sets = <i64>1 << index_bits


cdef void c_predict(Geom g, i64 base, i64 disp, Pred* p):
    cdef i64 low_sum = (base & g.low_mask) + (disp & g.low_mask)
    p.carry = <int>((low_sum >> g.k) & 1)
    cdef i64 low = low_sum & g.low_mask
    p.neg = 1 if disp < 0 else 0
    p.base_tag = (base >> g.k) & g.tag_mask
    p.pred_index = low >> g.offset_bits
    p.pred_offset = low & g.offset_mask
    p.effective_tag = (p.base_tag + p.carry - p.neg) & g.tag_mask
    p.in_range = 1 if (disp >= -(<i64>1 << g.k)) and (disp < (<i64>1 << g.k)) else 0


cdef class KCache:
    """Tag/valid/recency state; timestamp recency is equivalent to the
    reference model's LRU list because stamps are unique and increasing."""
    cdef Geom g
    cdef i64[::1] tags
    cdef u8[::1] valid
    cdef i64[::1] ts
    cdef i64 counter
    cdef int allocate_on_store

    def __cinit__(self, Geom g, int allocate_on_store):
        cdef i64 total = g.sets * g.ways
        self.g = g
        self.allocate_on_store = allocate_on_store
        self.tags = np.zeros(total, dtype=np.int64)
        self.valid = np.zeros(total, dtype=np.uint8)
        self.ts = np.empty(total, dtype=np.int64)
        cdef i64 s
        cdef int w
        for s in range(g.sets):
            for w in range(g.ways):
                self.ts[s * g.ways + w] = w
        self.counter = g.ways

    cdef void access(self, i64 addr, int store, Outcome* out):
        cdef i64 tag = (addr >> self.g.k) & self.g.tag_mask
        cdef i64 index = (addr >> self.g.offset_bits) & self.g.index_mask
        cdef i64 base = index * self.g.ways
        cdef int w, victim
        cdef i64 best
        out.victim_tag = -1
        out.victim_index = -1
        for w in range(self.g.ways):
            if self.valid[base + w] and self.tags[base + w] == tag:
                self.ts[base + w] = self.counter
                self.counter += 1
                out.hit = 1
                out.way = w
                return
        out.hit = 0
        if store and not self.allocate_on_store:
            out.way = -1
            return
        victim = 0
        best = self.ts[base]
        for w in range(1, self.g.ways):
            if self.ts[base + w] < best:
                best = self.ts[base + w]
                victim = w
        if self.valid[base + victim]:
            out.victim_tag = self.tags[base + victim]
            out.victim_index = index
        self.valid[base + victim] = 1
        self.tags[base + victim] = tag
        self.ts[base + victim] = self.counter
        self.counter += 1
        out.way = victim

    cdef int probe_line(self, i64 tag, i64 index):
        cdef i64 base = index * self.g.ways
        cdef int w
        for w in range(self.g.ways):
            if self.valid[base + w] and self.tags[base + w] == tag:
                return w
        return -1


cdef class KMab:
    cdef Geom g
    cdef int n1, n2, precise
    cdef i64[::1] row_tag
    cdef u8[::1] row_valid, row_carry, row_neg
    cdef i64[::1] row_ts
    cdef i64[::1] col_index
    cdef u8[::1] col_valid
    cdef i64[::1] col_ts
    cdef u8[::1] vflag
    cdef signed char[::1] memo
    cdef i64 row_counter, col_counter

    def __cinit__(self, Geom g, int n1, int n2, int precise):
        self.g = g
        self.n1 = n1
        self.n2 = n2
        self.precise = precise
        self.row_tag = np.zeros(n1, dtype=np.int64)
        self.row_valid = np.zeros(n1, dtype=np.uint8)
        self.row_carry = np.zeros(n1, dtype=np.uint8)
        self.row_neg = np.zeros(n1, dtype=np.uint8)
        self.row_ts = np.arange(n1, dtype=np.int64)
        self.col_index = np.zeros(n2, dtype=np.int64)
        self.col_valid = np.zeros(n2, dtype=np.uint8)
        self.col_ts = np.arange(n2, dtype=np.int64)
        self.vflag = np.zeros(n1 * n2, dtype=np.uint8)
        self.memo = np.zeros(n1 * n2, dtype=np.int8)
        self.row_counter = n1
        self.col_counter = n2

    cdef int lru_row(self):
        cdef int i, best_i = 0
        cdef i64 best = self.row_ts[0]
        for i in range(1, self.n1):
            if self.row_ts[i] < best:
                best = self.row_ts[i]
                best_i = i
        return best_i

    cdef int lru_col(self):
        cdef int j, best_j = 0
        cdef i64 best = self.col_ts[0]
        for j in range(1, self.n2):
            if self.col_ts[j] < best:
                best = self.col_ts[j]
                best_j = j
        return best_j

    cdef i64 effective_tag(self, int i):
        return (self.row_tag[i] + self.row_carry[i] - self.row_neg[i]) & self.g.tag_mask

    # returns (hit, way, row, col) packed: row/col -1 when missing
    cdef void lookup(self, Pred* p, int* hit, int* way, int* row, int* col):
        cdef int i, j
        row[0] = -1
        col[0] = -1
        for i in range(self.n1):
            if (self.row_valid[i] and self.row_tag[i] == p.base_tag
                    and self.row_carry[i] == p.carry and self.row_neg[i] == p.neg):
                row[0] = i
                break
        for j in range(self.n2):
            if self.col_valid[j] and self.col_index[j] == p.pred_index:
                col[0] = j
                break
        if row[0] >= 0 and col[0] >= 0 and self.vflag[row[0] * self.n2 + col[0]]:
            hit[0] = 1
            way[0] = self.memo[row[0] * self.n2 + col[0]]
        else:
            hit[0] = 0
            way[0] = -1

    cdef void update(self, Pred* p, int row, int col, int resolved_way):
        cdef int i = row, j = col, r
        if i < 0:
            i = self.lru_row()
            self.row_valid[i] = 1
            self.row_tag[i] = p.base_tag
            self.row_carry[i] = <u8>p.carry
            self.row_neg[i] = <u8>p.neg
            for r in range(self.n2):
                self.vflag[i * self.n2 + r] = 0
        if j < 0:
            j = self.lru_col()
            self.col_valid[j] = 1
            self.col_index[j] = p.pred_index
            for r in range(self.n1):
                self.vflag[r * self.n2 + j] = 0
        self.vflag[i * self.n2 + j] = 1
        self.memo[i * self.n2 + j] = <signed char>resolved_way
        self.row_ts[i] = self.row_counter
        self.row_counter += 1
        self.col_ts[j] = self.col_counter
        self.col_counter += 1

    cdef void bypass_invalidate(self):
        cdef int i = self.lru_row(), j
        for j in range(self.n2):
            self.vflag[i * self.n2 + j] = 0

    cdef void snoop_evict(self, i64 victim_tag, i64 victim_index):
        cdef int i, j
        for i in range(self.n1):
            if not self.row_valid[i] or self.effective_tag(i) != victim_tag:
                continue
            for j in range(self.n2):
                if self.col_valid[j] and self.col_index[j] == victim_index:
                    self.vflag[i * self.n2 + j] = 0

    cdef i64 audit(self, KCache cache, i64 step, list violations, i64 total):
        cdef int i, j, probe
        cdef i64 etag, idx
        for i in range(self.n1):
            if not self.row_valid[i]:
                continue
            etag = self.effective_tag(i)
            for j in range(self.n2):
                if not (self.vflag[i * self.n2 + j] and self.col_valid[j]):
                    continue
                idx = self.col_index[j]
                probe = cache.probe_line(etag, idx)
                if probe != <int>self.memo[i * self.n2 + j]:
                    total += 1
                    if len(violations) < VIOLATION_CAP:
                        violations.append(
                            (step, etag, idx, <int>self.memo[i * self.n2 + j], probe)
                        )
        return total


cdef dict _alloc(Py_ssize_t n):
    return {
        "applies": np.zeros(n, np.uint8),
        "cache_hit": np.zeros(n, np.uint8),
        "way": np.full(n, -1, np.int8),
        "victim_tag": np.full(n, -1, np.int64),
        "victim_index": np.full(n, -1, np.int64),
        "tag_reads": np.zeros(n, np.int32),
        "way_accesses": np.zeros(n, np.int32),
        "refill_tag_writes": np.zeros(n, np.int32),
        "refill_way_writes": np.zeros(n, np.int32),
        "mab_event": np.zeros(n, np.uint8),
        "flow": np.zeros(n, np.uint8),
    }


cdef class _Counts:
    cdef public i64 accesses, cache_hits, cache_misses, tag_reads, way_accesses
    cdef public i64 refill_tag_writes, refill_way_writes
    cdef public i64 mab_hits, mab_misses, bypasses
    cdef public i64 loads, stores, store_way_accesses
    cdef public i64 flow_first, flow_intra_seq, flow_intra_nonseq
    cdef public i64 flow_inter_seq, flow_inter_nonseq

    cdef dict as_dict(self):
        return {
            "accesses": self.accesses,
            "cache_hits": self.cache_hits,
            "cache_misses": self.cache_misses,
            "tag_reads": self.tag_reads,
            "way_accesses": self.way_accesses,
            "refill_tag_writes": self.refill_tag_writes,
            "refill_way_writes": self.refill_way_writes,
            "mab_hits": self.mab_hits,
            "mab_misses": self.mab_misses,
            "bypasses": self.bypasses,
            "loads": self.loads,
            "stores": self.stores,
            "store_way_accesses": self.store_way_accesses,
            "flow_first": self.flow_first,
            "flow_intra_seq": self.flow_intra_seq,
            "flow_intra_nonseq": self.flow_intra_nonseq,
            "flow_inter_seq": self.flow_inter_seq,
            "flow_inter_nonseq": self.flow_inter_nonseq,
        }


def run_d_lane(u8[::1] rtype, i64[::1] addr, i64[::1] aux, u8[::1] tkind,
               geom, int mode, int n1, int n2, int precise,
               int allocate_on_store, int refill_tag_writes, int refill_way_writes,
               int audit):
    cdef Geom g = Geom(geom[0], geom[1], geom[2], geom[3], geom[4])
    cdef KCache cache = KCache(g, allocate_on_store)
    cdef KMab mab = KMab(g, n1, n2, precise) if mode == 1 else None
    cdef Py_ssize_t n = rtype.shape[0]
    out = _alloc(n)
    cdef u8[::1] o_applies = out["applies"]
    cdef u8[::1] o_hit = out["cache_hit"]
    cdef signed char[::1] o_way = out["way"]
    cdef i64[::1] o_vtag = out["victim_tag"]
    cdef i64[::1] o_vidx = out["victim_index"]
    cdef int[::1] o_tags = out["tag_reads"]
    cdef int[::1] o_ways = out["way_accesses"]
    cdef int[::1] o_rtag = out["refill_tag_writes"]
    cdef int[::1] o_rway = out["refill_way_writes"]
    cdef u8[::1] o_ev = out["mab_event"]
    cdef _Counts c = _Counts()
    cdef list violations = []
    cdef i64 vtotal = 0
    cdef int do_audit = 1 if (audit and mode == 1) else 0

    cdef Py_ssize_t step
    cdef int is_store, tag_reads, way_accesses, refill_t, refill_w
    cdef int mab_hit, bypass, hit, mway, row, col, full_ways
    cdef i64 base, disp, a
    cdef Pred p
    cdef Outcome o

    for step in range(n):
        if rtype[step] == 0:
            continue
        is_store = 1 if rtype[step] == 2 else 0
        base = addr[step]
        disp = aux[step]
        a = (base + disp) & g.address_mask
        full_ways = 1 if is_store else g.ways
        mab_hit = 0
        bypass = 0

        if mode == 0:
            cache.access(a, is_store, &o)
            tag_reads = g.ways
            way_accesses = full_ways
        else:
            c_predict(g, base, disp, &p)
            if not p.in_range:
                cache.access(a, is_store, &o)
                if o.victim_tag >= 0 and precise:
                    mab.snoop_evict(o.victim_tag, o.victim_index)
                tag_reads = g.ways
                way_accesses = full_ways
                mab.bypass_invalidate()
                bypass = 1
            else:
                mab.lookup(&p, &hit, &mway, &row, &col)
                cache.access(a, is_store, &o)
                if o.victim_tag >= 0 and precise:
                    mab.snoop_evict(o.victim_tag, o.victim_index)
                if hit:
                    tag_reads = 0
                    way_accesses = 1
                    mab_hit = 1
                else:
                    tag_reads = g.ways
                    way_accesses = full_ways
                if o.way >= 0:
                    mab.update(&p, row, col, o.way)

        refill_t = 0
        refill_w = 0
        if (not o.hit) and o.way >= 0 and not mab_hit:
            refill_t = refill_tag_writes
            refill_w = refill_way_writes

        o_applies[step] = 1
        o_hit[step] = <u8>o.hit
        o_way[step] = <signed char>o.way
        o_vtag[step] = o.victim_tag
        o_vidx[step] = o.victim_index
        o_tags[step] = tag_reads
        o_ways[step] = way_accesses
        o_rtag[step] = refill_t
        o_rway[step] = refill_w
        if mode == 1:
            o_ev[step] = 3 if bypass else (1 if mab_hit else 2)

        c.accesses += 1
        if is_store:
            c.stores += 1
            c.store_way_accesses += way_accesses
        else:
            c.loads += 1
        if o.hit:
            c.cache_hits += 1
        else:
            c.cache_misses += 1
        c.tag_reads += tag_reads
        c.way_accesses += way_accesses
        c.refill_tag_writes += refill_t
        c.refill_way_writes += refill_w
        if mode == 1:
            if bypass:
                c.bypasses += 1
            elif mab_hit:
                c.mab_hits += 1
            else:
                c.mab_misses += 1

        if do_audit:
            vtotal = mab.audit(cache, step, violations, vtotal)

    out["counters"] = c.as_dict()
    out["violations"] = violations
    out["violations_total"] = vtotal
    return out


def run_i_lane(u8[::1] rtype, i64[::1] addr, i64[::1] aux, u8[::1] tkind,
               geom, int mode, int n1, int n2, int precise,
               int allocate_on_store, int refill_tag_writes, int refill_way_writes,
               int audit):
    cdef Geom g = Geom(geom[0], geom[1], geom[2], geom[3], geom[4])
    cdef KCache cache = KCache(g, 1)
    cdef KMab mab = KMab(g, n1, n2, precise) if mode == 2 else None
    cdef Py_ssize_t n = rtype.shape[0]
    out = _alloc(n)
    cdef u8[::1] o_applies = out["applies"]
    cdef u8[::1] o_hit = out["cache_hit"]
    cdef signed char[::1] o_way = out["way"]
    cdef i64[::1] o_vtag = out["victim_tag"]
    cdef i64[::1] o_vidx = out["victim_index"]
    cdef int[::1] o_tags = out["tag_reads"]
    cdef int[::1] o_ways = out["way_accesses"]
    cdef int[::1] o_rtag = out["refill_tag_writes"]
    cdef int[::1] o_rway = out["refill_way_writes"]
    cdef u8[::1] o_ev = out["mab_event"]
    cdef u8[::1] o_flow = out["flow"]
    cdef _Counts c = _Counts()
    cdef list violations = []
    cdef i64 vtotal = 0
    cdef int do_audit = 1 if (audit and mode == 2) else 0

    cdef Py_ssize_t step
    cdef int has_prev = 0
    cdef i64 prev_pc = 0, prev_arg = 0
    cdef int prev_tk = 0
    cdef int flow, intra, tag_reads, way_accesses, refill_t, refill_w
    cdef int mab_hit, bypass, hit, mway, row, col, inter_mab
    cdef i64 pc, base, disp
    cdef Pred p
    cdef Outcome o

    for step in range(n):
        if rtype[step] != 0:
            continue
        pc = addr[step]
        # flow codes: 1 first, 2 intra_seq, 3 intra_nonseq, 4 inter_seq, 5 inter_nonseq
        if not has_prev:
            flow = 1
        else:
            intra = 1 if (prev_pc >> g.offset_bits) == (pc >> g.offset_bits) else 0
            if prev_tk == 0:
                flow = 2 if intra else 4
            else:
                flow = 3 if intra else 5
        mab_hit = 0
        bypass = 0
        inter_mab = 0

        if mode == 0:
            cache.access(pc, 0, &o)
            tag_reads = g.ways
            way_accesses = g.ways
        elif flow == 2 or flow == 3:
            cache.access(pc, 0, &o)
            if not o.hit:
                raise AssertionError("intra-line fetch missed; simulator bug")
            tag_reads = 0
            way_accesses = 1
        elif mode == 1 or flow == 1:
            cache.access(pc, 0, &o)
            if o.victim_tag >= 0 and mode == 2 and precise:
                mab.snoop_evict(o.victim_tag, o.victim_index)
            tag_reads = g.ways
            way_accesses = g.ways
        else:
            inter_mab = 1
            if flow == 4:
                base = prev_pc
                disp = g.stride
            elif prev_tk == 1:
                base = prev_pc
                disp = prev_arg
            else:
                base = prev_arg
                disp = 0
            c_predict(g, base, disp, &p)
            if not p.in_range:
                cache.access(pc, 0, &o)
                if o.victim_tag >= 0 and precise:
                    mab.snoop_evict(o.victim_tag, o.victim_index)
                tag_reads = g.ways
                way_accesses = g.ways
                mab.bypass_invalidate()
                bypass = 1
            else:
                mab.lookup(&p, &hit, &mway, &row, &col)
                cache.access(pc, 0, &o)
                if o.victim_tag >= 0 and precise:
                    mab.snoop_evict(o.victim_tag, o.victim_index)
                if hit:
                    tag_reads = 0
                    way_accesses = 1
                    mab_hit = 1
                else:
                    tag_reads = g.ways
                    way_accesses = g.ways
                mab.update(&p, row, col, o.way)

        refill_t = 0
        refill_w = 0
        if (not o.hit) and not mab_hit:
            refill_t = refill_tag_writes
            refill_w = refill_way_writes

        o_applies[step] = 1
        o_hit[step] = <u8>o.hit
        o_way[step] = <signed char>o.way
        o_vtag[step] = o.victim_tag
        o_vidx[step] = o.victim_index
        o_tags[step] = tag_reads
        o_ways[step] = way_accesses
        o_rtag[step] = refill_t
        o_rway[step] = refill_w
        o_flow[step] = <u8>flow
        if mode == 2 and inter_mab:
            o_ev[step] = 3 if bypass else (1 if mab_hit else 2)

        c.accesses += 1
        if o.hit:
            c.cache_hits += 1
        else:
            c.cache_misses += 1
        c.tag_reads += tag_reads
        c.way_accesses += way_accesses
        c.refill_tag_writes += refill_t
        c.refill_way_writes += refill_w
        if flow == 1:
            c.flow_first += 1
        elif flow == 2:
            c.flow_intra_seq += 1
        elif flow == 3:
            c.flow_intra_nonseq += 1
        elif flow == 4:
            c.flow_inter_seq += 1
        else:
            c.flow_inter_nonseq += 1
        if mode == 2 and inter_mab:
            if bypass:
                c.bypasses += 1
            elif mab_hit:
                c.mab_hits += 1
            else:
                c.mab_misses += 1

        if do_audit:
            vtotal = mab.audit(cache, step, violations, vtotal)

        has_prev = 1
        prev_pc = pc
        prev_tk = tkind[step]
        prev_arg = aux[step]

    out["counters"] = c.as_dict()
    out["violations"] = violations
    out["violations_total"] = vtotal
    return out


def predict_batch(base_in, disp_in, geom):
    """Elementwise narrow-adder prediction; same contract as the pure one."""
    cdef Geom g = Geom(geom[0], geom[1], geom[2], geom[3], geom[4])
    base_a, disp_a = np.broadcast_arrays(
        np.asarray(base_in, dtype=np.int64), np.asarray(disp_in, dtype=np.int64)
    )
    base_a = np.ascontiguousarray(base_a)
    disp_a = np.ascontiguousarray(disp_a)
    cdef i64[::1] base = base_a.reshape(-1)
    cdef i64[::1] disp = disp_a.reshape(-1)
    cdef Py_ssize_t n = base.shape[0]
    out = {
        "in_range": np.empty(n, np.uint8),
        "base_tag": np.empty(n, np.int64),
        "carry": np.empty(n, np.uint8),
        "neg": np.empty(n, np.uint8),
        "pred_index": np.empty(n, np.int64),
        "pred_offset": np.empty(n, np.int64),
        "effective_tag": np.empty(n, np.int64),
    }
    cdef u8[::1] o_in = out["in_range"]
    cdef i64[::1] o_bt = out["base_tag"]
    cdef u8[::1] o_ca = out["carry"]
    cdef u8[::1] o_ne = out["neg"]
    cdef i64[::1] o_pi = out["pred_index"]
    cdef i64[::1] o_po = out["pred_offset"]
    cdef i64[::1] o_et = out["effective_tag"]
    cdef Py_ssize_t i
    cdef Pred p
    for i in range(n):
        c_predict(g, base[i], disp[i], &p)
        o_in[i] = <u8>p.in_range
        o_bt[i] = p.base_tag
        o_ca[i] = <u8>p.carry
        o_ne[i] = <u8>p.neg
        o_pi[i] = p.pred_index
        o_po[i] = p.pred_offset
        o_et[i] = p.effective_tag
    for key in ("in_range", "base_tag", "carry", "neg", "pred_index",
                "pred_offset", "effective_tag"):
        out[key] = out[key].reshape(base_a.shape)
    return out

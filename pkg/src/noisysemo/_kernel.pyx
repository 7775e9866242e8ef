# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
# distutils: language = c++
"""Compiled full-trial loops for the three SEMO variants on OneMinMax.

Mirrors ``noisysemo.algorithms`` draw for draw; see that module for the
draw order. Genomes live in a slot pool and populations are lists of slot
ids, so elimination never copies genomes.
"""
from cpython.pycapsule cimport PyCapsule_GetPointer
from libc.stdint cimport int64_t, uint8_t, uint64_t
from libc.string cimport memcpy, memset
from libcpp.vector cimport vector

import numpy as np

from numpy.random cimport bitgen_t

cdef double TWO_M53 = 1.0 / 9007199254740992.0

cdef enum:
    CACHED = 0
    REEVAL = 1
    KEEP = 2


cdef inline double unif(bitgen_t* g) noexcept nogil:
    return (g.next_uint64(g.state) >> 11) * TWO_M53


cdef inline int64_t below(bitgen_t* g, uint64_t m) noexcept nogil:
    cdef uint64_t threshold = (<uint64_t>0 - m) % m
    cdef uint64_t r
    while True:
        r = g.next_uint64(g.state)
        if r >= threshold:
            return <int64_t>(r % m)


cdef struct Trace:
    vector[int64_t] t, L, d, ell, j, covered, noisy, ext


cdef class _Run:
    cdef bitgen_t* g
    cdef int n
    cdef double p
    cdef int variant
    cdef double K
    cdef int cap
    cdef uint8_t[:, ::1] genome
    cdef int64_t[::1] ones, members, stored, holder, cnt, order, vals, last, free_slots, new_members
    cdef int64_t m, L, jmin, nfree, t, evals
    cdef Trace tr

    def __cinit__(self, object bitgen, int n, double p, int variant, double K):
        capsule = bitgen.capsule
        self.g = <bitgen_t*> PyCapsule_GetPointer(capsule, "BitGenerator")
        self.n = n
        self.p = p
        self.variant = variant
        self.K = K
        self.cap = n + 5
        self.genome = np.zeros((self.cap, n), dtype=np.uint8)
        self.ones = np.zeros(self.cap, dtype=np.int64)
        self.members = np.zeros(self.cap, dtype=np.int64)
        self.stored = np.zeros(self.cap, dtype=np.int64)
        self.holder = np.full(n + 1, -1, dtype=np.int64)
        self.cnt = np.zeros(n + 1, dtype=np.int64)
        self.order = np.zeros(self.cap, dtype=np.int64)
        self.vals = np.zeros(self.cap, dtype=np.int64)
        self.last = np.full(n + 1, -1, dtype=np.int64)
        self.free_slots = np.zeros(self.cap, dtype=np.int64)
        self.new_members = np.zeros(self.cap, dtype=np.int64)
        self.m = 0
        self.L = 0
        self.t = 0
        self.evals = 0
        self.jmin = n + 1

    cdef inline void _add_true(self, int64_t f) noexcept nogil:
        self.cnt[f] += 1
        if self.cnt[f] == 1:
            self.L += 1

    cdef inline void _remove_true(self, int64_t f) noexcept nogil:
        self.cnt[f] -= 1
        if self.cnt[f] == 0:
            self.L -= 1

    cdef inline int64_t _evaluate(self, int64_t slot) noexcept nogil:
        cdef int64_t v = self.ones[slot]
        cdef int64_t q
        self.evals += 1
        if unif(self.g) < self.p:
            q = below(self.g, self.n)
            if self.genome[slot, q]:
                v -= 1
            else:
                v += 1
        return v

    cdef inline int64_t _pop_free(self) noexcept nogil:
        self.nfree -= 1
        return self.free_slots[self.nfree]

    cdef inline void _child(self, int64_t parent, int64_t child) noexcept nogil:
        cdef int64_t pos
        memcpy(&self.genome[child, 0], &self.genome[parent, 0], self.n)
        pos = below(self.g, self.n)
        if self.genome[child, pos]:
            self.genome[child, pos] = 0
            self.ones[child] = self.ones[parent] - 1
        else:
            self.genome[child, pos] = 1
            self.ones[child] = self.ones[parent] + 1

    cdef void init(self):
        cdef int i, k
        cdef int words = (self.n + 63) // 64
        cdef uint64_t word = 0
        cdef int64_t f = 0
        for k in range(words):
            word = self.g.next_uint64(self.g.state)
            for i in range(64 * k, min(64 * (k + 1), self.n)):
                self.genome[0, i] = (word >> (i - 64 * k)) & 1
                f += self.genome[0, i]
        self.ones[0] = f
        self.members[0] = 0
        self.m = 1
        self._add_true(f)
        self.nfree = 0
        for i in range(self.cap - 1, 0, -1):
            self.free_slots[self.nfree] = i
            self.nfree += 1
        if self.variant == CACHED:
            self.stored[0] = self._evaluate(0)
            self.holder[self.stored[0]] = 0
            self.jmin = self.stored[0]

    cdef void cached_step(self) noexcept nogil:
        cdef int64_t parent = self.members[below(self.g, self.m)]
        cdef int64_t child = self._pop_free()
        cdef int64_t w, q, old
        self._child(parent, child)
        w = self._evaluate(child)
        self.stored[child] = w
        q = self.holder[w]
        if q >= 0:
            old = self.members[q]
            self._remove_true(self.ones[old])
            self.members[q] = child
            self.free_slots[self.nfree] = old
            self.nfree += 1
        else:
            self.members[self.m] = child
            self.holder[w] = self.m
            self.m += 1
        self._add_true(self.ones[child])
        if w < self.jmin:
            self.jmin = w
        self.t += 1

    cdef void reeval_step(self) noexcept nogil:
        cdef int64_t parent = self.members[below(self.g, self.m)]
        cdef int64_t child = self._pop_free()
        cdef int64_t mm, i, k, jj, tmp, s, v, nm, executed = self.t
        self._child(parent, child)
        self.members[self.m] = child
        mm = self.m + 1
        self._add_true(self.ones[child])
        for i in range(mm):
            self.order[i] = i
        i = mm - 1
        while i > 0:
            jj = below(self.g, i + 1)
            tmp = self.order[i]
            self.order[i] = self.order[jj]
            self.order[jj] = tmp
            i -= 1
        for k in range(mm):
            v = self._evaluate(self.members[self.order[k]])
            self.vals[k] = v
            self.last[v] = k
        nm = 0
        for k in range(mm):
            s = self.members[self.order[k]]
            if self.last[self.vals[k]] == k:
                self.new_members[nm] = s
                nm += 1
            else:
                self._remove_true(self.ones[s])
                self.free_slots[self.nfree] = s
                self.nfree += 1
        for k in range(mm):
            self.last[self.vals[k]] = -1
        for k in range(nm):
            self.members[k] = self.new_members[k]
        self.m = nm
        if self.variant == KEEP and executed < self.K:
            if self.cnt[0] == 0:
                s = self._pop_free()
                memset(&self.genome[s, 0], 0, self.n)
                self.ones[s] = 0
                self.members[self.m] = s
                self.m += 1
                self._add_true(0)
            if self.cnt[self.n] == 0:
                s = self._pop_free()
                memset(&self.genome[s, 0], 1, self.n)
                self.ones[s] = self.n
                self.members[self.m] = s
                self.m += 1
                self._add_true(self.n)
        self.t += 1

    cdef inline bint extremes(self) noexcept nogil:
        if self.variant == CACHED:
            return self.holder[0] >= 0 and self.holder[self.n] >= 0
        return self.cnt[0] > 0 and self.cnt[self.n] > 0

    cdef void sample(self):
        cdef int64_t lo = 0, hi = self.n, holder_slot, flag
        if self.tr.t.size() and self.tr.t.back() == self.t:
            return
        while self.cnt[lo] == 0:
            lo += 1
        while self.cnt[hi] == 0:
            hi -= 1
        self.tr.t.push_back(self.t)
        self.tr.L.push_back(self.L)
        self.tr.d.push_back(self.n + lo - hi)
        flag = 1 if self.L == self.n + 1 else 0
        self.tr.covered.push_back(flag)
        flag = 1 if (self.cnt[0] > 0 and self.cnt[self.n] > 0) else 0
        self.tr.ext.push_back(flag)
        if self.variant == CACHED:
            holder_slot = self.members[self.holder[self.jmin]]
            flag = 1 if self.ones[holder_slot] == self.jmin else 0
            self.tr.ell.push_back(self.jmin + 1 - flag)
            self.tr.j.push_back(self.jmin)
            flag = 1 if (self.holder[0] >= 0 and self.holder[self.n] >= 0) else 0
            self.tr.noisy.push_back(flag)
        else:
            flag = -1
            self.tr.ell.push_back(flag)
            self.tr.j.push_back(flag)
            self.tr.noisy.push_back(flag)

    def run(self, int64_t budget, int64_t stride):
        cdef int64_t t_ex = -1
        cdef bint done
        self.init()
        if self.extremes():
            t_ex = 0
        if stride > 0:
            self.sample()
        done = self.L == self.n + 1
        while not done and self.t < budget:
            if self.variant == CACHED:
                self.cached_step()
            else:
                self.reeval_step()
            if t_ex < 0 and self.extremes():
                t_ex = self.t
            if stride > 0 and self.t % stride == 0:
                self.sample()
            done = self.L == self.n + 1
        if stride > 0:
            self.sample()
        out = {
            "T_total": self.t,
            "T_total_censored": not done,
            "T_ex": self.t if t_ex < 0 else t_ex,
            "T_ex_censored": t_ex < 0,
            "iterations": self.t,
            "evaluations": self.evals,
            "population": tuple(
                bytes(np.asarray(self.genome[self.members[k]]) + 48).decode() for k in range(self.m)
            ),
            "trace": None,
        }
        if stride > 0:
            out["trace"] = {
                "t": np.array(self.tr.t, dtype=np.int64),
                "L": np.array(self.tr.L, dtype=np.int64),
                "d": np.array(self.tr.d, dtype=np.int64),
                "ell": np.array(self.tr.ell, dtype=np.int64),
                "j": np.array(self.tr.j, dtype=np.int64),
                "covered": np.array(self.tr.covered, dtype=np.int64),
                "extremes_noisy": np.array(self.tr.noisy, dtype=np.int64),
                "extremes_true": np.array(self.tr.ext, dtype=np.int64),
            }
        return out


def simulate(object bitgen, int n, double p, int variant, double K, int64_t budget, int64_t stride):
    """Run one trial to full coverage or ``budget`` iterations; returns a dict."""
    with bitgen.lock:
        return _Run(bitgen, n, p, variant, K).run(budget, stride)

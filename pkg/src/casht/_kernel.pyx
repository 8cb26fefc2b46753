# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled trial loop. Mirrors ``_pykernel.run_trial`` operation for operation."""
from libc.math cimport exp, log, log1p, INFINITY
from libc.stdlib cimport malloc, free

import numpy as np

cdef enum:
    BUFFER_SIZE = 256
cdef double U_FLOOR = 2.0 ** -53

cdef enum:
    CHERNOFF = 0
    NJ1 = 1
    PHIDELTA = 2

cdef enum:
    EXPONENTIAL = 0
    ERLANG = 1
    HYPEREXPONENTIAL = 2
    PARETO = 3
    LOGLOGISTIC = 4


cdef class DrawBuffer:
    cdef object _gen
    cdef double[::1] _u
    cdef double[::1] _z
    cdef int _ui, _zi

    def __init__(self, gen):
        self._gen = gen
        self._u = np.ascontiguousarray(gen.random(BUFFER_SIZE))
        self._ui = 0
        self._z = np.ascontiguousarray(gen.standard_normal(BUFFER_SIZE))
        self._zi = 0

    cdef inline double uniform(self):
        if self._ui == BUFFER_SIZE:
            self._u = np.ascontiguousarray(self._gen.random(BUFFER_SIZE))
            self._ui = 0
        cdef double u = self._u[self._ui]
        self._ui += 1
        return u

    cdef inline double normal(self):
        if self._zi == BUFFER_SIZE:
            self._z = np.ascontiguousarray(self._gen.standard_normal(BUFFER_SIZE))
            self._zi = 0
        cdef double z = self._z[self._zi]
        self._zi += 1
        return z

    def random(self):
        return self.uniform()

    def standard_normal(self):
        return self.normal()


cdef inline double _pos_uniform(DrawBuffer buf):
    cdef double u = buf.uniform()
    return u if u > 0.0 else U_FLOOR


cdef double _draw_cost(int code, double p0, double p1, double p2, DrawBuffer buf) except? -1.0:
    cdef double acc, rate, u
    cdef int n
    if code == EXPONENTIAL:
        return -log1p(-_pos_uniform(buf)) / p0
    if code == ERLANG:
        acc = 0.0
        for n in range(<int>p0):
            acc += -log1p(-_pos_uniform(buf))
        return acc / p1
    if code == HYPEREXPONENTIAL:
        rate = p1 if buf.uniform() < p0 else p2
        return -log1p(-_pos_uniform(buf)) / rate
    if code == PARETO:
        return p0 * exp(-log1p(-_pos_uniform(buf)) / p1)
    if code == LOGLOGISTIC:
        u = _pos_uniform(buf)
        return p0 * exp((log(u) - log1p(-u)) / p1)
    raise ValueError(f"unknown cost family code {code}")


cdef inline int _pick(const double[::1] weights, int row, int n_act, double u) noexcept nogil:
    cdef double cum = 0.0, w
    cdef int last = 0, a
    cdef int base = row * n_act
    for a in range(n_act):
        w = weights[base + a]
        if w > 0.0:
            last = a
        cum += w
        if u < cum:
            return a
    return last


cdef int _stage_action(const double[::1] kld, char* alive, const double[::1] kappa, int h, int n_act) noexcept nogil:
    cdef int best_a = -1, a, i, j
    cdef double best = -INFINITY, worst, k, r
    for a in range(n_act):
        worst = INFINITY
        for i in range(h):
            if not alive[i]:
                continue
            for j in range(i + 1, h):
                if alive[j]:
                    k = kld[(i * h + j) * n_act + a]
                    if k > 0.0:
                        r = k / kappa[a]
                        if r < worst:
                            worst = r
        if worst < INFINITY and worst > best:
            best = worst
            best_a = a
    return best_a


def run_trial(int kind, int h, int n_act,
              const double[::1] means, const double[::1] kld, const double[::1] weights,
              const long[::1] codes, const double[::1] params, const double[::1] deadlines,
              const double[::1] kappa, double delta, double rho, double threshold,
              long max_steps, int true_h, bint ex_ante, DrawBuffer buf):
    cdef long[::1] n_tot = np.zeros(n_act, dtype=np.int64)
    cdef long[::1] n_eff = np.zeros(n_act, dtype=np.int64)
    cdef double total = 0.0, c, y, mi, mj, inc, top, total_w, d
    cdef long steps = 0
    cdef int declared = -1, a, i, j, best_i = 0, n_alive = h, stage_a = -1
    cdef double stop_level = 1.0 - delta
    cdef double max_post = 1.0 / h
    cdef bint pruned, changed, any_rival, wins

    cdef double* logw = <double*> malloc(h * sizeof(double))
    cdef double* s = <double*> malloc(h * h * sizeof(double))
    cdef char* alive = <char*> malloc(h * sizeof(char))
    if logw == NULL or s == NULL or alive == NULL:
        free(logw); free(s); free(alive)
        raise MemoryError()
    try:
        for i in range(h):
            logw[i] = 0.0
            alive[i] = 1
        for i in range(h * h):
            s[i] = 0.0
        if kind == PHIDELTA:
            stage_a = _stage_action(kld, alive, kappa, h, n_act)
            if stage_a < 0:
                raise ValueError("no action separates any pair of hypotheses")

        while steps < max_steps:
            if kind == PHIDELTA:
                a = stage_a
            elif kind == NJ1 and max_post <= rho:
                a = _pick(weights, h, n_act, buf.uniform())
            else:
                a = _pick(weights, best_i, n_act, buf.uniform())

            c = _draw_cost(codes[a], params[3 * a], params[3 * a + 1], params[3 * a + 2], buf)
            steps += 1
            n_tot[a] += 1
            if ex_ante and c > deadlines[a]:
                total += deadlines[a]
                continue
            total += c
            n_eff[a] += 1
            y = means[true_h * n_act + a] + buf.normal()

            if kind == PHIDELTA:
                for i in range(h):
                    if not alive[i]:
                        continue
                    mi = means[i * n_act + a]
                    for j in range(i + 1, h):
                        if alive[j] and kld[(i * h + j) * n_act + a] > 0.0:
                            mj = means[j * n_act + a]
                            inc = (mi - mj) * y - 0.5 * (mi * mi - mj * mj)
                            s[i * h + j] += inc
                            s[j * h + i] -= inc
                pruned = False
                changed = True
                while changed and n_alive > 1:
                    changed = False
                    for i in range(h):
                        if not alive[i]:
                            continue
                        any_rival = False
                        wins = True
                        for j in range(h):
                            if j != i and alive[j] and kld[(i * h + j) * n_act + a] > 0.0:
                                any_rival = True
                                if s[i * h + j] < threshold:
                                    wins = False
                                    break
                        if any_rival and wins:
                            for j in range(h):
                                if j != i and alive[j] and kld[(i * h + j) * n_act + a] > 0.0:
                                    alive[j] = 0
                                    n_alive -= 1
                            pruned = True
                            changed = True
                            break
                if n_alive == 1:
                    for i in range(h):
                        if alive[i]:
                            declared = i
                    break
                if pruned:
                    stage_a = _stage_action(kld, alive, kappa, h, n_act)
                    if stage_a < 0:
                        raise ValueError("no action separates the remaining hypotheses")
            else:
                top = -INFINITY
                for i in range(h):
                    d = y - means[i * n_act + a]
                    logw[i] -= 0.5 * d * d
                    if logw[i] > top:
                        top = logw[i]
                total_w = 0.0
                best_i = 0
                for i in range(h):
                    logw[i] -= top
                    total_w += exp(logw[i])
                for i in range(h):
                    if logw[i] == 0.0:
                        best_i = i
                        break
                max_post = 1.0 / total_w
                if max_post > stop_level:
                    declared = best_i
                    break
    finally:
        free(logw)
        free(s)
        free(alive)

    return (declared, total, steps, [int(v) for v in n_tot], [int(v) for v in n_eff], declared < 0)

"""Pure-Python trial loop; the reference twin of ``_kernel.pyx``.

Both implementations must perform the same floating-point operations in the
same order and consume the same draws, so that a trial produces bit-identical
records whichever backend runs it. Change them together.
"""
import math

BUFFER_SIZE = 256
U_FLOOR = 2.0 ** -53

CHERNOFF, NJ1, PHIDELTA = 0, 1, 2
EXPONENTIAL, ERLANG, HYPEREXPONENTIAL, PARETO, LOGLOGISTIC = 0, 1, 2, 3, 4


class DrawBuffer:
    """Uniform and standard-normal draws pulled from a numpy Generator in blocks."""

    def __init__(self, gen):
        self._gen = gen
        self._u = gen.random(BUFFER_SIZE).tolist()
        self._ui = 0
        self._z = gen.standard_normal(BUFFER_SIZE).tolist()
        self._zi = 0

    def random(self):
        if self._ui == BUFFER_SIZE:
            self._u = self._gen.random(BUFFER_SIZE).tolist()
            self._ui = 0
        u = self._u[self._ui]
        self._ui += 1
        return u

    def normal(self):
        if self._zi == BUFFER_SIZE:
            self._z = self._gen.standard_normal(BUFFER_SIZE).tolist()
            self._zi = 0
        z = self._z[self._zi]
        self._zi += 1
        return z


def _pos_uniform(buf):
    u = buf.random()
    return u if u > 0.0 else U_FLOOR


def draw_cost(code, p0, p1, p2, buf):
    if code == EXPONENTIAL:
        return -math.log1p(-_pos_uniform(buf)) / p0
    if code == ERLANG:
        acc = 0.0
        for _ in range(int(p0)):
            acc += -math.log1p(-_pos_uniform(buf))
        return acc / p1
    if code == HYPEREXPONENTIAL:
        rate = p1 if buf.random() < p0 else p2
        return -math.log1p(-_pos_uniform(buf)) / rate
    if code == PARETO:
        return p0 * math.exp(-math.log1p(-_pos_uniform(buf)) / p1)
    if code == LOGLOGISTIC:
        u = _pos_uniform(buf)
        return p0 * math.exp((math.log(u) - math.log1p(-u)) / p1)
    raise ValueError(f"unknown cost family code {code}")


def _pick(weights, row, n_act, u):
    cum = 0.0
    last = 0
    base = row * n_act
    for a in range(n_act):
        w = weights[base + a]
        if w > 0.0:
            last = a
        cum += w
        if u < cum:
            return a
    return last


def _stage_action(kld, alive, kappa, h, n_act):
    best_a = -1
    best = -math.inf
    for a in range(n_act):
        worst = math.inf
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
        if worst < math.inf and worst > best:
            best = worst
            best_a = a
    return best_a


def run_trial(kind, h, n_act, means, kld, weights, codes, params, deadlines, kappa,
              delta, rho, threshold, max_steps, true_h, ex_ante, buf):
    """Simulate one trial.

    Flat row-major lists: ``means[i*A + a]``, ``kld[(i*H + j)*A + a]``,
    ``weights[r*A + a]`` (rows 0..H-1 Chernoff, row H exploration),
    ``params[a*3 + k]``.

    Returns ``(declared, total_cost, steps, n_act, n_eff, censored)``;
    ``declared`` is -1 for a censored trial.
    """
    n_tot = [0] * n_act
    n_eff = [0] * n_act
    total = 0.0
    steps = 0
    declared = -1
    stop_level = 1.0 - delta

    logw = [0.0] * h
    best_i = 0
    max_post = 1.0 / h

    alive = [True] * h
    n_alive = h
    s = [0.0] * (h * h)
    stage_a = _stage_action(kld, alive, kappa, h, n_act) if kind == PHIDELTA else -1
    if kind == PHIDELTA and stage_a < 0:
        raise ValueError("no action separates any pair of hypotheses")

    while steps < max_steps:
        if kind == PHIDELTA:
            a = stage_a
        elif kind == NJ1 and max_post <= rho:
            a = _pick(weights, h, n_act, buf.random())
        else:
            a = _pick(weights, best_i, n_act, buf.random())

        c = draw_cost(codes[a], params[3 * a], params[3 * a + 1], params[3 * a + 2], buf)
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
                                alive[j] = False
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
            top = -math.inf
            for i in range(h):
                d = y - means[i * n_act + a]
                logw[i] -= 0.5 * d * d
                if logw[i] > top:
                    top = logw[i]
            total_w = 0.0
            best_i = 0
            for i in range(h):
                logw[i] -= top
                total_w += math.exp(logw[i])
            for i in range(h):
                if logw[i] == 0.0:
                    best_i = i
                    break
            max_post = 1.0 / total_w
            if max_post > stop_level:
                declared = best_i
                break

    return declared, total, steps, n_tot, n_eff, declared < 0

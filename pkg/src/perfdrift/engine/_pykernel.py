"""Pure-Python stream engine.

Reference implementation of the hot loops; the Cython module `_kernel`
mirrors this code operation-for-operation (same RNG draw order, same float
arithmetic) so the two engines produce bit-identical streams. Keep any change
here in lockstep with `_kernel.pyx`.

All randomness is pulled one double at a time from a ``numpy.random.Generator``
(``gen.random()`` is exactly the bit generator's ``next_double``). Gaussians
use the inverse normal CDF on a uniform draw so both engines share one code
path.

Selection state is kept per class: a Fenwick tree over raw weights plus a
lazy scale multiplier (used by the zero-spread transfer path). In ``transfer``
feedback mode each event moves mass within the emitting class (kernel-weighted
toward or away from the instance), conserving class totals; in ``selected``
mode the raw +/-strength update applies to the emitting centroid, class totals
float freely, and a fully drained population is reseeded.
"""

from __future__ import annotations

import math

import numpy as np

PREDICTORS = (1, 0, 0, 1)  # checkerboard label table, indexed by f_id + 2*t_id

# loop kinds
LOOP_NONE = 0
LOOP_FULFILLING = 1
LOOP_DEFEATING = 2

# drift kinds
DRIFT_NONE = 0
DRIFT_SUDDEN = 1
DRIFT_INCREMENTAL = 2

# deployed-model kinds
MODEL_NONE = 0
MODEL_RANDOM = 1
MODEL_THRESHOLD = 2

# weight-reset behaviour when every centroid weight reaches zero (plain mode)
RESET_ERROR = 0
RESET_UNIFORM = 1
RESET_CONSTANT = 2

# feedback application
FEEDBACK_SELECTED = 0  # only the emitting centroid moves (class totals float)
FEEDBACK_TRANSFER = 1  # within-class mass transfer around x (class totals conserved)

# lazy multiplier bounds triggering a materialisation pass; kept tight so
# accumulated absolute error in the raw totals is never amplified much
MULT_LO = 1e-6
MULT_HI = 1e6


class DegenerateWeightsError(RuntimeError):
    """Raised when all centroid weights are zero and resets are disabled."""


def inv_norm_cdf(p: float) -> float:
    """Inverse standard normal CDF (Wichura's AS 241, double precision)."""
    q = p - 0.5
    if abs(q) <= 0.425:
        r = 0.180625 - q * q
        num = (((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r
                    + 6.7265770927008700853e4) * r + 4.5921953931549871457e4) * r
                  + 1.3731693765509461125e4) * r + 1.9715909503065514427e3) * r
                + 1.3314166789178437745e2) * r + 3.3871328727963666080e0)
        den = (((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r
                    + 3.9307895800092710610e4) * r + 2.1213794301586595867e4) * r
                  + 5.3941960214247511077e3) * r + 6.8718700749205790830e2) * r
                + 4.2313330701600911252e1) * r + 1.0)
        return q * num / den
    r = p if q < 0.0 else 1.0 - p
    if r <= 0.0:
        return -math.inf if q < 0.0 else math.inf
    r = math.sqrt(-math.log(r))
    if r <= 5.0:
        r = r - 1.6
        num = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r
                    + 2.41780725177450611770e-1) * r + 1.27045825245236838258e0) * r
                  + 3.64784832476320460504e0) * r + 5.76949722146069140550e0) * r
                + 4.63033784615654529590e0) * r + 1.42343711074968357734e0)
        den = (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r
                    + 1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r
                  + 6.89767334985100004550e-1) * r + 1.67638483018380384940e0) * r
                + 2.05319162663775882187e0) * r + 1.0)
    else:
        r = r - 5.0
        num = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r
                    + 1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r
                  + 2.96560571828504891230e-1) * r + 1.78482653991729133580e0) * r
                + 5.46378491116411436990e0) * r + 6.65790464350110377720e0)
        den = (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r
                    + 1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r
                  + 1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r
                + 5.99832206555887937690e-1) * r + 1.0)
    val = num / den
    return -val if q < 0.0 else val


def band_of(x: float, f: float) -> int:
    """Euclidean-mod band index in {0, 1} for feature value ``x`` and split ``f``."""
    return int(math.floor(x / f)) % 2


class _ClassPool:
    """Roulette state for one class: members, raw weights, Fenwick tree, scale."""

    __slots__ = ("members", "n", "raw", "tree", "mult", "raw_total", "n_positive", "bit_top")

    def __init__(self, members: list[int], weights):
        self.members = members
        self.n = len(members)
        self.raw = [float(weights[i]) for i in members]
        self.mult = 1.0
        self.bit_top = 1 << (self.n.bit_length() - 1) if self.n else 0
        self.rebuild()

    def rebuild(self):
        n = self.n
        tree = [0.0] * (n + 1)
        total = 0.0
        npos = 0
        for i in range(1, n + 1):
            w = self.raw[i - 1]
            tree[i] += w
            j = i + (i & -i)
            if j <= n:
                tree[j] += tree[i]
            total += w
            if w > 0.0:
                npos += 1
        self.tree = tree
        self.raw_total = total
        self.n_positive = npos

    def materialize(self):
        m = self.mult
        for i in range(self.n):
            self.raw[i] = self.raw[i] * m
        self.mult = 1.0
        self.rebuild()

    def add(self, rank: int, draw: float):
        w_old = self.raw[rank]
        w_new = w_old + draw
        self.raw[rank] = w_new
        self.raw_total += draw
        j = rank + 1
        tree = self.tree
        n = self.n
        while j <= n:
            tree[j] += draw
            j += j & -j
        if w_old > 0.0 and w_new <= 0.0:
            self.n_positive -= 1
        elif w_old <= 0.0 and w_new > 0.0:
            self.n_positive += 1

    def true_total(self) -> float:
        return self.mult * self.raw_total

    def zero(self, rank: int):
        w_old = self.raw[rank]
        self.add(rank, -w_old)
        self.raw[rank] = 0.0

    def select(self, target_raw: float) -> int:
        """0-based member rank of the first prefix sum above ``target_raw``."""
        rank = 0
        rem = target_raw
        bm = self.bit_top
        tree = self.tree
        n = self.n
        while bm:
            nxt = rank + bm
            if nxt <= n and tree[nxt] <= rem:
                rem -= tree[nxt]
                rank = nxt
            bm >>= 1
        if rank >= n:
            rank = n - 1
        while rank > 0 and self.raw[rank] <= 0.0:
            rank -= 1
        return rank


def _transfer_update(pool, pos, spr, x_row, dims, strength, fulfilling):
    """Move up to ``strength`` of class mass relative to the instance at x.

    Self-fulfilling: mass flows from anti-kernel donors (far from x) to
    kernel receivers (near x). Self-defeating: the reverse. The class total
    is conserved by construction and no member is driven exactly to zero,
    so the within-class distribution can always flow back. Members with zero
    spread only match at distance zero.
    """
    n = pool.n
    members = pool.members
    raw = pool.raw
    phi = [0.0] * n
    for r in range(n):
        i = members[r]
        prow = pos[i]
        d2 = 0.0
        for d in range(dims):
            dd = x_row[d] - prow[d]
            d2 += dd * dd
        s_i = spr[i]
        if s_i > 0.0:
            phi[r] = math.exp(-0.5 * d2 / (s_i * s_i))
        else:
            phi[r] = 1.0 if d2 == 0.0 else 0.0
    donors = [0.0] * n
    receivers = [0.0] * n
    donor_sum = 0.0
    recv_sum = 0.0
    for r in range(n):
        if fulfilling:
            a = raw[r] * (1.0 - phi[r])
            b = phi[r]
        else:
            a = raw[r] * phi[r]
            b = 1.0 - phi[r]
        donors[r] = a
        receivers[r] = b
        donor_sum += a
        recv_sum += b
    if donor_sum <= 0.0 or recv_sum <= 0.0:
        return
    delta = strength if strength < donor_sum else donor_sum
    for r in range(n):
        w = raw[r] + delta * (receivers[r] / recv_sum) - delta * (donors[r] / donor_sum)
        if w < 0.0:  # float guard; takes are bounded by the member's mass
            w = 0.0
        raw[r] = w
    pool.rebuild()


def run_stream(
    gen,
    positions,
    labels,
    weights,
    velocities,
    spreads,
    lows,
    highs,
    loop_kind,
    targets,
    strengths,
    drift_kind,
    event_steps,
    velocity_scale,
    cb_f,
    cb_tau,
    cb_feature,
    model_kind,
    tc_feature,
    tc_threshold,
    tc_positive,
    mix_mode,
    mix_a,
    mix_b,
    reset_mode,
    reset_value,
    feedback_mode,
    horizon,
    t0,
    n_steps,
    out_features,
    out_y,
    out_yhat,
    out_src,
    predictor=None,
    predictor_source=1,
):
    """Advance the stream ``n_steps`` steps, writing rows t0..t0+n_steps-1.

    Mutates ``positions``, ``weights`` and ``velocities`` in place. Returns the
    number of full weight resets performed. ``predictor`` (a callable fed
    ``(features, t)``) replaces the built-in routing when given; that path has
    no Cython counterpart.
    """
    n_cent = len(weights)
    dims = positions.shape[1]
    nd = gen.random  # one double per call

    pos = [[float(positions[c, d]) for d in range(dims)] for c in range(n_cent)]
    vel = [[float(velocities[c, d]) for d in range(dims)] for c in range(n_cent)]
    lab = [int(v) for v in labels]
    spr = [float(v) for v in spreads]
    lo = [float(v) for v in lows]
    hi = [float(v) for v in highs]
    loops = [int(v) for v in loop_kind]
    tgt = [int(v) for v in targets]
    sig = [float(v) for v in strengths]
    events = [int(v) for v in event_steps]

    pools = [
        _ClassPool([i for i in range(n_cent) if lab[i] == 0], weights),
        _ClassPool([i for i in range(n_cent) if lab[i] == 1], weights),
    ]

    next_event = 0
    while next_event < len(events) and events[next_event] < t0:
        next_event += 1
    resets = 0
    x_row = [0.0] * dims

    for t in range(t0, t0 + n_steps):
        # scheduled intrinsic-drift events
        if drift_kind != DRIFT_NONE:
            while next_event < len(events) and events[next_event] == t:
                if drift_kind == DRIFT_SUDDEN:
                    for c in range(n_cent):
                        row = pos[c]
                        for d in range(dims):
                            row[d] = lo[d] + (hi[d] - lo[d]) * nd()
                else:
                    for c in range(n_cent):
                        row = vel[c]
                        for d in range(dims):
                            row[d] = -1.0 + 2.0 * nd()
                next_event += 1

        # class pick over effective totals
        g0_eff = pools[0].true_total() if pools[0].n_positive > 0 else 0.0
        g1_eff = pools[1].true_total() if pools[1].n_positive > 0 else 0.0
        total = g0_eff + g1_eff
        if total <= 0.0:
            if reset_mode == RESET_ERROR:
                raise DegenerateWeightsError("all centroid weights are zero")
            for k in (0, 1):
                pool = pools[k]
                for r in range(pool.n):
                    pool.raw[r] = nd() if reset_mode == RESET_UNIFORM else reset_value
                pool.mult = 1.0
                pool.rebuild()
            resets += 1
            g0_eff = pools[0].true_total() if pools[0].n_positive > 0 else 0.0
            g1_eff = pools[1].true_total() if pools[1].n_positive > 0 else 0.0
            total = g0_eff + g1_eff

        u = nd() * total
        if u < g0_eff and pools[0].n_positive > 0:
            cls = 0
            u_cls = u
        else:
            cls = 1
            u_cls = u - g0_eff
        if pools[cls].n_positive == 0:
            cls = 1 - cls
            u_cls = 0.0
        pool = pools[cls]
        rank = pool.select(u_cls / pool.mult)
        sel = pool.members[rank]

        # sample the instance and clamp into the schema box
        row = pos[sel]
        s_dev = spr[sel]
        for d in range(dims):
            x = row[d]
            if s_dev > 0.0:
                x += s_dev * inv_norm_cdf(nd())
            if x < lo[d]:
                x = lo[d]
            elif x > hi[d]:
                x = hi[d]
            x_row[d] = x
            out_features[t, d] = x

        # route and predict
        if predictor is not None:
            yhat = int(predictor(out_features[t], t))
            src = predictor_source
        else:
            to_model = False
            if model_kind != MODEL_NONE:
                pm = mix_a if mix_mode == 0 else mix_a + (mix_b - mix_a) * (t / horizon)
                to_model = nd() < pm
            if to_model:
                if model_kind == MODEL_RANDOM:
                    yhat = 1 if nd() < 0.5 else 0
                else:
                    yhat = tc_positive if x_row[tc_feature] > tc_threshold else 1 - tc_positive
                src = 1
            else:
                if cb_feature >= 0:
                    f_id = int(math.floor(x_row[cb_feature] / cb_f)) % 2
                else:
                    acc = 0
                    for d in range(dims):
                        acc += int(math.floor(x_row[d] / cb_f))
                    f_id = acc % 2
                t_id = (t // cb_tau) & 1
                yhat = PREDICTORS[f_id + 2 * t_id]
                src = 0

        # feedback on the emitting class
        lk = loops[cls]
        if lk != LOOP_NONE and yhat == tgt[cls]:
            s = sig[cls]
            if s != 0.0:
                transfer = feedback_mode == FEEDBACK_TRANSFER
                if transfer and spr[sel] > 0.0:
                    _transfer_update(pool, pos, spr, x_row, dims, s, lk == LOOP_FULFILLING)
                else:
                    w_true = pool.raw[rank] * pool.mult
                    if lk == LOOP_FULFILLING:
                        delta = s
                    else:
                        delta = -(s if w_true > s else w_true)
                    if delta != 0.0:
                        if delta == -w_true:  # full drain
                            if transfer and pool.n_positive <= 1:
                                delta = 0.0
                            else:
                                pool.zero(rank)
                        else:
                            pool.add(rank, delta / pool.mult)
                    if delta != 0.0:
                        if transfer:
                            # zero-spread pool: rescale so the class total is
                            # restored (mass effectively moves within the class)
                            t_after = pool.true_total()
                            pool.mult = pool.mult * ((t_after - delta) / t_after)
                            if pool.mult < MULT_LO or pool.mult > MULT_HI:
                                pool.materialize()
                        elif pool.true_total() <= 0.0 and pool.n_positive > 0:
                            pool.rebuild()

        # incremental motion with reflecting boundaries
        if drift_kind == DRIFT_INCREMENTAL:
            for c in range(n_cent):
                prow = pos[c]
                vrow = vel[c]
                for d in range(dims):
                    p = prow[d] + vrow[d] * velocity_scale
                    if p > hi[d]:
                        p = 2.0 * hi[d] - p
                        vrow[d] = -vrow[d]
                    elif p < lo[d]:
                        p = 2.0 * lo[d] - p
                        vrow[d] = -vrow[d]
                    prow[d] = p

        out_y[t] = lab[sel]
        out_yhat[t] = yhat
        out_src[t] = src

    # publish mutated state back to the caller's arrays
    for k in (0, 1):
        pool = pools[k]
        for r in range(pool.n):
            weights[pool.members[r]] = pool.raw[r] * pool.mult
    for c in range(n_cent):
        for d in range(dims):
            positions[c, d] = pos[c][d]
            velocities[c, d] = vel[c][d]
    return resets


def adwin_run(values, delta=0.002, max_buckets=5, clock=32, min_window=5, grace=10):
    """Feed ``values`` through ADWIN; returns the array of detection steps.

    Thin driver over the detector in :mod:`perfdrift.baselines`; the Cython
    engine reimplements the same arithmetic for speed.
    """
    from ..baselines import AdwinDetector

    det = AdwinDetector(delta=delta, max_buckets=max_buckets, clock=clock,
                        min_window=min_window, grace=grace)
    hits = [t for t, v in enumerate(np.asarray(values, dtype=np.float64)) if det.update(float(v))]
    return np.asarray(hits, dtype=np.int64)


def ddm_run(errors, warm_up=30, warning_scale=2.0, drift_scale=3.0):
    """Feed a 0/1 error stream through DDM; returns the array of drift steps."""
    from ..baselines import DdmDetector, DdmLevel

    det = DdmDetector(warm_up=warm_up, warning_scale=warning_scale, drift_scale=drift_scale)
    hits = []
    for t, e in enumerate(np.asarray(errors, dtype=np.uint8)):
        if det.update(correct=not bool(e)) is DdmLevel.DRIFT:
            hits.append(t)
    return np.asarray(hits, dtype=np.int64)

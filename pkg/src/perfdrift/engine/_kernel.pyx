# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled stream engine.

Operation-for-operation transcription of ``_pykernel``; both engines must
produce bit-identical output (the build disables FP contraction for that
reason). Change the two files together.
"""

import numpy as np

cimport numpy as cnp
from cpython.pycapsule cimport PyCapsule_GetPointer
from libc.math cimport exp, fabs, floor, fmod, log, sqrt
from numpy.random cimport bitgen_t

cnp.import_array()

cdef double INF = float("inf")
cdef double MULT_LO = 1e-6
cdef double MULT_HI = 1e6

# enum values shared with _pykernel
cdef enum:
    LOOP_NONE = 0
    LOOP_FULFILLING = 1
    LOOP_DEFEATING = 2
    DRIFT_NONE = 0
    DRIFT_SUDDEN = 1
    DRIFT_INCREMENTAL = 2
    MODEL_NONE = 0
    MODEL_RANDOM = 1
    MODEL_THRESHOLD = 2
    RESET_ERROR = 0
    RESET_UNIFORM = 1
    RESET_CONSTANT = 2
    FEEDBACK_SELECTED = 0
    FEEDBACK_TRANSFER = 1
    ADWIN_MAX_ROWS = 64


class DegenerateWeightsError(RuntimeError):
    pass


cdef inline double _nd(bitgen_t *rng) noexcept nogil:
    return rng.next_double(rng.state)


cdef double _inv_norm_cdf(double p) noexcept nogil:
    # Wichura's AS 241 (PPND16); mirrors _pykernel.inv_norm_cdf exactly.
    cdef double q = p - 0.5
    cdef double r, num, den, val
    if fabs(q) <= 0.425:
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
    if q < 0.0:
        r = p
    else:
        r = 1.0 - p
    if r <= 0.0:
        return -INF if q < 0.0 else INF
    r = sqrt(-log(r))
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


def inv_norm_cdf(double p):
    """Python-visible wrapper used by the cross-engine tests."""
    return _inv_norm_cdf(p)


cdef inline int _band(double x, double f) noexcept nogil:
    cdef double k = floor(x / f)
    cdef double m = fmod(k, 2.0)
    if m < 0.0:
        m += 2.0
    return <int> m


cdef struct ClassPool:
    long long *members       # global centroid index per rank
    double *raw              # raw weights (true weight = raw * mult)
    double *tree             # Fenwick tree over raw, 1-based
    Py_ssize_t n
    Py_ssize_t bit_top
    double mult
    double raw_total         # live sum of raw weights
    long long n_positive


cdef void _pool_rebuild(ClassPool *pool) noexcept nogil:
    cdef Py_ssize_t i, j, n = pool.n
    cdef double w, total = 0.0
    cdef long long npos = 0
    for i in range(n + 1):
        pool.tree[i] = 0.0
    for i in range(1, n + 1):
        w = pool.raw[i - 1]
        pool.tree[i] += w
        j = i + (i & (-i))
        if j <= n:
            pool.tree[j] += pool.tree[i]
        total += w
        if w > 0.0:
            npos += 1
    pool.raw_total = total
    pool.n_positive = npos


cdef void _pool_materialize(ClassPool *pool) noexcept nogil:
    cdef Py_ssize_t i
    cdef double m = pool.mult
    for i in range(pool.n):
        pool.raw[i] = pool.raw[i] * m
    pool.mult = 1.0
    _pool_rebuild(pool)


cdef void _pool_add(ClassPool *pool, Py_ssize_t rank, double draw) noexcept nogil:
    cdef double w_old = pool.raw[rank]
    cdef double w_new = w_old + draw
    cdef Py_ssize_t j = rank + 1
    pool.raw[rank] = w_new
    pool.raw_total += draw
    while j <= pool.n:
        pool.tree[j] += draw
        j += j & (-j)
    if w_old > 0.0 and w_new <= 0.0:
        pool.n_positive -= 1
    elif w_old <= 0.0 and w_new > 0.0:
        pool.n_positive += 1


cdef void _pool_zero(ClassPool *pool, Py_ssize_t rank) noexcept nogil:
    cdef double w_old = pool.raw[rank]
    _pool_add(pool, rank, -w_old)
    pool.raw[rank] = 0.0


cdef Py_ssize_t _pool_select(ClassPool *pool, double target_raw) noexcept nogil:
    cdef Py_ssize_t rank = 0, nxt
    cdef double rem = target_raw
    cdef Py_ssize_t bm = pool.bit_top
    while bm:
        nxt = rank + bm
        if nxt <= pool.n and pool.tree[nxt] <= rem:
            rem -= pool.tree[nxt]
            rank = nxt
        bm >>= 1
    if rank >= pool.n:
        rank = pool.n - 1
    while rank > 0 and pool.raw[rank] <= 0.0:
        rank -= 1
    return rank


cdef void _transfer_update(ClassPool *pool, double[:, ::1] positions,
                           double[::1] spreads, double *x_row,
                           Py_ssize_t dims, double strength, bint fulfilling,
                           double *phi, double *donors, double *receivers) noexcept nogil:
    # mirrors _pykernel._transfer_update
    cdef Py_ssize_t n = pool.n
    cdef Py_ssize_t r, d, i
    cdef double d2, dd, s_i, a, b, w
    cdef double donor_sum = 0.0, recv_sum = 0.0, delta
    for r in range(n):
        i = pool.members[r]
        d2 = 0.0
        for d in range(dims):
            dd = x_row[d] - positions[i, d]
            d2 += dd * dd
        s_i = spreads[i]
        if s_i > 0.0:
            phi[r] = exp(-0.5 * d2 / (s_i * s_i))
        else:
            phi[r] = 1.0 if d2 == 0.0 else 0.0
    for r in range(n):
        if fulfilling:
            a = pool.raw[r] * (1.0 - phi[r])
            b = phi[r]
        else:
            a = pool.raw[r] * phi[r]
            b = 1.0 - phi[r]
        donors[r] = a
        receivers[r] = b
        donor_sum += a
        recv_sum += b
    if donor_sum <= 0.0 or recv_sum <= 0.0:
        return
    delta = strength if strength < donor_sum else donor_sum
    for r in range(n):
        w = pool.raw[r] + delta * (receivers[r] / recv_sum) - delta * (donors[r] / donor_sum)
        if w < 0.0:
            w = 0.0
        pool.raw[r] = w
    _pool_rebuild(pool)


cdef Py_ssize_t _bit_floor(Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t b = 0
    if n >= 1:
        b = 1
        while (b << 1) <= n:
            b <<= 1
    return b


def run_stream(
    gen,
    double[:, ::1] positions,
    signed char[::1] labels,
    double[::1] weights,
    double[:, ::1] velocities,
    double[::1] spreads,
    double[::1] lows,
    double[::1] highs,
    signed char[::1] loop_kind,
    signed char[::1] targets,
    double[::1] strengths,
    int drift_kind,
    long long[::1] event_steps,
    double velocity_scale,
    double cb_f,
    long long cb_tau,
    int cb_feature,
    int model_kind,
    int tc_feature,
    double tc_threshold,
    int tc_positive,
    int mix_mode,
    double mix_a,
    double mix_b,
    int reset_mode,
    double reset_value,
    int feedback_mode,
    long long horizon,
    long long t0,
    long long n_steps,
    double[:, ::1] out_features,
    signed char[::1] out_y,
    signed char[::1] out_yhat,
    signed char[::1] out_src,
):
    cdef bitgen_t *rng = <bitgen_t *> PyCapsule_GetPointer(
        gen.bit_generator.capsule, "BitGenerator")

    cdef Py_ssize_t n_cent = weights.shape[0]
    cdef Py_ssize_t dims = positions.shape[1]
    cdef Py_ssize_t n_events = event_steps.shape[0]

    # per-class pools (rank order = ascending global index)
    labels_np = np.asarray(labels)
    weights_np = np.asarray(weights)
    members_list = [np.flatnonzero(labels_np == k).astype(np.int64) for k in (0, 1)]
    raw_list = [np.ascontiguousarray(weights_np[members_list[k]], dtype=np.float64)
                for k in (0, 1)]
    tree_list = [np.zeros(len(members_list[k]) + 1, dtype=np.float64) for k in (0, 1)]
    cdef long long[::1] members0 = members_list[0]
    cdef long long[::1] members1 = members_list[1]
    cdef double[::1] raw0 = raw_list[0]
    cdef double[::1] raw1 = raw_list[1]
    cdef double[::1] tree0 = tree_list[0]
    cdef double[::1] tree1 = tree_list[1]

    cdef ClassPool pools[2]
    pools[0].n = members0.shape[0]
    pools[1].n = members1.shape[0]
    pools[0].members = &members0[0] if pools[0].n else NULL
    pools[1].members = &members1[0] if pools[1].n else NULL
    pools[0].raw = &raw0[0] if pools[0].n else NULL
    pools[1].raw = &raw1[0] if pools[1].n else NULL
    pools[0].tree = &tree0[0]
    pools[1].tree = &tree1[0]
    cdef int k
    for k in range(2):
        pools[k].mult = 1.0
        pools[k].bit_top = _bit_floor(pools[k].n)
        _pool_rebuild(&pools[k])

    x_buf = np.zeros(dims, dtype=np.float64)
    scratch = np.zeros((3, max(pools[0].n, pools[1].n) + 1), dtype=np.float64)
    cdef double[::1] x_row_mv = x_buf
    cdef double[:, ::1] scratch_mv = scratch
    cdef double *x_row = &x_row_mv[0]
    cdef double *phi = &scratch_mv[0, 0]
    cdef double *donors = &scratch_mv[1, 0]
    cdef double *receivers = &scratch_mv[2, 0]

    cdef Py_ssize_t next_event = 0
    while next_event < n_events and event_steps[next_event] < t0:
        next_event += 1

    cdef long long resets = 0
    cdef long long t, t_id
    cdef Py_ssize_t c, d, sel, rank, r
    cdef int yhat, src, cls, lk, f_id
    cdef long long acc_parity
    cdef double g0_eff, g1_eff, total, u, u_cls, x, s_dev, pm, s, w_true, delta, t_after, p
    cdef bint transfer
    cdef bint to_model
    cdef int[4] predictors
    predictors[0] = 1
    predictors[1] = 0
    predictors[2] = 0
    predictors[3] = 1

    for t in range(t0, t0 + n_steps):
        if drift_kind != DRIFT_NONE:
            while next_event < n_events and event_steps[next_event] == t:
                if drift_kind == DRIFT_SUDDEN:
                    for c in range(n_cent):
                        for d in range(dims):
                            positions[c, d] = lows[d] + (highs[d] - lows[d]) * _nd(rng)
                else:
                    for c in range(n_cent):
                        for d in range(dims):
                            velocities[c, d] = -1.0 + 2.0 * _nd(rng)
                next_event += 1

        g0_eff = pools[0].mult * pools[0].raw_total if pools[0].n_positive > 0 else 0.0
        g1_eff = pools[1].mult * pools[1].raw_total if pools[1].n_positive > 0 else 0.0
        total = g0_eff + g1_eff
        if total <= 0.0:
            if reset_mode == RESET_ERROR:
                raise DegenerateWeightsError("all centroid weights are zero")
            for k in range(2):
                for r in range(pools[k].n):
                    if reset_mode == RESET_UNIFORM:
                        pools[k].raw[r] = _nd(rng)
                    else:
                        pools[k].raw[r] = reset_value
                pools[k].mult = 1.0
                _pool_rebuild(&pools[k])
            resets += 1
            g0_eff = pools[0].mult * pools[0].raw_total if pools[0].n_positive > 0 else 0.0
            g1_eff = pools[1].mult * pools[1].raw_total if pools[1].n_positive > 0 else 0.0
            total = g0_eff + g1_eff

        u = _nd(rng) * total
        if u < g0_eff and pools[0].n_positive > 0:
            cls = 0
            u_cls = u
        else:
            cls = 1
            u_cls = u - g0_eff
        if pools[cls].n_positive == 0:
            cls = 1 - cls
            u_cls = 0.0
        rank = _pool_select(&pools[cls], u_cls / pools[cls].mult)
        sel = pools[cls].members[rank]

        s_dev = spreads[sel]
        for d in range(dims):
            x = positions[sel, d]
            if s_dev > 0.0:
                x += s_dev * _inv_norm_cdf(_nd(rng))
            if x < lows[d]:
                x = lows[d]
            elif x > highs[d]:
                x = highs[d]
            x_row[d] = x
            out_features[t, d] = x

        to_model = False
        if model_kind != MODEL_NONE:
            if mix_mode == 0:
                pm = mix_a
            else:
                pm = mix_a + (mix_b - mix_a) * (<double> t / <double> horizon)
            to_model = _nd(rng) < pm
        if to_model:
            if model_kind == MODEL_RANDOM:
                yhat = 1 if _nd(rng) < 0.5 else 0
            else:
                yhat = tc_positive if x_row[tc_feature] > tc_threshold else 1 - tc_positive
            src = 1
        else:
            if cb_feature >= 0:
                f_id = _band(x_row[cb_feature], cb_f)
            else:
                acc_parity = 0
                for d in range(dims):
                    acc_parity += _band(x_row[d], cb_f)
                f_id = <int> (acc_parity & 1)
            t_id = (t / cb_tau) & 1
            yhat = predictors[f_id + 2 * t_id]
            src = 0

        lk = loop_kind[cls]
        if lk != LOOP_NONE and yhat == targets[cls]:
            s = strengths[cls]
            if s != 0.0:
                transfer = feedback_mode == FEEDBACK_TRANSFER
                if transfer and spreads[sel] > 0.0:
                    _transfer_update(&pools[cls], positions, spreads, x_row, dims, s,
                                     lk == LOOP_FULFILLING, phi, donors, receivers)
                else:
                    w_true = pools[cls].raw[rank] * pools[cls].mult
                    if lk == LOOP_FULFILLING:
                        delta = s
                    else:
                        delta = -(s if w_true > s else w_true)
                    if delta != 0.0:
                        if delta == -w_true:
                            if transfer and pools[cls].n_positive <= 1:
                                delta = 0.0
                            else:
                                _pool_zero(&pools[cls], rank)
                        else:
                            _pool_add(&pools[cls], rank, delta / pools[cls].mult)
                    if delta != 0.0:
                        if transfer:
                            # zero-spread pool: rescale so the class total is
                            # restored (mass effectively moves within the class)
                            t_after = pools[cls].mult * pools[cls].raw_total
                            pools[cls].mult = pools[cls].mult * ((t_after - delta) / t_after)
                            if pools[cls].mult < MULT_LO or pools[cls].mult > MULT_HI:
                                _pool_materialize(&pools[cls])
                        elif (pools[cls].mult * pools[cls].raw_total <= 0.0
                                and pools[cls].n_positive > 0):
                            _pool_rebuild(&pools[cls])

        if drift_kind == DRIFT_INCREMENTAL:
            for c in range(n_cent):
                for d in range(dims):
                    p = positions[c, d] + velocities[c, d] * velocity_scale
                    if p > highs[d]:
                        p = 2.0 * highs[d] - p
                        velocities[c, d] = -velocities[c, d]
                    elif p < lows[d]:
                        p = 2.0 * lows[d] - p
                        velocities[c, d] = -velocities[c, d]
                    positions[c, d] = p

        out_y[t] = labels[sel]
        out_yhat[t] = <signed char> yhat
        out_src[t] = <signed char> src

    for k in range(2):
        for r in range(pools[k].n):
            weights[pools[k].members[r]] = pools[k].raw[r] * pools[k].mult
    return int(resets)


# --- ADWIN ---------------------------------------------------------------
# Transcription of perfdrift.baselines.AdwinDetector. Bucket rows are flat
# arrays; row r summarises 2**r observations per bucket.

cdef struct AdwinState:
    double sums[ADWIN_MAX_ROWS][16]
    double variances[ADWIN_MAX_ROWS][16]
    int counts[ADWIN_MAX_ROWS]
    int n_rows
    int max_buckets
    long long width
    double total
    double variance_sum


cdef void _adwin_insert(AdwinState *st, double value) noexcept nogil:
    cdef double mean
    if st.width > 0:
        mean = st.total / st.width
        st.variance_sum += st.width * (value - mean) * (value - mean) / (st.width + 1.0)
    st.width += 1
    st.total += value
    st.sums[0][st.counts[0]] = value
    st.variances[0][st.counts[0]] = 0.0
    st.counts[0] += 1


cdef void _adwin_compress(AdwinState *st) noexcept nogil:
    cdef int r = 0, i
    cdef double n, u1, u2, merged_var
    while r < st.n_rows:
        if st.counts[r] <= st.max_buckets:
            break
        if r + 1 == st.n_rows:
            st.n_rows += 1
            st.counts[st.n_rows - 1] = 0
        n = <double> (1 << r)
        u1 = st.sums[r][0] / n
        u2 = st.sums[r][1] / n
        merged_var = (st.variances[r][0] + st.variances[r][1]
                      + n * n / (n + n) * (u1 - u2) * (u1 - u2))
        st.sums[r + 1][st.counts[r + 1]] = st.sums[r][0] + st.sums[r][1]
        st.variances[r + 1][st.counts[r + 1]] = merged_var
        st.counts[r + 1] += 1
        for i in range(st.counts[r] - 2):
            st.sums[r][i] = st.sums[r][i + 2]
            st.variances[r][i] = st.variances[r][i + 2]
        st.counts[r] -= 2
        r += 1


cdef void _adwin_drop_oldest(AdwinState *st) noexcept nogil:
    cdef int r = st.n_rows - 1, i
    while r > 0 and st.counts[r] == 0:
        r -= 1
    cdef double n = <double> (1 << r)
    cdef double u = st.sums[r][0] / n
    cdef double mu_rest
    st.width -= (<long long> 1) << r
    st.total -= st.sums[r][0]
    st.variance_sum -= st.variances[r][0]
    if st.width > 0:
        mu_rest = st.total / st.width
        st.variance_sum -= n * st.width / (n + st.width) * (u - mu_rest) * (u - mu_rest)
    if st.variance_sum < 0.0:
        st.variance_sum = 0.0
    for i in range(st.counts[r] - 1):
        st.sums[r][i] = st.sums[r][i + 1]
        st.variances[r][i] = st.variances[r][i + 1]
    st.counts[r] -= 1
    while st.n_rows > 1 and st.counts[st.n_rows - 1] == 0:
        st.n_rows -= 1


cdef bint _adwin_find_cut(AdwinState *st, double delta, int min_window) noexcept nogil:
    if st.width <= min_window * 2:
        return False
    cdef double dd = log(2.0 * log(<double> st.width) / delta)
    cdef double v = st.variance_sum / st.width
    cdef double n0 = 0.0, u0 = 0.0, n1, size, m_inv, eps
    cdef int r, k
    for r in range(st.n_rows - 1, -1, -1):
        size = <double> (1 << r)
        for k in range(st.counts[r]):
            n0 += size
            u0 += st.sums[r][k]
            n1 = st.width - n0
            if n0 >= min_window and n1 >= min_window:
                m_inv = 1.0 / (n0 - min_window + 1.0) + 1.0 / (n1 - min_window + 1.0)
                eps = sqrt(2.0 * m_inv * v * dd) + (2.0 / 3.0) * m_inv * dd
                if fabs(u0 / n0 - (st.total - u0) / n1) > eps:
                    return True
    return False


def adwin_run(double[::1] values, double delta=0.002, int max_buckets=5,
              int clock=32, int min_window=5, int grace=10):
    """Detection timesteps of ADWIN over ``values`` (matches AdwinDetector)."""
    if max_buckets + 1 > 16:
        raise ValueError("max_buckets too large for the compiled kernel")
    cdef AdwinState st
    cdef int r
    for r in range(ADWIN_MAX_ROWS):
        st.counts[r] = 0
    st.n_rows = 1
    st.max_buckets = max_buckets
    st.width = 0
    st.total = 0.0
    st.variance_sum = 0.0

    hits = []
    cdef Py_ssize_t t
    cdef long long n_seen = 0
    cdef bint detected
    for t in range(values.shape[0]):
        _adwin_insert(&st, values[t])
        _adwin_compress(&st)
        n_seen += 1
        detected = False
        if n_seen % clock == 0 and st.width > grace:
            while _adwin_find_cut(&st, delta, min_window):
                _adwin_drop_oldest(&st)
                detected = True
        if detected:
            hits.append(t)
    return np.asarray(hits, dtype=np.int64)


def ddm_run(const unsigned char[::1] errors, int warm_up=30,
            double warning_scale=2.0, double drift_scale=3.0):
    """Drift timesteps of DDM over a 0/1 error stream (matches DdmDetector)."""
    cdef long long n = 0
    cdef double p = 1.0, s = 0.0, error, ps
    cdef double p_min = INF, s_min = INF
    cdef Py_ssize_t t
    hits = []
    for t in range(errors.shape[0]):
        error = 1.0 if errors[t] else 0.0
        n += 1
        p += (error - p) / n
        s = sqrt(p * (1.0 - p) / n)
        if n < warm_up:
            continue
        ps = p + s
        if ps <= p_min + s_min:
            p_min = p
            s_min = s
        if ps > p_min + drift_scale * s_min:
            n = 0
            p = 1.0
            s = 0.0
            p_min = INF
            s_min = INF
            hits.append(t)
    return np.asarray(hits, dtype=np.int64)

# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled forest kernel.

Bit-identical twin of ``_forest_py``: same RNG stream, same scan orders,
same floating-point operation sequence. Keep the twins in sync: any
change to one must be mirrored in the other.
"""

import numpy as np

from libc.stdlib cimport free, malloc
from libc.math cimport INFINITY, ceil, floor

cdef extern from *:
    """
    #include <stdint.h>
    #include <stdlib.h>
    static inline uint64_t sh_next(uint64_t *s) {
        uint64_t z = (*s += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }
    static inline uint64_t sh_bounded(uint64_t *s, uint64_t n) {
        return (uint64_t)(((__uint128_t)sh_next(s) * (__uint128_t)n) >> 64);
    }
    typedef struct { double val; int64_t pos; } sh_pair;
    static int sh_pair_cmp(const void *a, const void *b) {
        const sh_pair *pa = (const sh_pair *)a;
        const sh_pair *pb = (const sh_pair *)b;
        if (pa->val < pb->val) return -1;
        if (pa->val > pb->val) return 1;
        if (pa->pos < pb->pos) return -1;
        if (pa->pos > pb->pos) return 1;
        return 0;
    }
    static void sh_sort_pairs(sh_pair *arr, int64_t n) {
        qsort(arr, (size_t)n, sizeof(sh_pair), sh_pair_cmp);
    }
    static int sh_int64_cmp(const void *a, const void *b) {
        int64_t pa = *(const int64_t *)a, pb = *(const int64_t *)b;
        return (pa > pb) - (pa < pb);
    }
    static void sh_sort_int64(int64_t *arr, int64_t n) {
        qsort(arr, (size_t)n, sizeof(int64_t), sh_int64_cmp);
    }
    static int sh_double_cmp(const void *a, const void *b) {
        double pa = *(const double *)a, pb = *(const double *)b;
        return (pa > pb) - (pa < pb);
    }
    static void sh_sort_double(double *arr, int64_t n) {
        qsort(arr, (size_t)n, sizeof(double), sh_double_cmp);
    }
    """
    ctypedef unsigned long long uint64_t
    ctypedef long long int64_t
    uint64_t sh_next(uint64_t *s) nogil
    uint64_t sh_bounded(uint64_t *s, uint64_t n) nogil
    ctypedef struct sh_pair:
        double val
        int64_t pos
    void sh_sort_pairs(sh_pair *arr, int64_t n) nogil
    void sh_sort_int64(int64_t *arr, int64_t n) nogil
    void sh_sort_double(double *arr, int64_t n) nogil


cdef inline void partial_shuffle(int64_t *arr, int64_t count, int64_t take, uint64_t *state) nogil:
    cdef int64_t i, j, tmp
    for i in range(count):
        arr[i] = i
    for i in range(take):
        j = i + <int64_t>sh_bounded(state, <uint64_t>(count - i))
        tmp = arr[i]
        arr[i] = arr[j]
        arr[j] = tmp


cdef struct TreeBuffers:
    int64_t *rows          # structure rows, partitioned in place
    int64_t *rows_est      # estimation rows, partitioned in place
    int64_t *tmp           # partition scratch
    int64_t *stack
    int64_t *seg_start
    int64_t *seg_end
    int64_t *est_start
    int64_t *est_end
    int64_t *parent
    int64_t *feat_buf      # mtry candidate scratch
    sh_pair *pairs
    double *raw
    double *est_vals
    int64_t *counts


cdef int64_t grow_tree(
    const double[:, ::1] x,
    const double[::1] y,
    int64_t n_struct,
    int64_t n_est,
    uint64_t *state,
    int64_t mtry,
    int64_t min_node_size,
    TreeBuffers *buf,
    int[::1] feature,
    double[::1] threshold,
    int[::1] children_left,
    int[::1] children_right,
    double[::1] value,
    int64_t base,
) nogil:
    """Grow + estimate one tree into the flat arrays at offset ``base``.

    ``buf.rows`` / ``buf.rows_est`` must already hold the (sorted) row ids.
    Returns the number of nodes written.
    """
    cdef int64_t q = x.shape[1]
    cdef int64_t n_nodes = 1
    cdef int64_t stack_top
    cdef int64_t nid, start, end, size, i, t, f, c
    cdef int64_t best_feature, lid, rid, left_count, k, fbest_t
    cdef double best_threshold, best_score, fbest_score, fbest_thr
    cdef double total, ls_run, rs, score, vmin, vmax, yy, thr

    feature[base] = -1
    buf.parent[0] = -1
    buf.seg_start[0] = 0
    buf.seg_end[0] = n_struct
    buf.stack[0] = 0
    stack_top = 1

    while stack_top > 0:
        stack_top -= 1
        nid = buf.stack[stack_top]
        start = buf.seg_start[nid]
        end = buf.seg_end[nid]
        size = end - start
        if size < 2 * min_node_size:
            continue
        vmin = y[buf.rows[start]]
        vmax = vmin
        for i in range(start + 1, end):
            yy = y[buf.rows[i]]
            if yy < vmin:
                vmin = yy
            if yy > vmax:
                vmax = yy
        if vmin == vmax:
            continue
        partial_shuffle(buf.feat_buf, q, mtry, state)
        best_score = -INFINITY
        best_feature = -1
        best_threshold = 0.0
        for c in range(mtry):
            f = buf.feat_buf[c]
            for i in range(size):
                buf.pairs[i].val = x[buf.rows[start + i], f]
                buf.pairs[i].pos = i
            sh_sort_pairs(buf.pairs, size)
            total = 0.0
            for i in range(size):
                total = total + y[buf.rows[start + buf.pairs[i].pos]]
            ls_run = 0.0
            fbest_score = best_score
            fbest_t = -1
            fbest_thr = 0.0
            for t in range(1, size):
                ls_run = ls_run + y[buf.rows[start + buf.pairs[t - 1].pos]]
                if t < min_node_size or size - t < min_node_size:
                    continue
                if buf.pairs[t - 1].val == buf.pairs[t].val:
                    continue
                rs = total - ls_run
                score = ls_run * ls_run / (<double>t) + rs * rs / (<double>(size - t))
                if score > fbest_score:
                    fbest_score = score
                    fbest_t = t
                    fbest_thr = (buf.pairs[t - 1].val + buf.pairs[t].val) * 0.5
            if fbest_t >= 0:
                best_score = fbest_score
                best_feature = f
                best_threshold = fbest_thr
        if best_feature < 0:
            continue
        # stable partition of the segment by the chosen split
        thr = best_threshold
        k = 0
        for i in range(start, end):
            if x[buf.rows[i], best_feature] <= thr:
                buf.tmp[k] = buf.rows[i]
                k += 1
        left_count = k
        for i in range(start, end):
            if x[buf.rows[i], best_feature] > thr:
                buf.tmp[k] = buf.rows[i]
                k += 1
        for i in range(size):
            buf.rows[start + i] = buf.tmp[i]
        lid = n_nodes
        rid = n_nodes + 1
        n_nodes += 2
        feature[base + lid] = -1
        feature[base + rid] = -1
        buf.parent[lid] = nid
        buf.parent[rid] = nid
        buf.seg_start[lid] = start
        buf.seg_end[lid] = start + left_count
        buf.seg_start[rid] = start + left_count
        buf.seg_end[rid] = end
        feature[base + nid] = <int>best_feature
        threshold[base + nid] = best_threshold
        children_left[base + nid] = <int>(base + lid)
        children_right[base + nid] = <int>(base + rid)
        buf.stack[stack_top] = rid
        stack_top += 1
        buf.stack[stack_top] = lid
        stack_top += 1

    # honest estimation pass: route held-out rows and average per node;
    # targets are summed in ascending value order so the mean does not
    # depend on row storage order
    buf.est_start[0] = 0
    buf.est_end[0] = n_est
    for nid in range(n_nodes):
        start = buf.est_start[nid]
        end = buf.est_end[nid]
        size = end - start
        buf.counts[nid] = size
        if size > 0:
            for i in range(size):
                buf.est_vals[i] = y[buf.rows_est[start + i]]
            sh_sort_double(buf.est_vals, size)
            total = 0.0
            for i in range(size):
                total = total + buf.est_vals[i]
            buf.raw[nid] = total / (<double>size)
        else:
            buf.raw[nid] = 0.0
        f = feature[base + nid]
        if f >= 0:
            thr = threshold[base + nid]
            k = 0
            for i in range(start, end):
                if x[buf.rows_est[i], f] <= thr:
                    buf.tmp[k] = buf.rows_est[i]
                    k += 1
            left_count = k
            for i in range(start, end):
                if x[buf.rows_est[i], f] > thr:
                    buf.tmp[k] = buf.rows_est[i]
                    k += 1
            for i in range(size):
                buf.rows_est[start + i] = buf.tmp[i]
            lid = children_left[base + nid] - base
            rid = children_right[base + nid] - base
            buf.est_start[lid] = start
            buf.est_end[lid] = start + left_count
            buf.est_start[rid] = start + left_count
            buf.est_end[rid] = end
    for nid in range(n_nodes):
        if buf.counts[nid] > 0:
            value[base + nid] = buf.raw[nid]
        else:
            value[base + nid] = value[base + buf.parent[nid]]
    return n_nodes


def build_forest(x, y, tree_seeds, mtry, min_node_size, honesty_fraction, subsample_fraction):
    """Build all trees; returns flat node arrays with absolute child indices."""
    cdef const double[:, ::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef const double[::1] yv = np.ascontiguousarray(y, dtype=np.float64)
    seeds_arr = np.ascontiguousarray(tree_seeds, dtype=np.uint64)
    cdef const uint64_t[::1] seeds = seeds_arr
    cdef int64_t num_trees = seeds.shape[0]
    cdef int64_t n = xv.shape[0]
    cdef int64_t q = xv.shape[1]
    cdef int64_t mtry_c = mtry
    cdef int64_t mns = min_node_size

    cdef int64_t m_sub = <int64_t>ceil(subsample_fraction * n)
    if m_sub < 2:
        m_sub = 2
    if m_sub > n:
        m_sub = n
    cdef int64_t n_struct = <int64_t>floor(honesty_fraction * m_sub + 0.5)
    if n_struct < 1:
        n_struct = 1
    if n_struct > m_sub - 1:
        n_struct = m_sub - 1
    cdef int64_t n_est = m_sub - n_struct
    cdef int64_t cap = 2 * n_struct + 1

    feature_np = np.full(num_trees * cap, -1, dtype=np.int32)
    threshold_np = np.zeros(num_trees * cap, dtype=np.float64)
    left_np = np.full(num_trees * cap, -1, dtype=np.int32)
    right_np = np.full(num_trees * cap, -1, dtype=np.int32)
    value_np = np.zeros(num_trees * cap, dtype=np.float64)
    offsets_np = np.zeros(num_trees + 1, dtype=np.int64)
    cdef int[::1] feature = feature_np
    cdef double[::1] threshold = threshold_np
    cdef int[::1] children_left = left_np
    cdef int[::1] children_right = right_np
    cdef double[::1] value = value_np
    cdef int64_t[::1] offsets = offsets_np

    cdef TreeBuffers buf
    buf.rows = <int64_t *>malloc(n_struct * sizeof(int64_t))
    buf.rows_est = <int64_t *>malloc(n_est * sizeof(int64_t))
    buf.tmp = <int64_t *>malloc(m_sub * sizeof(int64_t))
    buf.stack = <int64_t *>malloc(cap * sizeof(int64_t))
    buf.seg_start = <int64_t *>malloc(cap * sizeof(int64_t))
    buf.seg_end = <int64_t *>malloc(cap * sizeof(int64_t))
    buf.est_start = <int64_t *>malloc(cap * sizeof(int64_t))
    buf.est_end = <int64_t *>malloc(cap * sizeof(int64_t))
    buf.parent = <int64_t *>malloc(cap * sizeof(int64_t))
    buf.feat_buf = <int64_t *>malloc(q * sizeof(int64_t))
    buf.pairs = <sh_pair *>malloc(n_struct * sizeof(sh_pair))
    buf.raw = <double *>malloc(cap * sizeof(double))
    buf.est_vals = <double *>malloc(n_est * sizeof(double))
    buf.counts = <int64_t *>malloc(cap * sizeof(int64_t))
    cdef int64_t *perm = <int64_t *>malloc(n * sizeof(int64_t))
    if (buf.rows == NULL or buf.rows_est == NULL or buf.tmp == NULL or buf.stack == NULL
            or buf.seg_start == NULL or buf.seg_end == NULL or buf.est_start == NULL
            or buf.est_end == NULL or buf.parent == NULL or buf.feat_buf == NULL
            or buf.pairs == NULL or buf.raw == NULL or buf.est_vals == NULL
            or buf.counts == NULL or perm == NULL):
        _free_buffers(&buf, perm)
        raise MemoryError("forest kernel buffers")

    cdef uint64_t state
    cdef int64_t t, i, written, total_nodes = 0
    with nogil:
        for t in range(num_trees):
            state = seeds[t]
            partial_shuffle(perm, n, m_sub, &state)
            for i in range(n_struct):
                buf.rows[i] = perm[i]
            sh_sort_int64(buf.rows, n_struct)
            for i in range(n_est):
                buf.rows_est[i] = perm[n_struct + i]
            sh_sort_int64(buf.rows_est, n_est)
            offsets[t] = total_nodes
            written = grow_tree(xv, yv, n_struct, n_est, &state, mtry_c, mns,
                                &buf, feature, threshold, children_left,
                                children_right, value, total_nodes)
            total_nodes += written
        offsets[num_trees] = total_nodes

    _free_buffers(&buf, perm)

    return {
        "feature": feature_np[:total_nodes].copy(),
        "threshold": threshold_np[:total_nodes].copy(),
        "children_left": left_np[:total_nodes].copy(),
        "children_right": right_np[:total_nodes].copy(),
        "value": value_np[:total_nodes].copy(),
        "tree_offsets": offsets_np,
    }


cdef void _free_buffers(TreeBuffers *buf, int64_t *perm):
    if buf.rows != NULL: free(buf.rows)
    if buf.rows_est != NULL: free(buf.rows_est)
    if buf.tmp != NULL: free(buf.tmp)
    if buf.stack != NULL: free(buf.stack)
    if buf.seg_start != NULL: free(buf.seg_start)
    if buf.seg_end != NULL: free(buf.seg_end)
    if buf.est_start != NULL: free(buf.est_start)
    if buf.est_end != NULL: free(buf.est_end)
    if buf.parent != NULL: free(buf.parent)
    if buf.feat_buf != NULL: free(buf.feat_buf)
    if buf.pairs != NULL: free(buf.pairs)
    if buf.raw != NULL: free(buf.raw)
    if buf.est_vals != NULL: free(buf.est_vals)
    if buf.counts != NULL: free(buf.counts)
    if perm != NULL: free(perm)


def predict_forest(feature, threshold, children_left, children_right, value, tree_offsets, X):
    """Mean over trees of the leaf value each row lands in."""
    cdef const int[::1] feat = np.ascontiguousarray(feature, dtype=np.int32)
    cdef const double[::1] thr = np.ascontiguousarray(threshold, dtype=np.float64)
    cdef const int[::1] left = np.ascontiguousarray(children_left, dtype=np.int32)
    cdef const int[::1] right = np.ascontiguousarray(children_right, dtype=np.int32)
    cdef const double[::1] val = np.ascontiguousarray(value, dtype=np.float64)
    cdef const int64_t[::1] offs = np.ascontiguousarray(tree_offsets, dtype=np.int64)
    cdef const double[:, ::1] xv = np.ascontiguousarray(X, dtype=np.float64)
    cdef int64_t m = xv.shape[0]
    cdef int64_t num_trees = offs.shape[0] - 1
    out_np = np.zeros(m, dtype=np.float64)
    cdef double[::1] out = out_np
    cdef int64_t t, i, node
    with nogil:
        for t in range(num_trees):
            for i in range(m):
                node = offs[t]
                while feat[node] >= 0:
                    if xv[i, feat[node]] <= thr[node]:
                        node = left[node]
                    else:
                        node = right[node]
                out[i] = out[i] + val[node]
    return out_np / num_trees

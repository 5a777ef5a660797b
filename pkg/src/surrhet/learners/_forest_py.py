"""Pure-Python twin of the compiled forest kernel.

Every floating-point operation here is sequenced exactly like the Cython
kernel (cumulative sums are sequential, leaf sums accumulate in ascending
row order, trees accumulate into predictions in index order), so the two
backends produce bit-identical forests. Keep the twins in sync: any
change to one must be mirrored in the other.
"""

from __future__ import annotations

import math

import numpy as np

from surrhet.learners._rng import SplitMix64

_NEG_INF = -np.inf


def _seq_sum(values: np.ndarray) -> float:
    # sequential (non-pairwise) summation; matches a plain C loop
    if values.size == 0:
        return 0.0
    return float(np.cumsum(values)[-1])


def _partial_shuffle(count: int, take: int, stream: SplitMix64) -> np.ndarray:
    arr = np.arange(count, dtype=np.int64)
    for i in range(take):
        j = i + stream.bounded(count - i)
        arr[i], arr[j] = arr[j], arr[i]
    return arr[:take]


def _draw_features(q: int, mtry: int, stream: SplitMix64) -> np.ndarray:
    return _partial_shuffle(q, mtry, stream)


def _grow_tree(x, y, struct_rows, est_rows, stream, mtry, min_node_size):
    """Grow one honest tree; returns per-tree node arrays (tree-relative children)."""
    feature: list[int] = []
    threshold: list[float] = []
    left: list[int] = []
    right: list[int] = []
    parent: list[int] = []
    node_rows: dict[int, np.ndarray] = {}

    def new_node(par: int) -> int:
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        parent.append(par)
        return len(feature) - 1

    root = new_node(-1)
    node_rows[root] = struct_rows
    stack = [root]
    q = x.shape[1]
    while stack:
        nid = stack.pop()
        rows = node_rows.pop(nid)
        size = rows.shape[0]
        targets = y[rows]
        if size < 2 * min_node_size or targets.min() == targets.max():
            continue  # leaf
        candidates = _draw_features(q, mtry, stream)
        best_score = _NEG_INF
        best_feature = -1
        best_threshold = 0.0
        for f in candidates:
            vals = x[rows, f]
            order = np.argsort(vals, kind="stable")
            sv = vals[order]
            cs = np.cumsum(targets[order])
            total = cs[-1]
            ls = cs[:-1]
            t = np.arange(1, size)
            rs = total - ls
            score = ls * ls / t + rs * rs / (size - t)
            valid = (t >= min_node_size) & (t <= size - min_node_size) & (sv[1:] != sv[:-1])
            if not valid.any():
                continue
            masked = np.where(valid, score, _NEG_INF)
            ti = int(np.argmax(masked))
            if masked[ti] > best_score:
                best_score = float(masked[ti])
                best_feature = int(f)
                best_threshold = (sv[ti] + sv[ti + 1]) * 0.5
        if best_feature < 0:
            continue  # no valid split on the drawn features
        mask = x[rows, best_feature] <= best_threshold
        lid = new_node(nid)
        rid = new_node(nid)
        feature[nid] = best_feature
        threshold[nid] = best_threshold
        left[nid] = lid
        right[nid] = rid
        node_rows[lid] = rows[mask]
        node_rows[rid] = rows[~mask]
        stack.append(rid)
        stack.append(lid)

    n_nodes = len(feature)
    # honest estimation pass: route the held-out rows and average per node;
    # targets are summed in ascending value order so the mean does not
    # depend on row storage order
    counts = np.zeros(n_nodes, dtype=np.int64)
    raw = np.zeros(n_nodes, dtype=np.float64)
    segments: list[np.ndarray | None] = [None] * n_nodes
    segments[0] = est_rows
    for nid in range(n_nodes):
        rows = segments[nid]
        rows = rows if rows is not None else np.empty(0, dtype=np.int64)
        counts[nid] = rows.shape[0]
        if rows.shape[0]:
            raw[nid] = _seq_sum(np.sort(y[rows])) / rows.shape[0]
        if feature[nid] >= 0:
            mask = x[rows, feature[nid]] <= threshold[nid]
            segments[left[nid]] = rows[mask]
            segments[right[nid]] = rows[~mask]
        segments[nid] = None
    value = np.zeros(n_nodes, dtype=np.float64)
    for nid in range(n_nodes):  # parents precede children, so one pass resolves
        if counts[nid] > 0:
            value[nid] = raw[nid]
        else:
            value[nid] = value[parent[nid]]
    return (
        np.array(feature, dtype=np.int32),
        np.array(threshold, dtype=np.float64),
        np.array(left, dtype=np.int32),
        np.array(right, dtype=np.int32),
        value,
    )


def build_forest(x, y, tree_seeds, mtry, min_node_size, honesty_fraction, subsample_fraction):
    """Build all trees; returns flat node arrays with absolute child indices."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    n = x.shape[0]
    m_sub = min(max(int(math.ceil(subsample_fraction * n)), 2), n)
    n_struct = min(max(int(math.floor(honesty_fraction * m_sub + 0.5)), 1), m_sub - 1)

    feats, thrs, lefts, rights, values = [], [], [], [], []
    offsets = [0]
    for seed in tree_seeds:
        stream = SplitMix64(int(seed))
        perm = _partial_shuffle(n, m_sub, stream)
        struct_rows = np.sort(perm[:n_struct])
        est_rows = np.sort(perm[n_struct:])
        f, t, l, r, v = _grow_tree(x, y, struct_rows, est_rows, stream, mtry, min_node_size)
        base = offsets[-1]
        internal = f >= 0
        l[internal] += base
        r[internal] += base
        feats.append(f)
        thrs.append(t)
        lefts.append(l)
        rights.append(r)
        values.append(v)
        offsets.append(base + f.shape[0])
    return {
        "feature": np.concatenate(feats),
        "threshold": np.concatenate(thrs),
        "children_left": np.concatenate(lefts),
        "children_right": np.concatenate(rights),
        "value": np.concatenate(values),
        "tree_offsets": np.array(offsets, dtype=np.int64),
    }


def predict_forest(feature, threshold, children_left, children_right, value, tree_offsets, X):
    """Mean over trees of the leaf value each row lands in."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    m = X.shape[0]
    out = np.zeros(m, dtype=np.float64)
    num_trees = tree_offsets.shape[0] - 1
    row_idx = np.arange(m)
    for t in range(num_trees):
        pos = np.full(m, tree_offsets[t], dtype=np.int64)
        active = feature[pos] >= 0
        while active.any():
            ap = pos[active]
            f = feature[ap]
            go_left = X[row_idx[active], f] <= threshold[ap]
            pos[active] = np.where(go_left, children_left[ap], children_right[ap])
            active = feature[pos] >= 0
        out += value[pos]
    return out / num_trees

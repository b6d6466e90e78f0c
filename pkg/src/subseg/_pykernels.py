"""Pure-Python kernels; reference behaviour for the compiled ``_kernels``."""

import math

NEG_INF = float("-inf")


def edit_alignment(ref, hyp):
    """Map each reference position to its aligned hypothesis position.

    Levenshtein alignment with unit costs.  The backtrace prefers, in
    order: match, substitution, deletion (reference token dropped),
    insertion.  Deleted reference positions map to -1.
    """
    n, m = len(ref), len(hyp)
    dist = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(1, n + 1):
        dist[i][0] = i
    for j in range(1, m + 1):
        dist[0][j] = j
    for i in range(1, n + 1):
        row, prev = dist[i], dist[i - 1]
        r = ref[i - 1]
        for j in range(1, m + 1):
            best = prev[j - 1] + (0 if r == hyp[j - 1] else 1)
            d = prev[j] + 1
            if d < best:
                best = d
            d = row[j - 1] + 1
            if d < best:
                best = d
            row[j] = best

    out = [-1] * n
    i, j = n, m
    while i > 0 or j > 0:
        cur = dist[i][j]
        if i > 0 and j > 0:
            same = ref[i - 1] == hyp[j - 1]
            if same and dist[i - 1][j - 1] == cur:
                out[i - 1] = j - 1
                i -= 1
                j -= 1
                continue
            if not same and dist[i - 1][j - 1] + 1 == cur:
                out[i - 1] = j - 1
                i -= 1
                j -= 1
                continue
        if i > 0 and dist[i - 1][j] + 1 == cur:
            i -= 1
            continue
        j -= 1
    return out


def _logaddexp(a, b):
    if a == NEG_INF:
        return b
    if b == NEG_INF:
        return a
    if a > b:
        return a + math.log1p(math.exp(b - a))
    return b + math.log1p(math.exp(a - b))


def ctc_forward(log_probs, target, blank):
    """Negative log-likelihood of ``target`` under CTC; ``inf`` if infeasible.

    ``log_probs`` is a frames x symbols sequence of normalized log
    probabilities (nested sequences or a 2-D array).
    """
    T = len(log_probs)
    L = len(target)
    S = 2 * L + 1
    ext = [blank] * S
    for k, lab in enumerate(target):
        ext[2 * k + 1] = lab
    alpha = [NEG_INF] * S
    alpha[0] = float(log_probs[0][blank])
    if S > 1:
        alpha[1] = float(log_probs[0][ext[1]])
    for t in range(1, T):
        row = log_probs[t]
        new = [NEG_INF] * S
        for s in range(S):
            acc = alpha[s]
            if s >= 1:
                acc = _logaddexp(acc, alpha[s - 1])
            if s >= 2 and ext[s] != blank and ext[s] != ext[s - 2]:
                acc = _logaddexp(acc, alpha[s - 2])
            if acc != NEG_INF:
                new[s] = acc + float(row[ext[s]])
        alpha = new
    total = alpha[S - 1]
    if S > 1:
        total = _logaddexp(total, alpha[S - 2])
    return -total

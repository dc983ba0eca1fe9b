"""Pure-NumPy residual kernel, used when the compiled extension is absent."""
import numpy as np

_CHUNK = 256


def residual_batch(k_rel, rational, offset, weights):
    """Weighted squared residual per ``k``.

    For each ``k`` returns ``sum_i w_i (offset_i + num_i / den_i)^2`` with
    ``c = 1 - k``, ``num = e1 c + e2 c^2`` and ``den = 1 + d1 c + d2 c^2``;
    ``rational`` holds the rows ``e1, e2, d1, d2``.  ``offset`` is the
    homogeneous response minus the measurement.  Degenerate denominators or
    non-finite sums give ``inf``.
    """
    k_rel = np.asarray(k_rel, dtype=float)
    e1, e2, d1, d2 = rational
    out = np.empty(k_rel.shape[0])
    for start in range(0, k_rel.shape[0], _CHUNK):
        c = (1.0 - k_rel[start:start + _CHUNK])[:, None]
        den = 1.0 + c * (d1 + c * d2)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            r = offset + c * (e1 + c * e2) / den
            q = (weights * r * r).sum(axis=1)
        bad = (np.abs(den) < 1e-300).any(axis=1) | ~np.isfinite(q)
        q[bad] = np.inf
        out[start:start + _CHUNK] = q
    return out

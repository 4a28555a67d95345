"""Numpy versions of the compiled kernels in ``_core.pyx``.

Summation order matches the compiled loops, so both backends return
identical floats.
"""
import numpy as np


def chord_sums(cum, centers, lead_offsets, widths):
    acc = np.zeros(centers.shape[0])
    for off, w in zip(lead_offsets, widths):
        base = centers + off
        acc += cum[base + w + 1] - cum[base - w]
    return acc


def correlate_rows(rows, weights):
    n_out = rows.shape[1] - weights.shape[0] + 1
    acc = np.zeros((rows.shape[0], n_out))
    for k, w in enumerate(weights):
        acc += w * rows[:, k:k + n_out]
    return acc

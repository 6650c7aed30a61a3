"""numpy implementation of the edge kernel, used when the extension is absent.

``np.cumsum`` along an axis accumulates strictly in order, which reproduces
the compiled kernel's summation bit for bit.
"""

import numpy as np


def all_edges(mistake_t, w):
    if w.shape[0] != mistake_t.shape[0]:
        raise ValueError("weight vector length does not match pool")
    return np.cumsum(mistake_t * w[:, None], axis=0)[-1]


def select_edge(mistake_t, w):
    edges = all_edges(mistake_t, w)
    j = int(np.argmax(edges))  # first occurrence on ties
    return j, float(edges[j])

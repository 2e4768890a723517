"""Pure-Python cut-set family algebra over leaf bitmasks.

A family is a list of ints, each int a set of leaves.  Every function
returns a minimal family (no member contains another) sorted by
(cardinality, value).
"""


def _popcount(m):
    return bin(m).count("1")


def minimize(masks):
    kept = []
    for m in sorted(set(masks), key=lambda x: (_popcount(x), x)):
        for k in kept:
            if k & m == k:
                break
        else:
            kept.append(m)
    return kept


def union(a, b):
    return minimize(list(a) + list(b))


def product(a, b):
    return minimize([x | y for x in a for y in b])

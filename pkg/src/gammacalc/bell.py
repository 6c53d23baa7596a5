"""Partial (exponential) Bell polynomials by exhaustive enumeration.

B(n, l; x_1, ..., x_{n-l+1}) is the sum over all multi-indices
(j_1, ..., j_{n-l+1}) with sum(j_i) = l and sum(i * j_i) = n of

    n! / (j_1! ... j_{n-l+1}!) * prod_i (x_i / i!)^{j_i}.

Arguments may be floats or numpy arrays (broadcast elementwise), which is what
the batched inverse-derivative code relies on.
"""

from __future__ import annotations

import math
from functools import lru_cache
from typing import Sequence


@lru_cache(maxsize=None)
def _index_tuples(n: int, l: int) -> tuple[tuple[int, ...], ...]:
    """All admissible multiplicity tuples (j_1..j_{n-l+1}) for B(n, l)."""
    m = n - l + 1

    def rec(i: int, rem_l: int, rem_n: int):
        if i > m:
            if rem_l == 0 and rem_n == 0:
                yield ()
            return
        cap = min(rem_l, rem_n // i)
        for j in range(cap + 1):
            for rest in rec(i + 1, rem_l - j, rem_n - i * j):
                yield (j,) + rest

    return tuple(rec(1, l, n))


def bell_polynomial(n: int, l: int, xs: Sequence):
    """Evaluate the partial Bell polynomial B(n, l) at xs = (x_1..x_{n-l+1})."""
    if not (1 <= l <= n):
        raise ValueError(f"need 1 <= l <= n, got n={n}, l={l}")
    if len(xs) != n - l + 1:
        raise ValueError(f"B({n},{l}) takes {n - l + 1} arguments, got {len(xs)}")
    total = 0.0
    n_fact = math.factorial(n)
    for js in _index_tuples(n, l):
        coeff = n_fact
        term = 1.0
        for i, j in enumerate(js, start=1):
            if j == 0:
                continue
            coeff //= math.factorial(j)
            term = term * (xs[i - 1] / math.factorial(i)) ** j
        total = total + coeff * term
    return total


def faa_di_bruno(outer_derivs: Sequence, inner_derivs: Sequence):
    """r-th derivative of a composition f(g(x)) from the two derivative lists.

    outer_derivs = (f'(g(x)), ..., f^(r)(g(x))),
    inner_derivs = (g'(x), ..., g^(r)(x)); returns
    sum_{l=1}^{r} f^(l)(g(x)) * B(r, l; g', ..., g^(r-l+1)).
    """
    r = len(outer_derivs)
    if r < 1 or len(inner_derivs) != r:
        raise ValueError(
            f"derivative lists must have equal length >= 1, "
            f"got {len(outer_derivs)} and {len(inner_derivs)}"
        )
    total = 0.0
    for l in range(1, r + 1):
        total = total + outer_derivs[l - 1] * bell_polynomial(
            r, l, inner_derivs[: r - l + 1]
        )
    return total

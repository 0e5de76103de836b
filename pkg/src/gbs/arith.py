"""Extended naturals, p-adic valuations, the transfer equation and phenotypes."""

from functools import reduce
from math import gcd

from .core import GbsError, simple_paths_from, simple_cycles, is_cycle


class _Infinity:
    """The extra point of N u {inf}; compares above every integer."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "inf"

    __str__ = __repr__

    def __eq__(self, other):
        return other is self

    def __hash__(self):
        return hash("gbs-infinity")

    def __lt__(self, other):
        return False

    def __le__(self, other):
        return other is self

    def __gt__(self, other):
        return other is not self

    def __ge__(self, other):
        return True

    def __reduce__(self):
        return (_Infinity, ())


INF = _Infinity()


def is_inf(n):
    return n is INF


def parse_extnat(text):
    text = text.strip().lower()
    if text in ("inf", "infinity", "oo", "∞"):
        return INF
    n = int(text)
    if n < 0:
        raise ValueError(f"negative size {n}")
    return n


def val(n, p):
    if n is INF:
        return INF
    if n == 0:
        raise GbsError("valuation of 0")
    n = abs(n)
    v = 0
    while n % p == 0:
        n //= p
        v += 1
    return v


def egcd(a, b):
    if a is INF and b is INF:
        return INF
    if a is INF:
        return abs(b)
    if b is INF:
        return abs(a)
    if a == 0 and b == 0:
        raise GbsError("gcd(0, 0)")
    return gcd(a, b)


def div(n, d):
    """n / d for d dividing n, with inf / d = inf."""
    if n is INF:
        return INF
    q, r = divmod(n, d)
    assert r == 0, (n, d)
    return q


def mul(n, d):
    return INF if n is INF else n * d


def transfer_quotient(N, k):
    """N / (N ^ k): the size of the quotient orbit seen through an edge."""
    return div(N, egcd(N, k))


def transfer_ok(N, k, M, l):
    return transfer_quotient(N, k) == transfer_quotient(M, l)


def far_size(N, k, l):
    """Canonical size across an edge: N|l| / (N ^ k)."""
    return div(mul(N, abs(l)), egcd(N, k))


def divisors(n):
    n = abs(n)
    small = [d for d in range(1, int(n ** 0.5) + 1) if n % d == 0]
    return sorted(set(small + [n // d for d in small]))


def transfer_targets(N, k, l):
    if N is INF:
        return {INF}
    q = transfer_quotient(N, k)
    return {q * d for d in divisors(l) if gcd(q, abs(l) // d) == 1}


def prime_factors(n):
    """Set of primes dividing a nonzero integer."""
    from sympy import factorint

    return set(factorint(abs(n)))


def label_primes(g):
    if "label_primes" not in g.cache:
        ps = set()
        for e in g.positive_edges():
            ps |= prime_factors(g.ksrc(e)) | prime_factors(g.ktrg(e))
        g.cache["label_primes"] = frozenset(ps)
    return g.cache["label_primes"]


def _path_tables(g, v):
    key = ("paths", v)
    if key not in g.cache:
        paths = [p for p in simple_paths_from(g, v)
                 if len(p) == 1 or not is_cycle(g, p)]
        g.cache[key] = [([g.ksrc(e) for e in p], [g.ktrg(e) for e in p]) for p in paths]
    if "cycles" not in g.cache:
        g.cache["cycles"] = [([g.ksrc(e) for e in c], [g.ktrg(e) for e in c])
                             for c in simple_cycles(g)]
    return g.cache[key], g.cache["cycles"]


def path_threshold(ks, ls, p):
    return sum(val(k, p) for k in ks) - sum(val(l, p) for l in ls[:-1])


def _prime_ok(g, v, p, Np):
    key = ("prime", v, p)
    if key not in g.cache:
        paths, cycles = _path_tables(g, v)
        balanced = all(sum(val(k, p) for k in ks) == sum(val(l, p) for l in ls)
                       for ks, ls in cycles)
        bound = max((path_threshold(ks, ls, p) for ks, ls in paths), default=-1)
        g.cache[key] = (balanced, bound)
    balanced, bound = g.cache[key]
    return balanced and Np > bound


def phenotype_set(g, v, N):
    if N is INF:
        raise GbsError("prime set of an infinite size is not defined")
    out = set()
    for p in prime_factors(N) | label_primes(g):
        if _prime_ok(g, v, p, val(N, p)):
            out.add(p)
    return out


def phenotype(g, v, N):
    if N is INF:
        return INF
    # primes outside the labels always qualify, so only the label primes
    # have to be examined; this avoids factoring N
    result = N
    for p in label_primes(g):
        Np = val(N, p)
        if Np and not _prime_ok(g, v, p, Np):
            result //= p ** Np
    return result


def phenotype_bs(m, n, N):
    if N is INF:
        return INF
    result = N
    for p in prime_factors(m * n) | prime_factors(N):
        Np = val(N, p)
        if Np and not (val(m, p) == val(n, p) and Np > val(n, p)):
            result //= p ** Np
    return result


def is_attained(g, v, N):
    return N is INF or phenotype(g, v, N) == N


def _small_primes(limit):
    sieve = bytearray([1]) * (limit + 1)
    sieve[:2] = b"\x00\x00"
    for i in range(2, int(limit ** 0.5) + 1):
        if sieve[i]:
            sieve[i * i::i] = bytearray(len(sieve[i * i::i]))
    return [i for i in range(limit + 1) if sieve[i]]


def phenotype_oracle(g, v, N):
    """Phenotype straight from the definition, by exhaustive enumeration.

    Walks every edge path (backtracking allowed) of length at most the number of
    vertices, and every closed path of that length, and tests every prime up
    to max(N, labels) by trial division. Only meant for small inputs.
    """
    if N is INF:
        return INF
    depth = len(g.vertices)
    paths, cycles = [], []

    def walk(path):
        if path:
            paths.append(path)
            if g.trg(path[-1]) == g.src(path[0]):
                cycles.append(path)
        if len(path) == depth:
            return
        here = g.trg(path[-1]) if path else None
        for e in g.edges():
            if (here is None and g.src(e) == v) or (here is not None and g.src(e) == here):
                walk(path + (e,))

    walk(())
    for w in g.vertices:
        # cycles that avoid v
        if w == v:
            continue
        stack = [(e,) for e in g.edges() if g.src(e) == w]
        while stack:
            p = stack.pop()
            if g.trg(p[-1]) == w:
                cycles.append(p)
            if len(p) < depth:
                stack += [p + (e,) for e in g.edges() if g.src(e) == g.trg(p[-1])]
    labels = [abs(g.ksrc(e)) for e in g.edges()]
    result = 1
    for p in _small_primes(max([N] + labels)):
        Np = val(N, p)
        if not Np:
            continue
        ok = all(sum(val(g.ksrc(e), p) for e in c) == sum(val(g.ktrg(e), p) for e in c)
                 for c in cycles)
        ok = ok and all(Np > sum(val(g.ksrc(e), p) for e in q)
                        - sum(val(g.ktrg(e), p) for e in q[:-1]) for q in paths)
        if ok:
            result *= p ** Np
    return result


def phi(m, n, N):
    """Valuation-wise map: keep p^(N_p + m_p - n_p) when N_p > n_p, else drop p."""
    if N is INF:
        return INF
    out = 1
    for p in prime_factors(N):
        Np = val(N, p)
        if Np > val(n, p):
            out *= p ** (Np + val(m, p) - val(n, p))
    return out


def propagate(N1, labels, p):
    """p-adic valuation at the end of a chain of transfers along ``labels``.

    ``labels`` is a list of (k_i, l_i); raises when the threshold condition
    that makes the closed formula valid fails.
    """
    v = val(N1, p)
    if v is INF:
        return INF
    ks = [val(k, p) for k, _ in labels]
    ls = [val(l, p) for _, l in labels]
    bound = max((sum(ks[:i + 1]) - sum(ls[:i]) for i in range(len(labels))), default=-1)
    if not v > bound:
        raise GbsError(f"valuation {v} does not exceed the chain threshold {bound}")
    return v - sum(ks) + sum(ls)


def settled(m, n, N):
    """True once pushing N along an edge labeled (m, n) can no longer lower any valuation."""
    if N is INF:
        return True
    return all(val(N, p) > val(m, p) and val(m, p) <= val(n, p) for p in prime_factors(N))


def drain(m, n, start, stop=None, limit=10_000):
    """Iterate N -> phi_{n,m}(N) from ``start`` until ``stop(N)`` holds.

    This is the size sequence met when repeatedly pushing a point along an
    edge labeled (m, n). The default stop holds once every prime p left in N
    has N_p > m_p and m_p <= n_p; from then on the sequence is constant on
    those primes.
    """
    if start is INF:
        return [INF]
    if stop is None:
        def stop(x):
            return settled(m, n, x)
    traj = [start]
    while not stop(traj[-1]):
        if len(traj) > limit:
            raise GbsError("drain did not terminate")
        traj.append(phi(n, m, traj[-1]))
    return traj


def lcm(*xs):
    return reduce(lambda a, b: a * b // gcd(a, b), xs, 1)

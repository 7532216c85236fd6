"""Return probabilities of simple random walks.

Three engines: exact iterated convolution (rational or truncated floating
point with certified brackets), an exact transfer recursion for K wr Z, and
Monte Carlo.  ``fit_exponent`` fits the stretched-exponential classes.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from ._backend import kernels
from ._kernels_py import MASK64, Xoshiro256
from .groups import GroupSpec, SpecMismatch, Wreath

CHUNK = 65536
Z95 = 1.959963984540054


class FitFailure(ValueError):
    pass


@dataclass
class SparseDistribution:
    """Finitely supported measure; ``lost_mass`` bounds what truncation dropped."""

    spec: GroupSpec
    mass: dict
    lost_mass: float | Fraction = 0
    step_count: int = 0

    @property
    def exact(self) -> bool:
        return all(isinstance(v, (int, Fraction)) for v in self.mass.values())

    def total(self):
        return sum(self.mass.values(), 0) + self.lost_mass

    def at(self, g):
        return self.mass.get(g, 0)

    def at_identity(self):
        return self.mass.get(self.spec.identity(), 0)


def delta(spec: GroupSpec, exact: bool = True) -> SparseDistribution:
    return SparseDistribution(spec, {spec.identity(): Fraction(1) if exact else 1.0}, 0, 0)


def uniform_measure(spec: GroupSpec, exact: bool = True) -> SparseDistribution:
    gens = spec.generators()
    w = Fraction(1, len(gens)) if exact else 1.0 / len(gens)
    mass: dict = {}
    for g in gens:
        mass[g] = mass.get(g, 0) + w
    return SparseDistribution(spec, mass, Fraction(0) if exact else 0.0, 1)


def convolve(d1: SparseDistribution, d2: SparseDistribution, epsilon: float = 0) -> SparseDistribution:
    """(d1 * d2)(g) = sum_k d1(k) d2(k^-1 g); entries below ``epsilon`` are
    dropped and credited to ``lost_mass``."""
    if d1.spec != d2.spec:
        raise SpecMismatch("convolution of distributions on different groups")
    mul = d1.spec.multiply
    out: dict = {}
    get = out.get
    for a, pa in d1.mass.items():
        for b, pb in d2.mass.items():
            g = mul(a, b)
            out[g] = get(g, 0) + pa * pb
    lost = d1.lost_mass + d2.lost_mass
    if epsilon > 0:
        dropped = [k for k, v in out.items() if v < epsilon]
        for k in dropped:
            lost += out.pop(k)
    return SparseDistribution(d1.spec, out, lost, d1.step_count + d2.step_count)


@dataclass
class WalkEstimate:
    n: int
    p_lower: float | Fraction
    p_upper: float | Fraction
    mode: str  # "exact" or "monte_carlo"
    method: str = "convolution"
    hits: int | None = None
    samples: int | None = None
    stderr: float | None = None
    point: float | None = None

    @property
    def p(self):
        if self.mode == "monte_carlo":
            return self.hits / self.samples
        if self.point is not None:
            return self.point
        if self.p_lower == self.p_upper:
            return self.p_lower
        return (self.p_lower + self.p_upper) / 2

    def to_dict(self) -> dict:
        def num(v):
            return str(v) if isinstance(v, Fraction) else v
        out = {"n": self.n, "mode": self.mode, "method": self.method,
               "p_lower": num(self.p_lower), "p_upper": num(self.p_upper)}
        if self.mode == "monte_carlo":
            out.update(p=self.p, stderr=self.stderr, hits=self.hits, samples=self.samples)
        return out


@dataclass
class WalkRun:
    estimates: list[WalkEstimate]
    truncated: bool = False
    reason: str = ""
    max_support: int = 0
    notes: dict = field(default_factory=dict)


def _rounding_bracket(p: float, lost: float, ops: int) -> tuple[float, float]:
    """Widen [p, p + lost] to cover floating-point rounding.

    Every stored mass is a sum of nonnegative products, so after ``ops``
    roundings along any path its relative error is at most
    gamma = ops * u / (1 - ops * u) with u = 2^-53.
    """
    u = 2.0 ** -53
    gamma = ops * u / (1 - ops * u)
    lo = math.nextafter(p * (1 - gamma), 0.0) if p > 0 else 0.0
    hi = math.nextafter((p + lost) * (1 + gamma), math.inf)
    return max(0.0, lo), min(1.0, hi)


def exact_return_probabilities(spec: GroupSpec, n_max: int, epsilon: float = 0,
                               max_states: int = 2_000_000, rational: bool | None = None) -> WalkRun:
    """Iterate mu^(n) and report [mass at e, mass at e + lost mass] at even n.

    With ``epsilon == 0`` the walk runs on integer path counts, so the bounds
    coincide and are exact rationals.  When the support outgrows
    ``max_states`` the run stops and returns what it has.
    """
    if n_max < 0 or epsilon < 0:
        raise ValueError("n_max and epsilon must be nonnegative")
    if rational is None:
        rational = epsilon == 0
    gens = spec.generators()
    k = len(gens)
    mul = spec.multiply
    e = spec.identity()
    run = WalkRun([WalkEstimate(0, Fraction(1) if rational else 1.0,
                                Fraction(1) if rational else 1.0, "exact")])
    if rational:
        cur: dict = {e: 1}
        for n in range(1, n_max + 1):
            nxt: dict = {}
            get = nxt.get
            for a, c in cur.items():
                for g in gens:
                    b = mul(a, g)
                    nxt[b] = get(b, 0) + c
            cur = nxt
            run.max_support = max(run.max_support, len(cur))
            if n % 2 == 0:
                p = Fraction(cur.get(e, 0), k ** n)
                run.estimates.append(WalkEstimate(n, p, p, "exact"))
            if len(cur) > max_states and n < n_max:
                run.truncated, run.reason = True, f"support {len(cur)} exceeds budget after {n} steps"
                break
        return run
    w = 1.0 / k
    cur = {e: 1.0}
    lost = 0.0
    drops = 0
    for n in range(1, n_max + 1):
        nxt = {}
        get = nxt.get
        for a, c in cur.items():
            c *= w
            for g in gens:
                b = mul(a, g)
                nxt[b] = get(b, 0.0) + c
        if epsilon > 0:
            small = [key for key, v in nxt.items() if v < epsilon]
            for key in small:
                lost += nxt.pop(key)
            drops += len(small)
        cur = nxt
        run.max_support = max(run.max_support, len(cur))
        if n % 2 == 0:
            lo, hi = _rounding_bracket(cur.get(e, 0.0), lost, n * (k + 1) + drops + 2)
            run.estimates.append(WalkEstimate(n, lo, hi, "exact", point=cur.get(e, 0.0)))
        if len(cur) > max_states and n < n_max:
            run.truncated, run.reason = True, f"support {len(cur)} exceeds budget after {n} steps"
            break
    run.notes["lost_mass"] = lost
    return run


# -- exact transfer recursion for K wr Z --------------------------------

def transfer_supported(spec: GroupSpec) -> bool:
    return isinstance(spec, Wreath) and spec.rank == 1 and spec.colors == 1 and spec.modulus >= 2


def _sojourn_table(modulus: int, n_gens: int, n_max: int) -> np.ndarray:
    """E[s, T]: weight of T lamp steps shared by s visits to one site leaving
    the lamp at zero."""
    steps = (1,) if modulus == 2 else (1, -1)
    w = 1.0 / n_gens
    q = np.zeros(n_max + 1)
    dist = np.zeros(modulus)
    dist[0] = 1.0
    for T in range(n_max + 1):
        q[T] = dist[0]
        new = np.zeros(modulus)
        for s in steps:
            new += np.roll(dist, s) * w
        dist = new
    U = n_max // 2
    E = np.zeros((U + 2, n_max + 1))
    for s in range(1, U + 2):
        for T in range(n_max + 1):
            if q[T] > 0:
                E[s, T] = math.exp(math.lgamma(T + s) - math.lgamma(s) - math.lgamma(T + 1) + math.log(q[T]))
    return E


def transfer_return_probabilities(spec: GroupSpec, n_max: int) -> WalkRun:
    """Exact return probabilities of Z/p wr Z up to ``n_max`` in double precision.

    The walk is split at the cursor's crossings of each edge: the generating
    function of excursions above a site satisfies a closed recursion in the
    number of upcrossings, and lamp steps at a site only depend on how many
    times the cursor sits there.  Cost is polynomial in n, unlike convolution.
    The bracket is widened by a relative 1e-9 to cover rounding.
    """
    if not transfer_supported(spec):
        raise ValueError("transfer recursion needs Z/p wr Z with one lamp colour")
    k = len(spec.generators())
    E = _sojourn_table(spec.modulus, k, n_max)
    P = kernels.transfer_returns(np.ascontiguousarray(E), 1.0 / k, n_max)
    run = WalkRun([])
    for n in range(0, n_max + 1, 2):
        p = float(P[n])
        run.estimates.append(WalkEstimate(n, p * (1 - 1e-9), min(1.0, p * (1 + 1e-9)), "exact", "transfer",
                                          point=p))
    return run


# -- Monte Carlo --------------------------------------------------------

def _splitmix(x: int) -> tuple[int, int]:
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return x, z ^ (z >> 31)


def chunk_state(seed: int, n: int, chunk: int) -> tuple[int, int, int, int]:
    """Seed-derivation rule: splitmix64 over (seed, n, chunk index)."""
    x = seed & MASK64
    for v in (n, chunk):
        x, z = _splitmix(x ^ (v & MASK64))
        x = z
    out = []
    for _ in range(4):
        x, z = _splitmix(x)
        out.append(z)
    if not any(out):
        out[0] = 1
    return tuple(out)


def _lamp_tables(spec: GroupSpec):
    info = spec.lamp_programs()
    if info is None:
        return None
    colors, modulus, progs = info
    d = max(1, spec.rank)
    n_gens = len(progs)
    max_upd = max(1, max(len(p.updates) for p in progs))
    moves = np.zeros((n_gens, d), dtype=np.int64)
    n_upd = np.zeros(n_gens, dtype=np.int64)
    upd = np.zeros((n_gens, max_upd, 2 + d), dtype=np.int64)
    for g, prog in enumerate(progs):
        moves[g, :len(prog.move)] = prog.move
        n_upd[g] = len(prog.updates)
        for j, (c, off, delta_) in enumerate(prog.updates):
            upd[g, j, 0] = c
            upd[g, j, 1] = delta_
            upd[g, j, 2:2 + len(off)] = off
    return moves, n_upd, upd, d, colors, modulus


def _generic_chunk(spec: GroupSpec, n: int, samples: int, state) -> int:
    gens = spec.generators()
    k = len(gens)
    e = spec.identity()
    mul = spec.multiply
    rng = Xoshiro256(*state)
    hits = 0
    for _ in range(samples):
        x = e
        for _step in range(n):
            x = mul(x, gens[rng.below(k)])
        hits += x == e
    return hits


def wilson_interval(hits: int, samples: int, z: float = Z95) -> tuple[float, float]:
    phat = hits / samples
    denom = 1 + z * z / samples
    centre = (phat + z * z / (2 * samples)) / denom
    half = z * math.sqrt(phat * (1 - phat) / samples + z * z / (4 * samples * samples)) / denom
    lo = 0.0 if hits == 0 else max(0.0, centre - half)
    hi = 1.0 if hits == samples else min(1.0, centre + half)
    return lo, hi


def monte_carlo_return(spec: GroupSpec, ns, samples: int, seed: int = 0, threads: int = 1,
                       chunk: int = CHUNK) -> list[WalkEstimate]:
    """Hit frequency of the identity after n steps, for each n in ``ns``.

    Samples are cut into fixed chunks of ``chunk`` walks; chunk ``i`` for
    length ``n`` draws from the stream ``chunk_state(seed, n, i)``.  Chunks
    are merged by summing counts, so the result does not depend on
    ``threads``.
    """
    if samples < 1:
        raise ValueError("samples must be at least 1")
    if threads < 1:
        raise ValueError("threads must be at least 1")
    tables = _lamp_tables(spec)
    out = []
    for n in ns:
        if n < 0:
            raise ValueError("walk lengths must be nonnegative")
        if n == 0:
            out.append(WalkEstimate(0, 1.0, 1.0, "monte_carlo", "monte_carlo", samples, samples, 0.0))
            continue
        sizes = [min(chunk, samples - i) for i in range(0, samples, chunk)]

        def work(i, n=n, sizes=sizes):
            state = chunk_state(seed, n, i)
            if tables is not None:
                moves, n_upd, upd, d, colors, modulus = tables
                hits, _ = kernels.mc_lamp_chunk(moves, n_upd, upd, d, colors, modulus, n, sizes[i], *state)
                return hits
            return _generic_chunk(spec, n, sizes[i], state)

        if threads == 1:
            hits = sum(work(i) for i in range(len(sizes)))
        else:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                hits = sum(pool.map(work, range(len(sizes))))
        lo, hi = wilson_interval(hits, samples)
        ph = hits / samples
        out.append(WalkEstimate(n, lo, hi, "monte_carlo", "monte_carlo", hits, samples,
                                math.sqrt(ph * (1 - ph) / samples)))
    return out


# -- exponent fitting ---------------------------------------------------

MODELS = ("stretched_exp", "power_law", "stretched_exp_log")


@dataclass
class FitResult:
    model: str
    alpha: float
    c: float
    log_C: float
    gamma: float
    alpha_ci: tuple[float, float]
    residual_norm: float
    n_points: int

    def to_dict(self) -> dict:
        return {"model": self.model, "alpha": self.alpha, "c": self.c, "log_C": self.log_C,
                "gamma": self.gamma, "alpha_ci": list(self.alpha_ci),
                "residual_norm": self.residual_norm, "n_points": self.n_points}


def _linear(x: np.ndarray, y: np.ndarray):
    A = np.column_stack([np.ones_like(x), x])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    r = y - A @ coef
    return coef, float(r @ r)


def _stretched(n: np.ndarray, logp: np.ndarray, gamma: float, tol: float = 1e-13):
    logn = np.log(n)
    base = np.log(logn) * gamma if gamma else 0.0

    def rss(a):
        # log p = log C - c * n^a * (log n)^gamma
        return _linear(-np.exp(a * logn + base), logp)[1]

    grid = np.linspace(1e-3, 1.0, 400)
    vals = [rss(a) for a in grid]
    i = int(np.argmin(vals))
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
    g = (math.sqrt(5) - 1) / 2
    a, b = lo, hi
    x1, x2 = b - g * (b - a), a + g * (b - a)
    f1, f2 = rss(x1), rss(x2)
    while b - a > tol:
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - g * (b - a)
            f1 = rss(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + g * (b - a)
            f2 = rss(x2)
    alpha = (a + b) / 2
    coef, r = _linear(-np.exp(alpha * logn + base), logp)
    return alpha, float(coef[1]), float(coef[0]), r


def _fit_once(n, logp, model, gamma):
    if model == "power_law":
        coef, r = _linear(-np.log(n), logp)
        return float(coef[1]), float(coef[1]), float(coef[0]), r
    return _stretched(n, logp, gamma)


def fit_exponent(data, model: str = "stretched_exp", min_n: float = 64, gamma: float | None = None,
                 d: int | None = None, bootstrap: int = 200, seed: int = 0) -> FitResult:
    """Least-squares fit of log p against the model, alpha by golden-section
    search with the linear coefficients solved inside.

    ``stretched_exp``: log p = log C - c n^alpha.
    ``stretched_exp_log``: log p = log C - c n^alpha (log n)^gamma with gamma
    fixed, by default 2/(d+2).
    ``power_law``: log p = log C - beta log n; beta is reported as ``alpha``.
    Points with n < ``min_n`` are ignored.
    """
    if model not in MODELS:
        raise ValueError(f"unknown model {model!r}")
    pts = [(float(n), float(p)) for n, p in data if n >= min_n]
    if len(pts) < 4:
        raise FitFailure(f"need at least 4 points with n >= {min_n}, got {len(pts)}")
    if any(not (0 < p <= 1) for _, p in pts):
        raise FitFailure("probabilities must lie in (0, 1]")
    n = np.array([x for x, _ in pts])
    logp = np.log(np.array([p for _, p in pts]))
    if np.ptp(logp) < 1e-14 or np.ptp(n) == 0:
        raise FitFailure("degenerate data: constant probabilities")
    if model == "stretched_exp_log":
        if gamma is None:
            if d is None:
                raise ValueError("stretched_exp_log needs gamma or d")
            gamma = 2.0 / (d + 2)
    else:
        gamma = 0.0
    alpha, c, logC, rss = _fit_once(n, logp, model, gamma)
    if model != "power_law" and c <= 0:
        raise FitFailure("fitted decay rate is not positive")
    boots = []
    rng = np.random.default_rng(seed)
    for _ in range(bootstrap):
        idx = rng.integers(0, len(n), len(n))
        if len(set(idx.tolist())) < 3:
            continue
        nb, lb = n[idx], logp[idx]
        if np.ptp(lb) < 1e-14:
            continue
        boots.append(_fit_once(nb, lb, model, gamma)[0])
    if boots:
        lo, hi = (float(v) for v in np.percentile(boots, [2.5, 97.5]))
    else:
        lo = hi = alpha
    ci = (min(lo, alpha), max(hi, alpha))
    return FitResult(model, float(alpha), c, logC, float(gamma), ci, math.sqrt(rss), len(pts))


# -- the combined exact + Monte Carlo protocol -------------------------

@dataclass
class ProfileReport:
    spec: str
    exact: WalkRun
    monte_carlo: list[WalkEstimate]
    points: list[tuple[int, float]]
    excluded: list[tuple[int, str]]
    fit: FitResult | None
    error: str = ""

    def to_dict(self) -> dict:
        return {"spec": self.spec,
                "exact_method": self.exact.estimates[-1].method if self.exact.estimates else None,
                "exact_n_max": self.exact.estimates[-1].n if self.exact.estimates else None,
                "exact_truncated": self.exact.truncated, "exact_reason": self.exact.reason,
                "monte_carlo": [e.to_dict() for e in self.monte_carlo],
                "points": [[n, p] for n, p in self.points],
                "excluded": [[n, why] for n, why in self.excluded],
                "fit": self.fit.to_dict() if self.fit else None, "error": self.error}


def return_profile(spec: GroupSpec, n_exact: int = 512, mc_ns=(1024, 2048, 4096), samples: int = 10_000_000,
                   seed: int = 0, threads: int = 1, epsilon: float = 1e-12, max_states: int = 2_000_000,
                   model: str = "stretched_exp", min_n: float = 64, bracket_tol: float = 0.1) -> ProfileReport:
    """Exact data up to ``n_exact``, Monte Carlo at ``mc_ns``, then a fit.

    Exact data come from the transfer recursion when the group is K wr Z and
    from truncated convolution otherwise.  A point enters the fit only if it
    carries information: exact brackets must be nonzero with relative width
    at most ``bracket_tol``, Monte Carlo estimates need at least one hit.
    """
    if transfer_supported(spec):
        exact = transfer_return_probabilities(spec, n_exact)
    else:
        exact = exact_return_probabilities(spec, n_exact, epsilon, max_states, rational=False)
    points, excluded = [], []
    for est in exact.estimates:
        if est.n == 0:
            continue
        lo, hi = float(est.p_lower), float(est.p_upper)
        if lo <= 0:
            excluded.append((est.n, "zero lower bound"))
        elif (hi - lo) / lo > bracket_tol:
            excluded.append((est.n, "bracket too wide"))
        else:
            points.append((est.n, math.sqrt(lo * hi)))
    mc = monte_carlo_return(spec, list(mc_ns), samples, seed, threads) if mc_ns else []
    for est in mc:
        if est.hits == 0:
            excluded.append((est.n, "no hits"))
        else:
            points.append((est.n, est.p))
    fit, err = None, ""
    try:
        fit = fit_exponent(points, model, min_n=min_n, d=spec.rank)
    except FitFailure as exc:
        err = str(exc)
    return ProfileReport(str(spec), exact, mc, points, excluded, fit, err)

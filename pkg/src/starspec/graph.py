"""Star-graph forward problem: characteristic function, spectrum, numbering.

The graph has m >= 2 edges of length pi joined at one internal vertex, with
Dirichlet conditions at the boundary vertices, continuity and a Kirchhoff
derivative-sum condition at the internal vertex.  Eigenvalues are zeros of the
characteristic function

    Delta(lam) = S_1' * prod_{j>=2} S_j + S_1 * sum_{j>=2} S_j' * prod_{k>=2, k!=j} S_k

(all endpoint values at x = pi).  They are numbered (n, k) with n in N and
k = 1..m: sqrt(lam_{n1}) sits near n - 1/2 + omega_hat/(pi n) and
sqrt(lam_{nk}) near n + z_{k-1}/(pi n), where omega_hat is the mean of the
half-integrals of the potentials and z_1..z_{m-1} are the roots of the
derivative of prod_k (z - omega_k).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NumberingAmbiguity
from .grid import PI, GridFunction, require_same_grid
from .slcore import edge_endpoint_values, integrate_potential

#: Scan resolution in rho for root bracketing.
SCAN_STEP = PI / 40

#: Roots closer than this in rho are merged and multiplicity-tagged.
MERGE_TOL = 1e-6

#: Maximum allowed distance (in rho) between a computed root and its
#: asymptotic slot before numbering is declared ambiguous.
SLOT_TOL = 0.45

#: Relative tolerance for the z_1-vs-omega_j separation check.
Z_SEPARATION_TOL = 1e-6


@dataclass(frozen=True)
class StarGraphProblem:
    """Edge count plus one potential per edge (all on a shared grid)."""

    potentials: tuple[GridFunction, ...]

    def __post_init__(self):
        pots = tuple(self.potentials)
        if len(pots) < 2:
            raise ValueError("a star graph needs at least 2 edges")
        require_same_grid(*pots)
        object.__setattr__(self, "potentials", pots)

    @property
    def m(self) -> int:
        return len(self.potentials)

    @property
    def n_points(self) -> int:
        return self.potentials[0].n_points

    def omegas(self) -> list[float]:
        """Half-integrals omega_j of the edge potentials."""
        return [integrate_potential(q) for q in self.potentials]


@dataclass(frozen=True)
class SpectrumEntry:
    n: int
    k: int
    lam: float
    multiplicity: int = 1

    @property
    def rho(self) -> float:
        return signed_sqrt(self.lam)


@dataclass
class SpectrumTable:
    """Numbered eigenvalues lambda_{nk} plus the asymptotic constants."""

    entries: list[SpectrumEntry]
    omega_hat: float
    z_roots: tuple

    def __post_init__(self):
        self._index = {(e.n, e.k): e for e in self.entries}

    def lam(self, n: int, k: int) -> float:
        return self._index[(n, k)].lam

    def has(self, n: int, k: int) -> bool:
        return (n, k) in self._index

    def family(self, k: int) -> list[SpectrumEntry]:
        return sorted((e for e in self.entries if e.k == k), key=lambda e: e.n)

    def max_n(self, k: int) -> int:
        ns = [e.n for e in self.entries if e.k == k]
        return max(ns) if ns else 0

    def lambdas(self, k: int, n_first: int, n_last: int) -> np.ndarray:
        """Contiguous lambda_{nk}, n = n_first..n_last (KeyError if any missing)."""
        return np.array([self.lam(n, k) for n in range(n_first, n_last + 1)])

    def restrict(self, ks=(1, 2)) -> "SpectrumTable":
        kept = [e for e in self.entries if e.k in ks]
        return SpectrumTable(kept, self.omega_hat, self.z_roots)

    def residuals(self) -> list[tuple[int, int, float]]:
        """Numbering diagnostics: (n, k, kappa) with kappa = n*(rho - main terms).

        The main terms are n - 1/2 + omega_hat/(pi n) for k = 1 and
        n + Re(z_{k-1})/(pi n) for k >= 2; kappa forms an l2 sequence when the
        numbering is consistent.
        """
        out = []
        for e in self.entries:
            out.append((e.n, e.k, e.n * (e.rho - _slot_value(e.n, e.k, self.omega_hat, self.z_roots))))
        return out

    @classmethod
    def from_families(cls, lambda_1, lambda_2, omega_hat: float = 0.0, z_roots: tuple = ()) -> "SpectrumTable":
        """Build a two-family table from raw eigenvalue lists (n starts at 1)."""
        entries = [SpectrumEntry(n, 1, float(l)) for n, l in enumerate(lambda_1, start=1)]
        entries += [SpectrumEntry(n, 2, float(l)) for n, l in enumerate(lambda_2, start=1)]
        return cls(entries, omega_hat, tuple(z_roots))


def signed_sqrt(lam: float):
    """Monotone square root: sqrt(lam) for lam >= 0, -sqrt(-lam) otherwise."""
    lam = np.asarray(lam, dtype=float)
    out = np.where(lam >= 0.0, np.sqrt(np.abs(lam)), -np.sqrt(np.abs(lam)))
    return float(out) if out.ndim == 0 else out


def char_poly_roots(omegas) -> list:
    """Roots (with multiplicity) of P(z) = d/dz prod_k (z - omega_k).

    For real omega_k all m-1 roots are real (Rolle); tiny imaginary parts from
    the companion-matrix eigensolve are chopped.  Genuinely complex values are
    returned as complex and flagged downstream.
    """
    omegas = np.asarray(omegas, dtype=float)
    if omegas.size < 2:
        raise ValueError("need at least two omegas")
    poly = np.polynomial.polynomial.polyfromroots(omegas)[::-1]  # descending powers
    deriv = np.polyder(poly)
    roots = np.roots(deriv)
    cleaned = []
    for r in roots:
        if abs(r.imag) <= 1e-7 * (1.0 + abs(r)):
            cleaned.append(float(r.real))
        else:
            cleaned.append(complex(r))
    reals = sorted(x for x in cleaned if isinstance(x, float))
    others = [x for x in cleaned if not isinstance(x, float)]
    return reals + others


def _z_real_parts(z_roots) -> list[float]:
    vals = [z.real if isinstance(z, complex) else float(z) for z in z_roots]
    return sorted(vals)


def _slot_value(n: int, k: int, omega_hat: float, z_roots) -> float:
    if k == 1:
        return n - 0.5 + omega_hat / (PI * n)
    zre = _z_real_parts(z_roots)
    return n + zre[k - 2] / (PI * n)


def _edge_values(problem: StarGraphProblem, lams) -> tuple[np.ndarray, np.ndarray]:
    """S_j(pi, lam) and S_j'(pi, lam) for every edge, shape (m, len(lams))."""
    lams = np.atleast_1d(np.asarray(lams, dtype=float))
    S = np.empty((problem.m, lams.size))
    Sp = np.empty((problem.m, lams.size))
    for j, q in enumerate(problem.potentials):
        S[j], Sp[j] = edge_endpoint_values(q, lams)
    return S, Sp


def _delta_from_edges(S: np.ndarray, Sp: np.ndarray) -> np.ndarray:
    m = S.shape[0]
    tail_prod = np.prod(S[1:], axis=0)
    total = Sp[0] * tail_prod
    for j in range(1, m):
        others = [S[i] for i in range(1, m) if i != j]
        prod_others = np.prod(others, axis=0) if others else np.ones_like(S[0])
        total = total + S[0] * Sp[j] * prod_others
    return total


def characteristic_delta(problem: StarGraphProblem, lam: float) -> float:
    """Characteristic function Delta(lambda) of the graph problem."""
    S, Sp = _edge_values(problem, [lam])
    return float(_delta_from_edges(S, Sp)[0])


def delta_values(problem: StarGraphProblem, lams) -> np.ndarray:
    """Vectorized Delta over an array of lambdas."""
    S, Sp = _edge_values(problem, lams)
    return _delta_from_edges(S, Sp)


# ---------------------------------------------------------------------------
# root scanning machinery


def _brackets_from_scan(xs: np.ndarray, fs: np.ndarray):
    """Sign-change brackets [(lo, hi)] plus grid points that are exact zeros."""
    neg = fs < 0.0
    flip = neg[:-1] != neg[1:]
    nonzero = (fs[:-1] != 0.0) & (fs[1:] != 0.0)
    idx = np.nonzero(flip & nonzero)[0]
    exact = xs[fs == 0.0]
    return xs[idx], xs[idx + 1], exact


def _bisect_batch(f, lo: np.ndarray, hi: np.ndarray, n_iter: int) -> np.ndarray:
    lo = lo.astype(float).copy()
    hi = hi.astype(float).copy()
    if lo.size == 0:
        return lo
    flo = f(lo)
    for _ in range(n_iter):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        go_left = (flo < 0.0) != (fm < 0.0)
        hi = np.where(go_left, mid, hi)
        keep = ~go_left
        lo = np.where(keep, mid, lo)
        flo = np.where(keep, fm, flo)
    return 0.5 * (lo + hi)


def _newton_polish(f, x: np.ndarray, dx: float, max_step: float) -> np.ndarray:
    """One guarded Newton step with a numerically differentiated f."""
    if x.size == 0:
        return x
    fx = f(x)
    d = (f(x + dx) - f(x - dx)) / (2.0 * dx)
    with np.errstate(divide="ignore", invalid="ignore"):
        step = np.where(d != 0.0, -fx / d, 0.0)
    step = np.clip(step, -max_step, max_step)
    x_new = x + step
    f_new = f(x_new)
    better = np.abs(f_new) < np.abs(fx)
    return np.where(better, x_new, x)


def _refine_roots(f, lo: np.ndarray, hi: np.ndarray, n_bisect: int = 22) -> np.ndarray:
    roots = _bisect_batch(f, lo, hi, n_bisect)
    width = float(np.max(hi - lo)) if lo.size else 0.0
    return _newton_polish(f, roots, dx=1e-7, max_step=width)


def _scan_function_roots(f, x_lo: float, x_hi: float, step: float, precomputed=None) -> np.ndarray:
    """All simple (sign-change) roots of f on [x_lo, x_hi]."""
    if precomputed is None:
        xs = np.arange(x_lo, x_hi + 0.5 * step, step)
        fs = f(xs)
    else:
        xs, fs = precomputed
    lo, hi, exact = _brackets_from_scan(xs, fs)
    refined = _refine_roots(f, lo, hi)
    return np.sort(np.concatenate([refined, exact]))


# ---------------------------------------------------------------------------
# spectrum computation


def _cluster_rhos(values: np.ndarray, tol: float) -> list[np.ndarray]:
    """Group a sorted array into runs with consecutive gaps <= tol."""
    if values.size == 0:
        return []
    breaks = np.nonzero(np.diff(values) > tol)[0]
    return np.split(values, breaks + 1)


def compute_spectrum(
    problem: StarGraphProblem,
    n_max: int,
    *,
    slot_tol: float = SLOT_TOL,
    merge_tol: float = MERGE_TOL,
    scan_step: float = SCAN_STEP,
) -> SpectrumTable:
    """All eigenvalues with labels (n, k), n <= n_max, k = 1..m.

    Roots are located two ways and merged: sign changes of Delta along a rho
    scan (odd-order roots), and coincidences of per-edge Dirichlet eigenvalues
    (eigenvalues of multiplicity r-1 whenever r >= 2 edge solutions vanish at
    one lambda - the even-order-contact evidence).  Labels are assigned by
    order-matching the ascending roots to the ascending asymptotic slots;
    a root farther than ``slot_tol`` (in rho) from its slot raises
    NumberingAmbiguity rather than silently renumbering.
    """
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    m = problem.m
    omegas = problem.omegas()
    omega_hat = sum(omegas) / m
    z_roots = tuple(char_poly_roots(omegas))

    slots = []
    labels = []
    for n in range(1, n_max + 1):
        for k in range(1, m + 1):
            slots.append(_slot_value(n, k, omega_hat, z_roots))
            labels.append((n, k))
    slots = np.asarray(slots)
    order = np.lexsort(([lk for (_, lk) in labels], [ln for (ln, _) in labels], slots))
    slots_sorted = slots[order]
    labels_sorted = [labels[i] for i in order]

    rho_hi = max(n_max + 1.25, float(np.max(slots_sorted)) + 1.0)

    # one scan serves Delta and every per-edge endpoint function
    rho_grid = np.arange(0.0, rho_hi + 0.5 * scan_step, scan_step)
    S_grid, Sp_grid = _edge_values(problem, rho_grid**2)
    delta_grid = _delta_from_edges(S_grid, Sp_grid)

    def delta_at_rho(r):
        S, Sp = _edge_values(problem, np.asarray(r) ** 2)
        return _delta_from_edges(S, Sp)

    delta_roots = [
        _scan_function_roots(delta_at_rho, 0.0, rho_hi, scan_step, precomputed=(rho_grid, delta_grid))
    ]
    edge_zeros = []
    for j in range(m):
        q = problem.potentials[j]

        def s_at_rho(r, q=q):
            return edge_endpoint_values(q, np.asarray(r) ** 2)[0]

        edge_zeros.append(
            [_scan_function_roots(s_at_rho, 0.0, rho_hi, scan_step, precomputed=(rho_grid, S_grid[j]))]
        )

    # negative-lambda branch (Rayleigh: no eigenvalue below min q)
    lam_floor = min(float(np.min(q.values)) for q in problem.potentials)
    lam_switch = 0.25 * scan_step**2
    if lam_floor < lam_switch:
        lo = lam_floor - 1e-3 * max(1.0, abs(lam_floor))
        lam_grid = np.linspace(lo, lam_switch, max(64, int((lam_switch - lo) / 0.005) + 2))
        Sg, Spg = _edge_values(problem, lam_grid)
        dg = _delta_from_edges(Sg, Spg)

        def delta_at_lam(l):
            S, Sp = _edge_values(problem, l)
            return _delta_from_edges(S, Sp)

        neg_roots = _scan_function_roots(delta_at_lam, lo, lam_switch, 0.0, precomputed=(lam_grid, dg))
        delta_roots.append(signed_sqrt(neg_roots[neg_roots < lam_switch]))
        for j in range(m):

            def s_at_lam(l, q=problem.potentials[j]):
                return edge_endpoint_values(q, l)[0]

            zj = _scan_function_roots(s_at_lam, lo, lam_switch, 0.0, precomputed=(lam_grid, Sg[j]))
            edge_zeros[j].append(signed_sqrt(zj[zj < lam_switch]))
        # drop rho-branch roots that fell below the switch (covered above)
        rho_cut = math.sqrt(lam_switch)
        delta_roots[0] = delta_roots[0][delta_roots[0] >= rho_cut]
        for j in range(m):
            edge_zeros[j][0] = edge_zeros[j][0][edge_zeros[j][0] >= rho_cut]

    delta_rho = np.sort(np.concatenate(delta_roots))
    pooled = np.sort(np.concatenate([np.concatenate(z) for z in edge_zeros]))

    # multiple eigenvalues: r >= 2 coinciding edge Dirichlet zeros -> multiplicity r-1
    clusters = [(float(np.mean(c)), c.size - 1) for c in _cluster_rhos(pooled, merge_tol) if c.size >= 2]
    cluster_centers = np.array([c[0] for c in clusters]) if clusters else np.empty(0)

    roots: list[tuple[float, int]] = list(clusters)
    for r in delta_rho:
        if cluster_centers.size and np.min(np.abs(cluster_centers - r)) <= max(merge_tol, 1e-5):
            continue  # the sign change is the cluster root itself
        roots.append((float(r), 1))
    roots.sort()

    expanded = [rho for (rho, mult) in roots for _ in range(mult)]
    mult_of = {rho: mult for (rho, mult) in roots}
    needed = m * n_max
    if len(expanded) < needed:
        raise NumberingAmbiguity(
            f"scan found {len(expanded)} eigenvalues below rho = {rho_hi:.3f}, need {needed}; "
            "scan too coarse or spectrum outside the expected range"
        )
    expanded = expanded[:needed]

    dists = np.abs(np.asarray(expanded) - slots_sorted)
    worst = int(np.argmax(dists))
    if dists[worst] > slot_tol:
        n_bad, k_bad = labels_sorted[worst]
        raise NumberingAmbiguity(
            f"root rho = {expanded[worst]:.6f} is {dists[worst]:.3f} away from asymptotic slot "
            f"(n={n_bad}, k={k_bad}) = {slots_sorted[worst]:.6f} (tolerance {slot_tol}); "
            "cannot assign Lemma-style numbering unambiguously"
        )

    entries = []
    for rho, (n, k) in zip(expanded, labels_sorted):
        lam = rho * rho if rho >= 0 else -(rho * rho)
        entries.append(SpectrumEntry(n, k, float(lam), mult_of[rho]))
    entries.sort(key=lambda e: (e.k, e.n))
    return SpectrumTable(entries, omega_hat, z_roots)


def estimate_omega_hat(rho_family1) -> float:
    """Estimate omega_hat from the k = 1 family of square-root eigenvalues.

    Tail-weighted least squares of pi*n*(rho_n - n + 1/2) over the top half of
    the available indices.  A 1/n regressor is included alongside the constant
    so the next-order systematic term does not bias the estimate; the constant
    is returned.
    """
    rho = np.asarray(rho_family1, dtype=float)
    N = rho.size
    if N < 3:
        raise ValueError("need at least 3 family-1 eigenvalues")
    n = np.arange(1, N + 1)
    y = PI * n * (rho - (n - 0.5))
    sel = n >= max(2, N // 2 + 1)
    if np.count_nonzero(sel) < 3:
        sel = n >= max(2, N - 2)
    ns, ys = n[sel], y[sel]
    w = ns.astype(float) ** 2
    if ns.size >= 6:
        X = np.column_stack([np.ones_like(ys), 1.0 / ns])
    else:
        X = np.ones((ns.size, 1))
    sw = np.sqrt(w)
    beta, *_ = np.linalg.lstsq(X * sw[:, None], ys * sw, rcond=None)
    return float(beta[0])


# ---------------------------------------------------------------------------
# assumption checks


@dataclass
class AssumptionReport:
    """Checks (i)-(v) on a problem/spectrum pair; flags plus offending indices."""

    distinct_ok: bool
    positive_ok: bool
    s_nonzero_ok: bool
    z1_separated_ok: bool
    s1_at_zero_ok: bool
    offenders: dict = field(default_factory=dict)

    @property
    def all_ok(self) -> bool:
        return (
            self.distinct_ok
            and self.positive_ok
            and self.s_nonzero_ok
            and self.z1_separated_ok
            and self.s1_at_zero_ok
        )

    def summary(self) -> str:
        parts = []
        for name in ("distinct_ok", "positive_ok", "s_nonzero_ok", "z1_separated_ok", "s1_at_zero_ok"):
            flag = getattr(self, name)
            line = f"{name}: {'yes' if flag else 'NO'}"
            if not flag and self.offenders.get(name):
                line += f" (offenders: {self.offenders[name][:8]})"
            parts.append(line)
        return "\n".join(parts)


def check_assumptions(problem: StarGraphProblem, table: SpectrumTable) -> AssumptionReport:
    """Evaluate assumptions (i)-(v) for the k = 1, 2 eigenvalue subsequences."""
    from .slcore import pole_threshold  # local import keeps module load order simple

    selected = [e for e in table.entries if e.k in (1, 2)]
    offenders: dict[str, list] = {}

    dup = [(e.n, e.k) for e in selected if e.multiplicity > 1]
    rhos = sorted((signed_sqrt(e.lam), (e.n, e.k)) for e in selected)
    for (r1, l1), (r2, l2) in zip(rhos, rhos[1:]):
        if abs(r2 - r1) <= MERGE_TOL:
            dup.extend([l1, l2])
    distinct_ok = not dup
    if dup:
        offenders["distinct_ok"] = sorted(set(dup))

    nonpos = [(e.n, e.k) for e in selected if e.lam <= 0.0]
    positive_ok = not nonpos
    if nonpos:
        offenders["positive_ok"] = nonpos

    lams = np.array([e.lam for e in selected])
    s_offenders = []
    if lams.size:
        thresh = pole_threshold(lams)
        for j, q in enumerate(problem.potentials, start=1):
            s_vals, _ = edge_endpoint_values(q, lams)
            for e, s, t in zip(selected, s_vals, thresh):
                if abs(s) <= t:
                    s_offenders.append((j, e.n, e.k))
    s_nonzero_ok = not s_offenders
    if s_offenders:
        offenders["s_nonzero_ok"] = s_offenders

    zre = _z_real_parts(table.z_roots)
    z_offenders = []
    if zre:
        z1 = zre[0]
        for j, om in enumerate(problem.omegas(), start=1):
            if abs(z1 - om) <= Z_SEPARATION_TOL * (1.0 + abs(z1)):
                z_offenders.append(j)
    z1_separated_ok = not z_offenders
    if z_offenders:
        offenders["z1_separated_ok"] = z_offenders

    s0, sp0 = _edge_values(problem, [0.0])
    s1_at_zero_ok = abs(s0[0, 0]) > 1e-8 and abs(sp0[0, 0]) > 1e-8
    if not s1_at_zero_ok:
        offenders["s1_at_zero_ok"] = [(float(s0[0, 0]), float(sp0[0, 0]))]

    return AssumptionReport(
        distinct_ok=distinct_ok,
        positive_ok=positive_ok,
        s_nonzero_ok=s_nonzero_ok,
        z1_separated_ok=z1_separated_ok,
        s1_at_zero_ok=s1_at_zero_ok,
        offenders=offenders,
    )

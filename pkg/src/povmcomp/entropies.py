"""One-shot entropic quantities: smooth max entropy, hypothesis testing
relative entropy, max relative entropy (plain and smoothed), smooth and
tilde max information, and the von Neumann suite.

Conventions: all logarithms are base 2, rates are bits.  The smoothing ball
is the purified-distance ball over normalized states.  The hypothesis
testing quantity is the Neyman-Pearson minimization of the type-II error
at type-I error at most eps; optimal tests threshold ``t rho - sigma`` with
fractional weight on the boundary eigenspace so alpha hits 1 - eps exactly.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass

import numpy as np

from . import linalg as la
from . import qobjects as qo
from . import sdp

BISECT_TOL_BITS = 1e-3


class SolverError(RuntimeError):
    """Raised when a smoothing SDP fails to converge; carries residuals."""

    def __init__(self, message: str, residuals: dict | None = None):
        super().__init__(message)
        self.residuals = residuals or {}


class Cancelled(RuntimeError):
    pass


def _check_cancel(cancel: threading.Event | None):
    if cancel is not None and cancel.is_set():
        raise Cancelled("evaluation cancelled")


def _validate_eps(eps: float) -> float:
    if not 0.0 <= eps < 1.0:
        raise ValueError(f"smoothing parameter {eps} outside [0, 1)")
    return float(eps)


# ---------------------------------------------------------------------------
# smooth max entropy (classical)


@dataclass
class HmaxSolution:
    value: float
    lam: dict[str, float]
    subdistribution: dict[str, float]  # P restricted to the kept support, subnormalized
    min_kept_scaled: float  # min over kept x of P(x) 2^{Hmax} / (1 - eps); reported only


def smooth_max_entropy_atoms(
    atoms: list[tuple[float, float]], eps: float
) -> tuple[float, list[tuple[float, float]]]:
    """Greedy optimizer of the max-entropy LP over weighted atoms.

    ``atoms`` is a list of (probability, multiplicity); multiplicities let
    callers fold exchangeable symbols (e.g. codebook classes) into one atom.
    Returns ``(log2 of the optimal sum, kept counts per atom)`` where a kept
    count may be fractional on the single boundary atom.
    """
    eps = _validate_eps(eps)
    order = sorted(range(len(atoms)), key=lambda i: atoms[i][0])
    total_mass = sum(p * m for p, m in atoms)
    if abs(total_mass - 1.0) > 1e-8:
        raise ValueError("atom masses must sum to 1")
    kept = [m for _, m in atoms]
    budget = eps
    for i in order:
        p, m = atoms[i]
        if p <= 0:
            kept[i] = 0.0
            continue
        drop = min(m, budget / p)
        kept[i] = m - drop
        budget -= drop * p
        if budget <= 1e-15:
            break
    lam_sum = sum(kept)
    if lam_sum <= 0:
        raise ValueError("smoothing removed the whole distribution")
    return math.log2(lam_sum), [(atoms[i][0], kept[i]) for i in range(len(atoms))]


def h_max_smooth(p: qo.Distribution, eps: float) -> HmaxSolution:
    """Smooth max entropy of a distribution with the greedy LP optimizer.

    The returned subdistribution keeps P on the surviving symbols (dropped
    low-probability prefix removed, fractional boundary symbol retained).
    """
    eps = _validate_eps(eps)
    # canonical tie break: sort by (probability, symbol)
    idx = sorted(range(len(p.alphabet)), key=lambda i: (p.probs[i], p.alphabet[i]))
    atoms = [(float(p.probs[i]), 1.0) for i in idx]
    value, kept = smooth_max_entropy_atoms(atoms, eps)
    lam = {}
    sub: dict[str, float] = {}
    min_kept_scaled = math.inf
    for (prob, kept_frac), i in zip(kept, idx):
        sym = p.alphabet[i]
        lam[sym] = kept_frac
        if kept_frac > 1e-12 and prob > 0:
            sub[sym] = prob
            min_kept_scaled = min(min_kept_scaled, prob * 2.0**value / max(1e-300, 1 - eps))
    sub = {s: sub[s] for s in p.alphabet if s in sub}  # restore alphabet order
    return HmaxSolution(value, lam, sub, min_kept_scaled)


# ---------------------------------------------------------------------------
# hypothesis testing relative entropy (Neyman-Pearson)


@dataclass
class NPTest:
    operator: np.ndarray | None
    achieved_alpha: float
    achieved_beta: float
    per_symbol: dict[str, np.ndarray] | None = None


class _Blocks:
    """Block-diagonal pair (rho, sigma) as subnormalized block lists."""

    def __init__(self, rho_blocks: list[np.ndarray], sigma_blocks: list[np.ndarray]):
        self.rho = [la.as_matrix(b) for b in rho_blocks]
        self.sigma = [la.as_matrix(b) for b in sigma_blocks]

    def spectra(self, t: float):
        out = []
        for r, s in zip(self.rho, self.sigma):
            d, v = np.linalg.eigh(t * r - s)
            w_r = np.real(np.einsum("ij,jk,ki->i", v.conj().T, r, v))
            w_s = np.real(np.einsum("ij,jk,ki->i", v.conj().T, s, v))
            out.append((d, v, w_r, w_s))
        return out

    def alpha_strict(self, t: float, tol: float) -> float:
        return sum(
            float(w_r[d > tol].sum()) for d, _, w_r, _ in self.spectra(t)
        )


def _np_threshold(blocks: _Blocks, eps: float):
    """Optimal NP test; returns (beta, per-block test operators, alpha)."""
    target = 1.0 - eps
    # beta = 0 reachable: test supported on ker(sigma)
    ker_alpha = 0.0
    for r, s in zip(blocks.rho, blocks.sigma):
        w, v = np.linalg.eigh(s)
        kcols = v[:, np.abs(w) <= 1e-12]
        if kcols.size:
            proj = kcols @ kcols.conj().T
            ker_alpha += float(np.trace(proj @ r).real)
    if ker_alpha >= target - 1e-12:
        tests = []
        for r, s in zip(blocks.rho, blocks.sigma):
            w, v = np.linalg.eigh(s)
            kcols = v[:, np.abs(w) <= 1e-12]
            tests.append(kcols @ kcols.conj().T if kcols.size else np.zeros_like(s))
        return math.inf, tests, ker_alpha

    if eps <= 1e-14:
        tests = [la.support_projector(r) for r in blocks.rho]
        alpha = sum(float(np.trace(p @ r).real) for p, r in zip(tests, blocks.rho))
        beta = sum(float(np.trace(p @ s).real) for p, s in zip(tests, blocks.sigma))
        return beta, tests, alpha

    scale = sum(float(np.trace(s).real) for s in blocks.sigma) + 1.0
    t_lo, t_hi = 0.0, 1.0
    for _ in range(200):
        if blocks.alpha_strict(t_hi, 0.0) >= target:
            break
        t_lo, t_hi = t_hi, t_hi * 4.0
    for _ in range(120):
        mid = (t_lo + t_hi) / 2
        if blocks.alpha_strict(mid, 0.0) >= target:
            t_hi = mid
        else:
            t_lo = mid
    t_star = t_hi
    gap = max(t_hi - t_lo, 1e-15) * (1.0 + scale)
    spectra = blocks.spectra(t_star)
    alpha_strict, kernel_w = 0.0, 0.0
    for d, _, w_r, _ in spectra:
        alpha_strict += float(w_r[d > gap].sum())
        kernel_w += float(w_r[np.abs(d) <= gap].sum())
    c = 0.0
    if kernel_w > 1e-15:
        c = min(max((target - alpha_strict) / kernel_w, 0.0), 1.0)
    tests, alpha, beta = [], 0.0, 0.0
    for d, v, w_r, w_s in spectra:
        take = d > gap
        border = np.abs(d) <= gap
        weights = take.astype(float) + c * border.astype(float)
        tests.append((v * weights) @ v.conj().T)
        alpha += float((w_r * weights).sum())
        beta += float((w_s * weights).sum())
    return beta, tests, alpha


def d_hyp(rho, sigma, eps: float) -> tuple[float, NPTest]:
    """Smooth hypothesis testing relative entropy with its optimal test."""
    eps = _validate_eps(eps)
    rho = la.assert_density(rho)
    sigma = la.assert_psd(sigma)
    if rho.shape != sigma.shape:
        raise ValueError("dimension mismatch")
    beta, tests, alpha = _np_threshold(_Blocks([rho], [sigma]), eps)
    value = math.inf if beta <= 0 or math.isinf(beta) else -math.log2(beta)
    return value, NPTest(tests[0], alpha, 0.0 if math.isinf(beta) else beta)


def i_hyp_cq(cq: qo.CQState, eps: float) -> tuple[float, NPTest]:
    """Hypothesis-testing mutual information of a cq state.

    The optimal test is block diagonal over the classical register; the
    per-symbol components 0 <= Pi_x <= I are exposed for sequential decoders.
    """
    eps = _validate_eps(eps)
    avg = cq.average_block()
    dist = cq.classical_distribution()
    rho_blocks, sigma_blocks = [], []
    for s in cq.symbols:
        p = dist.prob(s)
        rho_blocks.append(p * cq.blocks[s])
        sigma_blocks.append(p * avg)
    beta, tests, alpha = _np_threshold(_Blocks(rho_blocks, sigma_blocks), eps)
    per_symbol = {s: t for s, t in zip(cq.symbols, tests)}
    value = math.inf if beta <= 0 or math.isinf(beta) else -math.log2(beta)
    return value, NPTest(None, alpha, beta if not math.isinf(beta) else 0.0, per_symbol)


def i_hyp_weighted_cq(
    symbols: list[str],
    weights: list[float],
    blocks: list[np.ndarray],
    eps: float,
    side_avg: np.ndarray | None = None,
) -> tuple[float, NPTest]:
    """i_hyp for an explicit weighted block list (weights may fold counts)."""
    eps = _validate_eps(eps)
    avg = side_avg
    if avg is None:
        avg = sum(w * b for w, b in zip(weights, blocks))
    rho_blocks = [w * b for w, b in zip(weights, blocks)]
    sigma_blocks = [w * avg for w in weights]
    beta, tests, alpha = _np_threshold(_Blocks(rho_blocks, sigma_blocks), eps)
    per_symbol = {s: t for s, t in zip(symbols, tests)}
    value = math.inf if beta <= 0 or math.isinf(beta) else -math.log2(beta)
    return value, NPTest(None, alpha, beta if not math.isinf(beta) else 0.0, per_symbol)


def i_hyp_dense(rho_ab, dims: tuple[int, int], eps: float) -> tuple[float, NPTest]:
    rho_ab = la.assert_density(rho_ab)
    da, db = dims
    lay = la.layout(("A", da), ("B", db))
    sigma = la.tensor(
        la.partial_trace(rho_ab, lay, ["A"]), la.partial_trace(rho_ab, lay, ["B"])
    )
    return d_hyp(rho_ab, sigma, eps)


# ---------------------------------------------------------------------------
# max relative entropy and smoothed variants


def d_max(rho, sigma) -> float:
    """log2 of the least c with rho <= c sigma; +inf outside the support."""
    rho = la.assert_psd(rho)
    sigma = la.assert_psd(sigma)
    if rho.shape != sigma.shape:
        raise ValueError("dimension mismatch")
    proj = la.support_projector(sigma)
    leak = float(np.trace((np.eye(len(rho)) - proj) @ rho).real)
    if leak > 1e-10:
        return math.inf
    isq = la.pseudo_inverse_sqrt(sigma)
    pencil = isq @ rho @ isq
    top = float(np.linalg.eigvalsh((pencil + pencil.conj().T) / 2)[-1])
    if top <= 0.0:
        return -math.inf
    return math.log2(top)


def _support_components(mats: list[np.ndarray], tol: float = 1e-12) -> list[np.ndarray]:
    """Connected components of the union support pattern (index arrays)."""
    d = mats[0].shape[0]
    mask = np.zeros((d, d), dtype=bool)
    for m in mats:
        mask |= np.abs(m) > tol
    mask |= mask.T
    parent = list(range(d))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(d):
        for j in range(i + 1, d):
            if mask[i, j]:
                ri, rj = find(i), find(j)
                if ri != rj:
                    parent[ri] = rj
    groups: dict[int, list[int]] = {}
    for i in range(d):
        groups.setdefault(find(i), []).append(i)
    return [np.array(sorted(g)) for g in sorted(groups.values(), key=lambda g: g[0])]


_E00 = np.diag([1.0, 0.0]).astype(complex)
_E11 = np.diag([0.0, 1.0]).astype(complex)
_SX = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
_SY = np.array([[0.0, -1j], [1j, 0.0]], dtype=complex)


@dataclass
class _BallBlock:
    """How one component's rho' is encoded inside the smoothing program.

    ``var`` holds a PSD matrix G on supp(rho_c) (+) C^d whose pinned
    top-left corner is rho_c's positive spectrum; rho' is the trailing
    subblock rotated back to the original basis.  The reduction keeps the
    fidelity block strictly feasible even when rho_c is rank deficient.
    For zero blocks G is rho' itself (``rank`` 0, no rotation needed).
    """

    var: str
    rank: int
    dim: int
    rotation: np.ndarray


def _ball_block_term(expr: sdp.AffineExpr, info: _BallBlock, coeff: float = 1.0):
    if info.rank == 0:
        expr.plus_var(info.var, coeff)
    else:
        expr.plus_subblock(info.var, info.rank, info.rotation, coeff)
    return expr


def _entry_pin(var: str, dim: int, i: int, j: int, value: float, imag: bool) -> sdp.ScalarExpr:
    f = np.zeros((dim, dim), dtype=complex)
    if imag:
        f[i, j] = 0.5j
        f[j, i] = -0.5j
    else:
        f[i, j] = 0.5
        f[j, i] += 0.5
    return sdp.ScalarExpr(-value, ((var, f),))


def _fidelity_ball_problem(
    rho_blocks: list[np.ndarray], target_f: float
) -> tuple[sdp.SDProblem, list[_BallBlock]]:
    """Shared part of the smoothing programs: rho' PSD in the fidelity ball.

    Per component c the program holds one PSD variable G_c on
    supp(rho_c) (+) C^d with the top-left corner pinned to rho_c's spectrum
    and Z = the off-diagonal corner; sum_c Re Tr Z_c >= target_f encodes the
    fidelity constraint and rho' (the trailing subblock) is normalized.
    """
    prob = sdp.SDProblem()
    infos: list[_BallBlock] = []
    tr_terms, z_terms = [], []
    for i, rb in enumerate(rho_blocks):
        d = rb.shape[0]
        w, u = np.linalg.eigh(rb)
        keep = w > 1e-12
        r = int(keep.sum())
        if r == 0:
            var = prob.add_var(f"ball{i}", d)
            prob.require_psd(sdp.AffineExpr.zero(d).plus_var(var))
            infos.append(_BallBlock(var, 0, d, np.eye(d, dtype=complex)))
            tr_terms.append((var, np.eye(d, dtype=complex)))
            continue
        rotation = np.concatenate([u[:, keep][:, ::-1], u[:, ~keep]], axis=1)
        eigs = w[keep][::-1]
        var = prob.add_var(f"ball{i}", r + d)
        prob.require_psd(sdp.AffineExpr.zero(r + d).plus_var(var))
        for a in range(r):
            prob.require_eq(_entry_pin(var, r + d, a, a, float(eigs[a]), imag=False))
            for b in range(a + 1, r):
                prob.require_eq(_entry_pin(var, r + d, a, b, 0.0, imag=False))
                prob.require_eq(_entry_pin(var, r + d, a, b, 0.0, imag=True))
        z_f = np.zeros((r + d, r + d), dtype=complex)
        for a in range(r):
            z_f[a, r + a] = 0.5
            z_f[r + a, a] = 0.5
        z_terms.append((var, z_f))
        tr_f = np.zeros((r + d, r + d), dtype=complex)
        tr_f[r:, r:] = np.eye(d)
        tr_terms.append((var, tr_f))
        infos.append(_BallBlock(var, r, d, rotation))
    prob.require_eq(sdp.ScalarExpr(-1.0, tuple(tr_terms)))
    prob.require_geq(sdp.ScalarExpr(-float(target_f), tuple(z_terms)))
    return prob, infos


def _bisect_lambda(feasible, lo: float, hi: float, cancel=None) -> float:
    """Smallest feasible lambda to BISECT_TOL_BITS, assuming monotonicity."""
    _check_cancel(cancel)
    grow = 1.0
    while not feasible(hi):
        _check_cancel(cancel)
        lo = hi
        hi += grow
        grow *= 2.0
        if hi > 80.0:
            raise SolverError("no feasible lambda found up to 2^80")
    while feasible(lo):
        _check_cancel(cancel)
        hi = lo
        lo -= grow
        grow *= 2.0
        if lo < -80.0:
            return hi
    while hi - lo > BISECT_TOL_BITS:
        _check_cancel(cancel)
        mid = (lo + hi) / 2
        if feasible(mid):
            hi = mid
        else:
            lo = mid
    return hi


def _session_runner(make_prob, constants_only: bool):
    """Feasibility closure over lambda with solver-session reuse.

    ``constants_only`` marks programs where lambda enters the constant parts
    alone, so the factorized session can be kept across bisection steps.
    """
    state: dict = {"session": None, "warm": None}

    def feasible(lam: float) -> bool:
        prob = make_prob(lam)
        if state["session"] is None or not constants_only:
            state["session"] = sdp.Session(prob)
        else:
            state["session"].update_constants(prob)
        res = state["session"].solve(warm=state["warm"])
        if res.status == "feasible":
            state["warm"] = res.warm
        return res.status == "feasible"

    return feasible


def d_max_smooth(rho, sigma, eps: float, cancel: threading.Event | None = None) -> float:
    """Smoothed max relative entropy over the purified-distance ball."""
    eps = _validate_eps(eps)
    rho = la.assert_density(rho)
    sigma = la.assert_psd(sigma)
    if eps == 0.0:
        return d_max(rho, sigma)
    comps = _support_components([rho, sigma])
    rho_blocks = [rho[np.ix_(c, c)] for c in comps]
    sigma_blocks = [sigma[np.ix_(c, c)] for c in comps]
    target_f = math.sqrt(max(0.0, 1.0 - eps * eps))

    def make_prob(lam: float) -> sdp.SDProblem:
        prob, infos = _fidelity_ball_problem(rho_blocks, target_f)
        for sb, info in zip(sigma_blocks, infos):
            cap = sdp.AffineExpr.const_expr(2.0**lam * sb)
            _ball_block_term(cap, info, -1.0)
            prob.require_psd(cap)
        return prob

    feasible = _session_runner(make_prob, constants_only=True)
    hint = d_max(rho, sigma)
    hi = 1.0 if math.isinf(hint) else hint + 1e-6
    return _bisect_lambda(feasible, hi - 1.0, hi, cancel)


def i_max_smooth(
    rho_ab, dims: tuple[int, int], eps: float, cancel: threading.Event | None = None
) -> float:
    """Smooth max information against the fixed product of the marginals."""
    rho_ab = la.assert_density(rho_ab)
    da, db = dims
    lay = la.layout(("A", da), ("B", db))
    sigma = la.tensor(
        la.partial_trace(rho_ab, lay, ["A"]), la.partial_trace(rho_ab, lay, ["B"])
    )
    return d_max_smooth(rho_ab, sigma, eps, cancel)


def _is_cq_in_first_register(rho: np.ndarray, dims: tuple[int, int], tol=1e-11) -> bool:
    da, db = dims
    blocks = rho.reshape(da, db, da, db)
    for a in range(da):
        for ap in range(da):
            if a != ap and np.max(np.abs(blocks[a, :, ap, :])) > tol:
                return False
    return True


def i_max_tilde(
    rho_ab, dims: tuple[int, int], eps: float, cancel: threading.Event | None = None
) -> float:
    """Tilde smooth max information: the second marginal varies with rho'."""
    eps = _validate_eps(eps)
    rho_ab = la.assert_density(rho_ab)
    da, db = dims
    lay = la.layout(("A", da), ("B", db))
    rho_a = la.partial_trace(rho_ab, lay, ["A"])
    target_f = math.sqrt(max(0.0, 1.0 - eps * eps))

    if _is_cq_in_first_register(rho_ab, dims):
        blocks4 = rho_ab.reshape(da, db, da, db)
        rho_blocks = [blocks4[a, :, a, :] for a in range(da)]
        pa = [float(np.trace(b).real) for b in rho_blocks]

        def make_prob(lam: float) -> sdp.SDProblem:
            prob, infos = _fidelity_ball_problem(rho_blocks, target_f)
            for a in range(da):
                cap = sdp.AffineExpr.zero(db)
                for ap in range(da):
                    _ball_block_term(cap, infos[ap], 2.0**lam * pa[a])
                _ball_block_term(cap, infos[a], -1.0)
                prob.require_psd(cap)
            return prob

    else:
        # dense fallback: rho' as a plain square variable with the
        # marginal-product cap (no support reduction; full-rank inputs only)
        def make_prob(lam: float) -> sdp.SDProblem:
            prob = sdp.SDProblem()
            d = da * db
            prob.add_var("rhop", d)
            prob.add_var("zre", d)
            prob.add_var("zim", d)
            blk = sdp.AffineExpr.const_expr(np.kron(_E00, rho_ab))
            blk.plus_kron(_E11, "rhop")
            blk.plus_kron(_SX, "zre")
            blk.plus_kron(-_SY, "zim")
            prob.require_psd(blk)
            prob.require_psd(sdp.AffineExpr.zero(d).plus_var("rhop"))
            prob.require_eq(sdp.trace_functional("rhop", d, const=-1.0))
            prob.require_geq(sdp.trace_functional("zre", d, const=-float(target_f)))
            cap = sdp.AffineExpr.zero(d)
            cap.plus_marginal_product(rho_a, "rhop", (da, db), coeff=2.0**lam)
            cap.plus_var("rhop", -1.0)
            prob.require_psd(cap)
            return prob

    feasible = _session_runner(make_prob, constants_only=False)
    sigma = la.tensor(rho_a, la.partial_trace(rho_ab, lay, ["B"]))
    hint = d_max(rho_ab, sigma)
    hi = 1.0 if math.isinf(hint) else hint + 1e-6
    return _bisect_lambda(feasible, hi - 1.0, hi, cancel)


# ---------------------------------------------------------------------------
# von Neumann quantities


def entropy(rho) -> float:
    w = np.linalg.eigvalsh(la.assert_psd(rho))
    w = w[w > 1e-15]
    return float(-(w * np.log2(w)).sum())


def relative_entropy(rho, sigma) -> float:
    rho = la.assert_psd(rho)
    sigma = la.assert_psd(sigma)
    proj = la.support_projector(sigma)
    if float(np.trace((np.eye(len(rho)) - proj) @ rho).real) > 1e-10:
        return math.inf
    wr, vr = np.linalg.eigh(rho)
    ws, vs = np.linalg.eigh(sigma)
    log_r = (vr * np.log2(np.clip(wr, 1e-300, None))) @ vr.conj().T
    log_s = (vs * np.log2(np.clip(ws, 1e-300, None))) @ vs.conj().T
    val = np.trace(rho @ (log_r - log_s)).real
    return float(val)


def von_neumann_suite(rho_ab, dims: tuple[int, int]) -> dict[str, float]:
    """Entropies and mutual information of a bipartite state, base 2."""
    rho_ab = la.assert_density(rho_ab)
    da, db = dims
    lay = la.layout(("A", da), ("B", db))
    rho_a = la.partial_trace(rho_ab, lay, ["A"])
    rho_b = la.partial_trace(rho_ab, lay, ["B"])
    h_a, h_b, h_ab = entropy(rho_a), entropy(rho_b), entropy(rho_ab)
    return {
        "H_A": h_a,
        "H_B": h_b,
        "H_AB": h_ab,
        "I_AB": h_a + h_b - h_ab,
        "H_A_given_B": h_ab - h_b,
        "H_B_given_A": h_ab - h_a,
        "D_AB_vs_product": relative_entropy(rho_ab, la.tensor(rho_a, rho_b)),
    }

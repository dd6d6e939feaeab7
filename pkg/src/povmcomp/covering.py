"""Covering experiments: convex split states, measure-transformed sample
averages over independent codebooks, and GOOD-set extraction via the
constructive operator inequality (purify, Uhlmann partner, reweight).

Codebook randomness is summarized by symbol counts: grouping the sample
average by symbol turns a K x L double sum into an |X| x |Y| one, so the
estimators scale to the large codebook sizes the rate thresholds demand.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import linalg as la
from . import qobjects as qo


def convex_split_state(rho_abr, lay: la.SystemLayout, k: int, l: int) -> np.ndarray:
    """Mixture over which copy of A and B carries the correlations with R.

    Returns the dense operator on A^k (x) B^l (x) R in that factor order.
    """
    rho_abr = la.assert_density(rho_abr)
    da, db, dr = lay.dim_of("A"), lay.dim_of("B"), lay.dim_of("R")
    total = da**k * db**l * dr
    if total > 4096:
        raise ValueError(f"convex split dimension {total} exceeds the 4096 cap")
    rho_a = la.partial_trace(rho_abr, lay, ["A"])
    rho_b = la.partial_trace(rho_abr, lay, ["B"])
    factors = [(f"A{i}", da) for i in range(k)] + [(f"B{j}", db) for j in range(l)] + [("R", dr)]
    big_lay = la.SystemLayout(tuple(factors))
    out = np.zeros((total, total), dtype=complex)
    for ki in range(k):
        for li in range(l):
            # rho^{A_ki B_li R} tensor singles, built in a permuted order
            order = [f"A{ki}", f"B{li}", "R"]
            order += [f"A{i}" for i in range(k) if i != ki]
            order += [f"B{j}" for j in range(l) if j != li]
            mats = [rho_abr] + [rho_a] * (k - 1) + [rho_b] * (l - 1)
            piece = la.tensor(*mats) if len(mats) > 1 else rho_abr
            perm_lay = la.SystemLayout(tuple((lab, big_lay.dim_of(lab)) for lab in order))
            piece, _ = la.permute_factors(piece, perm_lay, big_lay.labels)
            out += piece
    return out / (k * l)


def split_target_state(rho_abr, lay: la.SystemLayout, k: int, l: int) -> np.ndarray:
    """The decoupled target rho_A^(x)k (x) rho_B^(x)l (x) rho_R."""
    rho_a = la.partial_trace(rho_abr, lay, ["A"])
    rho_b = la.partial_trace(rho_abr, lay, ["B"])
    rho_r = la.partial_trace(rho_abr, lay, ["R"])
    mats = [rho_a] * k + [rho_b] * l + [rho_r]
    return la.tensor(*mats)


# ---------------------------------------------------------------------------
# measure-transformed covering estimator


def _joint_tables(joint: qo.CQState):
    """Split 'x|y' symbols into index tables (p_xy, ratio, blocks)."""
    xs, ys = [], []
    for sym in joint.symbols:
        x, y = qo.split_symbol(sym)
        if x not in xs:
            xs.append(x)
        if y not in ys:
            ys.append(y)
    nx, ny = len(xs), len(ys)
    dim = joint.quantum_dim
    pxy = np.zeros((nx, ny))
    blocks = np.zeros((nx, ny, dim, dim), dtype=complex)
    for sym in joint.symbols:
        x, y = qo.split_symbol(sym)
        i, j = xs.index(x), ys.index(y)
        pxy[i, j] = joint.weights[sym]
        blocks[i, j] = joint.blocks[sym]
    px = pxy.sum(axis=1)
    py = pxy.sum(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(np.outer(px, py) > 0, pxy / np.outer(px, py), 0.0)
    return xs, ys, pxy, px, py, ratio, blocks


def _transformed_average(counts_x, counts_y, k, l, ratio, blocks) -> np.ndarray:
    weights = np.outer(counts_x, counts_y) * ratio / (k * l)
    return np.einsum("xy,xyij->ij", weights, blocks)


def covering_error(
    joint: qo.CQState, k: int, l: int, trials: int, seed: int
) -> dict[str, float]:
    """Monte Carlo mean/stderr of the measure-transformed covering deviation.

    Each trial draws independent codebooks of sizes ``k`` and ``l`` from the
    marginals (as multinomial symbol counts) and computes exactly the trace
    norm between the transformed sample average and the true average state.
    Per-trial RNG streams derive from (seed, trial), so the result does not
    depend on evaluation order.
    """
    _, _, pxy, px, py, ratio, blocks = _joint_tables(joint)
    sigma = np.einsum("xy,xyij->ij", pxy, blocks)
    devs = np.zeros(trials)
    for t in range(trials):
        rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(t,)))
        cx = rng.multinomial(k, px / px.sum())
        cy = rng.multinomial(l, py / py.sum())
        avg = _transformed_average(cx, cy, k, l, ratio, blocks)
        devs[t] = la.trace_norm(avg - sigma)
    mean = float(devs.mean())
    stderr = float(devs.std(ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0
    return {"mean": mean, "stderr": stderr, "trials": trials, "seed": seed}


def _prefix_counts(counts: np.ndarray, m: int, rng: np.random.Generator) -> np.ndarray:
    """Counts of the first m draws given total counts (hypergeometric chain)."""
    total = int(counts.sum())
    if m >= total:
        return counts.copy()
    out = np.zeros_like(counts)
    remaining_pool = total
    remaining_draw = m
    for i, c in enumerate(counts):
        if remaining_draw == 0:
            break
        c = int(c)
        other = remaining_pool - c
        h = int(rng.hypergeometric(c, other, remaining_draw)) if other > 0 else remaining_draw
        h = min(h, c, remaining_draw)
        out[i] = h
        remaining_draw -= h
        remaining_pool -= c
    return out


def covering_sweep(
    joint: qo.CQState,
    log_k_grid: list[int],
    log_l_grid: list[int],
    trials: int,
    seed: int,
) -> list[dict[str, float]]:
    """Covering error along a (logK, logL) grid with coupled codebooks.

    Within a trial, smaller codebooks are prefixes of the largest one, so
    the mean deviation decays monotonically along the grid up to noise.
    Rows are CSV-ready: (logK, logL, meanError, stderr, trials, seed).
    """
    _, _, pxy, px, py, ratio, blocks = _joint_tables(joint)
    sigma = np.einsum("xy,xyij->ij", pxy, blocks)
    k_max, l_max = 2 ** max(log_k_grid), 2 ** max(log_l_grid)
    levels = sorted({(lk, ll) for lk, ll in zip(log_k_grid, log_l_grid)})
    sums = {lv: [] for lv in levels}
    for t in range(trials):
        rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(t,)))
        cx_full = rng.multinomial(k_max, px / px.sum())
        cy_full = rng.multinomial(l_max, py / py.sum())
        for lk, ll in levels:
            cx = _prefix_counts(cx_full, 2**lk, rng)
            cy = _prefix_counts(cy_full, 2**ll, rng)
            avg = _transformed_average(cx, cy, 2**lk, 2**ll, ratio, blocks)
            sums[(lk, ll)].append(la.trace_norm(avg - sigma))
    rows = []
    for lk, ll in levels:
        vals = np.array(sums[(lk, ll)])
        rows.append(
            {
                "logK": lk,
                "logL": ll,
                "meanError": float(vals.mean()),
                "stderr": float(vals.std(ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0,
                "trials": trials,
                "seed": seed,
            }
        )
    return rows


# ---------------------------------------------------------------------------
# operator inequality: GOOD-set extraction


@dataclass
class GoodSetCertificate:
    good: list[int]
    primed: dict[int, np.ndarray]
    prob_good: float
    op_slack: float  # min eig of (1 + eps^(1/4)) target - sum_{good} w rho'
    eps_used: float
    measured_const: float  # (1 - prob_good) / eps^(1/4)
    max_primed_distance: float
    scale: float = 1.0  # extra factor in the transformed variant's bound


def extract_good_set(
    parts: list[np.ndarray], weights: list[float], target: np.ndarray, eps: float
) -> GoodSetCertificate:
    """Constructive GOOD-set for states averaging close to ``target``.

    Follows the purification proof literally: psi = sum sqrt(w_i) |rho_i>|i>,
    phi = Uhlmann partner of target's purification in the same space, primed
    states read off the |i> slices, GOOD = INDEX (weight ratio close to 1)
    intersect CLOSE (primed state close to the original).
    """
    if eps <= 0 or eps >= 1:
        raise ValueError("eps must lie in (0, 1)")
    target = la.assert_density(target)
    d = target.shape[0]
    n = len(parts)
    if len(weights) != n:
        raise ValueError("weights and parts length mismatch")
    avg = sum(w * la.as_matrix(p) for w, p in zip(weights, parts))
    hyp = la.trace_norm_distance(avg, target)
    if hyp > eps + 1e-9:
        raise ValueError(f"hypothesis distance {hyp:.3e} exceeds eps {eps}")
    quarter = eps**0.25
    # psi on A (x) (A' x C), slices along C
    psi = np.zeros((d, d, n), dtype=complex)
    for i, (w, p) in enumerate(zip(weights, parts)):
        if w <= 0:
            continue
        psi[:, :, i] = math.sqrt(w) * la.matrix_sqrt(la.assert_psd(p))
    phi = la.uhlmann_partner(psi.reshape(d, d * n).reshape(-1), target)
    phi = phi.reshape(d, d, n)
    good, primed = [], {}
    prob_good = 0.0
    max_dist = 0.0
    for i in range(n):
        w = weights[i]
        if w <= 0:
            continue
        v = phi[:, :, i]
        q = float(np.sum(np.abs(v) ** 2))
        if q <= 1e-300:
            continue
        rho_p = v @ v.conj().T / q
        in_index = abs(1.0 - w / q) <= quarter
        scaled_dist = la.trace_norm_distance(rho_p, (w / q) * la.as_matrix(parts[i]))
        in_close = scaled_dist <= quarter
        if in_index and in_close:
            good.append(i)
            primed[i] = rho_p
            prob_good += w
            max_dist = max(max_dist, la.trace_norm_distance(rho_p, la.as_matrix(parts[i])))
    bound = (1.0 + quarter) * target
    for i in good:
        bound = bound - weights[i] * primed[i]
    op_slack = float(np.linalg.eigvalsh((bound + bound.conj().T) / 2)[0])
    return GoodSetCertificate(
        good=good,
        primed=primed,
        prob_good=prob_good,
        op_slack=op_slack,
        eps_used=eps,
        measured_const=(1.0 - prob_good) / quarter,
        max_primed_distance=max_dist,
    )


def extract_good_set_transformed(
    sigmas: list[np.ndarray], weights: list[float], target: np.ndarray, eps: float
) -> GoodSetCertificate:
    """GOOD-set for subnormalized pieces via normalize-and-reweight.

    Pieces are normalized to states, weights move to w_i Tr[sigma_i], and
    the extraction runs with doubled slack (normalizing the average at most
    doubles the hypothesis distance).
    """
    traces = [float(np.trace(s).real) for s in sigmas]
    z = sum(w * t for w, t in zip(weights, traces))
    parts, new_weights = [], []
    for s, w, t in zip(sigmas, weights, traces):
        if t <= 1e-14 or w <= 0:
            parts.append(np.eye(s.shape[0], dtype=complex) / s.shape[0])
            new_weights.append(0.0)
        else:
            parts.append(la.as_matrix(s) / t)
            new_weights.append(w * t / z)
    cert = extract_good_set(parts, new_weights, target, min(2 * eps, 0.999))
    cert.scale = z
    return cert


def verify_certificate(
    cert: GoodSetCertificate,
    parts: list[np.ndarray],
    weights: list[float],
    target: np.ndarray,
    envelope_const: float = 10.0,
) -> dict[str, bool]:
    """Independent re-check of the three certificate invariants."""
    quarter = cert.eps_used**0.25
    ok_prob = cert.prob_good >= 1.0 - envelope_const * quarter
    ok_close = all(
        la.trace_norm_distance(cert.primed[i], la.as_matrix(parts[i]) / max(np.trace(parts[i]).real, 1e-300))
        <= 2 * quarter + 1e-7
        for i in cert.good
    )
    acc = (1.0 + quarter) * la.as_matrix(target)
    for i in cert.good:
        acc = acc - weights[i] * cert.primed[i]
    ok_op = float(np.linalg.eigvalsh((acc + acc.conj().T) / 2)[0]) >= -1e-8
    return {"prob_good": ok_prob, "primed_close": ok_close, "operator": ok_op}

"""Compressed POVM construction and the unassisted multi-link simulator.

Codebooks are huge (their sizes carry the additive rate constant), but all
protocol statistics depend on them only through per-block symbol counts, so
blocks are drawn as multinomial count vectors and every per-index object is
constant on a symbol class.  Indices use the canonical sorted layout: inside
a coin block, class x occupies the index range [offset(x), offset(x) + m_x);
a uniformly random codeword composed with this sorting is distributed like
the raw iid draw, and the protocol only ever touches counts and offsets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .. import covering as cov
from .. import linalg as la
from .. import qobjects as qo
from ..budget import OneShotBudget, default_log_const
from .prep import PreparedInstance, thresholds


class ProtocolError(RuntimeError):
    pass


class BudgetError(ProtocolError):
    """Requested rates fall below the instantiated thresholds."""


@dataclass
class Codebook:
    """Per-coin-block multinomial symbol counts for one axis."""

    axis: str
    coins: int  # K
    messages: int  # L
    alphabet: tuple[str, ...]
    counts: np.ndarray  # (K, |alphabet|) integer counts summing to L
    source: qo.Distribution
    seed: int

    def offsets(self, k: int) -> np.ndarray:
        return np.concatenate([[0], np.cumsum(self.counts[k])])

    def class_of_index(self, k: int, idx: int) -> int:
        return int(np.searchsorted(self.offsets(k), idx, side="right") - 1)

    def index_range(self, k: int, class_idx: int) -> tuple[int, int]:
        off = self.offsets(k)
        return int(off[class_idx]), int(off[class_idx + 1])

    def symbols_explicit(self, k: int, cap: int = 1 << 20) -> list[str]:
        if self.messages > cap:
            raise ValueError("codebook too large to materialize explicitly")
        out = []
        for i, sym in enumerate(self.alphabet):
            out.extend([sym] * int(self.counts[k][i]))
        return out


def draw_codebook(
    axis: str, coins: int, messages: int, source: qo.Distribution, seed: int
) -> Codebook:
    probs = source.probs / source.probs.sum()
    counts = np.zeros((coins, len(source.alphabet)), dtype=np.int64)
    for k in range(coins):
        rng = np.random.default_rng(
            np.random.SeedSequence(entropy=seed, spawn_key=(hash(axis) & 0xFFFF, k))
        )
        counts[k] = rng.multinomial(messages, probs)
    return Codebook(axis, coins, messages, source.alphabet, counts, source, seed)


@dataclass(frozen=True)
class CodebookPlan:
    log_k1: int
    log_l1: int
    log_k2: int
    log_l2: int
    margin: int  # retained for provenance records
    log_const: float

    @property
    def k1(self) -> int:
        return 1 << self.log_k1

    @property
    def l1(self) -> int:
        return 1 << self.log_l1

    @property
    def k2(self) -> int:
        return 1 << self.log_k2

    @property
    def l2(self) -> int:
        return 1 << self.log_l2


def plan_codebooks(
    prep: PreparedInstance,
    budget: OneShotBudget,
    log_const: float | None = None,
    validate_budget: bool = True,
) -> CodebookPlan:
    """Codebook sizes carried by the budget's link rates.

    The message space fills the wire rate plus the side-information saving;
    coins fill the coin rate.  Raises BudgetError when the implied sizes
    fall below the instantiated thresholds.
    """
    th = thresholds(prep, budget.eps, log_const)
    save_x = math.floor(max(th["ih_x_b"] - 1.0, 0.0))
    save_y = math.floor(max(th["ih_y_b"] - 1.0, 0.0))
    log_l1 = max(0, math.floor(budget.r_x + save_x + 1e-9))
    log_l2 = max(0, math.floor(budget.r_y + save_y + 1e-9))
    log_k1 = max(0, math.floor(budget.c_x + 1e-9))
    log_k2 = max(0, math.floor(budget.c_y + 1e-9))
    if len(prep.px.alphabet) <= 1:
        log_l1 = log_k1 = 0  # a constant register needs no codebook
    if len(prep.py.alphabet) <= 1:
        log_l2 = log_k2 = 0
    if validate_budget:
        if len(prep.px.alphabet) > 1 and (
            log_l1 + 1e-9 < th["logL1"] or log_k1 + log_l1 + 1e-9 < th["logKL1"]
        ):
            raise BudgetError(
                f"X link budget (R={budget.r_x}, C={budget.c_x}) below the thresholds "
                f"(logL1 > {th['logL1']:.3f}, logK1+logL1 > {th['logKL1']:.3f})"
            )
        if len(prep.py.alphabet) > 1 and (
            log_l2 + 1e-9 < th["logL2"] or log_k2 + log_l2 + 1e-9 < th["logKL2"]
        ):
            raise BudgetError(
                f"Y link budget (R={budget.r_y}, C={budget.c_y}) below the thresholds "
                f"(logL2 > {th['logL2']:.3f}, logK2+logL2 > {th['logKL2']:.3f})"
            )
    return CodebookPlan(log_k1, log_l1, log_k2, log_l2, 0, th["log_const"])


def budget_from_thresholds(
    prep: PreparedInstance,
    eps: float,
    margin: float = 2.0,
    log_const: float | None = None,
    coin_margin: float = 1.0,
) -> OneShotBudget:
    """Budget sitting ``margin`` bits above the link-rate thresholds.

    Link rates track the assisted displays (I_max - I_H + const); coin
    rates cover whatever the coin+message sum threshold still needs, plus
    ``coin_margin`` so the coin machinery is exercised.
    """
    th = thresholds(prep, eps, log_const)
    r_x = max(0.0, th["rate_x"] + margin)
    r_y = max(0.0, th["rate_y"] + margin)
    c_x = max(0.0, th["logKL1"] - th["ih_x_b"] + margin - r_x) + coin_margin
    c_y = max(0.0, th["logKL2"] - th["ih_y_b"] + margin - r_y) + coin_margin
    if len(prep.px.alphabet) <= 1:
        r_x = c_x = 0.0
    if len(prep.py.alphabet) <= 1:
        r_y = c_y = 0.0
    return OneShotBudget(eps, r_x=r_x, r_y=r_y, c_x=c_x, c_y=c_y)


@dataclass
class CompressedBlock:
    """Per-coin-block compressed POVM in class-collapsed form.

    ``gammas[c]`` is the per-index POVM element of any index in class c;
    ``counts[c]`` is how many indices of the block carry it.  The elements
    plus ``gamma0`` and the off-support completion sum to the identity.
    """

    k1: int
    k2: int
    good_classes: list[tuple[str, str]]
    gammas: dict[tuple[str, str], np.ndarray]
    counts: dict[tuple[str, str], int]
    t_weights: dict[tuple[str, str], float]
    gamma0: np.ndarray
    normalization: float
    deviation: float  # mirror-form sample-average distance of the block
    certificate: cov.GoodSetCertificate | None

    def gamma0_trace_against(self, rho_a: np.ndarray) -> float:
        return float(np.trace(self.gamma0 @ rho_a).real)


@dataclass
class CompressedFamily:
    plan: CodebookPlan
    seed: int
    attempt: int
    codebook_x: Codebook
    codebook_y: Codebook
    nice: dict[tuple[int, int], bool]
    fraction_nice: float
    blocks: dict[tuple[int, int], CompressedBlock]
    eps: float

    def completeness_residual(self, prep: PreparedInstance) -> float:
        worst = 0.0
        for blk in self.blocks.values():
            total = blk.gamma0.copy()
            for c, g in blk.gammas.items():
                total = total + blk.counts[c] * g
            worst = max(worst, float(np.max(np.abs(total - prep.supp_proj_a))))
        return worst


def _block_class_table(prep: PreparedInstance, cx: np.ndarray, cy: np.ndarray, l1: int, l2: int):
    """Per (x, y) class: multiplicity, t-weight, and mirror block."""
    xs, ys = prep.px.alphabet, prep.py.alphabet
    table = {}
    for i, x in enumerate(xs):
        for j, y in enumerate(ys):
            m = int(cx[i]) * int(cy[j])
            if m == 0:
                continue
            p_xy = prep.joint.prob(qo.join_symbol(x, y))
            px, py = prep.px.prob(x), prep.py.prob(y)
            if px * py <= 0:
                continue
            t = p_xy / (px * py)
            table[(x, y)] = (m, t)
    return table


def build_compressed_povm(
    prep: PreparedInstance,
    budget: OneShotBudget,
    seed: int,
    log_const: float | None = None,
    retry_budget: int = 20,
    validate_budget: bool = True,
) -> CompressedFamily:
    """Draw codebooks, flag nice blocks, extract GOOD sets, assemble POVMs.

    A block is nice when its measure-transformed mirror-form sample average
    sits within sqrt(eps) of rho_A in trace norm; non-nice blocks abort.
    If fewer than a 1 - eps^(1/4) fraction of blocks is nice, the draw is
    retried with the next derived seed up to ``retry_budget`` times.
    """
    eps = budget.eps
    plan = plan_codebooks(prep, budget, log_const, validate_budget)
    quarter = eps**0.25
    for attempt in range(retry_budget):
        draw_seed = seed + 1_000_003 * attempt
        cb_x = draw_codebook("X", plan.k1, plan.l1, prep.px, draw_seed)
        cb_y = draw_codebook("Y", plan.k2, plan.l2, prep.py, draw_seed + 1)
        nice: dict[tuple[int, int], bool] = {}
        blocks: dict[tuple[int, int], CompressedBlock] = {}
        for k1 in range(plan.k1):
            for k2 in range(plan.k2):
                table = _block_class_table(prep, cb_x.counts[k1], cb_y.counts[k2], plan.l1, plan.l2)
                avg = np.zeros_like(prep.rho_a)
                for (x, y), (m, t) in table.items():
                    p_xy = prep.joint.prob(qo.join_symbol(x, y))
                    if p_xy <= 1e-15:
                        continue
                    avg += (m / (plan.l1 * plan.l2)) * t * (prep.mirror_blocks[(x, y)] / p_xy)
                deviation = la.trace_norm_distance(avg, prep.rho_a)
                is_nice = deviation <= math.sqrt(eps)
                nice[(k1, k2)] = is_nice
                if not is_nice:
                    continue
                blocks[(k1, k2)] = _assemble_block(
                    prep, table, plan, k1, k2, deviation, eps
                )
        fraction = sum(nice.values()) / len(nice)
        if fraction >= 1.0 - quarter:
            return CompressedFamily(
                plan, seed, attempt, cb_x, cb_y, nice, fraction, blocks, eps
            )
    raise ProtocolError(
        f"event E failed on {retry_budget} codebook draws (nice fraction below 1 - eps^0.25)"
    )


def _assemble_block(prep, table, plan, k1, k2, deviation, eps) -> CompressedBlock:
    classes = sorted(table.keys())
    n_total = plan.l1 * plan.l2
    sigmas, weights = [], []
    for c in classes:
        m, t = table[c]
        p_xy = prep.joint.prob(qo.join_symbol(*c))
        sigmas.append(t * (prep.mirror_blocks[c] / p_xy) if p_xy > 1e-15 else 0.0 * prep.rho_a)
        weights.append(m / n_total)
    cert = cov.extract_good_set_transformed(sigmas, weights, prep.rho_a, max(deviation, 1e-9))
    inv_sq = prep.pinv_sqrt_rho_a
    raw = {}
    acc = np.zeros_like(prep.rho_a)
    for pos in cert.good:
        c = classes[pos]
        m, t = table[c]
        raw_el = (t / n_total) * (inv_sq @ cert.primed[pos] @ inv_sq)
        raw_el = (raw_el + raw_el.conj().T) / 2
        raw[c] = raw_el
        acc += m * raw_el
    # normalization: smallest factor keeping the completion PSD (measured
    # operator-inequality constant, clamped to at least 1)
    top = float(np.linalg.eigvalsh(acc)[-1]) if raw else 0.0
    norm = max(top, 1.0) * (1.0 + 1e-12)
    gammas = {c: g / norm for c, g in raw.items()}
    gamma0 = prep.supp_proj_a.copy()
    for c, g in gammas.items():
        gamma0 -= table[c][0] * g
    gamma0 = (gamma0 + gamma0.conj().T) / 2
    return CompressedBlock(
        k1=k1,
        k2=k2,
        good_classes=[classes[pos] for pos in cert.good],
        gammas=gammas,
        counts={c: table[c][0] for c in gammas},
        t_weights={c: table[c][1] for c in gammas},
        gamma0=gamma0,
        normalization=norm,
        deviation=deviation,
        certificate=cert,
    )


# ---------------------------------------------------------------------------
# unassisted simulation (exact, coin-averaged, mirror picture on E)


@dataclass(frozen=True)
class AdversaryScenario:
    x_link_on: bool
    y_link_on: bool

    def __post_init__(self):
        if not (self.x_link_on or self.y_link_on):
            raise ValueError("at least one link must be on")

    @property
    def name(self) -> str:
        if self.x_link_on and self.y_link_on:
            return "both"
        return "x_only" if self.x_link_on else "y_only"


SCENARIOS = (
    AdversaryScenario(True, True),
    AdversaryScenario(True, False),
    AdversaryScenario(False, True),
)

ABORT = qo.ABORT


def steered_env_block(prep: PreparedInstance, op_a: np.ndarray) -> np.ndarray:
    """Post-measurement E-operator of measuring ``op_a`` on A.

    With the global pure state as a matrix Psi on A x E, tracing out A makes
    the Lueders sandwich collapse to (Psi^dag op Psi)^T; trace Tr[op rho_A].
    """
    psi = prep.global_pure.reshape(prep.dim_a, prep.dim_e)
    out = (psi.conj().T @ op_a @ psi).T
    return (out + out.conj().T) / 2


def _accumulate(acc: dict[str, np.ndarray], key: str, op: np.ndarray) -> None:
    if key in acc:
        acc[key] = acc[key] + op
    else:
        acc[key] = op.copy()


def exact_output_blocks(family: CompressedFamily, prep: PreparedInstance) -> dict[str, np.ndarray]:
    """Coin-averaged protocol output: subnormalized E-operators keyed 'x|y'.

    Abort outcomes (the gamma0 element and non-nice blocks) map to the
    distinguished abort symbol on both registers and carry their full weight.
    """
    k1n, k2n = family.plan.k1, family.plan.k2
    w_blk = 1.0 / (k1n * k2n)
    out: dict[str, np.ndarray] = {}
    rho_e = steered_env_block(prep, np.eye(prep.dim_a))
    for (k1, k2), is_nice in family.nice.items():
        if not is_nice:
            _accumulate(out, qo.join_symbol(ABORT, ABORT), w_blk * rho_e)
            continue
        blk = family.blocks[(k1, k2)]
        for c, gamma in blk.gammas.items():
            op = steered_env_block(prep, gamma)
            _accumulate(out, qo.join_symbol(*c), w_blk * blk.counts[c] * op)
        _accumulate(out, qo.join_symbol(ABORT, ABORT), w_blk * steered_env_block(prep, blk.gamma0))
    return out


def ideal_blocks(prep: PreparedInstance, scenario: AdversaryScenario) -> dict[str, np.ndarray]:
    """Scenario target: steered E-blocks of the original POVM, marginalized."""
    out: dict[str, np.ndarray] = {}
    for (x, y), blk in prep.env_blocks.items():
        key = _scenario_key(qo.join_symbol(x, y), scenario)
        _accumulate(out, key, blk)
    return out


def _scenario_key(sym: str, scenario: AdversaryScenario) -> str:
    x, y = qo.split_symbol(sym)[:2]
    if scenario.x_link_on and scenario.y_link_on:
        return qo.join_symbol(x, y)
    return x if scenario.x_link_on else y


def marginalize_blocks(
    blocks: dict[str, np.ndarray], scenario: AdversaryScenario
) -> dict[str, np.ndarray]:
    out: dict[str, np.ndarray] = {}
    for sym, op in blocks.items():
        _accumulate(out, _scenario_key(sym, scenario), op)
    return out


def block_dict_distance(a: dict[str, np.ndarray], b: dict[str, np.ndarray]) -> float:
    keys = set(a) | set(b)
    dim = next(iter(a.values())).shape[0]
    zero = np.zeros((dim, dim), dtype=complex)
    return sum(la.trace_norm(a.get(k, zero) - b.get(k, zero)) for k in keys)


def sample_transcript(
    family: CompressedFamily, prep: PreparedInstance, seed: int
) -> dict[str, int | bool]:
    """One seeded protocol run: coins, measurement outcome, message indices."""
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(77,)))
    k1 = int(rng.integers(family.plan.k1))
    k2 = int(rng.integers(family.plan.k2))
    if not family.nice[(k1, k2)]:
        return {"k1": k1, "k2": k2, "l1": -1, "l2": -1, "abort": True}
    blk = family.blocks[(k1, k2)]
    classes = list(blk.gammas.keys())
    probs = np.array(
        [blk.counts[c] * np.trace(blk.gammas[c] @ prep.rho_a).real for c in classes]
    )
    p_abort = max(0.0, 1.0 - probs.sum())
    draw = rng.random() * (probs.sum() + p_abort)
    cum = 0.0
    for c, p in zip(classes, probs):
        cum += p
        if draw < cum:
            x, y = c
            xi = prep.px.alphabet.index(x)
            yi = prep.py.alphabet.index(y)
            lo1, hi1 = family.codebook_x.index_range(k1, xi)
            lo2, hi2 = family.codebook_y.index_range(k2, yi)
            return {
                "k1": k1,
                "k2": k2,
                "l1": int(rng.integers(lo1, hi1)),
                "l2": int(rng.integers(lo2, hi2)),
                "abort": False,
            }
    return {"k1": k1, "k2": k2, "l1": -1, "l2": -1, "abort": True}


def simulate_unassisted(
    prep: PreparedInstance,
    budget: OneShotBudget,
    seed: int,
    scenario: AdversaryScenario | None = None,
    family: CompressedFamily | None = None,
    log_const: float | None = None,
) -> dict:
    """Exact deviation of the compressed measurement from the scenario target.

    The output state is computed exactly as the coin-averaged mixture (the
    public coins are uniform shared randomness); the seed picks codebooks
    and the sampled transcript trajectory.
    """
    if family is None:
        family = build_compressed_povm(prep, budget, seed, log_const)
    both = exact_output_blocks(family, prep)
    scenarios = [scenario] if scenario is not None else list(SCENARIOS)
    results = {}
    for sc in scenarios:
        out = marginalize_blocks(both, sc)
        ideal = ideal_blocks(prep, sc)
        results[sc.name] = {
            "deviation": block_dict_distance(out, ideal),
            "output": out,
        }
    transcript = sample_transcript(family, prep, seed)
    return {
        "family": family,
        "scenarios": results,
        "transcript": transcript,
        "fraction_nice": family.fraction_nice,
    }
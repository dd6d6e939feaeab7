import json

import numpy as np
import pytest

from povmcomp import io, linalg as la, qobjects as qo

import oracles


def two_outcome_povm(d=2):
    p0 = np.diag([1.0, 0.0]).astype(complex)
    return qo.povm_from_elements({("0", "y"): p0, ("1", "y"): np.eye(d) - p0})


class TestPOVMValidation:
    def test_rejects_incomplete(self):
        with pytest.raises(ValueError):
            qo.povm_from_elements({("0", "0"): 0.5 * np.eye(2)})

    def test_rejects_negative_element(self):
        with pytest.raises(ValueError):
            qo.povm_from_elements(
                {("0", "0"): np.diag([1.2, 1.0]), ("1", "0"): np.diag([-0.2, 0.0])}
            )

    def test_random_generated_povms_validate(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            parts = oracles.random_povm(rng, 3, 4)
            elements = {(str(i), "0"): p for i, p in enumerate(parts)}
            povm = qo.povm_from_elements(elements)
            total = sum(povm.elements.values())
            assert np.max(np.abs(total - np.eye(3))) < 1e-8


class TestInstrument:
    def test_unitary_single_kraus(self):
        h = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
        povm = qo.instrument_to_povm(qo.Instrument({("u", "u"): h}))
        assert set(povm.elements) == {("u", "u")}
        assert np.allclose(povm.elements["u", "u"], np.eye(2))

    def test_projective_kraus(self):
        inst = qo.Instrument(
            {("0", "y"): np.diag([1.0, 0.0]).astype(complex),
             ("1", "y"): np.diag([0.0, 1.0]).astype(complex)}
        )
        povm = qo.instrument_to_povm(inst)
        assert np.allclose(povm.elements["0", "y"], np.diag([1.0, 0.0]))
        assert np.allclose(povm.elements["1", "y"], np.diag([0.0, 1.0]))
        assert (qo.ABORT, qo.ABORT) not in povm.elements

    def test_deficit_completion(self):
        rng = np.random.default_rng(1)
        k0 = 0.6 * (rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2)))
        k0 /= np.linalg.norm(k0, 2) * 1.5
        k1 = 0.4 * (rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2)))
        k1 /= np.linalg.norm(k1, 2) * 1.5
        inst = qo.Instrument({("0", "a"): k0, ("1", "b"): k1})
        povm = qo.instrument_to_povm(inst)
        assert (qo.ABORT, qo.ABORT) in povm.elements
        total = sum(povm.elements.values())
        assert np.max(np.abs(total - np.eye(2))) < 1e-8

    def test_exceeding_identity_rejected(self):
        with pytest.raises(ValueError):
            qo.Instrument({("0", "0"): 1.2 * np.eye(2, dtype=complex)})


class TestInducedDistribution:
    def test_single_outcome(self):
        povm = qo.povm_from_elements({("x", "y"): np.eye(2, dtype=complex)})
        dist = qo.induced_distribution(povm, np.eye(2) / 2)
        assert dist.as_dict() == {"x|y": 1.0}

    def test_computational_basis(self):
        dist = qo.induced_distribution(two_outcome_povm(), np.diag([0.3, 0.7]).astype(complex))
        assert np.isclose(dist.prob("0|y"), 0.3)
        assert np.isclose(dist.prob("1|y"), 0.7)

    def test_random_qutrit_vs_trace_oracle(self):
        rng = np.random.default_rng(2)
        parts = oracles.random_povm(rng, 3, 3)
        povm = qo.povm_from_elements({(str(i), "0"): p for i, p in enumerate(parts)})
        rho = oracles.random_density(rng, 3)
        dist = qo.induced_distribution(povm, rho)
        for i, p in enumerate(parts):
            assert np.isclose(dist.prob(f"{i}|0"), np.trace(p @ rho).real, atol=1e-10)
        assert np.isclose(dist.probs.sum(), 1.0, atol=1e-12)

    def test_dim_mismatch(self):
        with pytest.raises(ValueError):
            qo.induced_distribution(two_outcome_povm(), np.eye(3) / 3)

    def test_marginal_element_identity(self):
        rng = np.random.default_rng(3)
        parts = oracles.random_povm(rng, 2, 4)
        elements = {
            ("0", "0"): parts[0], ("0", "1"): parts[1],
            ("1", "0"): parts[2], ("1", "1"): parts[3],
        }
        povm = qo.povm_from_elements(elements)
        rho = oracles.random_density(rng, 2)
        joint = qo.induced_distribution(povm, rho)
        mx = qo.marginal_x(joint)
        for x in ("0", "1"):
            direct = np.trace(povm.marginal_x_element(x) @ rho).real
            assert abs(mx.prob(x) - direct) < 1e-12


class TestPostMeasurementCQ:
    def test_single_outcome_block_is_rho(self):
        rng = np.random.default_rng(4)
        rho = oracles.random_density(rng, 3)
        povm = qo.povm_from_elements({("x", "y"): np.eye(3, dtype=complex)})
        cq = qo.post_measurement_cq(povm, rho)
        assert np.allclose(cq.blocks["x|y"], rho)

    def test_basis_povm_on_diagonal_state(self):
        rho = np.diag([0.2, 0.8]).astype(complex)
        cq = qo.post_measurement_cq(two_outcome_povm(), rho)
        assert np.isclose(cq.weights["0|y"], 0.2)
        assert np.allclose(cq.blocks["0|y"], np.diag([1.0, 0.0]))
        assert np.allclose(cq.blocks["1|y"], np.diag([0.0, 1.0]))

    def test_total_trace_one(self):
        rng = np.random.default_rng(5)
        parts = oracles.random_povm(rng, 2, 4)
        povm = qo.povm_from_elements({(str(i), "0"): p for i, p in enumerate(parts)})
        rho = oracles.random_density(rng, 2)
        cq = qo.post_measurement_cq(povm, rho)
        mass = sum(cq.weights[s] * np.trace(cq.blocks[s]).real for s in cq.symbols)
        assert abs(mass - 1.0) < 1e-9

    def test_classical_marginal_matches_induced(self):
        rng = np.random.default_rng(6)
        parts = oracles.random_povm(rng, 2, 3)
        povm = qo.povm_from_elements({(str(i), "0"): p for i, p in enumerate(parts)})
        lay = la.layout(("A", 2), ("B", 2), ("R", 1))
        rho = oracles.random_density(rng, 4)
        cq = qo.post_measurement_cq(povm, rho, lay, keep=("B",))
        dist = qo.induced_distribution(povm, la.partial_trace(rho, lay, ["A"]))
        for s in cq.symbols:
            assert abs(cq.weights[s] - dist.prob(s)) < 1e-10

    def test_steered_b_block_via_cyclicity(self):
        # tracing out A makes sqrt(el) rho sqrt(el) equal to el rho under Tr_A
        rng = np.random.default_rng(7)
        parts = oracles.random_povm(rng, 2, 2)
        povm = qo.povm_from_elements({(str(i), "0"): p for i, p in enumerate(parts)})
        lay = la.layout(("A", 2), ("B", 2), ("R", 1))
        rho = oracles.random_density(rng, 4)
        blocks = qo.steered_blocks(povm, rho, lay, keep=("B",))
        for i, p in enumerate(parts):
            direct = oracles.partial_trace_oracle(
                oracles.kron_oracle(p, np.eye(2)) @ rho, [2, 2], [1]
            )
            assert np.max(np.abs(blocks[(str(i), "0")] - direct)) < 1e-10


class TestCQState:
    def test_group_symbols(self):
        rng = np.random.default_rng(8)
        b0, b1 = oracles.random_density(rng, 2), oracles.random_density(rng, 2)
        cq = qo.CQState(
            ("a|0", "a|1", "b|0"),
            {"a|0": 0.25, "a|1": 0.25, "b|0": 0.5},
            {"a|0": b0, "a|1": b1, "b|0": b0},
        )
        grouped = cq.group_symbols(lambda s: qo.split_symbol(s)[0])
        assert grouped.symbols == ("a", "b")
        assert np.isclose(grouped.weights["a"], 0.5)
        assert np.allclose(grouped.blocks["a"], (b0 + b1) / 2)

    def test_dense_layout(self):
        cq = qo.CQState(
            ("u", "v"),
            {"u": 0.5, "v": 0.5},
            {"u": np.eye(2, dtype=complex) / 2, "v": np.diag([1.0, 0.0]).astype(complex)},
        )
        dense = cq.dense()
        assert dense.shape == (4, 4)
        assert np.isclose(np.trace(dense).real, 1.0)


class TestInstanceIO:
    def test_round_trip_bytes(self, tmp_path):
        rng = np.random.default_rng(9)
        parts = oracles.random_povm(rng, 2, 2)
        inst = io.Instance(
            {"A": 2, "B": 1, "R": 1},
            oracles.random_density(rng, 2),
            qo.povm_from_elements({("0", "0"): parts[0], ("1", "0"): parts[1]}),
        )
        path = tmp_path / "inst.json"
        io.save_instance(inst, path)
        first = path.read_bytes()
        loaded = io.load_instance(path)
        io.save_instance(loaded, path)
        assert path.read_bytes() == first

    def test_invalid_state_rejected(self, tmp_path):
        payload = {
            "dims": {"A": 2, "B": 1, "R": 1},
            "state": io.matrix_to_json(np.diag([0.7, 0.7])),
            "povm": {
                "alphabetX": ["0", "1"],
                "alphabetY": ["0"],
                "elements": {
                    "0|0": io.matrix_to_json(np.diag([1.0, 0.0])),
                    "1|0": io.matrix_to_json(np.diag([0.0, 1.0])),
                },
            },
        }
        path = tmp_path / "bad.json"
        path.write_text(json.dumps(payload))
        with pytest.raises(ValueError):
            io.load_instance(path)

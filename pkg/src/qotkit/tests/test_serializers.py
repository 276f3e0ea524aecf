import json
import os
import tempfile

import numpy as np
from django.test import SimpleTestCase

from qotkit.channels import KrausChannel, random_channel
from qotkit.classical import Distribution, hamming_cost
from qotkit.conic import SolveStatus
from qotkit.exceptions import InputFormatError, NotADensityOperator, QotkitError
from qotkit.serializers import (
    ChannelFile,
    QotkitJSONEncoder,
    StateFile,
    build_report,
    decode_complex_array,
    digest,
    encode_complex_array,
    load_channel,
    load_distribution,
    load_json,
    load_metric,
    load_observable,
    load_quadratic_cost,
    load_state,
    state_inputs,
    write_json,
)
from qotkit.states import DensityOperator, Observable, purify, random_state


class FileTestCase(SimpleTestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)

    def path(self, name):
        return os.path.join(self.tmp.name, name)

    def write(self, name, obj):
        path = self.path(name)
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(obj if isinstance(obj, str) else json.dumps(obj))
        return path


class TestComplexArrays(SimpleTestCase):
    def test_encoding(self):
        A = np.array([[1, 1j], [-1j, 2]])
        self.assertEqual(encode_complex_array(A)[0][1], [0.0, 1.0])
        self.assertTrue(np.array_equal(decode_complex_array(encode_complex_array(A), 2), A))

    def test_bad_data(self):
        with self.assertRaises(InputFormatError):
            decode_complex_array([[1, 2, 3]], 1)
        with self.assertRaises(InputFormatError):
            decode_complex_array("abc", 2)
        with self.assertRaises(InputFormatError):
            decode_complex_array([[[0, 0]], [[0, 0], [0, 0]]], 2)

    def test_encoder(self):
        data = {"a": np.int64(3), "b": np.float32(0.5), "c": 1 + 2j, "d": np.eye(2)}
        decoded = json.loads(json.dumps(data, cls=QotkitJSONEncoder))
        self.assertEqual(decoded, {"a": 3, "b": 0.5, "c": [1.0, 2.0], "d": [[1.0, 0.0], [0.0, 1.0]]})


class TestStateFiles(FileTestCase):
    def test_round_trip(self):
        rho = random_state([2, 2], seed=0)
        path = self.path("rho.json")
        StateFile.from_object(rho).dump(path)
        loaded = load_state(path)
        self.assertEqual(loaded.shape.dims, (2, 2))
        self.assertTrue(np.allclose(loaded.mat, rho.mat))

    def test_pure_state_loads_as_density(self):
        path = self.path("psi.json")
        StateFile.from_object(purify(DensityOperator.maximally_mixed(2))).dump(path)
        rho = load_state(path)
        self.assertEqual(rho.rank, 1)
        with self.assertRaises(InputFormatError):
            load_observable(path)

    def test_observable(self):
        path = self.path("obs.json")
        StateFile.from_object(Observable.pauli("ZX")).dump(path)
        self.assertTrue(np.allclose(load_observable(path).mat, Observable.pauli("ZX").mat))
        with self.assertRaises(InputFormatError):
            load_state(path)

    def test_format_errors(self):
        good = StateFile.from_object(DensityOperator.maximally_mixed(2)).to_dict()
        for broken in (
            {**good, "kind": "matrix"},
            {**good, "dims": []},
            {**good, "dims": [3]},
            {**good, "dims": [2.5]},
            {key: val for key, val in good.items() if key != "data"},
            [good],
        ):
            with self.assertRaises(InputFormatError):
                StateFile.from_dict(broken)

    def test_non_finite_entries(self):
        density = self.write(
            "nan_density.json",
            '{"kind": "density", "dims": [2], "data": [[[NaN, 0], [0, 0]], [[0, 0], [0.5, 0]]]}',
        )
        pure = self.write("nan_pure.json", '{"kind": "pure", "dims": [2], "data": [[NaN, 0], [1, 0]]}')
        for path in (density, pure):
            with self.assertRaises(QotkitError):
                load_state(path)

    def test_invalid_state_propagates(self):
        data = StateFile("density", (2,), np.diag([2.0, -1.0]).astype(complex))
        with self.assertRaises(NotADensityOperator):
            data.to_object()

    def test_json_errors(self):
        with self.assertRaises(InputFormatError):
            load_json(self.path("missing.json"))
        with self.assertRaises(InputFormatError):
            load_json(self.write("bad.json", "{not json"))


class TestOtherFiles(FileTestCase):
    def test_channel(self):
        channel = random_channel(2, 2, 2, seed=1)
        path = self.path("channel.json")
        ChannelFile.from_channel(channel).dump(path)
        self.assertTrue(np.allclose(load_channel(path).choi(), channel.choi()))

    def test_channel_errors(self):
        good = ChannelFile.from_channel(KrausChannel.identity(2)).to_dict()
        for broken in ({**good, "kind": "map"}, {**good, "dimIn": 3}, {**good, "kraus": []}, {**good, "dimOut": 0}):
            with self.assertRaises(InputFormatError):
                ChannelFile.from_dict(broken)
        not_tp = {**good, "kraus": [encode_complex_array(np.eye(2) * 2)]}
        with self.assertRaises(QotkitError):
            ChannelFile.from_dict(not_tp).to_channel()

    def test_quadratic_cost(self):
        entry = StateFile.from_object(Observable.pauli("Z")).to_dict()
        cost = load_quadratic_cost(self.write("cost.json", [entry]))
        self.assertTrue(np.allclose(cost.operator.mat, np.diag([0, 4, 4, 0])))
        empty = load_quadratic_cost(self.write("empty.json", {"kind": "quadraticCost", "dim": 2, "observables": []}))
        self.assertEqual(empty.dim, 2)
        with self.assertRaises(InputFormatError):
            load_quadratic_cost(self.write("none.json", []))
        state = StateFile.from_object(DensityOperator.maximally_mixed(2)).to_dict()
        with self.assertRaises(InputFormatError):
            load_quadratic_cost(self.write("state.json", [state]))

    def test_distribution_and_metric(self):
        p = load_distribution(self.write("p.json", [0.25, 0.75]))
        self.assertTrue(np.allclose(p.probs, [0.25, 0.75]))
        q = load_distribution(self.write("q.json", {"kind": "distribution", "probs": [1, 0]}))
        self.assertEqual(q.size, 2)
        with self.assertRaises(InputFormatError):
            load_distribution(self.write("r.json", [[0.5], [0.5]]))
        with self.assertRaises(QotkitError):
            load_distribution(self.write("s.json", [0.5, 0.6]))
        metric = load_metric(self.write("m.json", {"kind": "metric", "matrix": [[0, 1], [1, 0]]}))
        self.assertEqual(metric.shape, (2, 2))
        with self.assertRaises(InputFormatError):
            load_metric(self.write("n.json", [0, 1]))


class TestReports(FileTestCase):
    def test_digest(self):
        self.assertEqual(digest({"a": 1, "b": [2, 3]}), digest({"b": [2, 3], "a": 1}))
        self.assertNotEqual(digest({"a": 1}), digest({"a": 2}))
        inputs = state_inputs(DensityOperator.maximally_mixed(2), Distribution.uniform(4), hamming_cost(2))
        self.assertEqual(digest(inputs), digest(state_inputs(
            DensityOperator.maximally_mixed(2), Distribution.uniform(4), hamming_cost(2)
        )))

    def test_build_report(self):
        report = build_report("w1", [1], float("inf"), SolveStatus.OPTIMAL, witness=None, seed=3)
        self.assertEqual(report["status"], "Optimal")
        self.assertIsNone(report["value"])
        self.assertNotIn("witness", report)
        self.assertEqual(report["seed"], 3)
        self.assertEqual(set(report), {"command", "inputsDigest", "value", "status", "seed"})

    def test_write_json(self):
        path = self.path("report.json")
        write_json(path, {"b": np.float64(1.5), "a": np.arange(2)})
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
        self.assertTrue(text.endswith("\n"))
        self.assertLess(text.index('"a"'), text.index('"b"'))
        self.assertEqual(json.loads(text), {"a": [0, 1], "b": 1.5})

    def test_unknown_input(self):
        with self.assertRaises(QotkitError):
            state_inputs(object())

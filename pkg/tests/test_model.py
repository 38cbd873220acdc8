import json

import numpy as np
import pytest

from snnkit.errors import ModelFormatError, ValidationError
from snnkit.model import (
    Conv2dSpec,
    FlattenSpec,
    LifSpec,
    LinearSpec,
    Network,
    load_model,
    save_model,
    validate,
)
from snnkit.tensor import Shape, Tensor

from conftest import build_conv_arch_net

MINIMAL = json.dumps({
    "format_version": 1,
    "input_shape": [1, 1, 1],
    "num_steps": 1,
    "layers": [{"type": "lif", "beta": 0.5, "threshold": 1.0, "reset": "subtract"}],
})


def doc(**overrides):
    base = json.loads(MINIMAL)
    base.update(overrides)
    return json.dumps(base)


class TestLoad:
    def test_minimal_document(self):
        net = load_model(MINIMAL)
        assert len(net.layers) == 1
        assert isinstance(net.layers[0], LifSpec)
        assert net.layers[0].beta == 0.5
        assert net.input_shape.dims == (1, 1, 1)
        assert net.num_steps == 1

    def test_conv_arch_fixture_has_nine_layers(self):
        net = load_model(save_model(build_conv_arch_net()))
        assert len(net.layers) == 9
        kinds = [layer.kind for layer in net.layers]
        assert kinds == [
            "conv2d", "lif", "maxpool2d",
            "conv2d", "lif", "maxpool2d",
            "flatten", "linear", "lif",
        ]

    def test_lif_defaults(self):
        net = load_model(doc(layers=[{"type": "lif", "beta": 0.25}]))
        assert net.layers[0].threshold == 1.0
        assert net.layers[0].reset_mode == "subtract"

    def test_malformed_json_reports_location(self):
        with pytest.raises(ModelFormatError, match="line"):
            load_model("{not json")

    def test_wrong_weight_count_names_layer(self):
        layers = [
            {"type": "conv2d", "in_channels": 1, "out_channels": 2,
             "kernel": [3, 3], "stride": [1, 1], "padding": [0, 0],
             "weights": [0.0] * 17, "bias": [0.0, 0.0]},
            {"type": "lif", "beta": 0.5},
        ]
        with pytest.raises(ModelFormatError, match=r"layer 0.*weights.*17.*18"):
            load_model(doc(input_shape=[1, 5, 5], layers=layers))

    def test_unknown_layer_type(self):
        with pytest.raises(ModelFormatError, match="unknown layer type"):
            load_model(doc(layers=[{"type": "dropout"}]))

    def test_unknown_field_rejected(self):
        with pytest.raises(ModelFormatError, match="unknown field"):
            load_model(doc(layers=[{"type": "lif", "beta": 0.5, "tau": 2.0}]))

    def test_unknown_top_field_rejected(self):
        with pytest.raises(ModelFormatError, match="unknown field"):
            load_model(doc(extra=1))

    def test_format_version_gate(self):
        with pytest.raises(ModelFormatError, match="format_version"):
            load_model(doc(format_version=2))

    def test_non_finite_weight_rejected(self):
        layers = [
            {"type": "linear", "in_features": 1, "out_features": 1,
             "weights": [1e39], "bias": [0.0]},
            {"type": "lif", "beta": 0.5},
        ]
        with pytest.raises(ModelFormatError, match="non-finite"):
            load_model(doc(layers=layers))

    def test_nan_literal_rejected(self):
        bad = MINIMAL.replace("0.5", "NaN")
        with pytest.raises(ModelFormatError):
            load_model(bad)

    def test_bad_beta_rejected(self):
        with pytest.raises(ModelFormatError, match="beta"):
            load_model(doc(layers=[{"type": "lif", "beta": 1.5}]))

    def test_bool_not_accepted_as_number(self):
        with pytest.raises(ModelFormatError):
            load_model(doc(num_steps=True))


class TestRoundTrip:
    def test_save_load_save_is_byte_identical(self):
        text = save_model(build_conv_arch_net())
        assert save_model(load_model(text)) == text

    def test_awkward_float32_values_survive(self):
        values = [0.1, -1.0 / 3.0, 1e-30, 3.4e38, 6.1e-5, 1.0000001]
        w = Tensor.from_array(np.array(values + [0.0] * 2, dtype=np.float32).reshape(1, 8))
        net = Network(Shape((1, 2, 4)), 1, [
            FlattenSpec(),
            LinearSpec(8, 1, w, Tensor.from_array(np.array([np.float32(0.30000001)]))),
            LifSpec(0.5),
        ])
        again = load_model(save_model(net))
        assert np.array_equal(again.layers[1].weights.data, w.data)

    def test_empty_layer_network_round_trips(self):
        net = Network(Shape((1, 2, 2)), 3, [])
        text = save_model(net)
        again = load_model(text)
        assert again.layers == []
        assert save_model(again) == text

    def test_pruned_network_serializes_reduced_channels(self, toy_filter_net, toy_drive):
        from snnkit.pruning import profile_spikes, prune_network, select_prunable

        profile = profile_spikes(toy_filter_net, [toy_drive])
        plan = select_prunable(profile, toy_filter_net, 0)
        pruned = prune_network(toy_filter_net, plan)
        again = load_model(save_model(pruned))
        assert again.layers[0].out_channels == 2


class TestValidate:
    def test_conv_shape_formula(self):
        net = build_conv_arch_net()
        trace = validate(net)
        assert trace[0] == ((2, 34, 34), (12, 30, 30))
        assert trace[2] == ((12, 30, 30), (12, 15, 15))
        assert trace[7][1] == (10,)  # ends in the 10-class readout

    def test_linear_feature_mismatch_names_layer(self):
        layers = [
            {"type": "flatten"},
            {"type": "linear", "in_features": 5, "out_features": 2,
             "weights": [0.0] * 10, "bias": [0.0, 0.0]},
            {"type": "lif", "beta": 0.5},
        ]
        with pytest.raises(ValidationError, match="layer 1"):
            load_model(doc(input_shape=[1, 2, 2], layers=layers))

    def test_channel_mismatch_names_both(self):
        rng = np.random.default_rng(0)
        net = Network(Shape((3, 8, 8)), 1, [
            Conv2dSpec(2, 4, (3, 3), (1, 1), (0, 0),
                       Tensor.from_array(rng.normal(size=(4, 2, 3, 3)).astype(np.float32)),
                       Tensor.zeros(Shape((4,)))),
            LifSpec(0.5),
        ])
        with pytest.raises(ValidationError, match="layer 0.*3 channels.*expects 2"):
            validate(net)

    def test_final_layer_must_be_lif(self):
        net = Network(Shape((1, 2, 2)), 1, [FlattenSpec()])
        with pytest.raises(ValidationError, match="final layer"):
            validate(net)

    def test_kernel_larger_than_input(self):
        rng = np.random.default_rng(0)
        net = Network(Shape((1, 2, 2)), 1, [
            Conv2dSpec(1, 1, (3, 3), (1, 1), (0, 0),
                       Tensor.from_array(rng.normal(size=(1, 1, 3, 3)).astype(np.float32)),
                       Tensor.zeros(Shape((1,)))),
            LifSpec(0.5),
        ])
        with pytest.raises(ValidationError, match="kernel larger"):
            validate(net)

#!/usr/bin/env python3
"""Regenerates the model fixtures in this directory.

Every model is built with the reference `onnx` Python package (opset 13),
checked with `onnx.checker`, and serialized with its protobuf writer. For each
model we also write:

  <name>.json           JSON twin in the orpheus model format (same weights)
  <name>.io.json        one seeded input and the output computed by
                        `onnx.reference.ReferenceEvaluator`
                        (with an inference-mode BatchNormalization)

Usage: python3 gen_fixtures.py   (requires `pip install onnx numpy`)
"""

import json
import os

import numpy as np
import onnx
from onnx import TensorProto, helper, numpy_helper
from onnx.reference import ReferenceEvaluator
from onnx.reference.op_run import OpRun

OPSET = 13
HERE = os.path.dirname(os.path.abspath(__file__))


class BatchNormalization(OpRun):
    """Inference-mode BatchNormalization (running statistics).

    The stock reference kernel for opsets 9-13 always receives the default
    momentum and therefore normalizes with batch statistics.
    """

    op_domain = ""

    def _run(self, x, scale, bias, mean, var, epsilon=1e-5, momentum=None, training_mode=None):
        shape = (-1,) + (1,) * (x.ndim - 2)
        y = scale.reshape(shape) * (x - mean.reshape(shape)) / np.sqrt(var.reshape(shape) + epsilon)
        return ((y + bias.reshape(shape)).astype(x.dtype),)


def evaluate(model, feeds):
    return ReferenceEvaluator(model, new_ops=[BatchNormalization]).run(None, feeds)


class Builder:
    def __init__(self, name, seed):
        self.name = name
        self.rng = np.random.default_rng(seed)
        self.nodes = []
        self.inits = []
        self.json_nodes = []
        self.json_inits = []

    def weight(self, name, shape, scale=0.5, positive=False, as_float_data=False, data_file=False):
        arr = self.rng.uniform(-scale, scale, size=shape).astype(np.float32)
        if positive:
            arr = (np.abs(arr) + 0.5).astype(np.float32)
        return self.const(name, arr, as_float_data, data_file)

    def const(self, name, arr, as_float_data=False, data_file=False):
        arr = np.asarray(arr, dtype=np.float32)
        if as_float_data:
            t = helper.make_tensor(name, TensorProto.FLOAT, arr.shape, arr.flatten().tolist(), raw=False)
        else:
            t = numpy_helper.from_array(arr, name)
        self.inits.append(t)
        entry = {"name": name, "shape": list(arr.shape)}
        if data_file:
            fname = f"{self.name}.{name}.bin"
            arr.astype("<f4").tofile(os.path.join(HERE, fname))
            entry["data_file"] = fname
        else:
            entry["data"] = [float(v) for v in arr.flatten()]
        self.json_inits.append(entry)
        return name

    def node(self, op, inputs, outputs, name, onnx_extra_inputs=(), json_attrs=None, **attrs):
        self.nodes.append(
            helper.make_node(op, list(inputs) + list(onnx_extra_inputs), outputs, name=name, **attrs)
        )
        self.json_nodes.append(
            {
                "name": name,
                "op": op,
                "inputs": list(inputs),
                "outputs": list(outputs),
                "attrs": json_attrs if json_attrs is not None else {k: v for k, v in attrs.items()},
            }
        )
        return outputs[0]

    def conv(self, name, x, cin, cout, k, stride=1, pad=0, group=1, bias=True):
        w = self.weight(f"{name}_w", (cout, cin // group, k, k))
        ins = [x, w]
        if bias:
            ins.append(self.weight(f"{name}_b", (cout,), scale=0.1))
        return self.node(
            "Conv", ins, [f"{name}_out"], name,
            kernel_shape=[k, k], strides=[stride, stride], pads=[pad] * 4, group=group,
        )

    def bn(self, name, x, c, epsilon=1e-5):
        ins = [
            x,
            self.weight(f"{name}_scale", (c,), positive=True),
            self.weight(f"{name}_bias", (c,), scale=0.2),
            self.weight(f"{name}_mean", (c,), scale=0.2),
            self.weight(f"{name}_var", (c,), positive=True),
        ]
        return self.node("BatchNormalization", ins, [f"{name}_out"], name, epsilon=epsilon)

    def relu(self, name, x):
        return self.node("Relu", [x], [f"{name}_out"], name)

    def finish(self, in_name, in_shape, out_name, rename_out="y"):
        # rename the final value to a stable graph output name
        last = self.nodes[-1]
        assert last.output[0] == out_name
        last.output[0] = rename_out
        self.json_nodes[-1]["outputs"][0] = rename_out

        def build(out_shape):
            graph = helper.make_graph(
                self.nodes,
                self.name,
                [helper.make_tensor_value_info(in_name, TensorProto.FLOAT, in_shape)],
                [helper.make_tensor_value_info(rename_out, TensorProto.FLOAT, out_shape)],
                initializer=self.inits,
            )
            model = helper.make_model(
                graph, producer_name="orpheus-fixtures", opset_imports=[helper.make_opsetid("", OPSET)]
            )
            model.ir_version = 8
            return model

        x = self.rng.uniform(-1, 1, size=in_shape).astype(np.float32)
        (y,) = evaluate(build(None), {in_name: x})
        model = build(list(y.shape))
        onnx.checker.check_model(model, full_check=True)
        path = os.path.join(HERE, f"{self.name}.onnx")
        onnx.save(model, path)

        twin = {
            "name": self.name,
            "inputs": [{"name": in_name, "shape": list(in_shape)}],
            "outputs": [rename_out],
            "nodes": self.json_nodes,
            "initializers": self.json_inits,
        }
        with open(os.path.join(HERE, f"{self.name}.json"), "w") as f:
            json.dump(twin, f, indent=1)

        io = {
            "input": {"name": in_name, "shape": list(x.shape), "data": [float(v) for v in x.flatten()]},
            "output": {"name": rename_out, "shape": list(y.shape), "data": [float(v) for v in y.flatten()]},
        }
        with open(os.path.join(HERE, f"{self.name}.io.json"), "w") as f:
            json.dump(io, f)
        return model


def conv_bn_relu():
    b = Builder("conv_bn_relu", 1)
    h = b.conv("conv1", "x", 3, 4, 3, pad=1)
    h = b.bn("bn1", h, 4)
    h = b.relu("relu1", h)
    b.finish("x", (1, 3, 8, 8), h)


def residual_block():
    b = Builder("residual_block", 2)
    h = b.conv("conv1", "x", 4, 4, 3, pad=1, bias=False)
    h = b.bn("bn1", h, 4)
    h = b.relu("relu1", h)
    h = b.conv("conv2", h, 4, 4, 3, pad=1, bias=False)
    h = b.bn("bn2", h, 4)
    h = b.node("Add", [h, "x"], ["sum"], "add")
    h = b.relu("relu2", h)
    b.finish("x", (1, 4, 8, 8), h)


def depthwise_separable():
    b = Builder("depthwise_separable", 3)
    h = b.conv("dw", "x", 4, 4, 3, pad=1, group=4)
    h = b.bn("dw_bn", h, 4)
    h = b.relu("dw_relu", h)
    h = b.conv("pw", h, 4, 8, 1)
    h = b.bn("pw_bn", h, 8)
    h = b.relu("pw_relu", h)
    b.finish("x", (1, 4, 8, 8), h)


def inception_block():
    b = Builder("inception_block", 4)
    b1 = b.relu("b1_relu", b.conv("b1_conv", "x", 4, 2, 1))
    b2 = b.relu("b2_relu", b.conv("b2_conv", "x", 4, 3, 3, pad=1))
    p = b.node("MaxPool", ["x"], ["pool_out"], "b3_pool", kernel_shape=[3, 3], strides=[1, 1], pads=[1, 1, 1, 1])
    b3 = b.conv("b3_conv", p, 4, 2, 1)
    b3 = b.node("Identity", [b3], ["b3_id"], "b3_identity")
    c = b.node("Concat", [b1, b2, b3], ["cat"], "concat", axis=1)
    c = b.node("AveragePool", [c], ["avg"], "avg", kernel_shape=[2, 2], strides=[2, 2])
    b.finish("x", (1, 4, 8, 8), c)


def classifier():
    b = Builder("classifier", 5)
    h = b.conv("stem", "x", 3, 4, 3, stride=2, pad=1)
    h = b.bn("stem_bn", h, 4)
    h = b.relu("stem_relu", h)
    h = b.node("GlobalAveragePool", [h], ["gap"], "gap")
    h = b.node("Flatten", [h], ["flat"], "flatten", axis=1)
    w = b.weight("fc_w", (10, 4), as_float_data=True, data_file=True)
    bias = b.weight("fc_b", (10,), scale=0.1, as_float_data=True)
    h = b.node("Gemm", [h, w, bias], ["logits"], "fc", transB=1)
    h = b.node("Softmax", [h], ["prob"], "softmax", axis=1)
    b.finish("x", (1, 3, 8, 8), h)


def pool_reshape_head():
    b = Builder("pool_reshape_head", 6)
    h = b.node("AveragePool", ["x"], ["avg"], "avg", kernel_shape=[2, 2], strides=[2, 2])
    shape = numpy_helper.from_array(np.array([1, -1], dtype=np.int64), "flat_shape")
    b.inits.append(shape)
    h = b.node("Reshape", [h], ["flat"], "reshape", onnx_extra_inputs=["flat_shape"], json_attrs={"shape": [1, -1]})
    w = b.weight("fc_w", (8, 5))
    bias = b.weight("fc_b", (5,), scale=0.1)
    h = b.node("Gemm", [h, w, bias], ["fc"], "fc")
    h = b.relu("fc_relu", h)
    b.finish("x", (1, 2, 4, 4), h)


def tiny_conv():
    b = Builder("tiny_conv", 7)
    h = b.conv("conv", "x", 1, 1, 3, pad=1)
    b.finish("x", (1, 1, 4, 4), h)


def identity():
    b = Builder("identity", 8)
    h = b.node("Identity", ["x"], ["id"], "id")
    b.finish("x", (1, 2, 3, 3), h)


def relu_only():
    b = Builder("relu_only", 9)
    h = b.relu("r", "x")
    b.finish("x", (1, 4), h)


def onnx_to_twin(model, in_name, in_shape):
    """Builds the JSON twin of an arbitrary float32 model using only the onnx package."""
    g = model.graph
    nodes = []
    for n in g.node:
        attrs = {}
        for a in n.attribute:
            v = helper.get_attribute_value(a)
            if isinstance(v, bytes):
                v = v.decode()
            elif isinstance(v, list):
                v = [int(e) if isinstance(e, int) else float(e) for e in v]
            elif isinstance(v, float):
                v = float(v)
            attrs[a.name] = v
        nodes.append(
            {"name": n.name, "op": n.op_type, "inputs": list(n.input), "outputs": list(n.output), "attrs": attrs}
        )
    inits = []
    for t in g.initializer:
        arr = numpy_helper.to_array(t)
        inits.append({"name": t.name, "shape": list(arr.shape), "data": [float(v) for v in arr.flatten()]})
    return {
        "name": g.name,
        "inputs": [{"name": in_name, "shape": list(in_shape)}],
        "outputs": [o.name for o in g.output],
        "nodes": nodes,
        "initializers": inits,
    }


def torch_convnet():
    """A model produced by the PyTorch (TorchScript) ONNX exporter rather than onnx.helper."""
    import torch
    import torch.nn as nn

    torch.manual_seed(10)
    net = nn.Sequential(
        nn.Conv2d(3, 8, 3, padding=1),
        nn.BatchNorm2d(8),
        nn.ReLU(),
        nn.MaxPool2d(2),
        nn.Flatten(),
        nn.Linear(8 * 4 * 4, 10),
    )
    with torch.no_grad():
        net[1].running_mean.uniform_(-0.2, 0.2)
        net[1].running_var.uniform_(0.5, 1.5)
        net[1].weight.uniform_(0.5, 1.5)
        net[1].bias.uniform_(-0.2, 0.2)
    net.eval()
    in_shape = (1, 3, 8, 8)
    path = os.path.join(HERE, "torch_convnet.onnx")
    torch.onnx.export(
        net, (torch.zeros(in_shape),), path, dynamo=False, opset_version=OPSET,
        training=torch.onnx.TrainingMode.PRESERVE, do_constant_folding=False,
        input_names=["x"], output_names=["y"],
    )
    model = onnx.load(path)
    model.graph.name = "torch_convnet"
    onnx.save(model, path)
    onnx.checker.check_model(model, full_check=True)
    with open(os.path.join(HERE, "torch_convnet.json"), "w") as f:
        json.dump(onnx_to_twin(model, "x", in_shape), f, indent=1)

    rng = np.random.default_rng(10)
    x = rng.uniform(-1, 1, size=in_shape).astype(np.float32)
    (y,) = evaluate(model, {"x": x})
    io = {
        "input": {"name": "x", "shape": list(x.shape), "data": [float(v) for v in x.flatten()]},
        "output": {"name": "y", "shape": list(y.shape), "data": [float(v) for v in y.flatten()]},
    }
    with open(os.path.join(HERE, "torch_convnet.io.json"), "w") as f:
        json.dump(io, f)


def main():
    conv_bn_relu()
    residual_block()
    depthwise_separable()
    inception_block()
    classifier()
    pool_reshape_head()
    tiny_conv()
    identity()
    relu_only()
    torch_convnet()


if __name__ == "__main__":
    main()

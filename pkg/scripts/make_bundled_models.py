"""Regenerate the bundled model files and their parameter-count headers.

Channel widths are scaled down from the public architectures so that every
bundled model schedules in well under a second; the layer sequence, kernel
geometry, normalization and activation placement follow the originals.
"""
from photonic_gan.ir import (
    Activation,
    Conv2D,
    Dense,
    ModelGraph,
    NormKind,
    ResidualAdd,
    TensorShape,
    TransposedConv2D,
    bundled_models_dir,
    param_count,
    save_model,
    validate_graph,
)

BN = NormKind("batch")
IN = NormKind("instance")


def dcgan_like():
    layers = [
        TransposedConv2D(32, 64, 4, 1, 0, BN), Activation("relu"),
        TransposedConv2D(64, 32, 4, 2, 1, BN), Activation("relu"),
        TransposedConv2D(32, 16, 4, 2, 1, BN), Activation("relu"),
        TransposedConv2D(16, 3, 4, 2, 1), Activation("tanh"),
    ]
    return ModelGraph("dcgan_like", TensorShape(32, 1, 1), layers), (
        "DCGAN generator shape: latent vector projected by a stride-1 transposed conv to 4x4,\n"
        "then three stride-2 transposed convs (k=4, p=1) up to a 3x32x32 image;\n"
        "batch norm and ReLU after every hidden layer, tanh at the output.\n"
        "Widths scaled to 64/32/16 (original 512/256/128)."
    )


def cgan_like():
    layers = [
        Dense(74, 128), Activation("leaky_relu", 0.2),
        Dense(128, 256), Activation("leaky_relu", 0.2),
        Dense(256, 512), Activation("leaky_relu", 0.2),
        Dense(512, 784), Activation("tanh"),
    ]
    return ModelGraph("cgan_like", TensorShape(74), layers), (
        "Conditional GAN generator (MLP): 64-d noise concatenated with a 10-way one-hot\n"
        "label, three hidden dense layers with LeakyReLU(0.2), 784 tanh outputs (28x28)."
    )


def artgan_like():
    layers = [
        Dense(74, 128), Activation("relu"),
        TransposedConv2D(128, 64, 4, 1, 0, BN), Activation("relu"),
        TransposedConv2D(64, 32, 4, 2, 1, BN), Activation("relu"),
        Conv2D(32, 32, 3, 1, 1, BN), Activation("relu"),
        TransposedConv2D(32, 16, 4, 2, 1, BN), Activation("relu"),
        TransposedConv2D(16, 3, 4, 2, 1), Activation("tanh"),
    ]
    return ModelGraph("artgan_like", TensorShape(74), layers), (
        "ArtGAN generator shape: dense projection of noise plus class label, transposed-conv\n"
        "upsampling interleaved with a same-size conv refinement, batch norm and ReLU,\n"
        "tanh output at 3x32x32. Widths scaled down 8x."
    )


def cyclegan_like():
    layers = [
        Conv2D(3, 8, 7, 1, 3, IN), Activation("relu"),          # 0, 1
        Conv2D(8, 16, 3, 2, 1, IN), Activation("relu"),         # 2, 3
        Conv2D(16, 32, 3, 2, 1, IN), Activation("relu"),        # 4, 5
    ]
    for _ in range(2):
        src = len(layers) - 1
        layers += [
            Conv2D(32, 32, 3, 1, 1, IN), Activation("relu"),
            Conv2D(32, 32, 3, 1, 1, IN), ResidualAdd(src),
        ]
    layers += [
        TransposedConv2D(32, 16, 4, 2, 1, IN), Activation("relu"),
        TransposedConv2D(16, 8, 4, 2, 1, IN), Activation("relu"),
        Conv2D(8, 3, 7, 1, 3), Activation("tanh"),
    ]
    return ModelGraph("cyclegan_like", TensorShape(3, 16, 16), layers), (
        "CycleGAN ResNet generator shape: 7x7 stem, two stride-2 downsampling convs,\n"
        "residual blocks (conv-IN-ReLU-conv-IN plus skip), two stride-2 transposed\n"
        "convs back to full size, 7x7 conv with tanh. Instance norm throughout.\n"
        "Scaled to a 16x16 input, widths 8/16/32 and two residual blocks (original nine)."
    )


def main():
    out = bundled_models_dir()
    out.mkdir(exist_ok=True)
    for make in (dcgan_like, cgan_like, artgan_like, cyclegan_like):
        graph, note = make()
        validate_graph(graph)
        header = (
            f"{graph.name}: {note}\n\n"
            f"parameters: {param_count(graph)} (weights, biases, norm scale and shift)\n"
            f"input {graph.input_shape} -> output {graph.output_shape}\n"
            "Regenerate with scripts/make_bundled_models.py."
        )
        save_model(graph, out / f"{graph.name}.yaml", header)
        print(f"{graph.name}: {param_count(graph)} parameters, output {graph.output_shape}")


if __name__ == "__main__":
    main()

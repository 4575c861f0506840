#!/usr/bin/env python3
"""Export torchvision backbone weights as a plain tensor dict for the C++ loader.

    python3 tools/export_weights.py --arch resnet50 --out weights/resnet50.pt

With --random-init the network is not downloaded: parameters and BN running
statistics are drawn from --seed, and --probe additionally writes an input
batch with the pooled features torchvision computes for it.
"""

import argparse
import sys

import torch
import torchvision.models as tvm

ARCHS = {
    "resnet50": (tvm.resnet50, "ResNet50_Weights"),
    "mobilenet_v2": (tvm.mobilenet_v2, "MobileNet_V2_Weights"),
    "efficientnet_b0": (tvm.efficientnet_b0, "EfficientNet_B0_Weights"),
}


def build(arch, random_init, seed):
    ctor, weights_enum = ARCHS[arch]
    if not random_init:
        return ctor(weights=getattr(tvm, weights_enum).IMAGENET1K_V1)
    torch.manual_seed(seed)
    model = ctor(weights=None)
    with torch.no_grad():
        for m in model.modules():
            if isinstance(m, torch.nn.BatchNorm2d):
                m.running_mean.uniform_(-0.1, 0.1)
                m.running_var.uniform_(0.5, 1.5)
                m.weight.uniform_(0.5, 1.5)
                m.bias.uniform_(-0.1, 0.1)
    return model


def pooled_features(arch, model, x):
    if arch == "resnet50":
        body = torch.nn.Sequential(*list(model.children())[:-1])
        return torch.flatten(body(x), 1)
    return torch.flatten(torch.nn.functional.adaptive_avg_pool2d(model.features(x), 1), 1)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--arch", required=True, choices=sorted(ARCHS))
    ap.add_argument("--out", required=True)
    ap.add_argument("--random-init", action="store_true")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--probe", help="write {input, features} for an equivalence check")
    ap.add_argument("--probe-size", type=int, default=64)
    args = ap.parse_args()

    try:
        model = build(args.arch, args.random_init, args.seed).eval()
    except Exception as exc:  # download failures surface here
        sys.exit(f"cannot obtain {args.arch} weights: {exc}")

    sd = model.state_dict()
    torch.save({k: v.contiguous() for k, v in sd.items()}, args.out)

    if args.probe:
        gen = torch.Generator().manual_seed(args.seed + 1)
        x = torch.randn(2, 3, args.probe_size, args.probe_size, generator=gen)
        with torch.no_grad():
            y = pooled_features(args.arch, model, x)
        torch.save({"input": x, "features": y}, args.probe)


if __name__ == "__main__":
    main()

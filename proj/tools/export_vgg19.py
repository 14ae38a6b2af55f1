#!/usr/bin/env python3
"""Export VGG-19 convolution weights into a histosynth checkpoint container.

The result is passed to `histosynth train --vgg-weights` (extractor kind "vgg19").

    python tools/export_vgg19.py vgg19.hsck                      # torchvision ImageNet weights
    python tools/export_vgg19.py vgg19.hsck --state-dict vgg.pth # any torchvision-layout state dict
"""

import argparse
import struct
import sys
import zlib

import torch

MAGIC = b"HSYNCKPT"
VERSION = 1
F32 = 0


def load_features(state_dict_path):
    if state_dict_path:
        state = torch.load(state_dict_path, map_location="cpu", weights_only=True)
    else:
        from torchvision.models import VGG19_Weights, vgg19

        state = vgg19(weights=VGG19_Weights.IMAGENET1K_V1).state_dict()
    feats = {k: v for k, v in state.items() if k.startswith("features.")}
    if len(feats) != 32:
        sys.exit(f"expected 16 conv layers under 'features.', found {len(feats) // 2}")
    return feats


def block(name, tensor):
    data = tensor.detach().to(torch.float32).contiguous().numpy().tobytes()
    encoded = name.encode("utf-8")
    out = struct.pack("<H", len(encoded)) + encoded
    out += struct.pack("<BB", F32, tensor.dim())
    out += b"".join(struct.pack("<q", d) for d in tensor.shape)
    return out + struct.pack("<Q", len(data)) + data


def main():
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("output")
    parser.add_argument("--state-dict", help="torch.save'd VGG-19 state dict; default downloads torchvision's")
    args = parser.parse_args()

    feats = load_features(args.state_dict)
    # features.<i>.weight -> vgg19/features_<i>.weight, the module names used by the C++ extractor
    body = b""
    for key, value in feats.items():
        _, index, kind = key.split(".")
        body += block(f"vgg19/features_{index}.{kind}", value)
    payload = MAGIC + struct.pack("<II", VERSION, len(feats)) + body
    with open(args.output, "wb") as f:
        f.write(payload + struct.pack("<I", zlib.crc32(payload)))
    print(f"wrote {len(feats) // 2} conv layers to {args.output}")


if __name__ == "__main__":
    main()

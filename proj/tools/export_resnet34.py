#!/usr/bin/env python3
# Copyright 2026 The tumorseg Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Export torchvision ResNet-34 ImageNet weights to a tumorseg tensor archive.

Usage: python3 export_resnet34.py resnet34.tsa

Requires torch and torchvision. Only the encoder tensors (conv1, bn1,
layer1..layer4) are written; the classifier head is dropped.
"""

import argparse
import json
import struct
import sys

MAGIC = b"TSEGARC1"
VERSION = 1
PREFIXES = ("conv1.", "bn1.", "layer1.", "layer2.", "layer3.", "layer4.")


def encoder_tensors(state_dict):
    out = {}
    for name, tensor in state_dict.items():
        if not name.startswith(PREFIXES) or name.endswith("num_batches_tracked"):
            continue
        out[name] = tensor.detach().to("cpu").float().contiguous()
    return out


def write_archive(path, tensors, meta):
    # Tensor order must match the reader's sorted-name layout.
    names = sorted(tensors)
    directory = []
    offset = 0
    for name in names:
        count = tensors[name].numel()
        directory.append({"name": name, "shape": list(tensors[name].shape),
                          "offset": offset, "count": count})
        offset += count
    header = json.dumps({"meta": meta, "tensors": directory}).encode()
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<IQ", VERSION, len(header)))
        f.write(header)
        for name in names:
            f.write(tensors[name].numpy().astype("<f4").tobytes())


def main(argv):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("output", help="destination .tsa file")
    args = parser.parse_args(argv)
    try:
        import torchvision
    except ImportError:
        sys.exit("torchvision is required to export pretrained weights")
    weights = torchvision.models.ResNet34_Weights.IMAGENET1K_V1
    model = torchvision.models.resnet34(weights=weights)
    tensors = encoder_tensors(model.state_dict())
    write_archive(args.output, tensors,
                  {"kind": "resnet34-encoder", "source": str(weights)})
    print(f"wrote {len(tensors)} tensors to {args.output}")


if __name__ == "__main__":
    main(sys.argv[1:])

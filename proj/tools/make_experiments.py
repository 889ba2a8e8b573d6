#!/usr/bin/env python3
"""Writes experiments/<scale>/<dataset>_<partition>_<attack>.yaml.

Each file fixes one scenario with Sentinel as the aggregator; experiments/sweep.sh
varies aggregator and PNR through --set overrides.
"""

import pathlib

DATASETS = {
    "desk": {
        "mnist": """dataset:
  kind: idx
  name: mnist
  images: data/mnist5k/images-idx3-ubyte.gz
  labels: data/mnist5k/labels-idx1-ubyte.gz
model:
  hidden_dims: [256, 128]
""",
        "tabular": """dataset:
  kind: synthetic_tabular
  name: tabular
  classes: 10
  dims: 64
  samples: 5000
  noise: 0.45
model:
  hidden_dims: [256]
""",
    },
    "full": {
        # full MNIST training file, not bundled
        "mnist": """dataset:
  kind: idx
  name: mnist
  images: data/mnist/train-images-idx3-ubyte.gz
  labels: data/mnist/train-labels-idx1-ubyte.gz
model:
  hidden_dims: [256, 128]
""",
        "tabular": """dataset:
  kind: synthetic_tabular
  name: tabular
  classes: 100
  dims: 600
  samples: 86840
  noise: 0.45
model:
  hidden_dims: [256]
""",
    },
}

ATTACKS = {
    "none": "  kind: none\n",
    "model_poison": "  kind: model_poison\n  pnr: 0.5\n  nr: 0.8\n  amplitude: 1.0\n",
    "label_flip_untargeted": "  kind: label_flip_untargeted\n  pnr: 0.5\n",
    "label_flip_targeted": "  kind: label_flip_targeted\n  pnr: 0.5\n  source: 7\n  target: 1\n",
    "backdoor": {
        "mnist": "  kind: backdoor\n  pnr: 0.5\n  target: 0\n  poison_fraction: 0.2\n"
                 "  trigger: {kind: image_x, size: 5, corner: top_left}\n",
        "tabular": "  kind: backdoor\n  pnr: 0.5\n  target: 1\n  poison_fraction: 0.2\n"
                   "  trigger: {kind: tabular_ones, k: 7}\n",
    },
}


def main():
    root = pathlib.Path(__file__).resolve().parent.parent / "experiments"
    for scale, datasets in DATASETS.items():
        for dataset, dataset_block in datasets.items():
            for partition in ["iid", "dirichlet"]:
                for attack, attack_block in ATTACKS.items():
                    if attack == "label_flip_targeted" and dataset == "tabular":
                        continue  # no meaningful source/target pair for the tabular task
                    if isinstance(attack_block, dict):
                        attack_block = attack_block[dataset]
                    name = f"{dataset}_{partition}_{attack}"
                    text = f"name: {name}\nseed: 42\nrepeats: 1\noutput_dir: out/{scale}/{name}\n"
                    text += dataset_block
                    text += f"partition:\n  mode: {partition}\n"
                    if partition == "dirichlet":
                        text += "  alpha: 0.5\n"
                    text += "federation:\n  nodes: 10\n  topology: full\n  rounds: 10\n"
                    text += "aggregator:\n  kind: sentinel\n  tau_s: 0.5\n  tau_l: 0.1\n  l_min: 0.001\n"
                    text += "train:\n  epochs_per_round: 3\n  batch_size: 64\n  lr: 0.001\n"
                    text += "attack:\n" + attack_block
                    path = root / scale / f"{name}.yaml"
                    path.parent.mkdir(parents=True, exist_ok=True)
                    path.write_text(text)


if __name__ == "__main__":
    main()

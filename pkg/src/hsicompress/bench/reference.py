"""Published reference values used for side-by-side reports.

Accuracy tuples are ordered (IP disjoint top-1, top-5, IP random top-1, top-5,
UP disjoint top-1, top-5, UP random top-1, top-5), in percent.
"""

ACC_COLUMNS = ("ip_disjoint_top1", "ip_disjoint_top5", "ip_random_top1", "ip_random_top5",
               "up_disjoint_top1", "up_disjoint_top5", "up_random_top1", "up_random_top5")

# baselines: trainable params (None where not a network) and top-1 for
# IP disjoint, IP random, UP disjoint, UP random
BASELINES = {
    "rf": (None, 66.1, 79.4, 68.5, 88.8),
    "mlr": (None, 78.5, 83.5, 74.6, 90.5),
    "svm": (None, 69.9, 81.0, 79.8, 95.8),
    "mlp": (31047, 82.4, 88.9, 82.5, 92.5),
    "lstm": (102416, 80.7, 88.4, 78.1, 96.1),
    "cnn1d": (72416, 82.5, 89.4, 82.3, 93.5),
    "cnn2d_c1": (378116, 55.4, 99.0, 70.5, 99.3),
    "cnn2d": (426866, 86.3, 99.4, 83.2, 99.3),
    "cnn3d": (1800000, 60.9, 99.3, 58.6, 99.1),
}

# per-layer parameters, total and memory (MB) of the CNN2D family; the
# published fc2 entry for the full network is 909 although 100*16+16 = 1,616
LAYER_TABLE = {
    "cnn2d": {"conv1": 50050, "conv2": 125100, "fc1": 250100, "fc2": 909, "total": 426866,
              "memory_mb": 1.71},
    90: {"conv1": 15015, "conv2": 11280, "fc1": 22530, "fc2": 496, "total": 49321,
         "memory_mb": 0.60},
    95: {"conv1": 10010, "conv2": 5020, "fc1": 10020, "fc2": 336, "total": 25386,
         "memory_mb": 0.31},
    98: {"conv1": 5005, "conv2": 1260, "fc1": 2510, "fc2": 176, "total": 8951,
         "memory_mb": 0.12},
    "mlp": {"total": 31047, "memory_mb": 0.13},
    "cnn1d": {"total": 72416, "memory_mb": 0.29},
}

# kept conv1 / conv2 filters, fc1 input size and fc1 neurons
FILTER_TABLE = {
    "cnn2d": (50, 100, 2500, 100),
    90: (15, 30, 750, 30),
    95: (10, 20, 500, 20),
    98: (5, 10, 250, 10),
}

ACCURACY = {
    5: {
        'mlp': (82.4, 98.6, 88.9, 99.7, 82.5, 99.5, 92.5, 99.9),
        'cnn1d': (82.5, 97.9, 89.4, 99.5, 82.3, 99.7, 93.5, 99.9),
        'baseline': (86.3, 98.7, 99.5, 99.9, 83.2, 99.9, 99.3, 100.0),
        'scratch': (82.8, 97.6, 99.2, 99.9, 77.7, 99.7, 99.6, 99.9),
        'prune.l1': (84.6, 98.1, 99.3, 99.9, 82.0, 99.6, 99.4, 100.0),
        'prune.thinet': (82.5, 97.9, 98.2, 99.9, 80.4, 99.5, 99.3, 99.9),
        'prune.slimming': (87.0, 98.2, 99.2, 99.9, 80.6, 99.9, 99.3, 99.9),
        'prune.sfp': (84.5, 98.1, 99.5, 99.9, 77.6, 96.2, 99.3, 99.9),
    },
    6: {
        'mlp': (82.4, 98.6, 88.9, 99.7, 82.5, 99.5, 92.5, 99.9),
        'cnn1d': (82.5, 97.9, 89.4, 99.5, 82.3, 99.7, 93.5, 99.9),
        'baseline': (86.3, 98.7, 99.4, 99.9, 83.2, 99.9, 99.3, 100.0),
        'scratch': (82.1, 97.1, 99.3, 100.0, 74.1, 99.6, 99.0, 100.0),
        'prune.l1': (86.1, 98.4, 99.4, 99.9, 83.0, 99.3, 99.3, 100.0),
        'prune.thinet': (83.2, 98.1, 97.8, 99.9, 81.4, 99.3, 99.3, 99.9),
        'prune.slimming': (79.8, 95.6, 99.2, 99.9, 84.2, 99.9, 98.9, 99.9),
        'prune.sfp': (85.0, 97.3, 99.7, 99.9, 76.5, 98.5, 99.1, 99.9),
    },
    7: {
        'mlp': (82.4, 98.6, 88.9, 99.7, 82.5, 99.5, 92.5, 99.9),
        'cnn1d': (82.5, 97.9, 89.4, 99.5, 82.3, 99.7, 93.5, 99.9),
        'baseline': (86.3, 98.7, 99.4, 99.9, 83.2, 99.9, 99.3, 100.0),
        'scratch': (78.2, 96.4, 98.9, 100.0, 77.2, 99.9, 98.1, 100.0),
        'prune.l1': (79.6, 97.4, 99.2, 99.9, 80.1, 99.7, 98.3, 99.9),
        'prune.thinet': (71.1, 95.0, 96.4, 99.7, 81.7, 99.7, 99.1, 99.9),
        'prune.slimming': (81.3, 95.6, 99.1, 99.9, 75.7, 99.8, 98.6, 99.9),
        'prune.sfp': (86.3, 97.7, 98.8, 99.9, 74.1, 96.5, 98.9, 99.9),
    },
    10: {
        'mlp': (82.4, 98.6, 88.9, 99.7, 82.5, 99.5, 92.5, 99.9),
        'cnn1d': (82.5, 97.9, 89.4, 99.5, 82.3, 99.7, 93.5, 99.9),
        'baseline': (86.3, 98.7, 99.5, 99.9, 83.2, 99.9, 99.3, 100.0),
        'scratch': (82.8, 97.6, 99.2, 99.9, 77.7, 99.7, 99.6, 99.9),
        'kd.soft': (83.0, 97.8, 99.4, 99.9, 80.1, 99.9, 99.1, 100.0),
        'kd.fitnets': (86.3, 98.8, 99.4, 100.0, 81.4, 99.9, 99.2, 100.0),
        'kd.at': (87.1, 99.2, 99.3, 100.0, 81.5, 99.9, 99.4, 100.0),
        'kd.cc': (85.9, 98.8, 99.5, 100.0, 79.8, 99.9, 99.4, 100.0),
        'kd.simkd': (86.1, 99.0, 99.5, 100.0, 80.9, 99.9, 99.3, 99.9),
        'kd.camkd': (86.4, 97.8, 99.5, 100.0, 80.0, 99.9, 99.3, 99.9),
        'kd.dml': (87.0, 97.5, 99.3, 100.0, 83.1, 99.9, 99.2, 100.0),
        'kd.one': (87.4, 97.8, 99.2, 100.0, 81.6, 99.9, 99.5, 100.0),
        'kd.clilr': (84.2, 97.2, 99.4, 100.0, 81.1, 96.7, 99.6, 100.0),
        'kd.okddip': (86.4, 97.9, 99.5, 100.0, 82.6, 99.9, 99.6, 100.0),
        'kd.tfkd': (81.8, 96.3, 98.0, 99.2, 82.7, 99.9, 99.3, 100.0),
        'kd.cskd': (83.4, 98.5, 98.8, 99.8, 81.4, 99.7, 99.1, 100.0),
        'kd.pskd': (86.5, 97.5, 99.4, 100.0, 80.0, 100.0, 99.4, 100.0),
        'kd.ddgsd': (87.6, 97.8, 99.3, 100.0, 86.1, 99.9, 99.4, 100.0),
    },
    11: {
        'mlp': (82.4, 98.6, 88.9, 99.7, 82.5, 99.5, 92.5, 99.9),
        'cnn1d': (82.5, 97.9, 89.4, 99.5, 82.3, 99.7, 93.5, 99.9),
        'baseline': (86.3, 98.7, 99.5, 99.9, 83.2, 99.9, 99.3, 100.0),
        'scratch': (82.1, 97.1, 99.3, 100.0, 74.1, 99.6, 99.0, 100.0),
        'kd.soft': (83.9, 97.6, 99.5, 99.9, 80.3, 99.8, 99.3, 100.0),
        'kd.fitnets': (87.3, 98.4, 99.3, 99.9, 80.8, 99.9, 99.3, 100.0),
        'kd.at': (85.7, 98.3, 99.4, 100.0, 82.3, 99.9, 99.3, 100.0),
        'kd.cc': (82.5, 98.5, 99.4, 100.0, 78.5, 99.9, 99.2, 100.0),
        'kd.simkd': (86.9, 98.4, 99.4, 100.0, 81.0, 99.9, 99.0, 99.9),
        'kd.camkd': (86.4, 97.9, 99.4, 100.0, 78.4, 99.9, 99.3, 99.9),
        'kd.dml': (83.5, 97.0, 99.4, 100.0, 81.3, 100.0, 99.4, 100.0),
        'kd.one': (83.7, 97.9, 99.5, 100.0, 78.7, 99.5, 99.6, 100.0),
        'kd.clilr': (83.2, 97.7, 99.0, 100.0, 81.5, 99.0, 99.3, 100.0),
        'kd.okddip': (89.2, 98.0, 99.4, 100.0, 85.5, 99.9, 99.5, 100.0),
        'kd.tfkd': (85.4, 97.6, 97.4, 99.2, 77.6, 99.4, 99.3, 100.0),
        'kd.cskd': (77.2, 95.8, 98.5, 99.7, 79.9, 99.6, 98.3, 100.0),
        'kd.pskd': (82.0, 98.2, 99.3, 100.0, 88.0, 99.7, 99.3, 100.0),
        'kd.ddgsd': (84.1, 97.9, 99.0, 100.0, 81.5, 100.0, 99.2, 100.0),
    },
    12: {
        'mlp': (82.4, 98.6, 88.9, 99.7, 82.5, 99.5, 92.5, 99.9),
        'cnn1d': (82.5, 97.9, 89.4, 99.5, 82.3, 99.7, 93.5, 99.9),
        'baseline': (86.3, 98.7, 99.5, 99.9, 83.2, 99.9, 99.3, 100.0),
        'scratch': (78.2, 96.4, 98.9, 100.0, 77.2, 99.9, 98.1, 100.0),
        'kd.soft': (82.1, 97.1, 99.3, 99.9, 77.3, 99.9, 98.4, 99.9),
        'kd.fitnets': (84.2, 98.8, 99.3, 100.0, 79.3, 99.8, 97.3, 99.9),
        'kd.at': (84.9, 98.6, 99.3, 100.0, 75.4, 99.8, 98.1, 100.0),
        'kd.cc': (77.1, 95.0, 98.9, 100.0, 84.8, 99.7, 98.3, 100.0),
        'kd.simkd': (82.8, 97.2, 98.6, 99.9, 81.1, 99.9, 97.2, 99.9),
        'kd.camkd': (85.4, 97.8, 99.1, 100.0, 77.4, 99.9, 98.1, 99.9),
        'kd.dml': (73.7, 95.2, 98.9, 100.0, 77.1, 99.9, 97.9, 100.0),
        'kd.one': (76.5, 96.7, 99.4, 100.0, 76.1, 99.1, 98.7, 100.0),
        'kd.clilr': (80.3, 96.8, 99.1, 100.0, 79.8, 99.6, 98.9, 100.0),
        'kd.okddip': (85.1, 97.3, 99.4, 100.0, 76.8, 100.0, 99.2, 100.0),
        'kd.tfkd': (77.5, 93.8, 95.4, 98.7, 78.1, 98.1, 99.1, 100.0),
        'kd.cskd': (76.5, 94.1, 95.9, 98.0, 81.4, 98.1, 96.0, 99.7),
        'kd.pskd': (82.6, 98.2, 98.9, 100.0, 75.5, 99.7, 98.6, 100.0),
        'kd.ddgsd': (76.9, 96.6, 98.2, 100.0, 83.4, 99.8, 97.2, 100.0),
    }
}

# fine-tuning strategies: (ratio, strategy) -> accuracy tuple
STRATEGY = {
    (90, "I"): (84.6, 98.1, 99.3, 99.9, 82.0, 99.6, 99.4, 100.0),
    (90, "II"): (86.1, 97.5, 99.6, 99.9, 81.7, 99.7, 99.5, 100.0),
    (90, "III"): (81.5, 97.9, 99.2, 99.9, 81.3, 98.9, 98.7, 99.9),
    (95, "I"): (86.1, 98.4, 99.4, 99.9, 83.0, 99.3, 99.3, 100.0),
    (95, "II"): (87.3, 97.7, 99.4, 99.9, 82.1, 99.0, 99.4, 100.0),
    (95, "III"): (84.9, 97.3, 99.5, 99.9, 83.9, 99.8, 99.6, 100.0),
    (98, "I"): (79.6, 97.4, 99.2, 99.9, 80.1, 99.7, 98.3, 99.9),
    (98, "II"): (84.6, 96.3, 99.2, 99.9, 80.8, 96.6, 99.1, 100.0),
    (98, "III"): (81.5, 97.9, 99.2, 99.9, 81.3, 98.9, 98.7, 99.9),
}

# quantization: memory MB, latency ms/sample, top-1 IP disjoint, IP random,
# UP disjoint, UP random
QUANTIZATION = {
    "mlp": (0.13, 0.34, 82.4, 88.9, 82.5, 92.5),
    "cnn1d": (0.29, 0.62, 82.5, 89.4, 82.3, 93.5),
    "baseline": (1.71, 3.28, 86.3, 99.4, 83.2, 99.3),
    "quant.dynamic": (0.96, 2.58, 86.5, 99.4, 83.2, 99.6),
    "quant.static": (0.44, 0.70, 86.7, 99.4, 83.3, 99.6),
    "quant.qat": (0.44, 1.00, 87.5, 99.5, 84.1, 99.6),
}

TABLE_TITLES = {
    2: "Baseline top-1 accuracy",
    3: "Parameters per layer and memory",
    4: "Remaining filters and neurons after pruning",
    5: "Pruning methods, 90% reduction",
    6: "Pruning methods, 95% reduction",
    7: "Pruning methods, 98% reduction",
    8: "Fine-tuning strategies",
    9: "Quantization modes",
    10: "Knowledge distillation, 90% student",
    11: "Knowledge distillation, 95% student",
    12: "Knowledge distillation, 98% student",
}

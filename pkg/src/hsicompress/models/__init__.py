from .graph import ModelGraph
from .layers import BatchNorm, Conv1d, Conv2d, Flatten, Layer, Linear, MaxPool, ReLU, Unsqueeze
from .zoo import (ArchSpec, ParamCount, build_model, bytes_map, closed_form_params, cnn1d_spec,
                  cnn2d_spec, count_params, default_spec, estimate_memory, mlp_spec)
from .checkpoint import (CheckpointError, load_checkpoint, read_container, save_checkpoint,
                         write_container)
from .train import (ArraySet, EvalResult, History, TrainConfig, TrainingDivergedError, evaluate,
                    minibatches, predict_logits, topk_metrics, train)

from .convert import (MODES, QATModel, QStep, QuantizedModel, calibrate, calibration_batches,
                      dynamic_quantize, load_quantized, observation_points, qat_train,
                      quantize_model, save_quantized, static_quantize)
from .fold import fold_batchnorm
from .kernels import int_conv2d, int_linear, int_matmul, int_matmul_oracle
from .qparams import (Observer, QParams, compute_qparams, dequantize, fake_quant,
                      fake_quant_array, quantize, round_half_away, weight_qparams)

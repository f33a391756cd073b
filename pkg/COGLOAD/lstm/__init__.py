from .network import (LstmLayerParams, ModelParams, N_CLASSES, init_params, zero_params, cell_forward,
                      dropout_masks, forward, backward, loss, load_score)
from .optimizers import AdamState, adam_step
from .LSTMClassifier import LABELS, TrainConfig, train, LSTMClassifier
from .model_io import MAGIC, DEFAULT_DIMS, Thresholds, ModelBundle, save_model, load_model

from .policies import ruec_policy, run_ruec
from .predictors import MODEL_KINDS, LSTMConfig, LSTMModel, VanillaModel, build_model

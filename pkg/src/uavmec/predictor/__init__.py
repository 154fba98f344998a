from .model import (HMTParams, PredictorConfig, StageState, embed_with_positions, encoder_layer,
                    flat_size, hierarchical_forward, init_hmt, multi_head_attention,
                    partition_slices, positional_encoding, rmse, rmse_np, stage_ledger,
                    vanilla_config)
from .train import (HMTModel, Prediction, Standardizer, TrainResult, TrajectoryModel,
                    evaluate_rmse, predict_horizon, predict_users, train_predictor)

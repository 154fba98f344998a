from .peto import (EpisodeMetrics, EvalSummary, PetoAgent, TrainLog, agent_policy, augment_state,
                   evaluate_policy, run_episode, train_peto)
from .policy import BetaActor, Critic, beta_log_prob, beta_log_prob_np
from .ppo import AgentConfig, RolloutBuffer, UpdateStats, clipped_objective, compute_gae, ppo_update

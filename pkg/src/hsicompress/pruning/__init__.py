from .methods import sfp_train, sfp_zero, slimming_loss, train_slimming
from .pipeline import (METHODS, STRATEGIES, PruneConfig, PruneReport, pass_widths,
                       prune_and_finetune, rank)
from .ranking import (PRUNABLE, FilterRanking, contributions_conv, contributions_fc, gram_of,
                      l1_scores, l2_scores, rank_l1, rank_l2, rank_slimming, rank_thinet,
                      removal_error, thinet_exhaustive, thinet_greedy, thinet_grams)
from .surgery import TARGETS, PruneTarget, apply_prune, current_widths, resolve_target

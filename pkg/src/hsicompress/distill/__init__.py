from .branches import BranchOutput, MultiBranchModel
from .config import METHODS, OFFLINE, ONLINE, SELF, DistillConfig
from .losses import (LossParts, attention_map, attention_transfer_loss, camkd_loss, camkd_weights,
                     clilr_loss, consensus, correlation_congruence_loss, cskd_loss, ddgsd_loss,
                     dml_losses, feature_l2, gate_weights, global_avg_pool, hint_loss, kd_term,
                     kl_probs, kl_target_logits, okddip_attention, okddip_loss, one_loss,
                     pskd_alpha, pskd_loss, pskd_target, rbf_kernel, safe_log, soft_target_loss,
                     tfkd_loss, tfkd_soft_teacher, tfkd_virtual_teacher)
from .trainers import (DistillResult, distill, fit, fitnets_stage1, make_regressor,
                       partner_indices, random_flips, save_student, simkd_model, student_spec)

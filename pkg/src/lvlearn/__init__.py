"""Learning latent linear models from second- and third-order moments."""
from .bayesnet import (extract_lambda, fully_observed_bn, latent_third_moment,
                       learn_bn_pipeline, learn_dag_second_order, triangularize)
from .decomp import (Partition3, diag_lowrank_decompose, find_partition, incoherence_number,
                     off_diagonal_ratio, partition_success_bound)
from .eca import eca_extract_power, eca_extract_svd, whiten
from .errors import *  # noqa: F401,F403
from .hier import learn_hierarchy, top_level_moment
from .l1solver import oracle_l1_vertex, solve_l1
from .metrics import align_columns, dist, support_precision_recall
from .model import (DagMatrix, HierarchicalModel, LatentLinearModel, NoiseSpec, canonicalize,
                    hidden_covariance)
from .moments import (MomentSet, empirical_pairs, matrix_sqrt_factor, population_pairs,
                      population_triples, triples_project)
from .recovery import RecoveryResult, alg1, alg1_proj, sparsity_count

__version__ = "0.1.0"

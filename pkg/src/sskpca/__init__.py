"""Semi-supervised kernel PCA.

Kernel PCA written as variance maximization over the RKHS unit ball, with
semi-supervised variants that trade variance against a labeled loss: a
within-group penalty (MV-KPCA), a squared loss at fixed variance (LS-KPCA)
and a sigmoid loss fit by reweighting (LR-KPCA).
"""
from .cqp import CqpError, CqpProblem, CqpSolution, solve_eig_oracle, solve_explicit, solve_secular
from .data import (DataError, Dataset, GroupSet, SplitPlan, groups_from_labels, hide, load_csv,
                   make_folds, relabel, save_csv, two_gaussians, two_moons)
from .evaluation import (RISK_CONSTANT, Evaluator, ParamGrid, RiskBoundInput, cross_validate,
                         load_grid, loo_select, nearest_neighbor_predict, risk_bound,
                         risk_bound_general, svm_head, threshold_head, transductive_error)
from .kernels import (Graph, KernelError, KernelSpec, build_graph, diffusion_kernel,
                      gaussian_kernel, laplacian_pinv, mixed_kernel)
from .kpca import KernelFeatures, SolutionFunction, kpca_fit, mvkpca_fit
from .lrkpca import LrConfig, lrkpca_fit
from .lskpca import LsConfig, LsPath, lskpca_fit, s2_from_ratio, sgt_fit

__version__ = "0.1.0"

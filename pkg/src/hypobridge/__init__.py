"""Exact bridges and small-time fluctuation limits of linear hypoelliptic diffusions.

The model is ``dx = eps A x dt + sqrt(eps) B dW`` with (A, B) satisfying the
Kalman rank condition.
"""

from .bridge import (BridgeLaw, ProcessLaw, bridge_cov, bridge_law, process_cov,
                     process_law, sample_bridge, sample_unconditioned)
from .errors import (Asymmetric, BadGrid, BadTimeOrder, HypobridgeError, IllConditioned,
                     ModelError, ModelFileError, NonFinite, NonSquare, NotControllable,
                     NotPSD, NumericError, ShapeMismatch, SingularGramian, UnknownPreset,
                     UnsupportedDimension)
from .fluct import (ConvergenceReport, FluctuationLaw, ScalingPair, alpha_expansion,
                    convergence_report, fluctuation_law, hankel_v_inverse, limit_cov,
                    limit_mean_map, rescaled_cov, sample_limit, scaling_for, u_hat,
                    v_from_integral, v_inverse, v_matrix)
from .gramian import GramianSet, alpha, gramian, hamiltonian_verify, phi_path
from .matcore import chol_psd, expm, numerical_rank
from .model import (Filtration, ModelSpec, UBlocks, adjoint_power, build_model, filtration,
                    principal_part, u_blocks)
from .presets import Preset, preset

__version__ = "0.1.0"

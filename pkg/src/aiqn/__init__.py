"""Quantile-regression generative modeling toolkit.

Implicit quantile networks with an autoregressive extension, trained by
pinball/Huber quantile regression, plus a divergence bench (quantile
divergence, empirical Wasserstein, Frechet distance) for evaluating them.
"""

from .distributions import AnalyticDist, Exponential, Gaussian, Mixture, Uniform
from .divergences import (MomentSummary, QuantileFn, expected_pinball,
                          frechet_distance, moment_summary,
                          quantile_divergence, wasserstein1_empirical)
from .errors import (AiqnError, ConfigError, DomainError, FormatError,
                     IntegrationError, TrainingError)
from .losses import LossConfig, batch_quantile_loss, huber_qr_loss, qr_loss, qr_loss_grad
from .network import (AiqnModel, TauMode, aiqn_backward, aiqn_forward,
                      build_masks, create_model, dquantile_dtau)
from .quadrature import integrate
from .linalg import sym_eig
from .rng import Rng

__version__ = "0.1.0"

"""Step-reinforced random walks and noise reinforced Brownian motion."""

from . import distributions, nrbm, stats, walk, yule
from .distributions import StepLaw, gaussian, rademacher, truncate, uniform
from .errors import DegenerateLawError, DomainError, HorizonError, NumericalError, UsageError
from .nrbm import ProcessPath, covariance, sample_cholesky, sample_euler, sample_exact
from .stats import StatReport
from .walk import WalkParams, WalkPath, elephant_walk, simulate_walk
from .yule import MartingalePath, embed_martingale, simulate_yule

__version__ = "0.1.0"

"""Continuous-space belief-reward POMDP planning with incremental rewards."""
from .belief import WeightedParticleBelief
from .entropy import boers_batch, boers_update, shannon_batch, info_gain
from .envs import ActiveLocalization, LightDark2D, load_problem
from .model import ContractError, ProblemModel
from .planner import PlannerConfig, RhoPOMCPOW, POMCPOW, PFTDPW, plan, tuned_config
from .select import AugerParams, DpwParams
from .tree import BeliefTree

__version__ = "0.1.0"

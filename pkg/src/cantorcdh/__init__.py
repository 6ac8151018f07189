"""Finite, certified simulation of the construction of a countable dense
homogeneous subspace of the Cantor set whose square is not countable dense
homogeneous."""

from .bitspace import PointSpec, interleave, deinterleave
from .denseset import parse_tag, tail_coded_family, canonical_QR
from .tower import Tower, ProductMap, compose, invert, check_coherent
from .poset import Condition, run_generic, extend_level
from .baire import NowhereDenseOracle, avoid
from .construction import StageState, KillCertificate, init_stage, cdh_step, kill_step, verify_invariants

__version__ = "0.1.0"

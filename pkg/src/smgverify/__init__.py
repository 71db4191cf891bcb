"""Shape analysis for list-manipulating pointer programs.

The package implements symbolic memory graphs (regions plus doubly- and
singly-linked list segments), field reinterpretation for nullified memory,
a join operator with entailment checking, list abstraction, inequality
proving, a small pointer IR with its abstract interpreter, and a portfolio
driver combining a sound verifier with bounded bug hunters.
"""

from .abstraction import (
    CandidateEntry,
    MergePlan,
    abstract_spc,
    find_candidates,
    longest_mergeable_sequence,
    merge_pair,
    merge_sequence,
)
from .concrete import canonical_mg, concretise_bounded, concretise_spc
from .decide import assume, compare_offsets, look_through, prove_neq
from .driver import Verdict, compose_verdicts, run_hunting_party
from .engine import AnalysisConfig, AnalysisResult, ErrorReport, analyze, exec_instr
from .join import (
    FAILED,
    RETRY,
    JoinStatus,
    entails,
    isomorphic,
    join_spcs,
    update_join_status,
)
from .mil import CFG, Instr, Program, build_cfg, parse_program, print_program
from .reinterp import join_fields, read_value, write_value
from .smg import (
    SMG,
    SPC,
    FieldKind,
    FieldType,
    ObjKind,
    ObjLabel,
    Tg,
    check_consistency,
    collect_garbage,
    empty_spc,
    materialise,
    remove_zero_segment,
)

__version__ = "0.1.0"

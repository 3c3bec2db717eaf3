"""Codebook design toolkit and link-level simulator for nonlinear SCMA.

The package builds overlapped constellations from windowed lattices, searches
for good nonlinear bit-to-codeword mappings on a sparse factor graph, computes
the distance figures of merit used to rank codebooks, and measures uncoded BER
with exact-MAP and message-passing detectors.
"""

from .channel import (
    ChannelModel,
    apply,
    draw_channel,
    ebn0_to_n0,
    esn0_to_n0,
)
from .codebook import (
    LAYER_PRESETS,
    FactorGraph,
    LinearCodebook,
    NonlinearCodebook,
    TableEncoder,
    build_factor_graph,
    build_linear,
    codebook_hash,
    default_graph,
    encode_linear,
    encode_nl,
    encode_symbols,
    linear_as_nonlinear,
    load_codebook,
    save_codebook,
    superimposed_table,
)
from .design import (
    DesignConfig,
    DesignResult,
    algorithm1,
    algorithm2,
    group_by_quadrant,
)
from .detector import (
    Beliefs,
    bit_llrs,
    map_exact,
    map_symbols,
    mpa_beliefs,
    mpa_detect,
    mpa_symbols,
)
from .lattice import (
    LatticeCode,
    Window,
    generate_lattice,
    make_overlapped_constellation,
    med,
    normalize,
    partition,
    shape_gain,
)
from .metrics import (
    KpiReport,
    closed_form_suep_mpd,
    kpi_report,
    layer_meds,
    med_per_rn,
    med_superimposed,
    mpd_general,
    mpd_superimposed,
    muep_lower_bound,
    suep_muep_decomposition,
)
from .simulator import (
    BerResult,
    SimConfig,
    SnrPoint,
    clopper_pearson,
    compare,
    result_to_csv,
    result_to_dict,
    run_ber,
)

__version__ = "0.1.0"

CODEBOOK_SCHEMA_VERSION = 1
RESULTS_SCHEMA_VERSION = 1

__all__ = [
    "CODEBOOK_SCHEMA_VERSION",
    "RESULTS_SCHEMA_VERSION",
    "__version__",
    "ChannelModel",
    "apply",
    "draw_channel",
    "ebn0_to_n0",
    "esn0_to_n0",
    "LAYER_PRESETS",
    "FactorGraph",
    "LinearCodebook",
    "NonlinearCodebook",
    "TableEncoder",
    "build_factor_graph",
    "build_linear",
    "codebook_hash",
    "default_graph",
    "encode_linear",
    "encode_nl",
    "encode_symbols",
    "linear_as_nonlinear",
    "load_codebook",
    "save_codebook",
    "superimposed_table",
    "DesignConfig",
    "DesignResult",
    "algorithm1",
    "algorithm2",
    "group_by_quadrant",
    "Beliefs",
    "bit_llrs",
    "map_exact",
    "map_symbols",
    "mpa_beliefs",
    "mpa_detect",
    "mpa_symbols",
    "LatticeCode",
    "Window",
    "generate_lattice",
    "make_overlapped_constellation",
    "med",
    "normalize",
    "partition",
    "shape_gain",
    "KpiReport",
    "closed_form_suep_mpd",
    "kpi_report",
    "layer_meds",
    "med_per_rn",
    "med_superimposed",
    "mpd_general",
    "mpd_superimposed",
    "muep_lower_bound",
    "suep_muep_decomposition",
    "BerResult",
    "SimConfig",
    "SnrPoint",
    "clopper_pearson",
    "compare",
    "result_to_csv",
    "result_to_dict",
    "run_ber",
]

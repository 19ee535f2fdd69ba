"""Near-critical reflection of internal gravity waves at a sloping wall:
boundary-layer spectra, wave-packet synthesis, and asymptotic-order
verification."""

from .errors import (
    AccuracyError,
    ClassificationError,
    ConfigError,
    CritLayerError,
    DomainError,
    NearSingularError,
    NumericalError,
    RegimeError,
    SingularModeError,
)
from .regime import (
    Case,
    CriticalSetup,
    RegimeParams,
    critical_wavenumber,
    dispersion,
    group_velocity,
    viscosity_diffusivity,
)
from .spectrum import (
    CharPoly,
    ClassifiedRoot,
    RootFamily,
    build_charpoly,
    case5_lambda2_refined,
    charpoly_coeffs,
    classify_roots,
    find_roots,
    predicted_roots,
)
from .modes import (
    BoundaryLayerMode,
    ModeTable,
    det_closed,
    det_orders,
    eigenvector,
    incident_trace,
    mode_table,
    pressure,
    solve_amplitudes,
    symbol_matrix,
)
from .packets import (
    FieldSample,
    Grid,
    PacketSpectral,
    WavePacketSpec,
    app_packets,
    boundary_layer_packets,
    envelope,
    incident_packet,
    residual_packet,
    synth,
    synth_boundary_layer,
    synth_incident,
)
from .diagnostics import (
    ExponentFit,
    ReportRow,
    ResidualReport,
    boundary_residual,
    case_report,
    fit_exponent,
    l2_norm,
    linf_norm,
    matrix_report,
    norms,
    pde_residual,
    predictions,
    stability_bound,
)

__version__ = "0.1.0"

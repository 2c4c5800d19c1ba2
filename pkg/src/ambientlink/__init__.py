"""Passive communication through ambient noise: forward models, synthesis, decoding."""

from .media import (
    Background,
    Bubble,
    Drude,
    Tunable,
    Inclusion,
    Metasurface,
    green0,
    green0_im_coincident,
    grad_green0,
    rho_of,
    minnaert_frequency,
    green_full,
)
from .scene import ReceiverPair, Scene, SourceShell, make_shell
from .kernel import (
    LinkBudget,
    NoiseSpectrum,
    RegimeError,
    RegimeWarning,
    WindowSpec,
    fresnel_bound_check,
    hk_residual_generalized,
    hk_residual_standard,
    mean_closed_form,
    mean_general,
    measurement_noise_var,
    nyquist_node_count,
    q_expansion,
    q_quadrature,
    rho_B,
    snr_budget,
    var_closed_form,
    var_general,
)
from .synth import (
    FieldRecord,
    RealizationSeed,
    add_measurement_noise,
    default_dt,
    load_fld,
    save_fld,
    synth_realization,
)
from .ecsd import EcsdSeries, ecsd_at, ecsd_psd_diff, ecsd_series, load_ecsd_csv
from .link import (
    BerStats,
    DecodeResult,
    SlotSchedule,
    UnreliableSignatureError,
    decode,
    encode,
    run_ber,
    wilson_interval,
)
from .config import (
    ConfigError,
    ScenarioConfig,
    build_bits,
    build_scene,
    build_spectrum,
    build_windows,
    config_from_mapping,
    config_hash,
    echo_config,
    parse_config,
)

__version__ = "0.1.0"

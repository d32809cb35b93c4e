//! Phase functions, deviation measures and point group detection.

mod group;
mod measures;
mod phase;
mod report;

pub use group::{
    detect_holohedry, detect_holohedry_in, detect_point_group, module_holohedry, CandidateOutcome, GroupSearch, Holohedry, PointGroup,
    PointGroupVerdict, Thresholds,
};
pub use measures::{amplitude_deviation, mod1_distance, overall_deviation};
pub use phase::{
    compose_fundamentals, compose_phase_functions, extrapolate, fundamental_phases, gauge_linearity_deviation,
    phase_function, PhaseFunctionSamples, PhaseSample,
};
pub use report::{
    fmt17, histogram, phasors, render_polar, test_generator, write_deviation_csv, write_histogram_csv, DeviationReport,
    DeviationStats, ElementDeviation, ElementSpectrum, GeneratorTest, Histogram,
};
